use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::market::{CollegeIx, Contract, Market, StudentIx, Terms};

/// A set of contracts, kept in canonical (student, college, terms) order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation {
    contracts: BTreeSet<Contract>,
}

impl Allocation {
    pub fn new() -> Self {
        Allocation::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contract> + '_ {
        self.contracts.iter()
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    pub fn contains(&self, k: &Contract) -> bool {
        self.contracts.contains(k)
    }

    pub fn insert(&mut self, k: Contract) -> bool {
        self.contracts.insert(k)
    }

    pub fn remove(&mut self, k: &Contract) -> bool {
        self.contracts.remove(k)
    }

    /// No student appears in more than one contract.
    pub fn is_feasible(&self) -> bool {
        let mut prev: Option<StudentIx> = None;
        for k in &self.contracts {
            if prev == Some(k.student) {
                return false;
            }
            prev = Some(k.student);
        }
        true
    }

    /// Students appearing in some contract twice or more.
    pub fn duplicated_students(&self) -> Vec<StudentIx> {
        let mut out = Vec::new();
        let mut prev: Option<StudentIx> = None;
        for k in &self.contracts {
            if prev == Some(k.student) && out.last() != Some(&k.student) {
                out.push(k.student);
            }
            prev = Some(k.student);
        }
        out
    }

    pub fn of_student(&self, s: StudentIx) -> impl Iterator<Item = &Contract> + '_ {
        let lo = Contract::new(s, CollegeIx(0), Terms::SelfFunded);
        self.contracts.range(lo..).take_while(move |k| k.student == s)
    }

    /// The student's contract in a feasible allocation.
    pub fn assignment(&self, s: StudentIx) -> Option<Contract> {
        self.of_student(s).next().copied()
    }

    pub fn assigned_students(&self) -> BTreeSet<StudentIx> {
        self.contracts.iter().map(|k| k.student).collect()
    }

    pub fn at_college(&self, c: CollegeIx) -> Vec<Contract> {
        self.contracts.iter().filter(|k| k.college == c).copied().collect()
    }

    pub fn count(&self, c: CollegeIx, t: Terms) -> usize {
        self.contracts.iter().filter(|k| k.college == c && k.terms == t).count()
    }

    /// Per-student view of a feasible allocation. When a student holds more
    /// than one contract the first in canonical order wins.
    pub fn by_student(&self, n_students: usize) -> Vec<Option<Contract>> {
        let mut out = vec![None; n_students];
        for k in self.contracts.iter().rev() {
            if let Some(slot) = out.get_mut(k.student.0) {
                *slot = Some(*k);
            }
        }
        out
    }

    /// Per-college, per-terms student lists (state first). Students keep
    /// canonical order, not ranking order.
    pub fn by_college(&self, n_colleges: usize) -> Vec<[Vec<StudentIx>; 2]> {
        let mut out = vec![[Vec::new(), Vec::new()]; n_colleges];
        for k in &self.contracts {
            if let Some(slot) = out.get_mut(k.college.0) {
                slot[terms_slot(k.terms)].push(k.student);
            }
        }
        out
    }

    pub fn display(&self, market: &Market) -> String {
        let parts: Vec<String> = self.contracts.iter().map(|k| format!("({})", market.display_contract(k))).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

pub(crate) fn terms_slot(t: Terms) -> usize {
    match t {
        Terms::StateFunded => 0,
        Terms::SelfFunded => 1,
    }
}

impl FromIterator<Contract> for Allocation {
    fn from_iter<I: IntoIterator<Item = Contract>>(iter: I) -> Self {
        Allocation {
            contracts: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Allocation {
    type Item = &'a Contract;
    type IntoIter = std::collections::btree_set::Iter<'a, Contract>;

    fn into_iter(self) -> Self::IntoIter {
        self.contracts.iter()
    }
}

/// Builds an allocation from `(student, college, terms)` id triples.
/// Panics on unknown ids; intended for fixtures and tests.
pub fn allocation_from_ids(market: &Market, triples: &[(&str, &str, Terms)]) -> Allocation {
    triples
        .iter()
        .map(|(s, c, t)| {
            Contract::new(
                market.student_ix(s).unwrap_or_else(|| panic!("unknown student {s}")),
                market.college_ix(c).unwrap_or_else(|| panic!("unknown college {c}")),
                *t,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use Terms::*;

    #[test]
    fn feasibility_and_duplicates() {
        let m = fixtures::ex1();
        let ok = allocation_from_ids(&m, &[("r", "c", StateFunded), ("p", "c", SelfFunded)]);
        assert!(ok.is_feasible());
        let bad = allocation_from_ids(&m, &[("r", "c", StateFunded), ("r", "c", SelfFunded)]);
        assert!(!bad.is_feasible());
        assert_eq!(bad.duplicated_students(), vec![m.student_ix("r").unwrap()]);
    }

    #[test]
    fn per_student_and_per_college_views() {
        let m = fixtures::ex2();
        let y = allocation_from_ids(&m, &[("r", "h", StateFunded), ("p", "c", StateFunded), ("g", "h", SelfFunded)]);
        let r = m.student_ix("r").unwrap();
        let h = m.college_ix("h").unwrap();
        assert_eq!(y.assignment(r), Some(Contract::new(r, h, StateFunded)));
        assert_eq!(y.count(h, StateFunded), 1);
        assert_eq!(y.count(h, SelfFunded), 1);
        let view = y.by_student(m.n_students());
        assert_eq!(view.iter().flatten().count(), 3);
        let cols = y.by_college(m.n_colleges());
        assert_eq!(cols[h.0][0], vec![r]);
    }
}
