//! The related two-sided market without contracts: every college is split
//! into a state-funded and a self-funded auxiliary college that share its
//! ranking. Textbook deferred acceptance on this market is the second route
//! to both mechanisms.

use std::collections::VecDeque;

use thiserror::Error;

use crate::allocation::{terms_slot, Allocation};
use crate::market::{CollegeIx, Contract, Market, StudentIx, Terms};

/// Auxiliary college `(c, t)`, stored at index `2c` (state) or `2c + 1`
/// (self). Zero-quota auxiliaries are kept with capacity 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxCollege {
    pub college: CollegeIx,
    pub terms: Terms,
    pub quota: u32,
    pub ranking: Vec<StudentIx>,
    rank_of: Vec<u32>,
}

impl AuxCollege {
    pub fn rank_of(&self, s: StudentIx) -> Option<u32> {
        self.rank_of.get(s.0).copied().filter(|&r| r != u32::MAX)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelatedMarket {
    pub aux: Vec<AuxCollege>,
    /// Auxiliary indices per student, best first.
    pub student_prefs: Vec<Vec<usize>>,
}

/// Student-indexed matching in the related market.
pub type RelatedMatching = Vec<Option<usize>>;

pub fn aux_index(c: CollegeIx, t: Terms) -> usize {
    2 * c.0 + terms_slot(t)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CorrespondenceError {
    #[error("student {0:?} holds more than one contract")]
    DuplicateStudent(StudentIx),
    #[error("auxiliary college {0} does not exist")]
    UnknownAux(usize),
    #[error("matching has {found} students, market has {expected}")]
    WrongLength { expected: usize, found: usize },
}

pub fn related_market(market: &Market) -> RelatedMarket {
    let n = market.n_students();
    let mut aux = Vec::with_capacity(2 * market.n_colleges());
    for c in market.college_ixs() {
        let col = market.college(c);
        for t in Terms::ALL {
            let mut rank_of = vec![u32::MAX; n];
            for (i, s) in col.ranking.iter().enumerate() {
                rank_of[s.0] = i as u32;
            }
            aux.push(AuxCollege {
                college: c,
                terms: t,
                quota: col.quota(t),
                ranking: col.ranking.clone(),
                rank_of,
            });
        }
    }
    let student_prefs = market
        .students()
        .iter()
        .map(|s| s.rol.iter().map(|e| aux_index(e.college, e.terms)).collect())
        .collect();
    RelatedMarket { aux, student_prefs }
}

impl RelatedMarket {
    pub fn n_students(&self) -> usize {
        self.student_prefs.len()
    }

    /// Position of `a` in the student's list, `None` if unacceptable.
    pub fn student_rank(&self, s: StudentIx, a: usize) -> Option<usize> {
        self.student_prefs[s.0].iter().position(|&x| x == a)
    }

    fn student_prefers(&self, s: StudentIx, a: usize, over: Option<usize>) -> bool {
        match (self.student_rank(s, a), over) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(ra), Some(b)) => self.student_rank(s, b).is_none_or(|rb| ra < rb),
        }
    }

    /// Student-proposing deferred acceptance, one proposal at a time.
    pub fn student_proposing_da(&self) -> RelatedMatching {
        let n = self.n_students();
        let mut next = vec![0usize; n];
        let mut held: Vec<Vec<StudentIx>> = vec![Vec::new(); self.aux.len()];
        let mut matched: RelatedMatching = vec![None; n];
        let mut free: VecDeque<StudentIx> = (0..n).map(StudentIx).collect();
        while let Some(s) = free.pop_front() {
            let Some(&a) = self.student_prefs[s.0].get(next[s.0]) else { continue };
            next[s.0] += 1;
            let aux = &self.aux[a];
            if aux.rank_of(s).is_none() || aux.quota == 0 {
                free.push_back(s);
                continue;
            }
            held[a].push(s);
            matched[s.0] = Some(a);
            if held[a].len() > aux.quota as usize {
                let (worst_i, _) = held[a]
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, x)| aux.rank_of(**x).expect("held students are acceptable"))
                    .expect("nonempty");
                let worst = held[a].swap_remove(worst_i);
                matched[worst.0] = None;
                free.push_back(worst);
            }
        }
        matched
    }

    /// College-proposing deferred acceptance, one proposal at a time.
    pub fn college_proposing_da(&self) -> RelatedMatching {
        let n = self.n_students();
        let mut matched: RelatedMatching = vec![None; n];
        let mut next = vec![0usize; self.aux.len()];
        let mut load = vec![0u32; self.aux.len()];
        let mut queue: VecDeque<usize> = (0..self.aux.len()).collect();
        while let Some(a) = queue.pop_front() {
            let aux = &self.aux[a];
            while load[a] < aux.quota {
                let Some(&s) = aux.ranking.get(next[a]) else { break };
                next[a] += 1;
                if self.student_prefers(s, a, matched[s.0]) {
                    if let Some(old) = matched[s.0] {
                        load[old] -= 1;
                        queue.push_back(old);
                    }
                    matched[s.0] = Some(a);
                    load[a] += 1;
                }
            }
        }
        matched
    }

    /// Pairs `(s, a)` that block the matching: the student prefers `a` to her
    /// match and `a` has a free seat or holds someone it ranks below her.
    pub fn blocking_pairs(&self, matching: &RelatedMatching) -> Vec<(StudentIx, usize)> {
        let mut held: Vec<Vec<StudentIx>> = vec![Vec::new(); self.aux.len()];
        for (s, m) in matching.iter().enumerate() {
            if let Some(a) = m {
                held[*a].push(StudentIx(s));
            }
        }
        let mut out = Vec::new();
        for s in (0..self.n_students()).map(StudentIx) {
            for &a in &self.student_prefs[s.0] {
                if matching[s.0] == Some(a) {
                    break;
                }
                let aux = &self.aux[a];
                let Some(rs) = aux.rank_of(s) else { continue };
                let slack = (held[a].len() as u32) < aux.quota;
                let displaces = held[a].iter().any(|x| aux.rank_of(*x).is_none_or(|rx| rs < rx));
                if slack || displaces {
                    out.push((s, a));
                }
            }
        }
        out
    }

    /// Every match is mutually acceptable and no auxiliary exceeds its quota.
    pub fn is_individually_rational(&self, matching: &RelatedMatching) -> bool {
        let mut load = vec![0u32; self.aux.len()];
        for (s, m) in matching.iter().enumerate() {
            if let Some(a) = *m {
                let s = StudentIx(s);
                if self.student_rank(s, a).is_none() || self.aux[a].rank_of(s).is_none() {
                    return false;
                }
                load[a] += 1;
            }
        }
        load.iter().zip(&self.aux).all(|(l, a)| *l <= a.quota)
    }

    pub fn is_stable(&self, matching: &RelatedMatching) -> bool {
        self.is_individually_rational(matching) && self.blocking_pairs(matching).is_empty()
    }

    pub fn corresponding_allocation(&self, matching: &RelatedMatching) -> Result<Allocation, CorrespondenceError> {
        if matching.len() != self.n_students() {
            return Err(CorrespondenceError::WrongLength {
                expected: self.n_students(),
                found: matching.len(),
            });
        }
        matching
            .iter()
            .enumerate()
            .filter_map(|(s, m)| m.map(|a| (s, a)))
            .map(|(s, a)| {
                let aux = self.aux.get(a).ok_or(CorrespondenceError::UnknownAux(a))?;
                Ok(Contract::new(StudentIx(s), aux.college, aux.terms))
            })
            .collect()
    }

    pub fn corresponding_matching(&self, y: &Allocation) -> Result<RelatedMatching, CorrespondenceError> {
        if let Some(&s) = y.duplicated_students().first() {
            return Err(CorrespondenceError::DuplicateStudent(s));
        }
        let mut m = vec![None; self.n_students()];
        for k in y {
            let a = aux_index(k.college, k.terms);
            if a >= self.aux.len() {
                return Err(CorrespondenceError::UnknownAux(a));
            }
            m[k.student.0] = Some(a);
        }
        Ok(m)
    }
}
