//! Exhaustive ground truth for small markets: every stable allocation, the
//! largest one, blocking sets straight from the definition, and misreports
//! under SR-DA.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::choice::{college_choice_exact, student_choice, ChoiceError, DEFAULT_EXACT_LIMIT};
use crate::da::{sp_da, sr_da};
use crate::market::{CollegeIx, Contract, Market, RankOrderList, StudentIx, Terms};
use crate::stability::{check, BlockWitness, Condition, Mode, StabilityError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBounds {
    pub max_students: usize,
    /// Bound on the product of `|ROL| + 1` over students.
    pub max_product: u64,
}

impl Default for EnumerationBounds {
    fn default() -> Self {
        EnumerationBounds {
            max_students: 8,
            max_product: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{students} students exceeds the enumeration bound of {limit}")]
    TooManyStudents { students: usize, limit: usize },
    #[error("search space of {product} allocations exceeds the bound of {limit}")]
    SearchSpaceTooLarge { product: u64, limit: u64 },
    #[error("rank-order list of length {len} exceeds the misreport search bound of {limit}")]
    RolTooLong { len: usize, limit: usize },
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableSet {
    pub mode: Mode,
    pub fingerprint: String,
    /// Sorted, without duplicates.
    pub allocations: Vec<Allocation>,
}

fn check_bounds(market: &Market, bounds: EnumerationBounds) -> Result<(), OracleError> {
    if market.n_students() > bounds.max_students {
        return Err(OracleError::TooManyStudents {
            students: market.n_students(),
            limit: bounds.max_students,
        });
    }
    let mut product: u64 = 1;
    for s in market.students() {
        product = product.saturating_mul(s.rol.len() as u64 + 1);
    }
    if product > bounds.max_product {
        return Err(OracleError::SearchSpaceTooLarge {
            product,
            limit: bounds.max_product,
        });
    }
    Ok(())
}

/// Calls `visit` on every allocation in which each student holds one of her
/// listed contracts or nothing, every contract is acceptable to its college
/// and no quota is exceeded.
fn for_each_candidate(market: &Market, mut visit: impl FnMut(&[Option<Contract>]) -> Result<(), OracleError>) -> Result<(), OracleError> {
    fn go(
        market: &Market,
        i: usize,
        load: &mut [[u32; 2]],
        current: &mut Vec<Option<Contract>>,
        visit: &mut dyn FnMut(&[Option<Contract>]) -> Result<(), OracleError>,
    ) -> Result<(), OracleError> {
        if i == market.n_students() {
            return visit(current);
        }
        let s = StudentIx(i);
        current.push(None);
        go(market, i + 1, load, current, visit)?;
        current.pop();
        for e in &market.student(s).rol {
            let col = market.college(e.college);
            let slot = crate::allocation::terms_slot(e.terms);
            if !col.accepts(s) || load[e.college.0][slot] >= col.quota(e.terms) {
                continue;
            }
            load[e.college.0][slot] += 1;
            current.push(Some(Contract::new(s, e.college, e.terms)));
            go(market, i + 1, load, current, visit)?;
            current.pop();
            load[e.college.0][slot] -= 1;
        }
        Ok(())
    }
    let mut load = vec![[0u32; 2]; market.n_colleges()];
    let mut current = Vec::with_capacity(market.n_students());
    go(market, 0, &mut load, &mut current, &mut visit)
}

pub fn enumerate_stable(market: &Market, mode: Mode, bounds: EnumerationBounds) -> Result<StableSet, OracleError> {
    check_bounds(market, bounds)?;
    let mut allocations = Vec::new();
    for_each_candidate(market, |picks| {
        let y: Allocation = picks.iter().flatten().copied().collect();
        if check(market, &y, mode)?.stable {
            allocations.push(y);
        }
        Ok(())
    })?;
    allocations.sort();
    allocations.dedup();
    Ok(StableSet {
        mode,
        fingerprint: crate::format::fingerprint(market),
        allocations,
    })
}

/// Largest stable allocation; ties go to the first in canonical order.
pub fn max_stable_size(market: &Market, mode: Mode, bounds: EnumerationBounds) -> Result<(usize, Allocation), OracleError> {
    let set = enumerate_stable(market, mode, bounds)?;
    let mut best: Option<&Allocation> = None;
    for y in &set.allocations {
        if best.is_none_or(|b| y.len() > b.len()) {
            best = Some(y);
        }
    }
    let best = best.cloned().unwrap_or_default();
    Ok((best.len(), best))
}

fn shape(y_by_student: &[Option<Contract>], c: CollegeIx, z: &[Contract]) -> Condition {
    let at_c = |s: StudentIx| y_by_student[s.0].is_some_and(|k| k.college == c);
    let incumbents = z.iter().filter(|k| at_c(k.student)).count();
    match (z.len(), incumbents) {
        (1, 0) => Condition::Singleton,
        (2, 1) => Condition::SwapIn,
        (n, m) if n == m => Condition::Retiming,
        _ => Condition::General,
    }
}

/// Individual rationality straight from the choice functions: every student
/// chooses her contract and every college chooses all of its contracts.
pub fn individually_rational_bruteforce(market: &Market, y: &Allocation) -> Result<bool, OracleError> {
    if !y.is_feasible() {
        return Ok(false);
    }
    for k in y {
        if student_choice(market, k.student, [k]) != Some(*k) {
            return Ok(false);
        }
    }
    for c in market.college_ixs() {
        let held = y.at_college(c);
        let chosen = college_choice_exact(market, c, &held, DEFAULT_EXACT_LIMIT)?;
        if chosen.len() != held.len() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every nonempty `Z` of at most `max_block_size` contracts at one college,
/// outside `y`, that the college and all students involved would choose from
/// `y ∪ Z`. Contracts a student does not strictly prefer to her current one
/// can never be chosen by her and are left out of the search, as are second
/// contracts for the same student.
pub fn find_blocks_bruteforce(market: &Market, y: &Allocation, max_block_size: usize) -> Result<Vec<BlockWitness>, OracleError> {
    let by_student = y.by_student(market.n_students());
    let mut out = Vec::new();
    for c in market.college_ixs() {
        let held = y.at_college(c);
        // per student, the contracts at c she would take over her own
        let mut options: Vec<Vec<Contract>> = Vec::new();
        for s in market.student_ixs() {
            let mut mine = Vec::new();
            for t in Terms::ALL {
                let k = Contract::new(s, c, t);
                if y.contains(&k) {
                    continue;
                }
                let mut offered: Vec<Contract> = by_student[s.0].into_iter().collect();
                offered.push(k);
                if student_choice(market, s, &offered) == Some(k) {
                    mine.push(k);
                }
            }
            if !mine.is_empty() {
                options.push(mine);
            }
        }
        let mut z: Vec<Contract> = Vec::new();
        search_blocks(market, c, &held, &options, 0, max_block_size, &mut z, &by_student, &mut out)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn search_blocks(
    market: &Market,
    c: CollegeIx,
    held: &[Contract],
    options: &[Vec<Contract>],
    i: usize,
    room: usize,
    z: &mut Vec<Contract>,
    by_student: &[Option<Contract>],
    out: &mut Vec<BlockWitness>,
) -> Result<(), OracleError> {
    if i == options.len() {
        if z.is_empty() {
            return Ok(());
        }
        let mut offers = held.to_vec();
        offers.extend(z.iter().copied());
        let chosen = college_choice_exact(market, c, &offers, DEFAULT_EXACT_LIMIT)?;
        if z.iter().all(|k| chosen.contains(k)) {
            let mut zin = z.clone();
            zin.sort_unstable();
            let mut zout: Vec<Contract> = held.iter().filter(|k| !chosen.contains(k)).copied().collect();
            for k in &zin {
                zout.extend(by_student[k.student.0].filter(|h| h.college != c));
            }
            zout.sort_unstable();
            zout.dedup();
            out.push(BlockWitness {
                condition: shape(by_student, c, &zin),
                college: c,
                contracts_in: zin,
                contracts_out: zout,
                ir: None,
            });
        }
        return Ok(());
    }
    search_blocks(market, c, held, options, i + 1, room, z, by_student, out)?;
    if room == 0 {
        return Ok(());
    }
    for &k in &options[i] {
        z.push(k);
        search_blocks(market, c, held, options, i + 1, room - 1, z, by_student, out)?;
        z.pop();
    }
    Ok(())
}

/// Stability from the definition alone.
pub fn is_stable_bruteforce(market: &Market, y: &Allocation) -> Result<bool, OracleError> {
    Ok(individually_rational_bruteforce(market, y)? && find_blocks_bruteforce(market, y, usize::MAX)?.is_empty())
}

/// Longest list [`find_sr_da_manipulation`] searches exhaustively.
pub const MAX_MANIPULATION_ROL: usize = 4;

/// Every ordered selection of entries from `rol`, shortest first: all
/// permutations of all subsets, the empty list included.
pub fn misreports(rol: &RankOrderList) -> Vec<RankOrderList> {
    fn go(rol: &RankOrderList, used: &mut Vec<bool>, cur: &mut RankOrderList, len: usize, out: &mut Vec<RankOrderList>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in 0..rol.len() {
            if !used[i] {
                used[i] = true;
                cur.push(rol[i]);
                go(rol, used, cur, len, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    for len in 0..=rol.len() {
        go(rol, &mut vec![false; rol.len()], &mut Vec::new(), len, &mut out);
    }
    out
}

/// A misreport that gets `student` a contract she truly prefers to her SR-DA
/// assignment, if one exists. The list truncated just after her SP-DA
/// contract is tried first.
pub fn find_sr_da_manipulation(market: &Market, student: StudentIx) -> Result<Option<RankOrderList>, OracleError> {
    let truth = &market.student(student).rol;
    if truth.len() > MAX_MANIPULATION_ROL {
        return Err(OracleError::RolTooLong {
            len: truth.len(),
            limit: MAX_MANIPULATION_ROL,
        });
    }
    let rank_of = |y: &Allocation| {
        market.student_rank(student, y.assignment(student).map(|k| (k.college, k.terms)))
    };
    let honest = rank_of(&sr_da(market));
    let improves = |report: &RankOrderList| {
        let y = sr_da(&market.with_rols([(student, report.clone())]));
        rank_of(&y) < honest
    };
    if let Some(k) = sp_da(market).assignment(student) {
        let cut = truth
            .iter()
            .position(|e| e.college == k.college && e.terms == k.terms)
            .expect("SP-DA assigns listed contracts");
        let truncated: RankOrderList = truth[..=cut].to_vec();
        if improves(&truncated) {
            return Ok(Some(truncated));
        }
    }
    Ok(misreports(truth).into_iter().find(|r| improves(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocation_from_ids;
    use crate::fixtures;
    use Terms::*;

    #[test]
    fn ex1_has_exactly_two_stable_allocations() {
        let m = fixtures::ex1();
        let want = vec![
            allocation_from_ids(&m, &[("r", "c", StateFunded)]),
            allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]),
        ];
        for mode in [Mode::Full, Mode::Certain] {
            let mut got = enumerate_stable(&m, mode, EnumerationBounds::default()).unwrap().allocations;
            got.sort_by_key(|y| y.len());
            assert_eq!(got, want, "{mode:?}");
        }
    }

    #[test]
    fn empty_market_has_the_empty_allocation() {
        let set = enumerate_stable(&Market::empty(), Mode::Full, EnumerationBounds::default()).unwrap();
        assert_eq!(set.allocations, vec![Allocation::new()]);
        assert_eq!(
            max_stable_size(&Market::empty(), Mode::Full, EnumerationBounds::default()).unwrap(),
            (0, Allocation::new())
        );
    }

    #[test]
    fn maximum_sizes() {
        let m = fixtures::ex1();
        assert_eq!(
            max_stable_size(&m, Mode::Full, EnumerationBounds::default()).unwrap(),
            (2, allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]))
        );
        let m2 = fixtures::ex2();
        assert_eq!(max_stable_size(&m2, Mode::Full, EnumerationBounds::default()).unwrap(), (3, sp_da(&m2)));
    }

    #[test]
    fn bounds_are_enforced() {
        let m = fixtures::ex2();
        let tight = EnumerationBounds {
            max_students: 2,
            max_product: 10,
        };
        assert!(matches!(enumerate_stable(&m, Mode::Full, tight), Err(OracleError::TooManyStudents { .. })));
        let tight = EnumerationBounds {
            max_students: 8,
            max_product: 10,
        };
        assert!(matches!(enumerate_stable(&m, Mode::Full, tight), Err(OracleError::SearchSpaceTooLarge { product: 27, .. })));
    }

    #[test]
    fn bruteforce_blocks_on_ex1() {
        let m = fixtures::ex1();
        let y = allocation_from_ids(&m, &[("p", "c", StateFunded)]);
        // r may take the state seat from p or the empty self-funded seat
        let b = find_blocks_bruteforce(&m, &y, 1).unwrap();
        let zs: Vec<Vec<Contract>> = b.iter().map(|w| w.contracts_in.clone()).collect();
        let single = |t| allocation_from_ids(&m, &[("r", "c", t)]).iter().copied().collect::<Vec<_>>();
        assert_eq!(zs, vec![single(StateFunded), single(SelfFunded)]);
        assert!(b.iter().all(|w| w.condition == Condition::Singleton));
        let stable = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        assert!(find_blocks_bruteforce(&m, &stable, 2).unwrap().is_empty());
        assert!(!find_blocks_bruteforce(&m, &Allocation::new(), 1).unwrap().is_empty());
    }

    #[test]
    fn swap_in_examples_agree_with_bruteforce() {
        let m = fixtures::ex1();
        for y in [
            allocation_from_ids(&m, &[("r", "c", StateFunded)]),
            allocation_from_ids(&m, &[("r", "c", SelfFunded)]),
        ] {
            let swaps: Vec<_> = find_blocks_bruteforce(&m, &y, 2)
                .unwrap()
                .into_iter()
                .filter(|w| w.condition == Condition::SwapIn)
                .collect();
            assert!(swaps.is_empty());
        }
        let m2 = fixtures::ex2();
        let y = allocation_from_ids(&m2, &[("r", "h", StateFunded), ("g", "h", SelfFunded)]);
        let all = find_blocks_bruteforce(&m2, &y, 2).unwrap();
        assert!(all.iter().all(|w| w.condition != Condition::SwapIn));
        let pc1: Vec<Contract> = allocation_from_ids(&m2, &[("p", "c", StateFunded)]).iter().copied().collect();
        assert!(all.iter().any(|w| w.contracts_in == pc1));
    }

    #[test]
    fn bruteforce_stability_matches_known_verdicts() {
        let m = fixtures::ex1();
        assert!(is_stable_bruteforce(&m, &allocation_from_ids(&m, &[("r", "c", StateFunded)])).unwrap());
        assert!(is_stable_bruteforce(&m, &allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)])).unwrap());
        assert!(!is_stable_bruteforce(&m, &allocation_from_ids(&m, &[("p", "c", SelfFunded)])).unwrap());
        assert!(!is_stable_bruteforce(&m, &allocation_from_ids(&m, &[("r", "c", StateFunded), ("p", "c", StateFunded)])).unwrap());
    }

    #[test]
    fn misreport_lists() {
        let m = fixtures::ex1();
        let r = m.student_ix("r").unwrap();
        let lists = misreports(&m.student(r).rol);
        // empty, two singletons, two orders
        assert_eq!(lists.len(), 5);
        assert!(lists[0].is_empty());
        let four: RankOrderList = (0..4)
            .map(|i| crate::market::RolEntry {
                college: CollegeIx(i),
                terms: StateFunded,
            })
            .collect();
        assert_eq!(misreports(&four).len(), 65);
    }

    #[test]
    fn no_manipulation_on_golden_examples() {
        for m in [fixtures::ex1(), fixtures::ex2()] {
            for s in m.student_ixs() {
                assert_eq!(find_sr_da_manipulation(&m, s).unwrap(), None);
            }
        }
    }

    #[test]
    fn manipulation_found_when_sp_da_is_better() {
        // two students, two colleges with one state seat each and opposite
        // rankings; students' top choices oppose the rankings
        use crate::market::{FundingPolicy, RawCollege, RawMarket, RawStudent};
        let m = Market::validate(RawMarket {
            students: vec![
                RawStudent::new("a", &[("x", StateFunded), ("y", StateFunded)]),
                RawStudent::new("b", &[("y", StateFunded), ("x", StateFunded)]),
            ],
            colleges: vec![
                RawCollege::new("x", 1, 0, &["b", "a"], FundingPolicy::Merit),
                RawCollege::new("y", 1, 0, &["a", "b"], FundingPolicy::Merit),
            ],
        })
        .unwrap();
        assert_ne!(sp_da(&m), sr_da(&m));
        for s in m.student_ixs() {
            let w = find_sr_da_manipulation(&m, s).unwrap().expect("manipulation exists");
            assert_eq!(w.len(), 1);
        }
    }
}
