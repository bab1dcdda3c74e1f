//! Stability and certain stability of allocations.
//!
//! An allocation is stable iff it is individually rational and none of the
//! following blocks it:
//!
//! * a singleton `{(s,c,t)}` with `s` not yet at `c`;
//! * a swap-in `{(s',c,1-t), (s,c,t)}` where incumbent `s'` changes terms and
//!   the newcomer `s` takes the freed seat;
//! * a retiming `Z` that only changes the terms of students already at `c`.
//!
//! Certain stability replaces the retiming condition by a test that only
//! looks at quotas and rankings: any student who would rather hold her
//! college's other terms finds that quota full of students who strictly
//! prefer what they hold.
//!
//! Witnesses are reported in a fixed order: conditions in the order above,
//! colleges in id order, and students by the college's ranking.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{terms_slot, Allocation};
use crate::choice::college_choice;
use crate::market::{CollegeIx, Contract, FundingPolicy, Market, StudentIx, Terms};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Not individually rational.
    IR,
    Singleton,
    SwapIn,
    Retiming,
    /// The quota-and-ranking test of certain stability failed.
    FourPrime,
    /// A blocking set of another shape, only produced by the brute-force
    /// search.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IrViolation {
    DuplicateStudent,
    StudentUnacceptable,
    CollegeUnacceptable,
    QuotaExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWitness {
    pub condition: Condition,
    pub college: CollegeIx,
    /// The blocking set `Z`; empty for IR violations.
    pub contracts_in: Vec<Contract>,
    /// Contracts of the allocation the deviation drops. For IR violations,
    /// the offending contracts.
    pub contracts_out: Vec<Contract>,
    pub ir: Option<IrViolation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Full,
    Certain,
}

impl Mode {
    pub fn token(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Certain => "certain",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub mode: Mode,
    pub witnesses: Vec<BlockWitness>,
}

impl StabilityVerdict {
    fn from_witnesses(mode: Mode, witnesses: Vec<BlockWitness>) -> Self {
        StabilityVerdict {
            stable: witnesses.is_empty(),
            mode,
            witnesses,
        }
    }
}

/// Most students a retiming search will consider at one college.
pub const DEFAULT_RETIMING_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StabilityError {
    #[error("college {college:?} has {candidates} retiming candidates, above the search limit of {limit}")]
    RetimingSearchTooLarge {
        college: CollegeIx,
        candidates: usize,
        limit: usize,
    },
}

/// Per-college view of an allocation, students sorted by ranking.
struct Layout {
    assignment: Vec<Option<Contract>>,
    // [state, self] per college
    seats: Vec<[Vec<StudentIx>; 2]>,
    // students not at the college who strictly prefer (c, t) to what they
    // hold and whom the college ranks, in ranking order
    improvers: Vec<[Vec<StudentIx>; 2]>,
}

impl Layout {
    fn new(market: &Market, y: &Allocation) -> Layout {
        let assignment = y.by_student(market.n_students());
        let mut seats = y.by_college(market.n_colleges());
        for (c, per) in seats.iter_mut().enumerate() {
            let col = market.college(CollegeIx(c));
            for v in per.iter_mut() {
                v.sort_by_key(|s| col.rank_of(*s).unwrap_or(u32::MAX));
            }
        }
        let mut ranked: Vec<[Vec<(u32, StudentIx)>; 2]> = vec![Default::default(); market.n_colleges()];
        for s in market.student_ixs() {
            let held = assignment[s.0];
            let cut = market.student_rank(s, held.map(|k| (k.college, k.terms)));
            for (p, e) in market.student(s).rol.iter().enumerate() {
                if p as u32 >= cut.0 {
                    break;
                }
                if held.is_some_and(|k| k.college == e.college) {
                    continue;
                }
                if let Some(r) = market.college(e.college).rank_of(s) {
                    ranked[e.college.0][terms_slot(e.terms)].push((r, s));
                }
            }
        }
        let improvers = ranked
            .into_iter()
            .map(|per| {
                per.map(|mut v| {
                    v.sort_unstable();
                    v.into_iter().map(|(_, s)| s).collect()
                })
            })
            .collect();
        Layout { assignment, seats, improvers }
    }

    fn improvers(&self, c: CollegeIx, t: Terms) -> &[StudentIx] {
        &self.improvers[c.0][terms_slot(t)]
    }

    fn holders(&self, c: CollegeIx, t: Terms) -> &[StudentIx] {
        &self.seats[c.0][terms_slot(t)]
    }

    fn at_college(&self, c: CollegeIx) -> Vec<Contract> {
        let mut v: Vec<Contract> = Terms::ALL
            .iter()
            .flat_map(|&t| self.holders(c, t).iter().map(move |&s| Contract::new(s, c, t)))
            .collect();
        v.sort_unstable();
        v
    }

    fn is_at(&self, s: StudentIx, c: CollegeIx) -> bool {
        self.assignment[s.0].is_some_and(|k| k.college == c)
    }
}

/// `s` strictly prefers `(c, t)` to what she holds.
fn improves(market: &Market, layout: &Layout, s: StudentIx, c: CollegeIx, t: Terms) -> bool {
    let r = market.student_rank(s, Some((c, t)));
    r.is_acceptable() && r < market.student_rank(s, layout.assignment[s.0].map(|k| (k.college, k.terms)))
}

/// `s` strictly prefers `(c, t)` to `(c, other terms)`.
fn prefers_terms(market: &Market, s: StudentIx, c: CollegeIx, t: Terms) -> bool {
    let r = market.student_rank(s, Some((c, t)));
    r.is_acceptable() && r < market.student_rank(s, Some((c, t.opposite())))
}

pub fn check_individual_rationality(market: &Market, y: &Allocation) -> Vec<BlockWitness> {
    ir_failures(market, y, &Layout::new(market, y))
}

fn ir_failures(market: &Market, y: &Allocation, layout: &Layout) -> Vec<BlockWitness> {
    let mut out = Vec::new();
    for s in y.duplicated_students() {
        let ks: Vec<Contract> = y.of_student(s).copied().collect();
        out.push(BlockWitness {
            condition: Condition::IR,
            college: ks[0].college,
            contracts_in: vec![],
            contracts_out: ks,
            ir: Some(IrViolation::DuplicateStudent),
        });
    }
    for c in market.college_ixs() {
        let col = market.college(c);
        let mut here = layout.at_college(c);
        here.sort_by_key(|k| (col.rank_of(k.student).unwrap_or(u32::MAX), k.student, k.terms));
        for k in &here {
            if !market.student_accepts(k) {
                out.push(ir_witness(c, *k, IrViolation::StudentUnacceptable));
            }
            if !col.accepts(k.student) {
                out.push(ir_witness(c, *k, IrViolation::CollegeUnacceptable));
            }
        }
        for t in Terms::ALL {
            let holders = layout.holders(c, t);
            if holders.len() > col.quota(t) as usize {
                let mut ks: Vec<Contract> = holders.iter().map(|&s| Contract::new(s, c, t)).collect();
                ks.sort_unstable();
                out.push(BlockWitness {
                    condition: Condition::IR,
                    college: c,
                    contracts_in: vec![],
                    contracts_out: ks,
                    ir: Some(IrViolation::QuotaExceeded),
                });
            }
        }
    }
    out
}

fn ir_witness(c: CollegeIx, k: Contract, why: IrViolation) -> BlockWitness {
    BlockWitness {
        condition: Condition::IR,
        college: c,
        contracts_in: vec![],
        contracts_out: vec![k],
        ir: Some(why),
    }
}

/// Blocking singletons `{(s,c,t)}` with `s` not already at `c`; retimings of
/// a single student are covered by the retiming conditions.
pub fn find_singleton_blocks(market: &Market, y: &Allocation) -> Vec<BlockWitness> {
    singleton_blocks(market, &Layout::new(market, y))
}

fn singleton_blocks(market: &Market, layout: &Layout) -> Vec<BlockWitness> {
    let mut out = Vec::new();
    for c in market.college_ixs() {
        let col = market.college(c);
        let mut cands: Vec<(u32, usize, StudentIx, Terms)> = Terms::ALL
            .iter()
            .flat_map(|&t| {
                layout
                    .improvers(c, t)
                    .iter()
                    .map(move |&s| (col.rank_of(s).unwrap_or(u32::MAX), terms_slot(t), s, t))
            })
            .collect();
        cands.sort_unstable();
        for (_, _, s, t) in cands {
            let holders = layout.holders(c, t);
            let slack = holders.len() < col.quota(t) as usize;
            let lowest = holders.last().copied();
            let displaced = match (slack, lowest) {
                (true, _) => None,
                (false, Some(low)) if col.ranks_above(s, low) => Some(low),
                _ => continue,
            };
            let mut contracts_out: Vec<Contract> = layout.assignment[s.0].into_iter().collect();
            contracts_out.extend(displaced.map(|d| Contract::new(d, c, t)));
            contracts_out.sort_unstable();
            out.push(BlockWitness {
                condition: Condition::Singleton,
                college: c,
                contracts_in: vec![Contract::new(s, c, t)],
                contracts_out,
                ir: None,
            });
        }
    }
    out
}

/// Closed-form decision of whether `{(s',c,o), (s,c,t)}` is chosen by `c`
/// from its current contracts plus the pair. Returns the displaced
/// incumbent contract, if any, wrapped in `Some` when the pair is chosen.
fn swap_in_chosen(
    market: &Market,
    layout: &Layout,
    c: CollegeIx,
    t: Terms,
    s: StudentIx,
) -> Option<Option<Contract>> {
    let col = market.college(c);
    let o = t.opposite();
    let n_t = layout.holders(c, t).len();
    let n_o = layout.holders(c, o).len();
    let (q_t, q_o) = (col.quota(t) as usize, col.quota(o) as usize);
    if n_o < q_o {
        // Everyone fits. With both quotas slack the incumbent's terms fall to
        // the funding policy.
        if n_t < q_t && o != col.funding_policy.favoured() {
            return None;
        }
        return Some(None);
    }
    if n_t < q_t {
        return None;
    }
    // Both full: the college drops the lowest-ranked of incumbents plus `s`.
    let low_o = layout.holders(c, o).last().copied();
    let low_t = layout.holders(c, t).last().copied();
    let low_o = low_o?;
    let lowest_is_o = col.ranks_above(s, low_o) && low_t.is_none_or(|lt| col.ranks_above(lt, low_o));
    lowest_is_o.then_some(Some(Contract::new(low_o, c, o)))
}

/// Blocks through `{(s',c,1-t), (s,c,t)}` with `(s',c,t)` held and `s` new to
/// `c`.
pub fn find_swap_in_blocks(market: &Market, y: &Allocation) -> Vec<BlockWitness> {
    swap_in_blocks(market, &Layout::new(market, y))
}

fn swap_in_blocks(market: &Market, layout: &Layout) -> Vec<BlockWitness> {
    let mut out = Vec::new();
    for g in swap_in_groups(market, layout) {
        for &s_prime in &g.movers {
            for &s in &g.newcomers {
                out.push(swap_in_witness(layout, &g, s_prime, s));
            }
        }
    }
    out
}

/// Every mover pairs with every newcomer: the closed form does not depend on
/// which incumbent changes terms.
struct SwapGroup {
    college: CollegeIx,
    terms: Terms,
    movers: Vec<StudentIx>,
    newcomers: Vec<StudentIx>,
    displaced: Option<Contract>,
}

fn swap_in_groups(market: &Market, layout: &Layout) -> Vec<SwapGroup> {
    let mut out = Vec::new();
    for c in market.college_ixs() {
        for t in Terms::ALL {
            let o = t.opposite();
            let movers: Vec<StudentIx> = layout
                .holders(c, t)
                .iter()
                .copied()
                .filter(|&x| prefers_terms(market, x, c, o))
                .collect();
            if movers.is_empty() {
                continue;
            }
            let mut displaced = None;
            let newcomers: Vec<StudentIx> = layout
                .improvers(c, t)
                .iter()
                .copied()
                .filter(|&s| match swap_in_chosen(market, layout, c, t, s) {
                    Some(d) => {
                        displaced = d;
                        true
                    }
                    None => false,
                })
                .collect();
            if !newcomers.is_empty() {
                out.push(SwapGroup {
                    college: c,
                    terms: t,
                    movers,
                    newcomers,
                    displaced,
                });
            }
        }
    }
    out
}

fn swap_in_witness(layout: &Layout, g: &SwapGroup, s_prime: StudentIx, s: StudentIx) -> BlockWitness {
    let (c, t) = (g.college, g.terms);
    let mut contracts_in = vec![Contract::new(s_prime, c, t.opposite()), Contract::new(s, c, t)];
    contracts_in.sort_unstable();
    let mut contracts_out = vec![Contract::new(s_prime, c, t)];
    contracts_out.extend(layout.assignment[s.0]);
    contracts_out.extend(g.displaced);
    contracts_out.sort_unstable();
    BlockWitness {
        condition: Condition::SwapIn,
        college: c,
        contracts_in,
        contracts_out,
        ir: None,
    }
}

/// Same search as [`find_swap_in_blocks`], deciding the college side with
/// [`college_choice`] on the current contracts plus the pair instead of the
/// closed form.
pub fn find_swap_in_blocks_by_choice(market: &Market, y: &Allocation) -> Vec<BlockWitness> {
    let layout = Layout::new(market, y);
    let mut out = Vec::new();
    for c in market.college_ixs() {
        let col = market.college(c);
        let current = layout.at_college(c);
        for t in Terms::ALL {
            let o = t.opposite();
            for &s_prime in layout.holders(c, t) {
                if !prefers_terms(market, s_prime, c, o) {
                    continue;
                }
                for &s in &col.ranking {
                    if layout.is_at(s, c) || !improves(market, &layout, s, c, t) {
                        continue;
                    }
                    let z = [Contract::new(s_prime, c, o), Contract::new(s, c, t)];
                    let mut offers = current.clone();
                    offers.extend(z);
                    let chosen = college_choice(market, c, &offers);
                    if !z.iter().all(|k| chosen.binary_search(k).is_ok()) {
                        continue;
                    }
                    let displaced = current
                        .iter()
                        .find(|k| k.student != s_prime && chosen.binary_search(k).is_err())
                        .copied();
                    let g = SwapGroup {
                        college: c,
                        terms: t,
                        movers: vec![],
                        newcomers: vec![],
                        displaced,
                    };
                    out.push(swap_in_witness(&layout, &g, s_prime, s));
                }
            }
        }
    }
    out
}

/// Certain-stability test at each held contract: a student preferring her
/// college's other terms must find that quota full of students who
/// strictly prefer what they hold there.
pub fn find_four_prime_failures(market: &Market, y: &Allocation) -> Vec<BlockWitness> {
    four_prime_failures(market, &Layout::new(market, y))
}

fn four_prime_failures(market: &Market, layout: &Layout) -> Vec<BlockWitness> {
    market.college_ixs().flat_map(|c| four_prime_at(market, layout, c)).collect()
}

fn four_prime_at(market: &Market, layout: &Layout, c: CollegeIx) -> Vec<BlockWitness> {
    let col = market.college(c);
    let mut cohort: Vec<(StudentIx, Terms)> = Terms::ALL
        .iter()
        .flat_map(|&t| layout.holders(c, t).iter().map(move |&s| (s, t)))
        .collect();
    cohort.sort_by_key(|(s, _)| col.rank_of(*s).unwrap_or(u32::MAX));
    let mut out = Vec::new();
    for (s, t) in cohort {
        let o = t.opposite();
        if !prefers_terms(market, s, c, o) {
            continue;
        }
        let full = layout.holders(c, o).len() >= col.quota(o) as usize;
        let movable: Vec<StudentIx> = layout
            .holders(c, o)
            .iter()
            .copied()
            .filter(|&x| !prefers_terms(market, x, c, o))
            .collect();
        if full && movable.is_empty() {
            continue;
        }
        let mut contracts_in = vec![Contract::new(s, c, o)];
        contracts_in.extend(movable.iter().map(|&x| Contract::new(x, c, t)));
        contracts_in.sort_unstable();
        let mut contracts_out = vec![Contract::new(s, c, t)];
        contracts_out.extend(movable.iter().map(|&x| Contract::new(x, c, o)));
        contracts_out.sort_unstable();
        out.push(BlockWitness {
            condition: Condition::FourPrime,
            college: c,
            contracts_in,
            contracts_out,
            ir: None,
        });
    }
    out
}

fn retiming_candidates(market: &Market, layout: &Layout, c: CollegeIx) -> Vec<Contract> {
    let col = market.college(c);
    let mut candidates: Vec<Contract> = Terms::ALL
        .iter()
        .flat_map(|&t| layout.holders(c, t).iter().map(move |&s| Contract::new(s, c, t)))
        .filter(|k| prefers_terms(market, k.student, c, k.terms.opposite()))
        .collect();
    candidates.sort_by_key(|k| col.rank_of(k.student).unwrap_or(u32::MAX));
    candidates
}

fn retiming_witness(market: &Market, current: &[Contract], c: CollegeIx, mut z: Vec<Contract>) -> Option<BlockWitness> {
    let mut offers = current.to_vec();
    offers.extend(&z);
    let chosen = college_choice(market, c, &offers);
    if !z.iter().all(|k| chosen.binary_search(k).is_ok()) {
        return None;
    }
    z.sort_unstable();
    let contracts_out = current.iter().filter(|k| chosen.binary_search(k).is_err()).copied().collect();
    Some(BlockWitness {
        condition: Condition::Retiming,
        college: c,
        contracts_in: z,
        contracts_out,
        ir: None,
    })
}

/// All subsets at one college, or an error past `limit` candidates.
fn retiming_subsets(
    market: &Market,
    layout: &Layout,
    c: CollegeIx,
    limit: usize,
    out: &mut Vec<BlockWitness>,
) -> Result<(), StabilityError> {
    let candidates = retiming_candidates(market, layout, c);
    if candidates.len() > limit {
        return Err(StabilityError::RetimingSearchTooLarge {
            college: c,
            candidates: candidates.len(),
            limit,
        });
    }
    let current = layout.at_college(c);
    for mask in 1u64..(1u64 << candidates.len()) {
        let z: Vec<Contract> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, k)| k.retimed())
            .collect();
        out.extend(retiming_witness(market, &current, c, z));
    }
    Ok(())
}

/// The retimings the college picks when offered every wanted retiming at
/// once. Choice is maximization, so dropping unchosen offers leaves the
/// choice unchanged: this set blocks whenever it is nonempty, and if it is
/// empty no subset can block.
fn maximal_retiming(market: &Market, layout: &Layout, c: CollegeIx) -> Option<BlockWitness> {
    let all: Vec<Contract> = retiming_candidates(market, layout, c).into_iter().map(Contract::retimed).collect();
    if all.is_empty() {
        return None;
    }
    let current = layout.at_college(c);
    let mut offers = current.clone();
    offers.extend(&all);
    let chosen = college_choice(market, c, &offers);
    let z: Vec<Contract> = all.into_iter().filter(|k| chosen.binary_search(k).is_ok()).collect();
    if z.is_empty() {
        return None;
    }
    retiming_witness(market, &current, c, z)
}

/// Blocks that only change the terms of students already at a college.
///
/// Colleges passing the certain-stability test cannot be blocked this way
/// and are skipped. Elsewhere every nonempty subset of the students who
/// strictly prefer their other terms is tried, capped at `limit` candidates.
pub fn find_retiming_blocks(market: &Market, y: &Allocation, limit: usize) -> Result<Vec<BlockWitness>, StabilityError> {
    let layout = Layout::new(market, y);
    let mut out = Vec::new();
    for c in market.college_ixs() {
        if four_prime_at(market, &layout, c).is_empty() {
            continue;
        }
        retiming_subsets(market, &layout, c, limit, &mut out)?;
    }
    Ok(out)
}

/// At most one retiming witness per college, the largest blocking set.
/// Finds a block exactly when [`find_retiming_blocks`] finds one, with no
/// limit on the number of candidates.
pub fn find_maximal_retiming_blocks(market: &Market, y: &Allocation) -> Vec<BlockWitness> {
    let layout = Layout::new(market, y);
    market
        .college_ixs()
        .filter(|&c| !four_prime_at(market, &layout, c).is_empty())
        .filter_map(|c| maximal_retiming(market, &layout, c))
        .collect()
}

pub fn is_stable(market: &Market, y: &Allocation) -> Result<StabilityVerdict, StabilityError> {
    is_stable_with_limit(market, y, DEFAULT_RETIMING_LIMIT)
}

/// Colleges with more than `limit` retiming candidates report only their
/// maximal retiming block; the verdict is exact either way.
pub fn is_stable_with_limit(market: &Market, y: &Allocation, limit: usize) -> Result<StabilityVerdict, StabilityError> {
    let layout = Layout::new(market, y);
    let ir = ir_failures(market, y, &layout);
    if !ir.is_empty() {
        return Ok(StabilityVerdict::from_witnesses(Mode::Full, ir));
    }
    let mut witnesses = singleton_blocks(market, &layout);
    witnesses.extend(swap_in_blocks(market, &layout));
    for c in market.college_ixs() {
        if four_prime_at(market, &layout, c).is_empty() {
            continue;
        }
        match retiming_subsets(market, &layout, c, limit, &mut witnesses) {
            Ok(()) => {}
            Err(StabilityError::RetimingSearchTooLarge { .. }) => witnesses.extend(maximal_retiming(market, &layout, c)),
        }
    }
    Ok(StabilityVerdict::from_witnesses(Mode::Full, witnesses))
}

/// Certain stability; never consults funding policies for the verdict.
pub fn is_certainly_stable(market: &Market, y: &Allocation) -> StabilityVerdict {
    let layout = Layout::new(market, y);
    let ir = ir_failures(market, y, &layout);
    if !ir.is_empty() {
        return StabilityVerdict::from_witnesses(Mode::Certain, ir);
    }
    let mut witnesses = singleton_blocks(market, &layout);
    witnesses.extend(swap_in_blocks(market, &layout));
    witnesses.extend(four_prime_failures(market, &layout));
    StabilityVerdict::from_witnesses(Mode::Certain, witnesses)
}

/// Size of the certain-stability witness list and the contracts named in
/// the witnesses' blocking sets, without building the witnesses themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockingSummary {
    pub witnesses: usize,
    pub contracts_in: BTreeSet<Contract>,
}

impl BlockingSummary {
    pub fn stable(&self) -> bool {
        self.witnesses == 0
    }
}

/// Equal to counting and collecting over [`is_certainly_stable`]; cheap
/// enough to run on every iteration of the alternative algorithms.
pub fn certain_blocking_summary(market: &Market, y: &Allocation) -> BlockingSummary {
    let layout = Layout::new(market, y);
    let ir = ir_failures(market, y, &layout);
    if !ir.is_empty() {
        return BlockingSummary {
            witnesses: ir.len(),
            contracts_in: BTreeSet::new(),
        };
    }
    let mut sum = BlockingSummary::default();
    for w in singleton_blocks(market, &layout).into_iter().chain(four_prime_failures(market, &layout)) {
        sum.witnesses += 1;
        sum.contracts_in.extend(w.contracts_in);
    }
    for g in swap_in_groups(market, &layout) {
        sum.witnesses += g.movers.len() * g.newcomers.len();
        let o = g.terms.opposite();
        sum.contracts_in.extend(g.movers.iter().map(|&x| Contract::new(x, g.college, o)));
        sum.contracts_in.extend(g.newcomers.iter().map(|&x| Contract::new(x, g.college, g.terms)));
    }
    sum
}

pub fn check(market: &Market, y: &Allocation, mode: Mode) -> Result<StabilityVerdict, StabilityError> {
    match mode {
        Mode::Full => is_stable(market, y),
        Mode::Certain => Ok(is_certainly_stable(market, y)),
    }
}

/// A higher-ranked student who would rather have a lower-ranked
/// schoolmate's terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeritViolation {
    pub higher: StudentIx,
    pub lower: StudentIx,
    pub college: CollegeIx,
}

pub fn check_merit(market: &Market, y: &Allocation) -> Vec<MeritViolation> {
    let layout = Layout::new(market, y);
    let mut out = Vec::new();
    for c in market.college_ixs() {
        let col = market.college(c);
        let mut cohort: Vec<(StudentIx, Terms)> = Terms::ALL
            .iter()
            .flat_map(|&t| layout.holders(c, t).iter().map(move |&s| (s, t)))
            .collect();
        cohort.sort_by_key(|(s, _)| (col.rank_of(*s).unwrap_or(u32::MAX), *s));
        for (i, &(hi, t_hi)) in cohort.iter().enumerate() {
            for &(lo, t_lo) in &cohort[i + 1..] {
                if t_hi != t_lo && col.ranks_above(hi, lo) && prefers_terms(market, hi, c, t_lo) {
                    out.push(MeritViolation {
                        higher: hi,
                        lower: lo,
                        college: c,
                    });
                }
            }
        }
    }
    out
}

/// Verdict for the same allocation under both funding completions.
pub fn is_stable_under_both_policies(market: &Market, y: &Allocation) -> Result<bool, StabilityError> {
    for policy in [FundingPolicy::Merit, FundingPolicy::InverseMerit] {
        if !is_stable(&market.with_funding_policy(policy), y)?.stable {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Contracts named in any witness's blocking set.
pub fn blocking_contracts(verdict: &StabilityVerdict) -> BTreeSet<Contract> {
    verdict.witnesses.iter().flat_map(|w| w.contracts_in.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocation_from_ids;
    use crate::da::sp_da;
    use crate::fixtures;
    use crate::market::{RawCollege, RawMarket, RawStudent};
    use Terms::*;

    #[test]
    fn ir_examples() {
        let m = fixtures::ex1();
        let y = allocation_from_ids(&m, &[("p", "c", SelfFunded)]);
        let w = check_individual_rationality(&m, &y);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].ir, Some(IrViolation::StudentUnacceptable));
        assert!(check_individual_rationality(&m, &Allocation::new()).is_empty());
        let over = allocation_from_ids(&m, &[("r", "c", StateFunded), ("p", "c", StateFunded)]);
        let w = check_individual_rationality(&m, &over);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].ir, Some(IrViolation::QuotaExceeded));
        let dup = allocation_from_ids(&m, &[("r", "c", StateFunded), ("r", "c", SelfFunded)]);
        assert_eq!(check_individual_rationality(&m, &dup)[0].ir, Some(IrViolation::DuplicateStudent));
    }

    #[test]
    fn singleton_examples() {
        let m = fixtures::ex1();
        let w = find_singleton_blocks(&m, &Allocation::new());
        let rc1 = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        assert!(w.iter().any(|w| w.contracts_in == rc1.iter().copied().collect::<Vec<_>>()));
        assert!(find_singleton_blocks(&m, &rc1).is_empty());

        let m2 = fixtures::ex2();
        let alt = allocation_from_ids(&m2, &[("r", "h", SelfFunded), ("p", "h", StateFunded)]);
        assert!(find_singleton_blocks(&m2, &alt).is_empty());
    }

    #[test]
    fn swap_in_examples() {
        let m = fixtures::ex1();
        let rc1 = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        assert!(find_swap_in_blocks(&m, &rc1).is_empty());
        let rc0 = allocation_from_ids(&m, &[("r", "c", SelfFunded)]);
        assert!(find_swap_in_blocks(&m, &rc0).is_empty());
        let m2 = fixtures::ex2();
        let y = allocation_from_ids(&m2, &[("r", "h", StateFunded), ("g", "h", SelfFunded)]);
        assert!(find_swap_in_blocks(&m2, &y).is_empty());
        // the actual block is p taking the state seat at c
        let singles = find_singleton_blocks(&m2, &y);
        let pc1 = allocation_from_ids(&m2, &[("p", "c", StateFunded)]);
        assert!(singles.iter().any(|w| w.contracts_in == pc1.iter().copied().collect::<Vec<_>>()));
    }

    #[test]
    fn swap_in_detected_when_lowest_holds_other_terms() {
        // c: one seat each. a (top) holds state but prefers self; b holds
        // self; n is new and wants state. Ranking a > n > b.
        let raw = RawMarket {
            students: vec![
                RawStudent::new("a", &[("c", SelfFunded), ("c", StateFunded)]),
                RawStudent::new("b", &[("c", SelfFunded)]),
                RawStudent::new("n", &[("c", StateFunded)]),
            ],
            colleges: vec![RawCollege::new("c", 1, 1, &["a", "n", "b"], FundingPolicy::Merit)],
        };
        let m = Market::validate(raw).unwrap();
        let y = allocation_from_ids(&m, &[("a", "c", StateFunded), ("b", "c", SelfFunded)]);
        let fast = find_swap_in_blocks(&m, &y);
        assert_eq!(fast.len(), 1);
        assert_eq!(
            fast[0].contracts_in,
            allocation_from_ids(&m, &[("a", "c", SelfFunded), ("n", "c", StateFunded)]).iter().copied().collect::<Vec<_>>()
        );
        assert_eq!(fast, find_swap_in_blocks_by_choice(&m, &y));
    }

    #[test]
    fn retiming_needs_every_member_to_improve() {
        // Both want state; the lower-ranked student holds it; Merit college.
        let raw = RawMarket {
            students: vec![
                RawStudent::new("a", &[("c", StateFunded), ("c", SelfFunded)]),
                RawStudent::new("b", &[("c", StateFunded), ("c", SelfFunded)]),
            ],
            colleges: vec![RawCollege::new("c", 1, 1, &["a", "b"], FundingPolicy::Merit)],
        };
        let m = Market::validate(raw).unwrap();
        let y = allocation_from_ids(&m, &[("a", "c", SelfFunded), ("b", "c", StateFunded)]);
        assert!(find_retiming_blocks(&m, &y, DEFAULT_RETIMING_LIMIT).unwrap().is_empty());
        // nobody preferring other terms: nothing to search
        let top = allocation_from_ids(&m, &[("a", "c", StateFunded), ("b", "c", SelfFunded)]);
        assert!(find_retiming_blocks(&m, &top, DEFAULT_RETIMING_LIMIT).unwrap().is_empty());
    }

    #[test]
    fn single_student_retiming_depends_on_policy() {
        // a holds self, prefers state, state seat empty.
        let mk = |p| {
            Market::validate(RawMarket {
                students: vec![RawStudent::new("a", &[("c", StateFunded), ("c", SelfFunded)])],
                colleges: vec![RawCollege::new("c", 1, 1, &["a"], p)],
            })
            .unwrap()
        };
        let merit = mk(FundingPolicy::Merit);
        let y = allocation_from_ids(&merit, &[("a", "c", SelfFunded)]);
        assert_eq!(find_retiming_blocks(&merit, &y, 20).unwrap().len(), 1);
        let inverse = mk(FundingPolicy::InverseMerit);
        assert!(find_retiming_blocks(&inverse, &y, 20).unwrap().is_empty());
        assert!(!is_certainly_stable(&inverse, &y).stable);
        assert!(is_stable(&inverse, &y).unwrap().stable);
    }

    #[test]
    fn full_stability_examples() {
        let m = fixtures::ex1();
        let a = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        let b = allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        assert!(is_stable(&m, &a).unwrap().stable);
        assert!(is_stable(&m, &b).unwrap().stable);
        let pc1 = allocation_from_ids(&m, &[("p", "c", StateFunded)]);
        let v = is_stable(&m, &pc1).unwrap();
        assert!(!v.stable);
        assert_eq!(v.witnesses[0].condition, Condition::Singleton);
        assert_eq!(
            v.witnesses[0].contracts_in,
            allocation_from_ids(&m, &[("r", "c", StateFunded)]).iter().copied().collect::<Vec<_>>()
        );
    }

    #[test]
    fn certain_stability_examples() {
        let m = fixtures::ex1();
        for y in [
            allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]),
            allocation_from_ids(&m, &[("r", "c", StateFunded)]),
        ] {
            let v = is_certainly_stable(&m, &y);
            assert!(v.stable, "{:?}", v);
            assert_eq!(v.mode, Mode::Certain);
        }
        let m2 = fixtures::ex2();
        assert!(is_certainly_stable(&m2, &sp_da(&m2)).stable);
    }

    #[test]
    fn ir_failure_stops_the_check() {
        let m = fixtures::ex1();
        let y = allocation_from_ids(&m, &[("r", "c", StateFunded), ("p", "c", SelfFunded)]);
        let v = is_stable(&m, &y).unwrap();
        assert!(!v.stable);
        assert!(v.witnesses.iter().all(|w| w.condition == Condition::IR));
    }

    #[test]
    fn merit_examples() {
        let m = fixtures::ex1();
        assert!(check_merit(&m, &allocation_from_ids(&m, &[("r", "c", StateFunded)])).is_empty());
        let alt = allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        assert_eq!(
            check_merit(&m, &alt),
            vec![MeritViolation {
                higher: m.student_ix("r").unwrap(),
                lower: m.student_ix("p").unwrap(),
                college: m.college_ix("c").unwrap(),
            }]
        );
        let m2 = fixtures::ex2();
        assert!(check_merit(&m2, &sp_da(&m2)).is_empty());
    }

    #[test]
    fn retiming_limit_is_enforced() {
        let m = fixtures::ex1().with_funding_policy(FundingPolicy::Merit);
        let y = allocation_from_ids(&m, &[("r", "c", SelfFunded)]);
        assert!(matches!(
            find_retiming_blocks(&m, &y, 0),
            Err(StabilityError::RetimingSearchTooLarge { candidates: 1, .. })
        ));
    }
}
