//! Alternative stable algorithms that let colleges use local market power.
//!
//! Heuristic 1 flips consecutive state-then-self entries in students' lists;
//! heuristic 2 deletes the state-funded contract a student receives under
//! SP-DA. Each algorithm runs SP-DA on the modified market, keeps the result
//! if it is certainly stable with respect to the original preferences, and
//! otherwise drops one pair from its modification set and tries again.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::da::{sp_da, sp_da_with_rols};
use crate::market::{CollegeIx, Contract, Market, RankOrderList, StudentIx, Terms};
use crate::stability::{certain_blocking_summary, BlockWitness};

pub type Pair = (StudentIx, CollegeIx);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairKind {
    Flip,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSet {
    pub kind: PairKind,
    pub pairs: BTreeSet<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AltError {
    #[error("student {0:?} does not list college {1:?} state-funded immediately before self-funded")]
    NotAFlipPair(StudentIx, CollegeIx),
    #[error("student {0:?} does not list college {1:?} state-funded")]
    MissingEntry(StudentIx, CollegeIx),
    #[error("no pair left to remove")]
    EmptyPairSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalReason {
    WitnessRule,
    RandomFallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedPair {
    pub student: String,
    pub college: String,
    pub from: Vec<PairKind>,
    pub reason: RemovalReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    /// Digest of the modification sets in force.
    pub snapshot: String,
    pub flip_pairs: usize,
    pub reject_pairs: usize,
    pub assigned: usize,
    pub state_funded: usize,
    pub self_funded: usize,
    pub certainly_stable: bool,
    pub witnesses: usize,
    pub removed: Option<RemovedPair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmKind {
    Flip,
    Reject,
    Both,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmTrace {
    pub algorithm: AlgorithmKind,
    pub seed: u64,
    pub iterations: Vec<Iteration>,
}

/// Pairs `(s, c)` where `s` lists `(c, state)` immediately followed by
/// `(c, self)`.
pub fn initial_flip_set(market: &Market) -> PairSet {
    let mut pairs = BTreeSet::new();
    for s in market.student_ixs() {
        for w in market.student(s).rol.windows(2) {
            if is_flip_window(w) {
                pairs.insert((s, w[0].college));
            }
        }
    }
    PairSet {
        kind: PairKind::Flip,
        pairs,
    }
}

fn is_flip_window(w: &[crate::market::RolEntry]) -> bool {
    w[0].college == w[1].college && w[0].terms == Terms::StateFunded && w[1].terms == Terms::SelfFunded
}

/// Pairs `(s, c)` with `(s, c, state)` in the SP-DA allocation.
pub fn initial_reject_set(market: &Market) -> PairSet {
    PairSet {
        kind: PairKind::Reject,
        pairs: sp_da(market)
            .iter()
            .filter(|k| k.terms == Terms::StateFunded)
            .map(|k| (k.student, k.college))
            .collect(),
    }
}

fn flipped(rol: &RankOrderList, s: StudentIx, c: CollegeIx) -> Result<RankOrderList, AltError> {
    let i = rol
        .windows(2)
        .position(|w| w[0].college == c && is_flip_window(w))
        .ok_or(AltError::NotAFlipPair(s, c))?;
    let mut out = rol.clone();
    out.swap(i, i + 1);
    Ok(out)
}

fn rejected(rol: &RankOrderList, s: StudentIx, c: CollegeIx) -> Result<RankOrderList, AltError> {
    let i = rol
        .iter()
        .position(|e| e.college == c && e.terms == Terms::StateFunded)
        .ok_or(AltError::MissingEntry(s, c))?;
    let mut out = rol.clone();
    out.remove(i);
    Ok(out)
}

pub fn apply_flip(market: &Market, a: &PairSet) -> Result<Market, AltError> {
    modified(market, &a.pairs, &BTreeSet::new())
}

pub fn apply_reject(market: &Market, b: &PairSet) -> Result<Market, AltError> {
    modified(market, &BTreeSet::new(), &b.pairs)
}

/// Flips then deletions on the original lists; a pair in both sets is only
/// deleted.
pub fn apply_both(market: &Market, a: &PairSet, b: &PairSet) -> Result<Market, AltError> {
    modified(market, &a.pairs, &b.pairs)
}

fn modified(market: &Market, flips: &BTreeSet<Pair>, rejects: &BTreeSet<Pair>) -> Result<Market, AltError> {
    let mut touched: Vec<StudentIx> = flips.iter().chain(rejects).map(|p| p.0).collect();
    touched.dedup();
    touched.sort_unstable();
    touched.dedup();
    let mut rols = Vec::with_capacity(touched.len());
    for s in touched {
        rols.push((s, modified_rol(market, s, flips, rejects)?));
    }
    Ok(market.with_rols(rols))
}

fn pairs_of(set: &BTreeSet<Pair>, s: StudentIx) -> impl Iterator<Item = CollegeIx> + '_ {
    set.range((s, CollegeIx(0))..=(s, CollegeIx(usize::MAX))).map(|p| p.1)
}

/// One student's list with her flips applied, then her deletions.
fn modified_rol(market: &Market, s: StudentIx, flips: &BTreeSet<Pair>, rejects: &BTreeSet<Pair>) -> Result<RankOrderList, AltError> {
    let mut rol = market.student(s).rol.clone();
    for c in pairs_of(flips, s) {
        if !rejects.contains(&(s, c)) {
            rol = flipped(&rol, s, c)?;
        }
    }
    for c in pairs_of(rejects, s) {
        rol = rejected(&rol, s, c)?;
    }
    Ok(rol)
}

/// Picks the pair to drop: the highest-ranked student, at the first college
/// in id order, whose pair's state-funded contract lies in a blocking set;
/// otherwise a uniformly random pair.
pub fn select_removal(
    market: &Market,
    blocking: &BTreeSet<Contract>,
    candidates: &BTreeSet<Pair>,
    rng: &mut ChaCha8Rng,
) -> Result<(Pair, RemovalReason), AltError> {
    if candidates.is_empty() {
        return Err(AltError::EmptyPairSet);
    }
    let best = candidates
        .iter()
        .filter(|&&(s, c)| blocking.contains(&Contract::new(s, c, Terms::StateFunded)))
        .min_by_key(|&&(s, c)| (c, market.college(c).rank_of(s).unwrap_or(u32::MAX), s));
    if let Some(&p) = best {
        return Ok((p, RemovalReason::WitnessRule));
    }
    let i = rng.gen_range(0..candidates.len());
    let p = *candidates.iter().nth(i).expect("index in range");
    Ok((p, RemovalReason::RandomFallback))
}

/// One removal from `set` driven by the witnesses of a failed check.
pub fn removal_step(
    market: &Market,
    witnesses: &[BlockWitness],
    set: &PairSet,
    rng: &mut ChaCha8Rng,
) -> Result<(PairSet, Pair, RemovalReason), AltError> {
    let blocking: BTreeSet<Contract> = witnesses.iter().flat_map(|w| w.contracts_in.iter().copied()).collect();
    let (p, reason) = select_removal(market, &blocking, &set.pairs, rng)?;
    let mut rest = set.clone();
    rest.pairs.remove(&p);
    Ok((rest, p, reason))
}

pub fn run_algorithm1(market: &Market, seed: u64) -> (Allocation, AlgorithmTrace) {
    run(market, seed, AlgorithmKind::Flip)
}

pub fn run_algorithm2(market: &Market, seed: u64) -> (Allocation, AlgorithmTrace) {
    run(market, seed, AlgorithmKind::Reject)
}

pub fn run_algorithm3(market: &Market, seed: u64) -> (Allocation, AlgorithmTrace) {
    run(market, seed, AlgorithmKind::Both)
}

fn snapshot(a: &BTreeSet<Pair>, b: &BTreeSet<Pair>) -> String {
    let mut h = Sha256::new();
    for (tag, set) in [(b'A', a), (b'B', b)] {
        h.update([tag]);
        for (s, c) in set {
            h.update((s.0 as u64).to_le_bytes());
            h.update((c.0 as u64).to_le_bytes());
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn run(market: &Market, seed: u64, kind: AlgorithmKind) -> (Allocation, AlgorithmTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = match kind {
        AlgorithmKind::Reject => BTreeSet::new(),
        _ => initial_flip_set(market).pairs,
    };
    let mut b = match kind {
        AlgorithmKind::Flip => BTreeSet::new(),
        _ => initial_reject_set(market).pairs,
    };
    let mut trace = AlgorithmTrace {
        algorithm: kind,
        seed,
        iterations: Vec::new(),
    };
    let mut rols: Vec<RankOrderList> = market.students().iter().map(|st| st.rol.clone()).collect();
    let mut edited: BTreeSet<StudentIx> = a.iter().chain(&b).map(|p| p.0).collect();
    loop {
        for &s in &edited {
            rols[s.0] = modified_rol(market, s, &a, &b).expect("pairs come from the original market");
        }
        edited.clear();
        let y = sp_da_with_rols(market, &rols);
        let summary = certain_blocking_summary(market, &y);
        let state = y.iter().filter(|k| k.terms == Terms::StateFunded).count();
        let mut it = Iteration {
            snapshot: snapshot(&a, &b),
            flip_pairs: a.len(),
            reject_pairs: b.len(),
            assigned: y.len(),
            state_funded: state,
            self_funded: y.len() - state,
            certainly_stable: summary.stable(),
            witnesses: summary.witnesses,
            removed: None,
        };
        if summary.stable() || (a.is_empty() && b.is_empty()) {
            trace.iterations.push(it);
            return (y, trace);
        }
        let union: BTreeSet<Pair> = a.union(&b).copied().collect();
        let ((s, c), reason) =
            select_removal(market, &summary.contracts_in, &union, &mut rng).expect("union is nonempty");
        edited.insert(s);
        let mut from = Vec::new();
        if a.remove(&(s, c)) {
            from.push(PairKind::Flip);
        }
        if b.remove(&(s, c)) {
            from.push(PairKind::Reject);
        }
        it.removed = Some(RemovedPair {
            student: market.student(s).id.to_string(),
            college: market.college(c).id.to_string(),
            from,
            reason,
        });
        trace.iterations.push(it);
    }
}
