//! Student-proposing (SP-DA) and student-receiving (SR-DA) deferred
//! acceptance, run round by round over contracts.

use serde::{Deserialize, Serialize};

use crate::allocation::{terms_slot, Allocation};
use crate::market::{CollegeIx, Contract, Market, RankOrderList, StudentIx, Terms};
use crate::related::related_market;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposer {
    Students,
    Colleges,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaRound {
    /// Contracts proposed for the first time in this round.
    pub proposals: Vec<Contract>,
    pub rejections: Vec<Contract>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaTrace {
    pub proposer: Proposer,
    pub rounds: Vec<DaRound>,
}

pub fn sp_da(market: &Market) -> Allocation {
    run_sp_da(market, false).0
}

pub fn sp_da_traced(market: &Market) -> (Allocation, DaTrace) {
    let (y, rounds) = run_sp_da(market, true);
    (
        y,
        DaTrace {
            proposer: Proposer::Students,
            rounds,
        },
    )
}

/// SP-DA with every student's list replaced by `rols[s]`; colleges are
/// unchanged.
pub(crate) fn sp_da_with_rols(market: &Market, rols: &[RankOrderList]) -> Allocation {
    run_sp_da_on(market, |s| &rols[s.0], false).0
}

fn run_sp_da(market: &Market, trace: bool) -> (Allocation, Vec<DaRound>) {
    run_sp_da_on(market, |s| &market.student(s).rol, trace)
}

fn run_sp_da_on<'a>(market: &Market, rol_of: impl Fn(StudentIx) -> &'a RankOrderList, trace: bool) -> (Allocation, Vec<DaRound>) {
    let n = market.n_students();
    let mut next = vec![0usize; n];
    // held students per college and terms, best ranked first
    let mut held: Vec<[Vec<(u32, StudentIx)>; 2]> = vec![[Vec::new(), Vec::new()]; market.n_colleges()];
    let mut new_offers: Vec<[Vec<(u32, StudentIx)>; 2]> = vec![[Vec::new(), Vec::new()]; market.n_colleges()];
    let mut rounds = Vec::new();
    let mut touched: Vec<CollegeIx> = Vec::new();
    let mut free: Vec<StudentIx> = market.student_ixs().collect();
    let mut merged: Vec<(u32, StudentIx)> = Vec::new();
    loop {
        let mut round = DaRound::default();
        let mut rejected: Vec<StudentIx> = Vec::new();
        let mut proposed = false;
        touched.clear();
        for &s in &free {
            let Some(e) = rol_of(s).get(next[s.0]) else { continue };
            next[s.0] += 1;
            proposed = true;
            let k = Contract::new(s, e.college, e.terms);
            if trace {
                round.proposals.push(k);
            }
            let col = market.college(e.college);
            let Some(r) = col.rank_of(s) else {
                rejected.push(s);
                if trace {
                    round.rejections.push(k);
                }
                continue;
            };
            let slot = &mut new_offers[e.college.0];
            if slot[0].is_empty() && slot[1].is_empty() {
                touched.push(e.college);
            }
            slot[terms_slot(e.terms)].push((r, s));
        }
        if !proposed {
            break;
        }
        for &c in &touched {
            let col = market.college(c);
            for t in Terms::ALL {
                let i = terms_slot(t);
                let fresh = &mut new_offers[c.0][i];
                if fresh.is_empty() {
                    continue;
                }
                fresh.sort_unstable();
                let kept = &mut held[c.0][i];
                merged.clear();
                merged.reserve(kept.len() + fresh.len());
                let (mut a, mut b) = (0, 0);
                while a < kept.len() || b < fresh.len() {
                    if b == fresh.len() || (a < kept.len() && kept[a] < fresh[b]) {
                        merged.push(kept[a]);
                        a += 1;
                    } else {
                        merged.push(fresh[b]);
                        b += 1;
                    }
                }
                fresh.clear();
                let q = col.quota(t) as usize;
                for &(_, s) in merged.iter().skip(q) {
                    rejected.push(s);
                    if trace {
                        round.rejections.push(Contract::new(s, c, t));
                    }
                }
                merged.truncate(q);
                kept.clear();
                kept.extend_from_slice(&merged);
            }
        }
        if trace {
            round.rejections.sort_unstable();
            rounds.push(round);
        }
        rejected.sort_unstable();
        free = rejected;
    }
    let y = held
        .iter()
        .enumerate()
        .flat_map(|(c, per)| {
            Terms::ALL
                .into_iter()
                .flat_map(move |t| per[terms_slot(t)].iter().map(move |&(_, s)| Contract::new(s, CollegeIx(c), t)))
        })
        .collect();
    (y, rounds)
}

pub fn sr_da(market: &Market) -> Allocation {
    run_sr_da(market, false).0
}

pub fn sr_da_traced(market: &Market) -> (Allocation, DaTrace) {
    let (y, rounds) = run_sr_da(market, true);
    (
        y,
        DaTrace {
            proposer: Proposer::Colleges,
            rounds,
        },
    )
}

struct Window {
    college: CollegeIx,
    terms: Terms,
    quota: usize,
    next: usize,
    outstanding: Vec<StudentIx>,
}

fn run_sr_da(market: &Market, trace: bool) -> (Allocation, Vec<DaRound>) {
    let mut windows: Vec<Window> = market
        .college_ixs()
        .flat_map(|c| {
            Terms::ALL.map(|t| Window {
                college: c,
                terms: t,
                quota: market.college(c).quota(t) as usize,
                next: 0,
                outstanding: Vec::new(),
            })
        })
        .collect();
    // best offer each student currently holds, with its rank
    let mut holds: Vec<Option<(u32, Contract)>> = vec![None; market.n_students()];
    let mut rounds = Vec::new();
    loop {
        let mut round = DaRound::default();
        let mut fresh: Vec<Contract> = Vec::new();
        for w in windows.iter_mut() {
            let ranking = &market.college(w.college).ranking;
            while w.outstanding.len() < w.quota {
                let Some(&s) = ranking.get(w.next) else { break };
                w.next += 1;
                w.outstanding.push(s);
                fresh.push(Contract::new(s, w.college, w.terms));
            }
        }
        let mut rejected: Vec<Contract> = Vec::new();
        for k in &fresh {
            let r = market.contract_rank(k);
            if !r.is_acceptable() {
                rejected.push(*k);
                continue;
            }
            let slot = &mut holds[k.student.0];
            match *slot {
                Some((held_rank, _)) if held_rank < r.0 => rejected.push(*k),
                Some((_, held)) => {
                    rejected.push(held);
                    *slot = Some((r.0, *k));
                }
                None => *slot = Some((r.0, *k)),
            }
        }
        for k in &rejected {
            let w = &mut windows[2 * k.college.0 + terms_slot(k.terms)];
            if let Some(i) = w.outstanding.iter().position(|s| *s == k.student) {
                w.outstanding.swap_remove(i);
            }
        }
        let done = rejected.is_empty();
        if trace && !fresh.is_empty() {
            fresh.sort_unstable();
            rejected.sort_unstable();
            round.proposals = fresh;
            round.rejections = rejected;
            rounds.push(round);
        }
        if done {
            break;
        }
    }
    (holds.into_iter().flatten().map(|(_, k)| k).collect(), rounds)
}

/// College-proposing deferred acceptance in the related market, mapped back.
pub fn sr_da_via_related(market: &Market) -> Allocation {
    let rm = related_market(market);
    rm.corresponding_allocation(&rm.college_proposing_da())
        .expect("related matchings are well formed")
}

/// Student-proposing deferred acceptance in the related market, mapped back.
pub fn sp_da_via_related(market: &Market) -> Allocation {
    let rm = related_market(market);
    rm.corresponding_allocation(&rm.student_proposing_da())
        .expect("related matchings are well formed")
}
