//! Choice behaviour of both sides.
//!
//! A college's preference over bundles of its own contracts is compared in
//! two stages: first the cohort (students sorted by the college ranking,
//! compared position by position, a student beats an empty slot), then, for
//! identical cohorts, the funding distribution read in the same order with
//! the college's [`FundingPolicy`] deciding the first differing position.
//!
//! Three routes compute the chosen bundle:
//! * [`college_choice_streamlined`] handles offers with one contract per
//!   student, which is all deferred acceptance ever produces.
//! * [`college_choice`] is exact on any input. It picks the cohort greedily
//!   (the feasible cohorts form a matroid) and then fixes terms top-down.
//! * [`college_choice_exact`] enumerates every admissible bundle. It is
//!   exponential and bounded by a size limit.

use std::cmp::Ordering;

use thiserror::Error;

use crate::market::{College, CollegeIx, Contract, Market, StudentIx, Terms};

/// Default bound on the number of contracts `college_choice_exact` accepts.
pub const DEFAULT_EXACT_LIMIT: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ChoiceError {
    #[error("student {0:?} appears in more than one offer")]
    DuplicateStudent(StudentIx),
    #[error("offer names college {found:?}, expected {expected:?}")]
    WrongCollege { expected: CollegeIx, found: CollegeIx },
    #[error("{size} contracts exceed the exhaustive-choice limit of {limit}")]
    TooLarge { size: usize, limit: usize },
}

/// The student's most preferred acceptable contract among `contracts`.
pub fn student_choice<'a>(
    market: &Market,
    s: StudentIx,
    contracts: impl IntoIterator<Item = &'a Contract>,
) -> Option<Contract> {
    contracts
        .into_iter()
        .filter(|k| k.student == s)
        .map(|k| (market.contract_rank(k), *k))
        .filter(|(r, _)| r.is_acceptable())
        .min_by_key(|(r, _)| *r)
        .map(|(_, k)| k)
}

/// Per-terms top-`q` selection for offers with distinct students.
pub fn college_choice_streamlined(
    market: &Market,
    c: CollegeIx,
    offers: &[Contract],
) -> Result<Vec<Contract>, ChoiceError> {
    let college = market.college(c);
    let mut seen = std::collections::HashSet::with_capacity(offers.len());
    for k in offers {
        if k.college != c {
            return Err(ChoiceError::WrongCollege { expected: c, found: k.college });
        }
        if !seen.insert(k.student) {
            return Err(ChoiceError::DuplicateStudent(k.student));
        }
    }
    let mut chosen = Vec::new();
    for t in Terms::ALL {
        let mut pool: Vec<(u32, Contract)> = offers
            .iter()
            .filter(|k| k.terms == t)
            .filter_map(|k| college.rank_of(k.student).map(|r| (r, *k)))
            .collect();
        pool.sort_unstable_by_key(|(r, _)| *r);
        chosen.extend(pool.into_iter().take(college.quota(t) as usize).map(|(_, k)| k));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Clone, Copy, Debug, Default)]
struct Options {
    state: bool,
    selff: bool,
}

impl Options {
    fn allows(self, t: Terms) -> bool {
        match t {
            Terms::StateFunded => self.state,
            Terms::SelfFunded => self.selff,
        }
    }
}

/// Can students with the given term options be seated within the capacities?
/// With two terms Hall's condition reduces to three counts.
fn seatable(opts: impl Iterator<Item = Options>, cap_state: u32, cap_self: u32) -> bool {
    let (mut only_state, mut only_self, mut total) = (0u32, 0u32, 0u32);
    for o in opts {
        total += 1;
        match (o.state, o.selff) {
            (true, false) => only_state += 1,
            (false, true) => only_self += 1,
            (true, true) => {}
            (false, false) => return false,
        }
    }
    only_state <= cap_state && only_self <= cap_self && total <= cap_state + cap_self
}

/// Exact choice from any set of contracts; contracts naming other colleges
/// are ignored. Output is in canonical order.
pub fn college_choice(market: &Market, c: CollegeIx, contracts: &[Contract]) -> Vec<Contract> {
    let college = market.college(c);
    let mut by_student: Vec<(u32, StudentIx, Options)> = Vec::new();
    for k in contracts.iter().filter(|k| k.college == c) {
        let Some(r) = college.rank_of(k.student) else { continue };
        let idx = match by_student.iter().position(|(_, s, _)| *s == k.student) {
            Some(i) => i,
            None => {
                by_student.push((r, k.student, Options::default()));
                by_student.len() - 1
            }
        };
        match k.terms {
            Terms::StateFunded => by_student[idx].2.state = true,
            Terms::SelfFunded => by_student[idx].2.selff = true,
        }
    }
    by_student.sort_unstable_by_key(|(r, _, _)| *r);

    // Cohort: greedy in ranking order.
    let mut cohort: Vec<(StudentIx, Options)> = Vec::new();
    for &(_, s, o) in &by_student {
        let fits = seatable(
            cohort.iter().map(|(_, o)| *o).chain(std::iter::once(o)),
            college.quota_state,
            college.quota_self,
        );
        if fits {
            cohort.push((s, o));
        }
    }

    // Terms: top-down, favoured terms whenever the rest can still be seated.
    let favoured = college.funding_policy.favoured();
    let (mut cap_state, mut cap_self) = (college.quota_state, college.quota_self);
    let mut chosen = Vec::with_capacity(cohort.len());
    for i in 0..cohort.len() {
        let (s, o) = cohort[i];
        let rest = || cohort[i + 1..].iter().map(|(_, o)| *o);
        let mut pick = None;
        for t in [favoured, favoured.opposite()] {
            if !o.allows(t) {
                continue;
            }
            let (cs, cf) = match t {
                Terms::StateFunded if cap_state > 0 => (cap_state - 1, cap_self),
                Terms::SelfFunded if cap_self > 0 => (cap_state, cap_self - 1),
                _ => continue,
            };
            if seatable(rest(), cs, cf) {
                pick = Some((t, cs, cf));
                break;
            }
        }
        let (t, cs, cf) = pick.expect("cohort was checked seatable");
        cap_state = cs;
        cap_self = cf;
        chosen.push(Contract::new(s, c, t));
    }
    chosen.sort_unstable();
    chosen
}

/// Exhaustive choice: enumerates every duplicate-free bundle within quotas
/// and keeps the best one under [`compare_bundles`].
pub fn college_choice_exact(
    market: &Market,
    c: CollegeIx,
    contracts: &[Contract],
    limit: usize,
) -> Result<Vec<Contract>, ChoiceError> {
    let college = market.college(c);
    let mine: Vec<Contract> = contracts.iter().filter(|k| k.college == c).copied().collect();
    if mine.len() > limit {
        return Err(ChoiceError::TooLarge { size: mine.len(), limit });
    }
    let mut groups: Vec<(StudentIx, Vec<Terms>)> = Vec::new();
    for k in mine.iter().filter(|k| college.accepts(k.student)) {
        match groups.iter_mut().find(|(s, _)| *s == k.student) {
            Some((_, ts)) => {
                if !ts.contains(&k.terms) {
                    ts.push(k.terms)
                }
            }
            None => groups.push((k.student, vec![k.terms])),
        }
    }

    struct Search<'a> {
        market: &'a Market,
        college: &'a College,
        c: CollegeIx,
        groups: &'a [(StudentIx, Vec<Terms>)],
        current: Vec<Contract>,
        best: Vec<Contract>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, n_state: u32, n_self: u32) {
            if i == self.groups.len() {
                if compare_bundles(self.market, self.c, &self.current, &self.best) == Ordering::Greater {
                    self.best = self.current.clone();
                }
                return;
            }
            self.go(i + 1, n_state, n_self);
            let (s, ts) = &self.groups[i];
            for &t in ts {
                let (ns, nf) = match t {
                    Terms::StateFunded => (n_state + 1, n_self),
                    Terms::SelfFunded => (n_state, n_self + 1),
                };
                if ns > self.college.quota_state || nf > self.college.quota_self {
                    continue;
                }
                self.current.push(Contract::new(*s, self.c, t));
                self.go(i + 1, ns, nf);
                self.current.pop();
            }
        }
    }
    let mut search = Search {
        market,
        college,
        c,
        groups: &groups,
        current: Vec::new(),
        best: Vec::new(),
    };
    search.go(0, 0, 0);
    let mut best = search.best;
    best.sort_unstable();
    Ok(best)
}

/// Whether a bundle of `c`'s contracts is acceptable to `c` at all: distinct
/// acceptable students within both quotas.
pub fn admissible(market: &Market, c: CollegeIx, bundle: &[Contract]) -> bool {
    let college = market.college(c);
    let mut students: Vec<StudentIx> = bundle.iter().map(|k| k.student).collect();
    students.sort_unstable();
    students.dedup();
    students.len() == bundle.len()
        && bundle.iter().all(|k| k.college == c && college.accepts(k.student))
        && bundle.iter().filter(|k| k.terms == Terms::StateFunded).count() <= college.quota_state as usize
        && bundle.iter().filter(|k| k.terms == Terms::SelfFunded).count() <= college.quota_self as usize
}

/// College `c`'s preference between two bundles; `Greater` means `a` is
/// preferred. Inadmissible bundles rank below every admissible one (the
/// college would rather drop them) and tie with each other.
pub fn compare_bundles(market: &Market, c: CollegeIx, a: &[Contract], b: &[Contract]) -> Ordering {
    match (admissible(market, c, a), admissible(market, c, b)) {
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        (false, false) => return Ordering::Equal,
        (true, true) => {}
    }
    let college = market.college(c);
    let key = |bundle: &[Contract]| {
        let mut v: Vec<(u32, Terms)> = bundle
            .iter()
            .map(|k| (college.rank_of(k.student).expect("admissible"), k.terms))
            .collect();
        v.sort_unstable_by_key(|(r, _)| *r);
        v
    };
    let (ka, kb) = (key(a), key(b));
    // Cohort: at the first differing slot the better-ranked student wins; a
    // student beats an empty slot.
    for i in 0..ka.len().max(kb.len()) {
        match (ka.get(i), kb.get(i)) {
            (Some((ra, _)), Some((rb, _))) if ra != rb => return rb.cmp(ra),
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            _ => {}
        }
    }
    let favoured = college.funding_policy.favoured();
    for ((_, ta), (_, tb)) in ka.iter().zip(&kb) {
        if ta != tb {
            return if *ta == favoured { Ordering::Greater } else { Ordering::Less };
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocation_from_ids;
    use crate::fixtures;
    use crate::market::FundingPolicy;
    use Terms::*;

    fn ks(m: &Market, triples: &[(&str, &str, Terms)]) -> Vec<Contract> {
        allocation_from_ids(m, triples).iter().copied().collect()
    }

    #[test]
    fn streamlined_ex1() {
        let m = fixtures::ex1();
        let c = m.college_ix("c").unwrap();
        let offers = ks(&m, &[("r", "c", StateFunded), ("p", "c", StateFunded)]);
        let got = college_choice_streamlined(&m, c, &offers).unwrap();
        assert_eq!(got, ks(&m, &[("r", "c", StateFunded)]));
        assert!(college_choice_streamlined(&m, c, &[]).unwrap().is_empty());
    }

    #[test]
    fn streamlined_ex2_keeps_both_terms() {
        let m = fixtures::ex2();
        let h = m.college_ix("h").unwrap();
        let offers = ks(&m, &[("r", "h", StateFunded), ("g", "h", SelfFunded)]);
        assert_eq!(college_choice_streamlined(&m, h, &offers).unwrap(), offers);
    }

    #[test]
    fn streamlined_rejects_duplicate_students() {
        let m = fixtures::ex1();
        let c = m.college_ix("c").unwrap();
        let offers = ks(&m, &[("r", "c", StateFunded), ("r", "c", SelfFunded)]);
        assert!(matches!(
            college_choice_streamlined(&m, c, &offers),
            Err(ChoiceError::DuplicateStudent(_))
        ));
    }

    #[test]
    fn exact_ex1_policies() {
        let m = fixtures::ex1();
        let c = m.college_ix("c").unwrap();
        let all = ks(
            &m,
            &[("r", "c", StateFunded), ("r", "c", SelfFunded), ("p", "c", StateFunded), ("p", "c", SelfFunded)],
        );
        let inverse = college_choice_exact(&m, c, &all, DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(inverse, ks(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]));
        let merit_m = m.with_funding_policy(FundingPolicy::Merit);
        let merit = college_choice_exact(&merit_m, c, &all, DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(merit, ks(&m, &[("r", "c", StateFunded), ("p", "c", SelfFunded)]));
        assert_eq!(college_choice(&m, c, &all), inverse);
        assert_eq!(college_choice(&merit_m, c, &all), merit);
    }

    #[test]
    fn ex1_full_preference_order() {
        // {(r,0),(p,1)} > {(r,1),(p,0)} > {(r,0)} > {(r,1)} > {(p,0)} > {(p,1)}
        let m = fixtures::ex1();
        let c = m.college_ix("c").unwrap();
        let order = [
            ks(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]),
            ks(&m, &[("r", "c", StateFunded), ("p", "c", SelfFunded)]),
            ks(&m, &[("r", "c", SelfFunded)]),
            ks(&m, &[("r", "c", StateFunded)]),
            ks(&m, &[("p", "c", SelfFunded)]),
            ks(&m, &[("p", "c", StateFunded)]),
            vec![],
        ];
        for w in order.windows(2) {
            assert_eq!(compare_bundles(&m, c, &w[0], &w[1]), Ordering::Greater);
            assert_eq!(compare_bundles(&m, c, &w[1], &w[0]), Ordering::Less);
        }
        let over = ks(&m, &[("r", "c", StateFunded), ("p", "c", StateFunded)]);
        assert_eq!(compare_bundles(&m, c, &[], &over), Ordering::Greater);
    }

    #[test]
    fn single_acceptable_offer_is_taken() {
        let m = fixtures::ex2();
        let c = m.college_ix("c").unwrap();
        let offer = ks(&m, &[("g", "c", StateFunded)]);
        assert_eq!(college_choice_exact(&m, c, &offer, DEFAULT_EXACT_LIMIT).unwrap(), offer);
        assert_eq!(college_choice(&m, c, &offer), offer);
    }

    #[test]
    fn exact_enforces_limit() {
        let m = fixtures::ex1();
        let c = m.college_ix("c").unwrap();
        let all = ks(&m, &[("r", "c", StateFunded), ("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        assert_eq!(
            college_choice_exact(&m, c, &all, 2),
            Err(ChoiceError::TooLarge { size: 3, limit: 2 })
        );
    }

    #[test]
    fn student_choice_picks_best_acceptable() {
        let m = fixtures::ex1();
        let p = m.student_ix("p").unwrap();
        let r = m.student_ix("r").unwrap();
        let all = ks(&m, &[("r", "c", StateFunded), ("r", "c", SelfFunded), ("p", "c", SelfFunded)]);
        let c = m.college_ix("c").unwrap();
        assert_eq!(student_choice(&m, r, &all), Some(Contract::new(r, c, StateFunded)));
        assert_eq!(student_choice(&m, p, &all), None);
    }
}
