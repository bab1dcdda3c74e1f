//! Who wins and who loses when one allocation replaces another, and how
//! the change moves students geographically.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::market::{Contract, Market, StudentId, StudentIx, Terms};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    Winner,
    Loser,
    Unchanged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    NewlyAssigned,
    NewProgram,
    SameProgramBetterTerms,
    NewlyUnassigned,
    SameProgramWorseTerms,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub student: StudentId,
    pub class: OutcomeClass,
    pub category: Category,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("allocation names student index {0}, market has {1} students")]
    UnknownStudent(usize, usize),
    #[error("allocation names college index {0}, market has {1} colleges")]
    UnknownCollege(usize, usize),
    #[error("{0} records for {1} students")]
    RecordCount(usize, usize),
}

fn check_ids(market: &Market, y: &Allocation) -> Result<(), AnalysisError> {
    for k in y {
        if k.student.0 >= market.n_students() {
            return Err(AnalysisError::UnknownStudent(k.student.0, market.n_students()));
        }
        if k.college.0 >= market.n_colleges() {
            return Err(AnalysisError::UnknownCollege(k.college.0, market.n_colleges()));
        }
    }
    Ok(())
}

/// Compares each student's two assignments by her own ranking. A move to a
/// different college is `NewProgram` whatever the terms.
pub fn classify_outcomes(market: &Market, baseline: &Allocation, alternate: &Allocation) -> Result<Vec<OutcomeRecord>, AnalysisError> {
    check_ids(market, baseline)?;
    check_ids(market, alternate)?;
    let base = baseline.by_student(market.n_students());
    let alt = alternate.by_student(market.n_students());
    let rank = |s: StudentIx, k: Option<Contract>| market.student_rank(s, k.map(|k| (k.college, k.terms)));
    Ok(market
        .student_ixs()
        .map(|s| {
            let (b, a) = (base[s.0], alt[s.0]);
            let (rb, ra) = (rank(s, b), rank(s, a));
            let (class, category) = if b == a || rb == ra {
                (OutcomeClass::Unchanged, Category::None)
            } else {
                let better = ra < rb;
                let category = match (b, a) {
                    (None, Some(_)) => Category::NewlyAssigned,
                    (Some(_), None) => Category::NewlyUnassigned,
                    (Some(kb), Some(ka)) if kb.college != ka.college => Category::NewProgram,
                    _ if better => Category::SameProgramBetterTerms,
                    _ => Category::SameProgramWorseTerms,
                };
                (if better { OutcomeClass::Winner } else { OutcomeClass::Loser }, category)
            };
            OutcomeRecord {
                student: market.student(s).id.clone(),
                class,
                category,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedCounts {
    pub assigned: usize,
    pub state_funded: usize,
    pub self_funded: usize,
    /// Self-funded contracts at colleges marked full-time; colleges without
    /// the attribute are not counted.
    pub self_funded_full_time: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinnerCounts {
    pub total: usize,
    pub newly_assigned: usize,
    pub new_program: usize,
    pub same_program_better_terms: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoserCounts {
    pub total: usize,
    pub newly_unassigned: usize,
    pub new_program: usize,
    pub same_program_worse_terms: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: AssignedCounts,
    pub alternate: AssignedCounts,
    pub winners: WinnerCounts,
    pub losers: LoserCounts,
    pub unchanged: usize,
}

fn assigned_counts(market: &Market, y: &Allocation) -> AssignedCounts {
    let mut c = AssignedCounts::default();
    for k in y {
        c.assigned += 1;
        match k.terms {
            Terms::StateFunded => c.state_funded += 1,
            Terms::SelfFunded => {
                c.self_funded += 1;
                let full_time = market.college(k.college).attributes.as_ref().and_then(|a| a.full_time);
                if full_time == Some(true) {
                    c.self_funded_full_time += 1;
                }
            }
        }
    }
    c
}

pub fn summarize_comparison(
    market: &Market,
    records: &[OutcomeRecord],
    baseline: &Allocation,
    alternate: &Allocation,
) -> Result<ComparisonReport, AnalysisError> {
    if records.len() != market.n_students() {
        return Err(AnalysisError::RecordCount(records.len(), market.n_students()));
    }
    check_ids(market, baseline)?;
    check_ids(market, alternate)?;
    let mut r = ComparisonReport {
        baseline: assigned_counts(market, baseline),
        alternate: assigned_counts(market, alternate),
        ..Default::default()
    };
    for rec in records {
        match rec.class {
            OutcomeClass::Unchanged => r.unchanged += 1,
            OutcomeClass::Winner => {
                r.winners.total += 1;
                match rec.category {
                    Category::NewlyAssigned => r.winners.newly_assigned += 1,
                    Category::NewProgram => r.winners.new_program += 1,
                    _ => r.winners.same_program_better_terms += 1,
                }
            }
            OutcomeClass::Loser => {
                r.losers.total += 1;
                match rec.category {
                    Category::NewlyUnassigned => r.losers.newly_unassigned += 1,
                    Category::NewProgram => r.losers.new_program += 1,
                    _ => r.losers.same_program_worse_terms += 1,
                }
            }
        }
    }
    Ok(r)
}

/// Mobility counts over some group of students under one allocation. Each
/// metric only counts students whose attributes it needs are present;
/// `excluded` counts assigned students missing any of them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityCounts {
    pub students: usize,
    pub movers: usize,
    pub periphery: usize,
    pub moved_to_capital: usize,
    pub excluded: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityPair {
    pub baseline: MobilityCounts,
    pub alternate: MobilityCounts,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityReport {
    pub total: MobilityPair,
    pub winners_newly_assigned: MobilityCounts,
    pub winners_new_program: MobilityPair,
    pub losers_newly_unassigned: MobilityCounts,
    pub losers_new_program: MobilityPair,
}

fn mobility(market: &Market, y: &[Option<Contract>], group: impl Iterator<Item = StudentIx>) -> MobilityCounts {
    let mut m = MobilityCounts::default();
    for s in group {
        m.students += 1;
        let Some(k) = y[s.0] else { continue };
        let sa = market.student(s).attributes.as_ref();
        let ca = market.college(k.college).attributes.as_ref();
        let home = sa.and_then(|a| a.residence_county.as_deref());
        let lives_in_capital = sa.and_then(|a| a.lives_in_capital);
        let location = ca.and_then(|a| a.location_county.as_deref());
        let in_capital = ca.and_then(|a| a.in_capital);
        if let (Some(h), Some(l)) = (home, location) {
            m.movers += usize::from(h != l);
        }
        if let Some(cap) = in_capital {
            m.periphery += usize::from(!cap);
        }
        if let (Some(cap), Some(lives)) = (in_capital, lives_in_capital) {
            m.moved_to_capital += usize::from(cap && !lives);
        }
        if home.is_none() || location.is_none() || in_capital.is_none() || lives_in_capital.is_none() {
            m.excluded += 1;
        }
    }
    m
}

pub fn mobility_report(
    market: &Market,
    baseline: &Allocation,
    alternate: &Allocation,
    records: &[OutcomeRecord],
) -> Result<MobilityReport, AnalysisError> {
    if records.len() != market.n_students() {
        return Err(AnalysisError::RecordCount(records.len(), market.n_students()));
    }
    check_ids(market, baseline)?;
    check_ids(market, alternate)?;
    let base = baseline.by_student(market.n_students());
    let alt = alternate.by_student(market.n_students());
    let with = |class: OutcomeClass, cat: Category| -> Vec<StudentIx> {
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class == class && r.category == cat)
            .map(|(i, _)| StudentIx(i))
            .collect()
    };
    let pair = |g: &[StudentIx]| MobilityPair {
        baseline: mobility(market, &base, g.iter().copied()),
        alternate: mobility(market, &alt, g.iter().copied()),
    };
    let all: Vec<StudentIx> = market.student_ixs().collect();
    Ok(MobilityReport {
        total: pair(&all),
        winners_newly_assigned: mobility(market, &alt, with(OutcomeClass::Winner, Category::NewlyAssigned).into_iter()),
        winners_new_program: pair(&with(OutcomeClass::Winner, Category::NewProgram)),
        losers_newly_unassigned: mobility(market, &base, with(OutcomeClass::Loser, Category::NewlyUnassigned).into_iter()),
        losers_new_program: pair(&with(OutcomeClass::Loser, Category::NewProgram)),
    })
}

pub fn render_comparison(r: &ComparisonReport) -> String {
    let mut out = String::new();
    let row = |out: &mut String, name: &str, b: usize, a: usize| {
        writeln!(out, "{name:<34}{b:>10}{a:>10}{:>+10}", a as i64 - b as i64).expect("write to string");
    };
    writeln!(out, "{:<34}{:>10}{:>10}{:>10}", "assigned", "baseline", "alternate", "change").expect("write to string");
    row(&mut out, "  assigned to a contract", r.baseline.assigned, r.alternate.assigned);
    row(&mut out, "  state-funded", r.baseline.state_funded, r.alternate.state_funded);
    row(&mut out, "  self-funded", r.baseline.self_funded, r.alternate.self_funded);
    row(&mut out, "  self-funded, full-time", r.baseline.self_funded_full_time, r.alternate.self_funded_full_time);
    writeln!(out, "winners {}", r.winners.total).expect("write to string");
    writeln!(out, "  newly assigned {}", r.winners.newly_assigned).expect("write to string");
    writeln!(out, "  new program {}", r.winners.new_program).expect("write to string");
    writeln!(out, "  same program, preferred terms {}", r.winners.same_program_better_terms).expect("write to string");
    writeln!(out, "losers {}", r.losers.total).expect("write to string");
    writeln!(out, "  newly unassigned {}", r.losers.newly_unassigned).expect("write to string");
    writeln!(out, "  new program {}", r.losers.new_program).expect("write to string");
    writeln!(out, "  same program, worse terms {}", r.losers.same_program_worse_terms).expect("write to string");
    writeln!(out, "unchanged {}", r.unchanged).expect("write to string");
    out
}

pub fn render_mobility(r: &MobilityReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<30}{:>8}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
        "", "n", "mover", "mover", "periph", "periph", "capital", "capital"
    )
    .expect("write to string");
    writeln!(out, "{:<30}{:>8}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}", "", "", "base", "alt", "base", "alt", "base", "alt")
        .expect("write to string");
    let dash = "--".to_string();
    let cell = |m: Option<&MobilityCounts>, f: fn(&MobilityCounts) -> usize| m.map(|m| f(m).to_string()).unwrap_or(dash.clone());
    let mut row = |name: &str, b: Option<&MobilityCounts>, a: Option<&MobilityCounts>| {
        let n = b.or(a).map(|m| m.students).unwrap_or(0);
        writeln!(
            out,
            "{name:<30}{n:>8}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
            cell(b, |m| m.movers),
            cell(a, |m| m.movers),
            cell(b, |m| m.periphery),
            cell(a, |m| m.periphery),
            cell(b, |m| m.moved_to_capital),
            cell(a, |m| m.moved_to_capital),
        )
        .expect("write to string");
    };
    row("all assigned", Some(&r.total.baseline), Some(&r.total.alternate));
    row("winners: newly assigned", None, Some(&r.winners_newly_assigned));
    row("winners: new program", Some(&r.winners_new_program.baseline), Some(&r.winners_new_program.alternate));
    row("losers: newly unassigned", Some(&r.losers_newly_unassigned), None);
    row("losers: new program", Some(&r.losers_new_program.baseline), Some(&r.losers_new_program.alternate));
    writeln!(out, "excluded for missing attributes: baseline {} alternate {}", r.total.baseline.excluded, r.total.alternate.excluded)
        .expect("write to string");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocation_from_ids;
    use crate::da::sp_da;
    use crate::fixtures;
    use crate::market::{CollegeAttributes, StudentAttributes};
    use Terms::*;

    fn class_of<'a>(recs: &'a [OutcomeRecord], s: &str) -> (OutcomeClass, Category) {
        let r: &'a OutcomeRecord = recs.iter().find(|r| r.student.as_str() == s).unwrap();
        (r.class, r.category)
    }

    #[test]
    fn ex1_classification_and_summary() {
        let m = fixtures::ex1();
        let base = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        let alt = allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        let recs = classify_outcomes(&m, &base, &alt).unwrap();
        assert_eq!(class_of(&recs, "p"), (OutcomeClass::Winner, Category::NewlyAssigned));
        assert_eq!(class_of(&recs, "r"), (OutcomeClass::Loser, Category::SameProgramWorseTerms));
        let rep = summarize_comparison(&m, &recs, &base, &alt).unwrap();
        assert_eq!((rep.baseline.assigned, rep.alternate.assigned), (1, 2));
        assert_eq!(rep.winners.total, 1);
        assert_eq!(rep.winners.newly_assigned, 1);
        assert_eq!(rep.losers.total, 1);
        assert_eq!(rep.losers.same_program_worse_terms, 1);
    }

    #[test]
    fn identical_allocations_change_nothing() {
        let m = fixtures::ex2();
        let y = sp_da(&m);
        let recs = classify_outcomes(&m, &y, &y).unwrap();
        assert!(recs.iter().all(|r| r.class == OutcomeClass::Unchanged && r.category == Category::None));
        let rep = summarize_comparison(&m, &recs, &y, &y).unwrap();
        assert_eq!((rep.winners.total, rep.losers.total), (0, 0));
    }

    #[test]
    fn ex2_classification() {
        let m = fixtures::ex2();
        let base = sp_da(&m);
        let alt = allocation_from_ids(&m, &[("r", "h", SelfFunded), ("p", "h", StateFunded)]);
        let recs = classify_outcomes(&m, &base, &alt).unwrap();
        assert_eq!(class_of(&recs, "g"), (OutcomeClass::Loser, Category::NewlyUnassigned));
        assert_eq!(class_of(&recs, "p"), (OutcomeClass::Winner, Category::NewProgram));
        assert_eq!(class_of(&recs, "r"), (OutcomeClass::Loser, Category::SameProgramWorseTerms));
        let rep = summarize_comparison(&m, &recs, &base, &alt).unwrap();
        assert_eq!((rep.baseline.assigned, rep.alternate.assigned), (3, 2));
        assert_eq!((rep.winners.total, rep.losers.total), (1, 2));
    }

    fn with_attributes(m: &Market, home: &[(&str, &str, bool)], colleges: &[(&str, &str, bool)]) -> Market {
        let mut raw = m.to_raw();
        for s in raw.students.iter_mut() {
            if let Some(&(_, county, cap)) = home.iter().find(|h| h.0 == s.id) {
                s.attributes = Some(StudentAttributes {
                    residence_county: Some(county.into()),
                    lives_in_capital: Some(cap),
                    ..Default::default()
                });
            }
        }
        for c in raw.colleges.iter_mut() {
            if let Some(&(_, county, cap)) = colleges.iter().find(|h| h.0 == c.id) {
                c.attributes = Some(CollegeAttributes {
                    location_county: Some(county.into()),
                    in_capital: Some(cap),
                    full_time: Some(true),
                });
            }
        }
        Market::validate(raw).unwrap()
    }

    #[test]
    fn ex1_moves_to_capital() {
        let m = with_attributes(&fixtures::ex1(), &[("r", "a", false), ("p", "a", false)], &[("c", "cap", true)]);
        let base = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        let alt = allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        let recs = classify_outcomes(&m, &base, &alt).unwrap();
        let rep = mobility_report(&m, &base, &alt, &recs).unwrap();
        assert_eq!((rep.total.baseline.moved_to_capital, rep.total.alternate.moved_to_capital), (1, 2));
        assert_eq!((rep.total.baseline.movers, rep.total.alternate.movers), (1, 2));
        assert_eq!(rep.total.alternate.periphery, 0);
        assert_eq!(rep.winners_newly_assigned.moved_to_capital, 1);
        let summary = summarize_comparison(&m, &recs, &base, &alt).unwrap();
        assert_eq!(summary.alternate.self_funded_full_time, 1);
    }

    #[test]
    fn one_county_has_no_movers() {
        let m = with_attributes(&fixtures::ex1(), &[("r", "a", false), ("p", "a", false)], &[("c", "a", false)]);
        let y = allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        let recs = classify_outcomes(&m, &y, &y).unwrap();
        let rep = mobility_report(&m, &y, &y, &recs).unwrap();
        assert_eq!((rep.total.baseline.movers, rep.total.alternate.movers), (0, 0));
        assert_eq!(rep.total.baseline.periphery, 2);
    }

    #[test]
    fn peripheral_mover() {
        let m = with_attributes(&fixtures::ex1(), &[("r", "x", false)], &[("c", "y", false)]);
        let y = allocation_from_ids(&m, &[("r", "c", StateFunded)]);
        let recs = classify_outcomes(&m, &Allocation::new(), &y).unwrap();
        let rep = mobility_report(&m, &Allocation::new(), &y, &recs).unwrap();
        assert_eq!(rep.total.alternate.movers, 1);
        assert_eq!(rep.total.alternate.periphery, 1);
        assert_eq!(rep.total.alternate.moved_to_capital, 0);
    }

    #[test]
    fn missing_attributes_are_excluded() {
        let m = fixtures::ex1();
        let y = sp_da(&m);
        let recs = classify_outcomes(&m, &y, &y).unwrap();
        let rep = mobility_report(&m, &y, &y, &recs).unwrap();
        assert_eq!(rep.total.baseline.excluded, 1);
        assert_eq!(rep.total.baseline.movers, 0);
    }

    #[test]
    fn rendering_mentions_every_row() {
        let m = fixtures::ex1();
        let base = sp_da(&m);
        let alt = allocation_from_ids(&m, &[("r", "c", SelfFunded), ("p", "c", StateFunded)]);
        let recs = classify_outcomes(&m, &base, &alt).unwrap();
        let text = render_comparison(&summarize_comparison(&m, &recs, &base, &alt).unwrap());
        assert!(text.contains("winners 1"));
        assert!(text.contains("losers 1"));
        let text = render_mobility(&mobility_report(&m, &base, &alt, &recs).unwrap());
        assert!(text.contains("losers: new program"));
    }
}
