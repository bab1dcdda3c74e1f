//! Market data model: students with rank-order lists over contracts, colleges
//! with per-terms quotas and a merit ranking.
//!
//! Students and colleges are stored sorted by id, so index order is the
//! canonical serialization order used everywhere else in the crate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Financial terms of a contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Terms {
    /// Tuition-paying admission, serialized as `0`.
    SelfFunded,
    /// Tuition-free admission, serialized as `1`.
    StateFunded,
}

impl Terms {
    /// State first, matching how the two auxiliary programs are laid out.
    pub const ALL: [Terms; 2] = [Terms::StateFunded, Terms::SelfFunded];

    pub fn bit(self) -> u8 {
        match self {
            Terms::SelfFunded => 0,
            Terms::StateFunded => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Terms> {
        match bit {
            0 => Some(Terms::SelfFunded),
            1 => Some(Terms::StateFunded),
            _ => None,
        }
    }

    pub fn opposite(self) -> Terms {
        match self {
            Terms::SelfFunded => Terms::StateFunded,
            Terms::StateFunded => Terms::SelfFunded,
        }
    }
}

impl fmt::Display for Terms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

macro_rules! id_newtype {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

id_newtype!(StudentId);
id_newtype!(CollegeId);

/// Position of a student in [`Market::students`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StudentIx(pub usize);

/// Position of a college in [`Market::colleges`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CollegeIx(pub usize);

/// A `(student, college, terms)` triple.
///
/// The derived order (student, college, terms) is the canonical order for
/// allocations because indices follow id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Contract {
    pub student: StudentIx,
    pub college: CollegeIx,
    pub terms: Terms,
}

impl Contract {
    pub fn new(student: StudentIx, college: CollegeIx, terms: Terms) -> Self {
        Contract {
            student,
            college,
            terms,
        }
    }

    /// The same student and college under the other terms.
    pub fn retimed(self) -> Contract {
        Contract {
            terms: self.terms.opposite(),
            ..self
        }
    }
}

/// One entry of a rank-order list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RolEntry {
    pub college: CollegeIx,
    pub terms: Terms,
}

/// Ordered acceptable contracts, best first. The outside option sits
/// implicitly after the last entry.
pub type RankOrderList = Vec<RolEntry>;

/// How a college orders funding distributions over a fixed cohort.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum FundingPolicy {
    /// Walking the cohort from the top of the ranking, the first student
    /// whose terms differ should be state-funded.
    #[default]
    Merit,
    /// Walking the cohort from the top of the ranking, the first student
    /// whose terms differ should be self-funded; state seats drift towards
    /// lower-ranked students.
    InverseMerit,
}

impl FundingPolicy {
    /// Terms the policy favours at the first position where two
    /// distributions differ.
    pub fn favoured(self) -> Terms {
        match self {
            FundingPolicy::Merit => Terms::StateFunded,
            FundingPolicy::InverseMerit => Terms::SelfFunded,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FundingPolicy::Merit => "merit",
            FundingPolicy::InverseMerit => "inverse-merit",
        }
    }

    pub fn from_token(s: &str) -> Option<FundingPolicy> {
        match s {
            "merit" => Some(FundingPolicy::Merit),
            "inverse-merit" => Some(FundingPolicy::InverseMerit),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentAttributes {
    pub residence_county: Option<String>,
    pub lives_in_capital: Option<bool>,
    pub tags: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollegeAttributes {
    pub location_county: Option<String>,
    pub in_capital: Option<bool>,
    pub full_time: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Student {
    pub id: StudentId,
    pub rol: RankOrderList,
    pub attributes: Option<StudentAttributes>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct College {
    pub id: CollegeId,
    pub quota_state: u32,
    pub quota_self: u32,
    /// Acceptable students, best first.
    pub ranking: Vec<StudentIx>,
    pub funding_policy: FundingPolicy,
    pub attributes: Option<CollegeAttributes>,
    // position in `ranking` per student; u32::MAX = unacceptable
    rank_of: Vec<u32>,
}

impl College {
    pub fn quota(&self, terms: Terms) -> u32 {
        match terms {
            Terms::StateFunded => self.quota_state,
            Terms::SelfFunded => self.quota_self,
        }
    }

    /// Position of `s` in the ranking, `None` when unacceptable.
    pub fn rank_of(&self, s: StudentIx) -> Option<u32> {
        match self.rank_of.get(s.0) {
            Some(&r) if r != u32::MAX => Some(r),
            _ => None,
        }
    }

    pub fn accepts(&self, s: StudentIx) -> bool {
        self.rank_of(s).is_some()
    }

    /// `a` is ranked strictly above `b`.
    pub fn ranks_above(&self, a: StudentIx, b: StudentIx) -> bool {
        match (self.rank_of(a), self.rank_of(b)) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Position of a contract in a student's preference order.
///
/// `0` is the top of the rank-order list, the outside option sits at the list
/// length and unacceptable contracts are [`Rank::UNACCEPTABLE`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rank(pub u32);

impl Rank {
    pub const UNACCEPTABLE: Rank = Rank(u32::MAX);

    pub fn is_acceptable(self) -> bool {
        self != Rank::UNACCEPTABLE
    }
}

/// Machine-readable validation error codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationCode {
    EmptyId,
    DuplicateStudentId,
    DuplicateCollegeId,
    DanglingCollegeRef,
    DanglingStudentRef,
    DuplicateRolEntry,
    DuplicateRankingEntry,
    NegativeQuota,
    InconsistentCapital,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationCode::EmptyId => "EmptyId",
            ValidationCode::DuplicateStudentId => "DuplicateStudentId",
            ValidationCode::DuplicateCollegeId => "DuplicateCollegeId",
            ValidationCode::DanglingCollegeRef => "DanglingCollegeRef",
            ValidationCode::DanglingStudentRef => "DanglingStudentRef",
            ValidationCode::DuplicateRolEntry => "DuplicateRolEntry",
            ValidationCode::DuplicateRankingEntry => "DuplicateRankingEntry",
            ValidationCode::NegativeQuota => "NegativeQuota",
            ValidationCode::InconsistentCapital => "InconsistentCapital",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{}: {id}: {detail}", code.as_str())]
pub struct ValidationError {
    pub code: ValidationCode,
    /// Offending student, college or county id.
    pub id: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid market ({} problems): {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl ValidationErrors {
    pub fn codes(&self) -> Vec<ValidationCode> {
        self.0.iter().map(|e| e.code).collect()
    }
}

/// Unvalidated market description, with string references.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMarket {
    pub students: Vec<RawStudent>,
    pub colleges: Vec<RawCollege>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStudent {
    pub id: String,
    pub rol: Vec<(String, Terms)>,
    pub attributes: Option<StudentAttributes>,
}

impl RawStudent {
    pub fn new(id: &str, rol: &[(&str, Terms)]) -> Self {
        RawStudent {
            id: id.to_string(),
            rol: rol.iter().map(|(c, t)| (c.to_string(), *t)).collect(),
            attributes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCollege {
    pub id: String,
    pub quota_state: i64,
    pub quota_self: i64,
    pub ranking: Vec<String>,
    pub funding_policy: FundingPolicy,
    pub attributes: Option<CollegeAttributes>,
}

impl RawCollege {
    pub fn new(id: &str, quota_state: i64, quota_self: i64, ranking: &[&str], policy: FundingPolicy) -> Self {
        RawCollege {
            id: id.to_string(),
            quota_state,
            quota_self,
            ranking: ranking.iter().map(|s| s.to_string()).collect(),
            funding_policy: policy,
            attributes: None,
        }
    }
}

/// A validated, immutable market.
///
/// Colleges sit behind an `Arc` so preference-modified copies (see
/// [`Market::with_rols`]) only clone the student side.
#[derive(Clone, Debug)]
pub struct Market {
    students: Vec<Student>,
    colleges: Arc<Vec<College>>,
    student_index: Arc<HashMap<String, StudentIx>>,
    college_index: Arc<HashMap<String, CollegeIx>>,
}

impl PartialEq for Market {
    fn eq(&self, other: &Self) -> bool {
        self.students == other.students && *self.colleges == *other.colleges
    }
}

impl Eq for Market {}

impl Market {
    pub fn empty() -> Market {
        Market::validate(RawMarket::default()).expect("empty market is valid")
    }

    /// Validates a raw description, collecting every violation found.
    pub fn validate(raw: RawMarket) -> Result<Market, ValidationErrors> {
        let mut errors = Vec::new();
        let mut err = |code, id: &str, detail: String| {
            errors.push(ValidationError {
                code,
                id: id.to_string(),
                detail,
            })
        };

        let mut student_ids: Vec<&str> = Vec::with_capacity(raw.students.len());
        let mut seen = HashSet::new();
        for s in &raw.students {
            if s.id.is_empty() {
                err(ValidationCode::EmptyId, "", "student with empty id".into());
            } else if !seen.insert(s.id.as_str()) {
                err(ValidationCode::DuplicateStudentId, &s.id, "student id listed twice".into());
            } else {
                student_ids.push(&s.id);
            }
        }
        let mut college_ids: Vec<&str> = Vec::with_capacity(raw.colleges.len());
        let mut seen = HashSet::new();
        for c in &raw.colleges {
            if c.id.is_empty() {
                err(ValidationCode::EmptyId, "", "college with empty id".into());
            } else if !seen.insert(c.id.as_str()) {
                err(ValidationCode::DuplicateCollegeId, &c.id, "college id listed twice".into());
            } else {
                college_ids.push(&c.id);
            }
        }
        student_ids.sort_unstable();
        college_ids.sort_unstable();
        let student_index: HashMap<String, StudentIx> = student_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), StudentIx(i)))
            .collect();
        let college_index: HashMap<String, CollegeIx> = college_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), CollegeIx(i)))
            .collect();

        let mut students: Vec<Option<Student>> = vec![None; student_ids.len()];
        for s in &raw.students {
            let Some(&ix) = student_index.get(&s.id) else { continue };
            if students[ix.0].is_some() {
                continue;
            }
            let mut rol = Vec::with_capacity(s.rol.len());
            let mut listed = HashSet::new();
            for (cid, terms) in &s.rol {
                match college_index.get(cid) {
                    None => err(
                        ValidationCode::DanglingCollegeRef,
                        &s.id,
                        format!("rank-order list names unknown college {cid}"),
                    ),
                    Some(&c) => {
                        if listed.insert((c, *terms)) {
                            rol.push(RolEntry { college: c, terms: *terms });
                        } else {
                            err(
                                ValidationCode::DuplicateRolEntry,
                                &s.id,
                                format!("{cid}:{terms} listed twice"),
                            );
                        }
                    }
                }
            }
            students[ix.0] = Some(Student {
                id: StudentId(s.id.clone()),
                rol,
                attributes: s.attributes.clone(),
            });
        }

        let n_students = student_ids.len();
        let mut colleges: Vec<Option<College>> = vec![None; college_ids.len()];
        for c in &raw.colleges {
            let Some(&ix) = college_index.get(&c.id) else { continue };
            if colleges[ix.0].is_some() {
                continue;
            }
            for (q, name) in [(c.quota_state, "state"), (c.quota_self, "self")] {
                if q < 0 {
                    err(ValidationCode::NegativeQuota, &c.id, format!("{name} quota is {q}"));
                }
            }
            let mut ranking = Vec::with_capacity(c.ranking.len());
            let mut rank_of = vec![u32::MAX; n_students];
            for sid in &c.ranking {
                match student_index.get(sid) {
                    None => err(
                        ValidationCode::DanglingStudentRef,
                        &c.id,
                        format!("ranking names unknown student {sid}"),
                    ),
                    Some(&s) => {
                        if rank_of[s.0] != u32::MAX {
                            err(
                                ValidationCode::DuplicateRankingEntry,
                                &c.id,
                                format!("student {sid} ranked twice"),
                            );
                        } else {
                            rank_of[s.0] = ranking.len() as u32;
                            ranking.push(s);
                        }
                    }
                }
            }
            colleges[ix.0] = Some(College {
                id: CollegeId(c.id.clone()),
                quota_state: c.quota_state.max(0) as u32,
                quota_self: c.quota_self.max(0) as u32,
                ranking,
                funding_policy: c.funding_policy,
                attributes: c.attributes.clone(),
                rank_of,
            });
        }

        // A county must be consistently flagged as the capital (or not).
        let mut capital_flag: BTreeMap<String, bool> = BTreeMap::new();
        let mut flagged = |county: &Option<String>, flag: Option<bool>, owner: &str, errs: &mut Vec<ValidationError>| {
            if let (Some(county), Some(flag)) = (county, flag) {
                match capital_flag.get(county.as_str()) {
                    Some(&prev) if prev != flag => errs.push(ValidationError {
                        code: ValidationCode::InconsistentCapital,
                        id: owner.to_string(),
                        detail: format!("county {county} flagged both as capital and not"),
                    }),
                    Some(_) => {}
                    None => {
                        capital_flag.insert(county.clone(), flag);
                    }
                }
            }
        };
        for s in &raw.students {
            if let Some(a) = &s.attributes {
                flagged(&a.residence_county, a.lives_in_capital, &s.id, &mut errors);
            }
        }
        for c in &raw.colleges {
            if let Some(a) = &c.attributes {
                flagged(&a.location_county, a.in_capital, &c.id, &mut errors);
            }
        }

        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }
        Ok(Market {
            students: students.into_iter().map(|s| s.expect("every id resolved")).collect(),
            colleges: Arc::new(colleges.into_iter().map(|c| c.expect("every id resolved")).collect()),
            student_index: Arc::new(student_index),
            college_index: Arc::new(college_index),
        })
    }

    /// Back to a raw description (sorted by id).
    pub fn to_raw(&self) -> RawMarket {
        RawMarket {
            students: self
                .students
                .iter()
                .map(|s| RawStudent {
                    id: s.id.0.clone(),
                    rol: s
                        .rol
                        .iter()
                        .map(|e| (self.college(e.college).id.0.clone(), e.terms))
                        .collect(),
                    attributes: s.attributes.clone(),
                })
                .collect(),
            colleges: self
                .colleges
                .iter()
                .map(|c| RawCollege {
                    id: c.id.0.clone(),
                    quota_state: c.quota_state as i64,
                    quota_self: c.quota_self as i64,
                    ranking: c.ranking.iter().map(|&s| self.student(s).id.0.clone()).collect(),
                    funding_policy: c.funding_policy,
                    attributes: c.attributes.clone(),
                })
                .collect(),
        }
    }

    pub fn students(&self) -> &[Student] {
        &self.students
    }

    pub fn colleges(&self) -> &[College] {
        &self.colleges
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn n_colleges(&self) -> usize {
        self.colleges.len()
    }

    pub fn student_ixs(&self) -> impl Iterator<Item = StudentIx> {
        (0..self.students.len()).map(StudentIx)
    }

    pub fn college_ixs(&self) -> impl Iterator<Item = CollegeIx> {
        (0..self.colleges.len()).map(CollegeIx)
    }

    pub fn student(&self, s: StudentIx) -> &Student {
        &self.students[s.0]
    }

    pub fn college(&self, c: CollegeIx) -> &College {
        &self.colleges[c.0]
    }

    pub fn student_ix(&self, id: &str) -> Option<StudentIx> {
        self.student_index.get(id).copied()
    }

    pub fn college_ix(&self, id: &str) -> Option<CollegeIx> {
        self.college_index.get(id).copied()
    }

    /// Like [`Market::student_rank`] but checked for the student id.
    pub fn student_rank_by_id(&self, id: &str, option: Option<(CollegeIx, Terms)>) -> Result<Rank, UnknownId> {
        let s = self.student_ix(id).ok_or_else(|| UnknownId::Student(id.to_string()))?;
        Ok(self.student_rank(s, option))
    }

    /// Rank of a contract (or the outside option, `None`) for student `s`.
    pub fn student_rank(&self, s: StudentIx, option: Option<(CollegeIx, Terms)>) -> Rank {
        let rol = &self.students[s.0].rol;
        match option {
            None => Rank(rol.len() as u32),
            Some((c, t)) => rol
                .iter()
                .position(|e| e.college == c && e.terms == t)
                .map_or(Rank::UNACCEPTABLE, |p| Rank(p as u32)),
        }
    }

    pub fn contract_rank(&self, k: &Contract) -> Rank {
        self.student_rank(k.student, Some((k.college, k.terms)))
    }

    pub fn student_accepts(&self, k: &Contract) -> bool {
        self.contract_rank(k).is_acceptable()
    }

    /// Human-readable `student,college,terms`.
    pub fn display_contract(&self, k: &Contract) -> String {
        format!("{},{},{}", self.student(k.student).id, self.college(k.college).id, k.terms)
    }

    /// A copy of this market with some rank-order lists replaced. Colleges
    /// are shared with the original.
    pub fn with_rols(&self, changes: impl IntoIterator<Item = (StudentIx, RankOrderList)>) -> Market {
        let mut students = self.students.clone();
        for (s, rol) in changes {
            students[s.0].rol = rol;
        }
        Market {
            students,
            colleges: Arc::clone(&self.colleges),
            student_index: Arc::clone(&self.student_index),
            college_index: Arc::clone(&self.college_index),
        }
    }

    /// A copy with every college's funding policy replaced.
    pub fn with_funding_policy(&self, policy: FundingPolicy) -> Market {
        let mut raw = self.to_raw();
        for c in &mut raw.colleges {
            c.funding_policy = policy;
        }
        Market::validate(raw).expect("policy change keeps the market valid")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UnknownId {
    #[error("unknown student {0}")]
    Student(String),
    #[error("unknown college {0}")]
    College(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn ex1_validates() {
        let m = fixtures::ex1();
        assert_eq!(m.n_students(), 2);
        assert_eq!(m.n_colleges(), 1);
        // sorted by id
        assert_eq!(m.student(StudentIx(0)).id.as_str(), "p");
        assert_eq!(m.student(StudentIx(1)).id.as_str(), "r");
    }

    #[test]
    fn empty_market_is_valid() {
        let m = Market::validate(RawMarket::default()).unwrap();
        assert_eq!(m.n_students(), 0);
        assert_eq!(m.n_colleges(), 0);
    }

    #[test]
    fn dangling_college_reference() {
        let raw = RawMarket {
            students: vec![RawStudent::new("a", &[("nowhere", Terms::StateFunded)])],
            colleges: vec![],
        };
        let errs = Market::validate(raw).unwrap_err();
        assert_eq!(errs.codes(), vec![ValidationCode::DanglingCollegeRef]);
        assert_eq!(errs.0[0].id, "a");
    }

    #[test]
    fn every_violation_is_reported() {
        let raw = RawMarket {
            students: vec![
                RawStudent::new("a", &[("c", Terms::StateFunded), ("c", Terms::StateFunded)]),
                RawStudent::new("a", &[]),
            ],
            colleges: vec![RawCollege::new("c", -1, 0, &["a", "a", "zz"], FundingPolicy::Merit)],
        };
        let mut codes = Market::validate(raw).unwrap_err().codes();
        codes.sort_by_key(|c| c.as_str());
        assert_eq!(
            codes,
            vec![
                ValidationCode::DanglingStudentRef,
                ValidationCode::DuplicateRankingEntry,
                ValidationCode::DuplicateRolEntry,
                ValidationCode::DuplicateStudentId,
                ValidationCode::NegativeQuota,
            ]
        );
    }

    #[test]
    fn inconsistent_capital_flag() {
        let mut a = RawStudent::new("a", &[]);
        a.attributes = Some(StudentAttributes {
            residence_county: Some("X".into()),
            lives_in_capital: Some(true),
            ..Default::default()
        });
        let mut c = RawCollege::new("c", 1, 1, &[], FundingPolicy::Merit);
        c.attributes = Some(CollegeAttributes {
            location_county: Some("X".into()),
            in_capital: Some(false),
            full_time: None,
        });
        let errs = Market::validate(RawMarket { students: vec![a], colleges: vec![c] }).unwrap_err();
        assert_eq!(errs.codes(), vec![ValidationCode::InconsistentCapital]);
    }

    #[test]
    fn student_ranks_in_ex1() {
        let m = fixtures::ex1();
        let r = m.student_ix("r").unwrap();
        let p = m.student_ix("p").unwrap();
        let c = m.college_ix("c").unwrap();
        assert_eq!(m.student_rank(r, Some((c, Terms::StateFunded))), Rank(0));
        assert_eq!(m.student_rank(p, Some((c, Terms::SelfFunded))), Rank::UNACCEPTABLE);
        assert_eq!(m.student_rank(r, None), Rank(2));
        assert!(m.student_rank_by_id("nobody", None).is_err());
    }

    #[test]
    fn unacceptable_ranks_below_outside_option() {
        let m = fixtures::ex2();
        for s in m.student_ixs() {
            let outside = m.student_rank(s, None);
            for c in m.college_ixs() {
                for t in Terms::ALL {
                    let r = m.student_rank(s, Some((c, t)));
                    assert_ne!(r, outside);
                    if !r.is_acceptable() {
                        assert!(r > outside);
                    }
                }
            }
        }
    }

    #[test]
    fn raw_round_trip() {
        let m = fixtures::ex2();
        assert_eq!(Market::validate(m.to_raw()).unwrap(), m);
    }
}
