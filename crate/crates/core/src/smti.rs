//! Stable marriage with incomplete lists where some women are indifferent
//! between exactly two men, and its reduction to an admissions market whose
//! full-size stable allocations mirror the woman-perfect weakly stable
//! matchings.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{FundingPolicy, Market, RawCollege, RawMarket, RawStudent, Terms};
use crate::oracle::{max_stable_size, EnumerationBounds, OracleError};
use crate::stability::Mode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Man {
    pub id: String,
    /// Acceptable women, best first.
    pub prefs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrictWoman {
    pub id: String,
    /// Acceptable men, best first.
    pub prefs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiedWoman {
    pub id: String,
    /// The two men she accepts, equally.
    pub men: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmtiInstance {
    pub men: Vec<Man>,
    pub women_strict: Vec<StrictWoman>,
    pub women_tied: Vec<TiedWoman>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SmtiError {
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("{men} men exceeds the exhaustive-search bound of {limit}")]
    TooLarge { men: usize, limit: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Most men [`smti_perfect_stable_exists`] will search over.
pub const MAX_SEARCH_MEN: usize = 5;

pub fn student_id(agent: &str) -> String {
    format!("s_{agent}")
}

pub fn college_id(woman: &str) -> String {
    format!("c_{woman}")
}

impl SmtiInstance {
    pub fn n_women(&self) -> usize {
        self.women_strict.len() + self.women_tied.len()
    }

    pub fn validate(&self) -> Result<(), SmtiError> {
        let bad = |m: String| Err(SmtiError::MalformedInstance(m));
        if self.men.len() != self.n_women() {
            return bad(format!("{} men but {} women", self.men.len(), self.n_women()));
        }
        let mut ids = BTreeSet::new();
        let all_ids = self
            .men
            .iter()
            .map(|m| &m.id)
            .chain(self.women_strict.iter().map(|w| &w.id))
            .chain(self.women_tied.iter().map(|w| &w.id));
        for id in all_ids {
            if id.is_empty() || id.contains(char::is_whitespace) {
                return bad(format!("invalid id {id:?}"));
            }
            if !ids.insert(id.as_str()) {
                return bad(format!("duplicate id {id}"));
            }
        }
        let men: BTreeSet<&str> = self.men.iter().map(|m| m.id.as_str()).collect();
        let women: BTreeSet<&str> = self
            .women_strict
            .iter()
            .map(|w| w.id.as_str())
            .chain(self.women_tied.iter().map(|w| w.id.as_str()))
            .collect();
        let check_list = |owner: &str, list: &[String], side: &BTreeSet<&str>| -> Result<(), SmtiError> {
            let mut seen = BTreeSet::new();
            for x in list {
                if !side.contains(x.as_str()) {
                    return Err(SmtiError::MalformedInstance(format!("{owner} lists unknown agent {x}")));
                }
                if !seen.insert(x) {
                    return Err(SmtiError::MalformedInstance(format!("{owner} lists {x} twice")));
                }
            }
            Ok(())
        };
        for m in &self.men {
            check_list(&m.id, &m.prefs, &women)?;
        }
        for w in &self.women_strict {
            check_list(&w.id, &w.prefs, &men)?;
        }
        for w in &self.women_tied {
            check_list(&w.id, &w.men, &men)?;
            if w.men.len() != 2 {
                return bad(format!("tied woman {} must accept exactly two men", w.id));
            }
        }
        Ok(())
    }
}

fn tied_pair(w: &TiedWoman) -> (&str, &str) {
    let (a, b) = (w.men[0].as_str(), w.men[1].as_str());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The corresponding admissions market. Tied women's two men are ordered by
/// id: the smaller id is ranked second and only accepts state funding there,
/// the larger is ranked third and only accepts self funding.
pub fn reduce_smti(smti: &SmtiInstance) -> Result<Market, SmtiError> {
    smti.validate()?;
    let strict: BTreeMap<&str, &StrictWoman> = smti.women_strict.iter().map(|w| (w.id.as_str(), w)).collect();
    let tied: BTreeMap<&str, &TiedWoman> = smti.women_tied.iter().map(|w| (w.id.as_str(), w)).collect();
    let mut students = Vec::new();
    for m in &smti.men {
        let mut rol: Vec<(String, Terms)> = Vec::new();
        for w in &m.prefs {
            let c = college_id(w);
            if strict.contains_key(w.as_str()) {
                rol.push((c.clone(), Terms::StateFunded));
                rol.push((c, Terms::SelfFunded));
            } else {
                let (second, third) = tied_pair(tied[w.as_str()]);
                if m.id == second {
                    rol.push((c, Terms::StateFunded));
                } else if m.id == third {
                    rol.push((c, Terms::SelfFunded));
                }
            }
        }
        let rol_refs: Vec<(&str, Terms)> = rol.iter().map(|(c, t)| (c.as_str(), *t)).collect();
        students.push(RawStudent::new(&student_id(&m.id), &rol_refs));
    }
    let mut colleges = Vec::new();
    for w in &smti.women_strict {
        let ranking: Vec<String> = w.prefs.iter().map(|m| student_id(m)).collect();
        let refs: Vec<&str> = ranking.iter().map(String::as_str).collect();
        colleges.push(RawCollege::new(&college_id(&w.id), 1, 0, &refs, FundingPolicy::Merit));
    }
    for w in &smti.women_tied {
        let c = college_id(&w.id);
        let s_w = student_id(&w.id);
        students.push(RawStudent::new(&s_w, &[(c.as_str(), Terms::StateFunded), (c.as_str(), Terms::SelfFunded)]));
        let (second, third) = tied_pair(w);
        let (second, third) = (student_id(second), student_id(third));
        colleges.push(RawCollege::new(&c, 1, 1, &[&s_w, &second, &third], FundingPolicy::Merit));
    }
    Market::validate(RawMarket { students, colleges }).map_err(|e| SmtiError::MalformedInstance(e.to_string()))
}

/// Whether some matching pairs every woman with an acceptable man and is
/// weakly stable.
pub fn smti_perfect_stable_exists(smti: &SmtiInstance) -> Result<bool, SmtiError> {
    smti.validate()?;
    if smti.men.len() > MAX_SEARCH_MEN {
        return Err(SmtiError::TooLarge {
            men: smti.men.len(),
            limit: MAX_SEARCH_MEN,
        });
    }
    let n = smti.men.len();
    let man_ix: BTreeMap<&str, usize> = smti.men.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect();
    // women in one list: strict first, then tied; acc[w] = acceptable men
    let mut acc: Vec<Vec<usize>> = Vec::new();
    for w in &smti.women_strict {
        acc.push(w.prefs.iter().map(|m| man_ix[m.as_str()]).collect());
    }
    for w in &smti.women_tied {
        acc.push(w.men.iter().map(|m| man_ix[m.as_str()]).collect());
    }
    let woman_ix: BTreeMap<&str, usize> = smti
        .women_strict
        .iter()
        .map(|w| w.id.as_str())
        .chain(smti.women_tied.iter().map(|w| w.id.as_str()))
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();
    let man_rank: Vec<BTreeMap<usize, usize>> = smti
        .men
        .iter()
        .map(|m| m.prefs.iter().enumerate().map(|(r, w)| (woman_ix[w.as_str()], r)).collect())
        .collect();
    let n_strict = smti.women_strict.len();

    // wife[m] = woman
    let mut wife: Vec<Option<usize>> = vec![None; n];
    let mut husband: Vec<usize> = vec![usize::MAX; n];
    fn search(
        w: usize,
        acc: &[Vec<usize>],
        man_rank: &[BTreeMap<usize, usize>],
        wife: &mut [Option<usize>],
        husband: &mut [usize],
        n_strict: usize,
    ) -> bool {
        if w == acc.len() {
            return weakly_stable(acc, man_rank, wife, husband, n_strict);
        }
        for &m in &acc[w] {
            if wife[m].is_some() || !man_rank[m].contains_key(&w) {
                continue;
            }
            wife[m] = Some(w);
            husband[w] = m;
            if search(w + 1, acc, man_rank, wife, husband, n_strict) {
                return true;
            }
            wife[m] = None;
        }
        false
    }
    Ok(search(0, &acc, &man_rank, &mut wife, &mut husband, n_strict))
}

/// No man and strict woman who strictly prefer each other. Every woman is
/// matched here, so tied women, who are indifferent between their two
/// acceptable men, never strictly prefer anyone.
fn weakly_stable(
    acc: &[Vec<usize>],
    man_rank: &[BTreeMap<usize, usize>],
    wife: &[Option<usize>],
    husband: &[usize],
    n_strict: usize,
) -> bool {
    for (w, list) in acc.iter().enumerate().take(n_strict) {
        let current = list.iter().position(|&m| m == husband[w]).expect("matched to an acceptable man");
        for &m in &list[..current] {
            if let Some(&r) = man_rank[m].get(&w) {
                let mine = wife[m].map(|x| man_rank[m][&x]).unwrap_or(usize::MAX);
                if r < mine {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub perfect_stable_matching: bool,
    pub students: usize,
    pub max_certainly_stable_size: usize,
    pub holds: bool,
}

/// Both sides of the equivalence: a woman-perfect weakly stable matching
/// exists iff the reduced market has a certainly stable allocation assigning
/// every student.
pub fn smti_lemma_check(smti: &SmtiInstance) -> Result<LemmaCheck, SmtiError> {
    let perfect = smti_perfect_stable_exists(smti)?;
    let market = reduce_smti(smti)?;
    let (size, _) = max_stable_size(&market, Mode::Certain, EnumerationBounds::default())?;
    let students = market.n_students();
    Ok(LemmaCheck {
        perfect_stable_matching: perfect,
        students,
        max_certainly_stable_size: size,
        holds: perfect == (size == students),
    })
}

/// A random valid instance with `n_men` men; each woman is tied with the
/// given probability and lists are random subsets in random order.
pub fn random_instance(seed: u64, n_men: usize, tied_share: f64) -> SmtiInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let men_ids: Vec<String> = (1..=n_men).map(|i| format!("m{i}")).collect();
    let women_ids: Vec<String> = (1..=n_men).map(|i| format!("w{i}")).collect();
    let mut inst = SmtiInstance::default();
    for w in &women_ids {
        if n_men >= 2 && rng.gen_bool(tied_share) {
            let mut pick: Vec<String> = men_ids.choose_multiple(&mut rng, 2).cloned().collect();
            pick.sort();
            inst.women_tied.push(TiedWoman { id: w.clone(), men: pick });
        } else {
            let mut prefs: Vec<String> = men_ids.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
            prefs.shuffle(&mut rng);
            inst.women_strict.push(StrictWoman { id: w.clone(), prefs });
        }
    }
    for m in &men_ids {
        let mut prefs: Vec<String> = women_ids.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
        prefs.shuffle(&mut rng);
        inst.men.push(Man { id: m.clone(), prefs });
    }
    inst
}
