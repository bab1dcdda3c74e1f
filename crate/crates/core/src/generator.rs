//! Seeded synthetic markets.
//!
//! Students fall in four rank-order-list shapes: state-funded entries only,
//! self-funded entries only, lists with one program listed consecutively
//! under both terms, and mixed lists over distinct programs. Colleges rank
//! their applicants by a score, with equal scores broken by one lottery
//! shared by the whole market.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{
    CollegeAttributes, CollegeId, FundingPolicy, Market, RankOrderList, RawCollege, RawMarket, RawStudent, StudentAttributes,
    StudentId, Terms,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_students: usize,
    pub n_colleges: usize,
    /// Inclusive quota range for state-funded seats.
    pub quota_state: (u32, u32),
    pub quota_self: (u32, u32),
    pub share_state_only: f64,
    pub share_self_only: f64,
    pub share_consecutive_pair: f64,
    /// Among consecutive-pair students, the share listing the self-funded
    /// entry first.
    pub share_self_then_state: f64,
    /// Probability that the consecutive pair heads the list.
    pub pair_on_top: f64,
    pub rol_length: (usize, usize),
    /// Zipf exponent for college popularity; 0 draws colleges uniformly.
    pub popularity_exponent: f64,
    /// Weight of the student's common score in each college's score.
    pub common_value_weight: f64,
    /// Scores are rounded to this many levels (0 keeps them continuous), so
    /// ties arise and the lottery matters.
    pub score_levels: u32,
    /// Applicants scoring below this are unacceptable to the college.
    pub min_score: f64,
    /// Share of colleges using the inverse-merit funding policy.
    pub share_inverse_merit: f64,
    pub attributes: bool,
    pub counties: usize,
    pub capital_college_share: f64,
    pub capital_resident_share: f64,
    pub full_time_share: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_students: 1000,
            n_colleges: 40,
            quota_state: (5, 20),
            quota_self: (0, 15),
            share_state_only: 0.514,
            share_self_only: 0.185,
            share_consecutive_pair: 0.155,
            share_self_then_state: 0.0,
            pair_on_top: 0.75,
            rol_length: (1, 6),
            popularity_exponent: 0.5,
            common_value_weight: 0.5,
            score_levels: 100,
            min_score: 0.0,
            share_inverse_merit: 0.5,
            attributes: false,
            counties: 20,
            capital_college_share: 0.2,
            capital_resident_share: 0.17,
            full_time_share: 0.8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error("cannot parse generator config: {0}")]
    Parse(String),
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<GeneratorConfig, GeneratorError> {
        let config: GeneratorConfig = toml::from_str(text).map_err(|e| GeneratorError::Parse(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), GeneratorError> {
        let bad = |msg: String| Err(GeneratorError::Invalid(msg));
        let fractions = [
            ("share_state_only", self.share_state_only),
            ("share_self_only", self.share_self_only),
            ("share_consecutive_pair", self.share_consecutive_pair),
            ("share_self_then_state", self.share_self_then_state),
            ("pair_on_top", self.pair_on_top),
            ("common_value_weight", self.common_value_weight),
            ("min_score", self.min_score),
            ("share_inverse_merit", self.share_inverse_merit),
            ("capital_college_share", self.capital_college_share),
            ("capital_resident_share", self.capital_resident_share),
            ("full_time_share", self.full_time_share),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        let listed = self.share_state_only + self.share_self_only + self.share_consecutive_pair;
        if listed > 1.0 + 1e-9 {
            return bad(format!("shape shares sum to {listed}, above 1"));
        }
        if !(self.popularity_exponent.is_finite() && self.popularity_exponent >= 0.0) {
            return bad("popularity_exponent must be a nonnegative number".into());
        }
        for (name, (lo, hi)) in [("quota_state", self.quota_state), ("quota_self", self.quota_self)] {
            if lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] is empty"));
            }
        }
        let (lo, hi) = self.rol_length;
        if lo == 0 || lo > hi {
            return bad(format!("rol_length range [{lo}, {hi}] must be nonempty and start at 1 or more"));
        }
        if self.n_students == 0 {
            return Ok(());
        }
        if self.n_colleges == 0 {
            return bad("students need at least one college".into());
        }
        if hi > 2 * self.n_colleges {
            return bad(format!("rol_length up to {hi} exceeds twice the {} colleges", self.n_colleges));
        }
        let two_term_share = 1.0 - self.share_state_only - self.share_self_only;
        if two_term_share > 1e-9 && hi < 2 {
            return bad("lists mixing both terms need rol_length of at least 2".into());
        }
        let mixed_share = two_term_share - self.share_consecutive_pair;
        if mixed_share > 1e-9 && self.n_colleges < 2 {
            return bad("mixed lists need at least two colleges".into());
        }
        if self.attributes && self.counties < 2 {
            return bad("attribute synthesis needs a capital county and at least one other".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RolShape {
    StateOnly,
    SelfOnly,
    ConsecutivePair,
    Mixed,
}

impl RolShape {
    pub const ALL: [RolShape; 4] = [RolShape::StateOnly, RolShape::SelfOnly, RolShape::ConsecutivePair, RolShape::Mixed];
}

/// Shape of a list; `None` for an empty one.
pub fn rol_shape(rol: &RankOrderList) -> Option<RolShape> {
    let first = rol.first()?;
    if rol.iter().all(|e| e.terms == first.terms) {
        return Some(match first.terms {
            Terms::StateFunded => RolShape::StateOnly,
            Terms::SelfFunded => RolShape::SelfOnly,
        });
    }
    if rol.windows(2).any(|w| w[0].college == w[1].college) {
        Some(RolShape::ConsecutivePair)
    } else {
        Some(RolShape::Mixed)
    }
}

/// Priority scores of students at colleges. Higher is better.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub scores: BTreeMap<(StudentId, CollegeId), f64>,
}

impl ScoreTable {
    pub fn get(&self, s: &StudentId, c: &CollegeId) -> Option<f64> {
        self.scores.get(&(s.clone(), c.clone())).copied()
    }

    pub fn at_college(&self, c: &CollegeId) -> Vec<(StudentId, f64)> {
        self.scores
            .iter()
            .filter(|((_, cc), _)| cc == c)
            .map(|((s, _), &v)| (s.clone(), v))
            .collect()
    }
}

/// One lottery order over a market's students.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lottery {
    position: HashMap<StudentId, usize>,
}

impl Lottery {
    pub fn draw(students: &[StudentId], seed: u64) -> Lottery {
        let mut order: Vec<StudentId> = students.to_vec();
        order.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        order.shuffle(&mut rng);
        Lottery::from_order(order)
    }

    pub fn from_order(order: Vec<StudentId>) -> Lottery {
        Lottery {
            position: order.into_iter().enumerate().map(|(i, s)| (s, i)).collect(),
        }
    }

    pub fn position(&self, s: &StudentId) -> Option<usize> {
        self.position.get(s).copied()
    }
}

/// Orders one college's applicants by score, equal scores by the lottery.
/// Students missing from the lottery go after those in it, by id.
pub fn break_ties(scores: &[(StudentId, f64)], lottery: &Lottery) -> Vec<StudentId> {
    let mut v: Vec<&(StudentId, f64)> = scores.iter().collect();
    v.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| lottery.position(&a.0).unwrap_or(usize::MAX).cmp(&lottery.position(&b.0).unwrap_or(usize::MAX)))
            .then_with(|| a.0.cmp(&b.0))
    });
    v.into_iter().map(|(s, _)| s.clone()).collect()
}

pub fn student_id(i: usize, n: usize) -> String {
    format!("s{:0w$}", i + 1, w = digits(n).max(5))
}

pub fn college_id(i: usize, n: usize) -> String {
    format!("c{:0w$}", i + 1, w = digits(n).max(3))
}

fn digits(n: usize) -> usize {
    n.max(1).to_string().len()
}

fn county_id(i: usize, n: usize) -> String {
    format!("k{:0w$}", i, w = digits(n).max(2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedMarket {
    pub market: Market,
    pub scores: ScoreTable,
    pub shapes: Vec<(StudentId, RolShape)>,
}

pub fn generate_market(config: &GeneratorConfig) -> Result<Market, GeneratorError> {
    generate_market_detailed(config).map(|g| g.market)
}

/// Colleges are drawn without replacement, weighted by popularity.
fn draw_colleges(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut left: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(weights.len()) {
        let total: f64 = left.iter().map(|w| w.1).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut pick = left.len() - 1;
        for (i, w) in left.iter().enumerate() {
            if x < w.1 {
                pick = i;
                break;
            }
            x -= w.1;
        }
        out.push(left.swap_remove(pick).0);
    }
    out
}

fn draw_shape(rng: &mut ChaCha8Rng, c: &GeneratorConfig) -> RolShape {
    let x: f64 = rng.gen();
    if x < c.share_state_only {
        RolShape::StateOnly
    } else if x < c.share_state_only + c.share_self_only {
        RolShape::SelfOnly
    } else if x < c.share_state_only + c.share_self_only + c.share_consecutive_pair {
        RolShape::ConsecutivePair
    } else {
        RolShape::Mixed
    }
}

fn random_terms(rng: &mut ChaCha8Rng) -> Terms {
    if rng.gen_bool(0.5) {
        Terms::StateFunded
    } else {
        Terms::SelfFunded
    }
}

/// Draws one list of the given shape. Lengths above what the shape allows
/// with `n` colleges are cut to that maximum.
fn draw_rol(rng: &mut ChaCha8Rng, c: &GeneratorConfig, shape: RolShape, weights: &[f64]) -> Vec<(usize, Terms)> {
    let n = weights.len();
    let (lo, hi) = c.rol_length;
    let two_terms = matches!(shape, RolShape::ConsecutivePair | RolShape::Mixed);
    let lo = if two_terms { lo.max(2) } else { lo };
    let cap = if shape == RolShape::ConsecutivePair { n + 1 } else { n };
    let len = rng.gen_range(lo..=hi).min(cap);
    match shape {
        RolShape::StateOnly | RolShape::SelfOnly => {
            let t = if shape == RolShape::StateOnly { Terms::StateFunded } else { Terms::SelfFunded };
            draw_colleges(rng, weights, len).into_iter().map(|k| (k, t)).collect()
        }
        RolShape::Mixed => {
            let mut rol: Vec<(usize, Terms)> = draw_colleges(rng, weights, len).into_iter().map(|k| (k, random_terms(rng))).collect();
            if rol.iter().all(|e| e.1 == rol[0].1) {
                let i = rng.gen_range(0..rol.len());
                rol[i].1 = rol[i].1.opposite();
            }
            rol
        }
        RolShape::ConsecutivePair => {
            let colleges = draw_colleges(rng, weights, len - 1);
            let (first, second) = if rng.gen_bool(c.share_self_then_state) {
                (Terms::SelfFunded, Terms::StateFunded)
            } else {
                (Terms::StateFunded, Terms::SelfFunded)
            };
            let pair_college = colleges[0];
            let mut rest: Vec<(usize, Terms)> = colleges[1..].iter().map(|&k| (k, random_terms(rng))).collect();
            let at = if rng.gen_bool(c.pair_on_top) { 0 } else { rng.gen_range(0..=rest.len()) };
            rest.splice(at..at, [(pair_college, first), (pair_college, second)]);
            rest
        }
    }
}

fn quantize(x: f64, levels: u32) -> f64 {
    if levels == 0 {
        x
    } else {
        (x * levels as f64).floor().min(levels as f64 - 1.0) / levels as f64
    }
}

/// Deterministic in the config, seed included.
pub fn generate_market_detailed(config: &GeneratorConfig) -> Result<GeneratedMarket, GeneratorError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (ns, nc) = (config.n_students, config.n_colleges);
    let student_ids: Vec<String> = (0..ns).map(|i| student_id(i, ns)).collect();
    let college_ids: Vec<String> = (0..nc).map(|i| college_id(i, nc)).collect();

    let weights: Vec<f64> = (0..nc).map(|k| 1.0 / ((k + 1) as f64).powf(config.popularity_exponent)).collect();
    let mut colleges: Vec<RawCollege> = college_ids
        .iter()
        .map(|id| {
            let qs = rng.gen_range(config.quota_state.0..=config.quota_state.1);
            let qf = rng.gen_range(config.quota_self.0..=config.quota_self.1);
            let policy = if rng.gen_bool(config.share_inverse_merit) {
                FundingPolicy::InverseMerit
            } else {
                FundingPolicy::Merit
            };
            RawCollege::new(id, qs as i64, qf as i64, &[], policy)
        })
        .collect();

    let common: Vec<f64> = (0..ns).map(|_| rng.gen()).collect();
    let mut applicants: Vec<Vec<(StudentId, f64)>> = vec![Vec::new(); nc];
    let mut scores = ScoreTable::default();
    let mut students = Vec::with_capacity(ns);
    let mut shapes = Vec::with_capacity(ns);
    for (i, id) in student_ids.iter().enumerate() {
        let shape = draw_shape(&mut rng, config);
        let rol = draw_rol(&mut rng, config, shape, &weights);
        let mut listed: Vec<usize> = rol.iter().map(|e| e.0).collect();
        listed.sort_unstable();
        listed.dedup();
        for k in listed {
            let w = config.common_value_weight;
            let raw = w * common[i] + (1.0 - w) * rng.gen::<f64>();
            let score = quantize(raw, config.score_levels);
            scores.scores.insert((StudentId(id.clone()), CollegeId(college_ids[k].clone())), score);
            if score >= config.min_score {
                applicants[k].push((StudentId(id.clone()), score));
            }
        }
        let entries: Vec<(&str, Terms)> = rol.iter().map(|&(k, t)| (college_ids[k].as_str(), t)).collect();
        students.push(RawStudent::new(id, &entries));
        shapes.push((StudentId(id.clone()), shape));
    }

    let lottery = Lottery::draw(&student_ids.iter().cloned().map(StudentId).collect::<Vec<_>>(), config.seed);
    for (k, c) in colleges.iter_mut().enumerate() {
        c.ranking = break_ties(&applicants[k], &lottery).into_iter().map(|s| s.0).collect();
    }

    if config.attributes {
        let capital = county_id(0, config.counties);
        let other = |rng: &mut ChaCha8Rng| county_id(rng.gen_range(1..config.counties), config.counties);
        for c in colleges.iter_mut() {
            let in_capital = rng.gen_bool(config.capital_college_share);
            c.attributes = Some(CollegeAttributes {
                location_county: Some(if in_capital { capital.clone() } else { other(&mut rng) }),
                in_capital: Some(in_capital),
                full_time: Some(rng.gen_bool(config.full_time_share)),
            });
        }
        for s in students.iter_mut() {
            let lives = rng.gen_bool(config.capital_resident_share);
            s.attributes = Some(StudentAttributes {
                residence_county: Some(if lives { capital.clone() } else { other(&mut rng) }),
                lives_in_capital: Some(lives),
                ..Default::default()
            });
        }
    }

    let market = Market::validate(RawMarket { students, colleges })
        .map_err(|e| GeneratorError::Invalid(format!("generated market failed validation: {e}")))?;
    Ok(GeneratedMarket { market, scores, shapes })
}
