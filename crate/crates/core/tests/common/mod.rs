#![allow(dead_code)]

use fundmatch::generator::{generate_market, GeneratorConfig};
use fundmatch::market::{FundingPolicy, Market, Terms};
use fundmatch::{Allocation, Contract, StudentIx};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small market: up to `max_students` students, 2 to `max_colleges`
/// colleges, quotas of at most 2 and frequent score ties.
pub fn small_config(seed: u64, max_students: usize, max_colleges: usize, max_rol: usize) -> GeneratorConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n_colleges = rng.gen_range(2..=max_colleges);
    GeneratorConfig {
        n_students: rng.gen_range(1..=max_students),
        n_colleges,
        quota_state: (0, 2),
        quota_self: (0, 2),
        rol_length: (1, max_rol.min(2 * n_colleges)),
        popularity_exponent: rng.gen_range(0.0..1.5),
        common_value_weight: rng.gen_range(0.0..1.0),
        score_levels: rng.gen_range(1..=4),
        min_score: if rng.gen_bool(0.3) { 0.25 } else { 0.0 },
        share_self_then_state: 0.2,
        pair_on_top: 0.5,
        seed,
        ..Default::default()
    }
}

pub fn small_market(seed: u64, max_students: usize, max_colleges: usize, max_rol: usize) -> Market {
    generate_market(&small_config(seed, max_students, max_colleges, max_rol)).expect("small configs are valid")
}

/// Each generated market under both funding policies.
pub fn corpus(seeds: u64, max_students: usize, max_colleges: usize, max_rol: usize) -> Vec<(u64, Market)> {
    let mut out = Vec::new();
    for seed in 0..seeds {
        let m = small_market(seed, max_students, max_colleges, max_rol);
        for p in [FundingPolicy::Merit, FundingPolicy::InverseMerit] {
            out.push((seed, m.with_funding_policy(p)));
        }
    }
    out
}

/// Students in random order take a random listed contract the college
/// accepts and still has room for, or stay out.
pub fn random_ir_allocation(m: &Market, rng: &mut ChaCha8Rng) -> Allocation {
    let mut order: Vec<StudentIx> = m.student_ixs().collect();
    order.shuffle(rng);
    let mut y = Allocation::new();
    for s in order {
        let rol = &m.student(s).rol;
        let pick = rng.gen_range(0..=rol.len());
        if pick == rol.len() {
            continue;
        }
        let e = rol[pick];
        let col = m.college(e.college);
        if col.accepts(s) && (y.count(e.college, e.terms) as u32) < col.quota(e.terms) {
            y.insert(Contract::new(s, e.college, e.terms));
        }
    }
    y
}

/// Any contracts at all, one per student, quotas ignored.
pub fn random_allocation(m: &Market, rng: &mut ChaCha8Rng) -> Allocation {
    let mut y = Allocation::new();
    for s in m.student_ixs() {
        if m.n_colleges() > 0 && rng.gen_bool(0.6) {
            let c = fundmatch::CollegeIx(rng.gen_range(0..m.n_colleges()));
            let t = if rng.gen_bool(0.5) { Terms::StateFunded } else { Terms::SelfFunded };
            y.insert(Contract::new(s, c, t));
        }
    }
    y
}
