//! Browser demo: solve a market, check an allocation, compare two
//! mechanisms. The exported functions take and return document text.

use fundmatch::alt::{run_algorithm1, run_algorithm2, run_algorithm3};
use fundmatch::analysis::{classify_outcomes, render_comparison, summarize_comparison};
use fundmatch::format::{parse_allocation, parse_market, render_verdict, serialize_allocation, AllocationMeta};
use fundmatch::stability::check as check_stability;
use fundmatch::{sp_da, sr_da, Allocation, Market, Mode};
use wasm_bindgen::prelude::*;

fn run(m: &Market, algorithm: &str, seed: u64) -> Result<(Allocation, Option<u64>), String> {
    Ok(match algorithm {
        "sp-da" => (sp_da(m), None),
        "sr-da" => (sr_da(m), None),
        "alg1" => (run_algorithm1(m, seed).0, Some(seed)),
        "alg2" => (run_algorithm2(m, seed).0, Some(seed)),
        "alg3" => (run_algorithm3(m, seed).0, Some(seed)),
        other => return Err(format!("unknown algorithm {other:?}")),
    })
}

pub fn solve_text(market: &str, algorithm: &str, seed: u64) -> Result<String, String> {
    let m = parse_market(market).map_err(|e| e.to_string())?;
    let (y, seed) = run(&m, algorithm, seed)?;
    serialize_allocation(&m, &y, &AllocationMeta::new(algorithm, seed)).map_err(|e| e.to_string())
}

pub fn check_text(market: &str, allocation: &str, mode: &str) -> Result<String, String> {
    let m = parse_market(market).map_err(|e| e.to_string())?;
    let y = parse_allocation(allocation, &m).map_err(|e| e.to_string())?.allocation;
    let mode = match mode {
        "full" => Mode::Full,
        "certain" => Mode::Certain,
        other => return Err(format!("unknown mode {other:?}")),
    };
    let v = check_stability(&m, &y, mode).map_err(|e| e.to_string())?;
    Ok(render_verdict(&m, &v))
}

pub fn compare_text(market: &str, baseline: &str, alternate: &str, seed: u64) -> Result<String, String> {
    let m = parse_market(market).map_err(|e| e.to_string())?;
    let (base, _) = run(&m, baseline, seed)?;
    let (alt, _) = run(&m, alternate, seed)?;
    let records = classify_outcomes(&m, &base, &alt).map_err(|e| e.to_string())?;
    let report = summarize_comparison(&m, &records, &base, &alt).map_err(|e| e.to_string())?;
    let mut out = format!("{baseline} vs {alternate}\n");
    out.push_str(&render_comparison(&report));
    for r in records.iter().filter(|r| r.class != fundmatch::analysis::OutcomeClass::Unchanged) {
        out.push_str(&format!("{} {:?} {:?}\n", r.student.as_str(), r.class, r.category));
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn solve(market: &str, algorithm: &str, seed: u64) -> Result<String, JsValue> {
    solve_text(market, algorithm, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn check(market: &str, allocation: &str, mode: &str) -> Result<String, JsValue> {
    check_text(market, allocation, mode).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare(market: &str, baseline: &str, alternate: &str, seed: u64) -> Result<String, JsValue> {
    compare_text(market, baseline, alternate, seed).map_err(|e| JsValue::from_str(&e))
}
