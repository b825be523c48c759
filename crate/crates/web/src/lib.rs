//! Browser bindings for three small views of the reduction: the nearest
//! m-bit fraction search, chain formula construction, and reducing and
//! counting a short DIMACS instance.
//!
//! Every entry point returns a JSON string; the page in `www/` renders it.

use num_bigint::BigUint;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use deweight::count::exact_projected_count;
use deweight::rational::{format_fraction, nearest_mbit_fraction, parse_weight, unit_parts, Fraction, MediantWalk};
use deweight::reduce::{deweight_reduce, nearest_dyadic};
use deweight::{integrate_reduction, ChainFormula, Clause, ExactCounter, Literal, Rational, WeightedFormula};

/// Largest block the chain view will count by brute force.
const MAX_CHAIN_BITS: u32 = 20;

#[derive(Serialize)]
struct Step {
    lo: String,
    hi: String,
    mediant: String,
    lo_value: f64,
    hi_value: f64,
}

#[derive(Serialize)]
struct SearchView {
    target: String,
    target_value: f64,
    steps: Vec<Step>,
    nearest: String,
    nearest_value: f64,
    nearest_error: f64,
    /// Nearest `j / 2^m` for comparison; absent for `m = 0`.
    dyadic: Option<String>,
    dyadic_error: Option<f64>,
}

fn value(f: &Fraction) -> f64 {
    deweight::rational::approx_f64(&f.to_rational())
}

fn f64_of(r: &Rational) -> f64 {
    deweight::rational::approx_f64(r)
}

pub fn search_json(weight: &str, m: u32) -> Result<String, String> {
    let w = parse_weight(weight).map_err(|e| e.to_string())?;
    let (p, q) = unit_parts(&w).ok_or_else(|| format!("{weight} is not in [0, 1]"))?;
    let walk = MediantWalk::new(&p, &q, u64::from(m)).map_err(|e| e.to_string())?;
    let target = walk.target().clone();
    let steps = walk
        .map(|s| Step {
            lo: s.lo.to_string(),
            hi: s.hi.to_string(),
            mediant: s.mediant.to_string(),
            lo_value: value(&s.lo),
            hi_value: value(&s.hi),
        })
        .collect();
    let nearest = nearest_mbit_fraction(&p, &q, u64::from(m)).map_err(|e| e.to_string())?;
    let err = |r: &Rational| f64_of(&num_traits::Signed::abs(&(r - &w)));
    let dyadic = (m >= 1).then(|| nearest_dyadic(&w, m));
    let view = SearchView {
        target: target.to_string(),
        target_value: value(&target),
        steps,
        nearest: nearest.to_string(),
        nearest_value: value(&nearest),
        nearest_error: err(&nearest.to_rational()),
        dyadic_error: dyadic.as_ref().map(err),
        dyadic: dyadic.as_ref().map(format_fraction),
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

#[derive(Serialize)]
struct ChainView {
    formula: String,
    bits: Vec<bool>,
    last_set_bit: Option<usize>,
    /// Guarded by variable 1; the block is `2 ..= m + 1`.
    clauses: Vec<Vec<i64>>,
    models: String,
}

pub fn chain_json(k: &str, m: u32) -> Result<String, String> {
    if m > MAX_CHAIN_BITS {
        return Err(format!("m is limited to {MAX_CHAIN_BITS} here"));
    }
    let k: BigUint = k.trim().parse().map_err(|_| format!("`{k}` is not a non-negative integer"))?;
    let chain = ChainFormula::build(&k, m, 2).map_err(|e| e.to_string())?;
    let mut cnf = chain.guarded_cnf(Literal::pos(1));
    let clauses = cnf.iter().map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect()).collect();
    cnf.push(Clause::unit(Literal::pos(1)));
    let block: Vec<u32> = chain.variables().collect();
    let models = exact_projected_count(m + 1, &cnf, &block, MAX_CHAIN_BITS as usize).map_err(|e| e.to_string())?;
    let view = ChainView {
        formula: chain.to_string(),
        bits: chain.bits().to_vec(),
        last_set_bit: chain.last_set_bit(),
        clauses,
        models: models.to_string(),
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

#[derive(Serialize)]
struct ReduceView {
    reduced: String,
    metadata: serde_json::Value,
    raw_count: String,
    c_w: String,
    weighted_count: String,
    weighted_value: f64,
}

pub fn reduce_json(dimacs: &str) -> Result<String, String> {
    let f = WeightedFormula::parse(dimacs).and_then(|f| f.normalize()).map_err(|e| e.to_string())?;
    let red = deweight_reduce(&f).map_err(|e| e.to_string())?;
    let zero = Rational::from_integer(0.into());
    let result = integrate_reduction(&red, &zero, &zero, &ExactCounter::default()).map_err(|e| e.to_string())?;
    let view = ReduceView {
        reduced: red.formula().emit(false),
        metadata: serde_json::to_value(red.metadata()).expect("serializes"),
        raw_count: result.raw_count.to_string(),
        c_w: result.c_w.to_string(),
        weighted_count: format_fraction(&result.value),
        weighted_value: f64_of(&result.value),
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

#[wasm_bindgen]
pub fn nearest_fraction(weight: &str, m: u32) -> Result<String, JsValue> {
    search_json(weight, m).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn chain_formula(k: &str, m: u32) -> Result<String, JsValue> {
    chain_json(k, m).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn reduce_and_count(dimacs: &str) -> Result<String, JsValue> {
    reduce_json(dimacs).map_err(|e| JsValue::from_str(&e))
}
