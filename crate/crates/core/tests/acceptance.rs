//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Expected values come from oracles written here: truth tables over the
//! original variables, enumeration of all m-bit fractions, and plain integer
//! arithmetic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use deweight::chain::ChainFormula;
use deweight::count::{integrate, CountResult, ExactCounter, ExternalCounter};
use deweight::formula::{Clause, Literal, WeightPair, WeightedFormula};
use deweight::random::{random_instance, InstanceShape};
use deweight::rational::{nearest_mbit_fraction, parse_weight, Rational};
use deweight::reduce::{
    approximate_weights, combined_error, deweight_reduce, dyadic_adjust, Gamma, ReductionMetadata,
};
use deweight::{CounterProfile, OutputPattern};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240611;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { ok: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { ok: false, detail: detail.into() }
}

fn rat(n: u64, d: u64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn zero() -> Rational {
    Rational::zero()
}

// ---------------------------------------------------------------- oracles

/// Weighted projected count from the full truth table.
fn oracle_weighted_count(f: &WeightedFormula) -> Rational {
    let n = f.num_vars();
    assert!(n <= 16, "truth table oracle is for small formulas");
    let p: Vec<u32> = f.sampling_set().iter().copied().collect();
    let mut projections = HashSet::new();
    let mut a = vec![false; n as usize + 1];
    for mask in 0u32..1 << n {
        for v in 1..=n {
            a[v as usize] = mask >> (v - 1) & 1 == 1;
        }
        if f.clauses().iter().all(|c| c.literals().iter().any(|l| a[l.var() as usize] == l.is_positive())) {
            let proj: u32 = p.iter().enumerate().map(|(i, &v)| u32::from(a[v as usize]) << i).sum();
            projections.insert(proj);
        }
    }
    let mut total = Rational::zero();
    for proj in projections {
        let mut w = Rational::one();
        for (i, v) in p.iter().enumerate() {
            if let Some(pair) = f.weight(*v) {
                w *= pair.literal(proj >> i & 1 == 1).clone();
            }
        }
        total += w;
    }
    total
}

/// Models of the chain CNF guarded by a true variable, over the chain block.
fn oracle_chain_models(k: u64, m: u32) -> u64 {
    let chain = ChainFormula::build(&BigUint::from(k), m, 2).expect("k in range");
    let cnf = chain.guarded_cnf(Literal::pos(1));
    let mut a = vec![false; m as usize + 2];
    a[1] = true;
    let mut count = 0;
    for mask in 0u64..1 << m {
        for j in 0..m as usize {
            a[j + 2] = mask >> j & 1 == 1;
        }
        if cnf.iter().all(|c| c.literals().iter().any(|l| a[l.var() as usize] == l.is_positive())) {
            count += 1;
        }
    }
    count
}

/// Irreducible a/b with a <= 2^m and b - a <= 2^m.
fn oracle_mbit_fractions(m: u32) -> Vec<(u64, u64)> {
    let top = 1u64 << m;
    let mut out = Vec::new();
    for a in 0..=top {
        for gap in 0..=top {
            let b = a + gap;
            if b > 0 && a.gcd(&b) == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

/// |p/q - a/b| as the pair (numerator, denominator), unreduced.
fn dist(p: u64, q: u64, a: u64, b: u64) -> (u128, u128) {
    let lhs = u128::from(p) * u128::from(b);
    let rhs = u128::from(a) * u128::from(q);
    (lhs.abs_diff(rhs), u128::from(q) * u128::from(b))
}

fn less(x: (u128, u128), y: (u128, u128)) -> bool {
    x.0 * y.1 < y.0 * x.1
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

fn within(value: &Rational, truth: &Rational, err: &Rational) -> bool {
    let factor = Rational::one() + err;
    &(truth / &factor) <= value && value <= &(truth * &factor)
}

// --------------------------------------------------------------- criteria

fn chain_count_law() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for m in 0..=10u32 {
        for k in 1..=(1u64 << m) {
            let got = oracle_chain_models(k, m);
            if got != k {
                return fail(format!("k={k}, m={m}: {got} models"));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        return fail(format!("{checked} pairs correct but took {elapsed:?} (limit 30s)"));
    }
    pass(format!("{checked} (k,m) pairs, {elapsed:.2?}"))
}

fn reduction_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let shape = InstanceShape::default();
    let counter = ExactCounter { cap: 64 };
    for i in 0..500 {
        let f = random_instance(&mut rng, &shape);
        let expected = oracle_weighted_count(&f);
        match integrate(&f, &zero(), &zero(), &counter) {
            Ok(r) if r.value == expected => {}
            Ok(r) => return fail(format!("instance #{i}: expected {expected}, got {}\n{}", r.value, f.emit(true))),
            Err(e) => return fail(format!("instance #{i}: {e}\n{}", f.emit(true))),
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        return fail(format!("500 instances exact but took {elapsed:?} (limit 120s)"));
    }
    pass(format!("500 instances exact, {elapsed:.2?}"))
}

fn single_variable_example() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let counter = ExactCounter::default();
    let mut done = 0;
    while done < 50 {
        let q = rng.gen_range(2..=5000u64);
        let p = rng.gen_range(1..q);
        if p.gcd(&q) != 1 {
            continue;
        }
        let mut weights = BTreeMap::new();
        weights.insert(1, WeightPair::complementary(rat(p, q)));
        let f = WeightedFormula::new(1, vec![Clause::unit(Literal::pos(1))], None, weights).expect("valid");
        let r: CountResult = match integrate(&f, &zero(), &zero(), &counter) {
            Ok(r) => r,
            Err(e) => return fail(format!("{p}/{q}: {e}")),
        };
        if r.raw_count != BigUint::from(p) || r.c_w != BigUint::from(q) || r.value != rat(p, q) {
            return fail(format!("{p}/{q}: raw {} with C_W {}", r.raw_count, r.c_w));
        }
        done += 1;
    }
    pass("50 pairs: raw count p, C_W q")
}

fn farey_optimality() -> Outcome {
    let start = Instant::now();
    let tables: Vec<Vec<(u64, u64)>> = (0..=5).map(oracle_mbit_fractions).collect();
    let mut checked = 0;
    for q in 1..=200u64 {
        for p in 0..=q {
            for m in 0..=5u32 {
                let mut best = (1u128, 1u128);
                for &(a, b) in &tables[m as usize] {
                    let d = dist(p, q, a, b);
                    if less(d, best) {
                        best = d;
                    }
                }
                let f = match nearest_mbit_fraction(&p.into(), &q.into(), u64::from(m)) {
                    Ok(f) => f,
                    Err(e) => return fail(format!("{p}/{q}, m={m}: {e}")),
                };
                let (a, b) = (f.a.to_u64().expect("small"), f.b.to_u64().expect("small"));
                let top = 1u64 << m;
                let valid = a <= top && b - a <= top;
                let d = dist(p, q, a, b);
                if !valid || less(best, d) || less(d, best) {
                    return fail(format!("{p}/{q}, m={m}: got {a}/{b}"));
                }
                checked += 1;
            }
        }
    }
    let f = nearest_mbit_fraction(&4u32.into(), &25u32.into(), 3).expect("valid");
    if f.to_rational() != rat(1, 6) {
        return fail(format!("4/25, m=3: got {f}"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return fail(format!("{checked} cases optimal but took {elapsed:?} (limit 60s)"));
    }
    pass(format!("{checked} (p,q,m) cases optimal, 4/25 -> 1/6, {elapsed:.2?}"))
}

fn fresh_variable_expectation() -> Outcome {
    let mut total = 0u64;
    let mut oracle_total = 0u32;
    for tenth in 1..=9u64 {
        let w = parse_weight(&format!("0.{tenth}")).expect("decimal");
        let mut weights = BTreeMap::new();
        weights.insert(1, WeightPair::complementary(w));
        let f = WeightedFormula::new(1, vec![], None, weights).expect("valid");
        total += deweight_reduce(&f).expect("normalized").total_fresh();

        let g = tenth.gcd(&10);
        let (p, q) = (tenth / g, 10 / g);
        oracle_total += ceil_log2(p).max(ceil_log2(q - p));
    }
    if total == 22 && oracle_total == 22 {
        pass("22 fresh variables over 0.1..0.9")
    } else {
        fail(format!("reduction used {total}, oracle says {oracle_total}, expected 22"))
    }
}

fn dyadic_error_figures() -> Outcome {
    let weights: BTreeMap<u32, WeightPair> = (1..=66).map(|v| (v, WeightPair::complementary(rat(2, 3)))).collect();
    let f = WeightedFormula::new(66, vec![], None, weights).expect("valid");
    let adj = match dyadic_adjust(&f, 2) {
        Ok(a) => a,
        Err(e) => return fail(e.to_string()),
    };
    let expected = Rational::new(BigInt::from(4u32).pow(66), BigInt::from(3u32).pow(66)) - Rational::one();
    if adj.gamma != expected {
        return fail(format!("gamma {} differs from (4/3)^66 - 1", adj.gamma));
    }
    let gamma_floor = Rational::from_integer(176_000_000u64.into());
    let combined = combined_error(&rat(4, 5), &adj.gamma);
    let combined_floor = Rational::from_integer(317_000_000u64.into());
    if adj.gamma < gamma_floor || combined < combined_floor {
        return fail(format!("gamma {} combined {}", adj.gamma, combined));
    }
    pass(format!(
        "gamma ~ {:.4e} >= 1.76e8, combined ~ {:.4e} >= 3.17e8",
        deweight::rational::approx_f64(&adj.gamma),
        deweight::rational::approx_f64(&combined)
    ))
}

fn gamma_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let shape = InstanceShape::default();
    let mut checks = 0;
    for i in 0..200 {
        let f = random_instance(&mut rng, &shape);
        let truth = oracle_weighted_count(&f);
        for bits in 1..=3u32 {
            let adj = match dyadic_adjust(&f, bits) {
                Ok(a) => a,
                Err(e) => return fail(format!("instance #{i}: {e}")),
            };
            let approx = oracle_weighted_count(&adj.adjusted);
            if !within(&approx, &truth, &adj.gamma) {
                return fail(format!("instance #{i}, dyadic bits={bits}: W={truth}, W'={approx}, gamma={}", adj.gamma));
            }
            checks += 1;

            let budget = match approximate_weights(&f, bits) {
                Ok(a) => a,
                Err(e) => return fail(format!("instance #{i}: {e}")),
            };
            let approx = oracle_weighted_count(&budget.adjusted);
            let ok = match &budget.gamma {
                Gamma::Bounded(g) => within(&approx, &truth, g),
                Gamma::Unbounded => true,
            };
            if !ok {
                return fail(format!("instance #{i}, budget m={bits}: W={truth}, W'={approx}, gamma={}", budget.gamma));
            }
            checks += 1;
        }
    }
    pass(format!("{checks} adjustments within their bound"))
}

fn stubbed_backend_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 8);
    let shape = InstanceShape::default();
    let epsilon = rat(4, 5);
    let delta = rat(1, 5);
    for i in 0..100 {
        let f = random_instance(&mut rng, &shape);
        let truth = oracle_weighted_count(&f);
        let c_w: BigUint = f.weights().values().map(|w| w.pos.denom().to_biguint().expect("positive")).product();
        let c = &truth * Rational::from_integer(c_w.clone().into());
        if !c.is_integer() {
            return fail(format!("instance #{i}: W * C_W = {c} is not an integer"));
        }
        // an arbitrary answer inside [c/(1+eps), c(1+eps)]
        let c = c.to_integer().to_u128().expect("fits");
        let lo = (c * 5).div_ceil(9);
        let hi = c * 9 / 5;
        let answer = rng.gen_range(lo..=hi);
        let template = format!("test -f {{file}} && echo 's mc {answer}'");
        let profile = CounterProfile::new(template, OutputPattern::SMc, Duration::from_secs(10)).expect("has {file}");
        let counter = ExternalCounter { profile };
        let r = match integrate(&f, &epsilon, &delta, &counter) {
            Ok(r) => r,
            Err(e) => return fail(format!("instance #{i}: {e}")),
        };
        if r.c_w != c_w || r.epsilon != epsilon || !within(&r.value, &truth, &epsilon) {
            return fail(format!("instance #{i}: W={truth}, estimate {} from answer {answer}", r.value));
        }
    }
    pass("100 mocked estimates inside the (1+eps) interval")
}

fn format_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let shape = InstanceShape::default();
    for i in 0..100 {
        let f = random_instance(&mut rng, &shape);
        let text = f.emit(true);
        let back = match WeightedFormula::parse(&text) {
            Ok(b) => b,
            Err(e) => return fail(format!("formula #{i} does not re-parse: {e}\n{text}")),
        };
        if back != f || back.emit(true) != text {
            return fail(format!("formula #{i} changed across parse/emit\n{text}"));
        }

        let first = deweight_reduce(&f).expect("normalized");
        let second = deweight_reduce(&back).expect("normalized");
        let (out1, out2) = (first.formula().emit(false), second.formula().emit(false));
        let (meta1, meta2) = (first.metadata().to_json(), second.metadata().to_json());
        if out1 != out2 || meta1 != meta2 {
            return fail(format!("formula #{i}: reduction output differs between runs"));
        }
        let reparsed = match WeightedFormula::parse(&out1) {
            Ok(r) => r,
            Err(e) => return fail(format!("formula #{i}: reduced output does not re-parse: {e}")),
        };
        let meta = ReductionMetadata::from_json(&meta1).expect("own sidecar parses");
        let sidecar: BTreeSet<u32> = meta.projection_set.iter().copied().collect();
        if reparsed.sampling_set() != &sidecar || reparsed.clauses() != first.formula().clauses() {
            return fail(format!("formula #{i}: projection set disagrees with sidecar"));
        }
    }
    pass("100 round trips, reductions stable and consistent with sidecars")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 chain count law", chain_count_law),
        ("2 reduction exactness", reduction_exactness),
        ("3 single variable example", single_variable_example),
        ("4 farey optimality", farey_optimality),
        ("5 fresh variable expectation", fresh_variable_expectation),
        ("6 dyadic error figures", dyadic_error_figures),
        ("7 gamma soundness", gamma_soundness),
        ("8 stubbed backend contract", stubbed_backend_contract),
        ("9 format round trip", format_round_trip),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let outcome = check();
        let status = if outcome.ok { "PASS" } else { "FAIL" };
        println!("{status} criterion {name}: {}", outcome.detail);
        if !outcome.ok {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
