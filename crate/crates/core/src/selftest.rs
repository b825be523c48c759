//! Seeded property suites runnable from the command line.
//!
//! Each suite checks one law against brute force: chain formula model
//! counts, optimality of the nearest m-bit fraction search, exactness of the
//! reduction, and soundness of the adjustment error bound.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::ChainFormula;
use crate::count::{exact_weighted_count, integrate, ExactCounter};
use crate::formula::Literal;
use crate::random::{random_instance, InstanceShape};
use crate::rational::{nearest_mbit_fraction, Fraction, Rational};
use crate::reduce::{approximate_weights, dyadic_adjust, Gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the first connector of every chain formula that has one.
    FlipConnector,
}

#[derive(Debug, Clone)]
pub struct SelftestConfig {
    pub seed: u64,
    pub fault: Option<Fault>,
    /// Chains are checked for every `m` up to this bound.
    pub max_chain_bits: u32,
    pub instances: usize,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig { seed: 0, fault: None, max_chain_bits: 8, instances: 150 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// First failing case.
    pub counterexample: Option<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport { name, passed: 0, failed: 0, counterexample: None }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(describe());
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.ok() { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<20} {} passed, {} failed", self.name, self.passed, self.failed)?;
        if let Some(c) = &self.counterexample {
            write!(f, "\n     counterexample: {c}")?;
        }
        Ok(())
    }
}

pub fn run(config: &SelftestConfig) -> Vec<SuiteReport> {
    vec![
        chain_counts(config),
        farey_optimality(config),
        reduction_exactness(config),
        gamma_soundness(config),
    ]
}

/// Models of `guard -> chain` over the chain block with the guard true.
pub fn chain_model_count(chain: &ChainFormula) -> u64 {
    let m = chain.m() as usize;
    let cnf = chain.guarded_cnf(Literal::pos(1));
    let mut a = vec![false; m + 2];
    a[1] = true;
    (0u64..1 << m)
        .filter(|mask| {
            for j in 0..m {
                a[j + 2] = mask >> j & 1 == 1;
            }
            cnf.iter().all(|c| c.eval(&a))
        })
        .count() as u64
}

fn chain_counts(config: &SelftestConfig) -> SuiteReport {
    let mut report = SuiteReport::new("chain-counts");
    for m in 0..=config.max_chain_bits {
        for k in 1..=(1u64 << m) {
            let mut chain = ChainFormula::build(&BigUint::from(k), m, 2).expect("k within range");
            if config.fault == Some(Fault::FlipConnector) && !chain.connectors().is_empty() {
                chain.flip_bit(1);
            }
            let got = chain_model_count(&chain);
            report.record(got == k, || format!("k={k}, m={m}: {got} models"));
        }
    }
    report
}

/// All m-bit fractions, by enumeration of numerators and gaps.
pub fn mbit_fractions(m: u32) -> Vec<(u64, u64)> {
    let top = 1u64 << m;
    let mut out = Vec::new();
    for a in 0..=top {
        for gap in 0..=top {
            let b = a + gap;
            if b >= 1 && a.gcd(&b) == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

fn distance(p: u64, q: u64, a: u64, b: u64) -> Rational {
    (Rational::new(p.into(), q.into()) - Rational::new(a.into(), b.into())).abs()
}

fn farey_optimality(config: &SelftestConfig) -> SuiteReport {
    let mut report = SuiteReport::new("farey-optimality");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xfa7e);
    let tables: Vec<Vec<(u64, u64)>> = (0..=5).map(mbit_fractions).collect();
    for _ in 0..500 {
        let q = rng.gen_range(1..=200u64);
        let p = rng.gen_range(0..=q);
        let m = rng.gen_range(0..=5u32);
        let best = tables[m as usize].iter().map(|&(a, b)| distance(p, q, a, b)).min().expect("nonempty");
        let found = nearest_mbit_fraction(&p.into(), &q.into(), u64::from(m)).expect("valid input");
        let found_dist = (Rational::new(p.into(), q.into()) - found.to_rational()).abs();
        let valid = p == 0 || p == q || crate::rational::is_mbit_fraction(&found, u64::from(m));
        report.record(valid && found_dist == best, || format!("p/q={p}/{q}, m={m}: got {found}"));
    }
    // the worked example
    let f = nearest_mbit_fraction(&4u32.into(), &25u32.into(), 3).expect("valid input");
    report.record(f == Fraction::new(1u32, 6u32), || format!("4/25, m=3: got {f}"));
    report
}

fn reduction_exactness(config: &SelftestConfig) -> SuiteReport {
    let mut report = SuiteReport::new("reduction-exactness");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4ed0);
    let shape = InstanceShape::default();
    let counter = ExactCounter { cap: 64 };
    let zero = Rational::from_integer(0.into());
    for i in 0..config.instances {
        let f = random_instance(&mut rng, &shape);
        let expected = exact_weighted_count(&f, 24).expect("small instance");
        let got = integrate(&f, &zero, &zero, &counter).map(|r| r.value);
        report.record(got.as_ref().ok() == Some(&expected), || {
            format!("instance #{i} (seed {}): expected {expected}, got {got:?}\n{}", config.seed, f.emit(true))
        });
    }
    report
}

fn within(value: &Rational, truth: &Rational, gamma: &Rational) -> bool {
    let factor = Rational::one() + gamma;
    &(truth / &factor) <= value && value <= &(truth * &factor)
}

fn gamma_soundness(config: &SelftestConfig) -> SuiteReport {
    let mut report = SuiteReport::new("gamma-soundness");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9a33a);
    let shape = InstanceShape { max_vars: 8, max_clauses: 12, ..InstanceShape::default() };
    for i in 0..config.instances {
        let f = random_instance(&mut rng, &shape);
        let truth = exact_weighted_count(&f, 24).expect("small instance");
        for bits in 1..=3u32 {
            let adj = dyadic_adjust(&f, bits).expect("normalized instance");
            let approx = exact_weighted_count(&adj.adjusted, 24).expect("small instance");
            report.record(within(&approx, &truth, &adj.gamma), || {
                format!("instance #{i}, dyadic bits={bits}: W={truth}, W'={approx}, gamma={}", adj.gamma)
            });

            let approx_w = approximate_weights(&f, bits).expect("normalized instance");
            if let Gamma::Bounded(g) = &approx_w.gamma {
                let approx = exact_weighted_count(&approx_w.adjusted, 24).expect("small instance");
                report.record(within(&approx, &truth, g), || {
                    format!("instance #{i}, budget m={bits}: W={truth}, W'={approx}, gamma={g}")
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let cfg = SelftestConfig { instances: 40, max_chain_bits: 6, ..SelftestConfig::default() };
        for report in run(&cfg) {
            assert!(report.ok(), "{report}");
        }
    }

    #[test]
    fn flipped_connector_is_caught() {
        let cfg = SelftestConfig { fault: Some(Fault::FlipConnector), max_chain_bits: 4, ..SelftestConfig::default() };
        let report = chain_counts(&cfg);
        assert!(!report.ok());
        let c = report.counterexample.unwrap();
        assert!(c.contains("k=") && c.contains("m="), "{c}");
    }

    #[test]
    fn mbit_table_sizes() {
        // m = 0: 0/1, 1/2, 1/1
        assert_eq!(mbit_fractions(0).len(), 3);
        assert!(mbit_fractions(3).contains(&(1, 6)));
        assert!(!mbit_fractions(3).contains(&(1, 10)));
    }
}
