//! Seeded generators for small random weighted instances.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::formula::{Clause, Literal, WeightPair, WeightedFormula};
use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct InstanceShape {
    pub max_vars: u32,
    pub max_clauses: usize,
    pub max_clause_len: usize,
    /// Weights are `p/q` with `2 <= q <= max_denominator`.
    pub max_denominator: u64,
    /// Chance that a sampling variable receives a weight.
    pub weight_probability: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            max_vars: 10,
            max_clauses: 25,
            max_clause_len: 3,
            max_denominator: 20,
            weight_probability: 0.7,
        }
    }
}

/// A weight `p/q` with `0 < p < q <= max_denominator`, reduced.
pub fn random_weight<R: Rng + ?Sized>(rng: &mut R, max_denominator: u64) -> Rational {
    let q = rng.gen_range(2..=max_denominator.max(2));
    let p = rng.gen_range(1..q);
    Rational::new(p.into(), q.into())
}

/// A normalized weighted formula with a random sampling set; weights only
/// sit on sampling variables.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, shape: &InstanceShape) -> WeightedFormula {
    let n = rng.gen_range(1..=shape.max_vars.max(1));
    let num_clauses = rng.gen_range(0..=shape.max_clauses);
    let clauses: Vec<Clause> = (0..num_clauses)
        .map(|_| {
            let len = rng.gen_range(1..=shape.max_clause_len.max(1));
            (0..len).map(|_| Literal::new(rng.gen_range(1..=n), rng.gen())).collect()
        })
        .collect();
    let sampling: BTreeSet<u32> = (1..=n).filter(|_| rng.gen_bool(0.7)).collect();
    let mut weights = BTreeMap::new();
    for &v in &sampling {
        if rng.gen_bool(shape.weight_probability) {
            weights.insert(v, WeightPair::complementary(random_weight(rng, shape.max_denominator)));
        }
    }
    WeightedFormula::new(n, clauses, Some(sampling), weights).expect("generated instance is well formed")
}
