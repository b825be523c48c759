//! Weighted-to-unweighted reduction and the weight adjustment front ends.
//!
//! Each weighted variable `x` with `W(x) = p/q` gets a block of
//! `m = bits_required(p, q)` fresh variables shared by two chain formulas,
//! `x -> phi_{p,m}` and `!x -> phi_{q-p,m}`. Projected onto the sampling set
//! plus all fresh blocks, the unweighted model count of the result equals
//! `W(F) * prod(q)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::chain::ChainFormula;
use crate::error::{Error, Result};
use crate::formula::{Literal, WeightPair, WeightedFormula};
use crate::rational::{bits_required, format_fraction, nearest_mbit_fraction, unit_parts, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMode {
    Exact,
    Dyadic,
    Budget,
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionMode::Exact => "exact",
            ReductionMode::Dyadic => "dyadic",
            ReductionMode::Budget => "budget",
        })
    }
}

/// Multiplicative error bound introduced by adjusting weights: the adjusted
/// weighted count lies within a factor `1 + gamma` of the original.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gamma {
    Bounded(Rational),
    /// Some strictly interior weight was rounded to 0 or 1.
    Unbounded,
}

impl Gamma {
    pub fn bounded(&self) -> Option<&Rational> {
        match self {
            Gamma::Bounded(g) => Some(g),
            Gamma::Unbounded => None,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Bounded(g) => f.write_str(&format_fraction(g)),
            Gamma::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Encoding of one weighted variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarEncoding {
    pub var: u32,
    pub p: BigUint,
    pub q: BigUint,
    pub m: u32,
    pub fresh: Range<u32>,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    formula: WeightedFormula,
    c_w: BigUint,
    per_var: Vec<VarEncoding>,
    mode: ReductionMode,
    gamma: Option<Gamma>,
}

impl Reduction {
    /// The unweighted formula, with sampling set `P ∪ Y`.
    pub fn formula(&self) -> &WeightedFormula {
        &self.formula
    }

    pub fn projection_set(&self) -> &BTreeSet<u32> {
        self.formula.sampling_set()
    }

    /// Normalization constant: product of the weight denominators.
    pub fn c_w(&self) -> &BigUint {
        &self.c_w
    }

    pub fn per_var(&self) -> &[VarEncoding] {
        &self.per_var
    }

    pub fn total_fresh(&self) -> u64 {
        self.per_var.iter().map(|e| u64::from(e.m)).sum()
    }

    pub fn mode(&self) -> ReductionMode {
        self.mode
    }

    pub fn gamma(&self) -> Option<&Gamma> {
        self.gamma.as_ref()
    }

    /// Turns a model count of the reduced formula into a weighted count.
    pub fn scale(&self, count: &BigUint) -> Rational {
        Rational::new(to_bigint(count), to_bigint(&self.c_w))
    }

    pub fn metadata(&self) -> ReductionMetadata {
        ReductionMetadata {
            c_w: self.c_w.to_string(),
            total_fresh: self.total_fresh(),
            projection_set: self.projection_set().iter().copied().collect(),
            per_var: self
                .per_var
                .iter()
                .map(|e| PerVarMetadata {
                    var: e.var,
                    p: e.p.to_string(),
                    q: e.q.to_string(),
                    m: e.m,
                    fresh_first: (!e.fresh.is_empty()).then_some(e.fresh.start),
                    fresh_last: (!e.fresh.is_empty()).then(|| e.fresh.end - 1),
                })
                .collect(),
            mode: self.mode,
            gamma: self.gamma.as_ref().map(Gamma::to_string),
        }
    }
}

/// JSON sidecar written next to a reduced instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionMetadata {
    pub c_w: String,
    pub total_fresh: u64,
    pub projection_set: Vec<u32>,
    pub per_var: Vec<PerVarMetadata>,
    pub mode: ReductionMode,
    pub gamma: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerVarMetadata {
    pub var: u32,
    pub p: String,
    pub q: String,
    pub m: u32,
    /// `None` when the variable needs no fresh variables (`W = 1/2`).
    pub fresh_first: Option<u32>,
    pub fresh_last: Option<u32>,
}

impl ReductionMetadata {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("bad reduction metadata: {e}")))
    }
}

fn to_bigint(x: &BigUint) -> BigInt {
    BigInt::from_biguint(Sign::Plus, x.clone())
}

fn require_normalized(f: &WeightedFormula) -> Result<()> {
    match f.weights().iter().find(|(_, w)| !w.is_normalized()) {
        Some((v, w)) => Err(Error::Contract(format!(
            "variable {v} has weights {} / {}; normalize the formula first",
            format_fraction(&w.pos),
            format_fraction(&w.neg)
        ))),
        None => Ok(()),
    }
}

/// Reduces a normalized weighted formula to an unweighted projected one.
pub fn deweight_reduce(f: &WeightedFormula) -> Result<Reduction> {
    require_normalized(f)?;
    let mut clauses = f.clauses().to_vec();
    let mut projection = f.sampling_set().clone();
    let mut per_var = Vec::with_capacity(f.weights().len());
    let mut c_w = BigUint::one();
    let mut next = f
        .num_vars()
        .checked_add(1)
        .ok_or_else(|| Error::Domain("variable count overflow".into()))?;

    for (&var, w) in f.weights() {
        let (p, q) = unit_parts(&w.pos).expect("normalized weight lies in (0, 1)");
        let m = bits_required(&p, &q)?;
        let m = u32::try_from(m).map_err(|_| Error::Domain(format!("variable {var} needs {m} fresh variables")))?;
        let on_true = ChainFormula::build(&p, m, next)?;
        let on_false = ChainFormula::build(&(&q - &p), m, next)?;
        clauses.extend(on_true.guarded_cnf(Literal::pos(var)));
        clauses.extend(on_false.guarded_cnf(Literal::neg(var)));

        let fresh = on_true.variables();
        projection.extend(fresh.clone());
        next = fresh.end;
        c_w *= &q;
        per_var.push(VarEncoding { var, p, q, m, fresh });
    }

    let formula = WeightedFormula::new(next - 1, clauses, Some(projection), BTreeMap::new())?;
    Ok(Reduction { formula, c_w, per_var, mode: ReductionMode::Exact, gamma: None })
}

/// Per-variable ratio bound `max(W/W', W'/W)` over both literals. `None` when
/// an adjusted literal weight is zero.
fn ratio_bound(orig: &WeightPair, adjusted: &WeightPair) -> Option<Rational> {
    let mut rho = Rational::one();
    for positive in [true, false] {
        let (w, w2) = (orig.literal(positive), adjusted.literal(positive));
        if w2.is_zero() || w.is_zero() {
            if w != w2 {
                return None;
            }
            continue;
        }
        rho = rho.max(w / w2).max(w2 / w);
    }
    Some(rho)
}

/// `gamma = prod(rho_i) - 1` over all weighted variables of `orig`.
/// Variables missing from `adjusted` were forced to 0 or 1.
pub fn adjustment_gamma(orig: &WeightedFormula, adjusted: &BTreeMap<u32, WeightPair>) -> Gamma {
    let mut product = Rational::one();
    for (v, w) in orig.weights() {
        let Some(w2) = adjusted.get(v) else {
            return Gamma::Unbounded;
        };
        match ratio_bound(w, w2) {
            Some(rho) => product *= rho,
            None => return Gamma::Unbounded,
        }
    }
    Gamma::Bounded(product - Rational::one())
}

#[derive(Debug, Clone)]
pub struct DyadicAdjustment {
    pub adjusted: WeightedFormula,
    pub gamma: Rational,
    pub bits: u32,
}

/// Rounds `w` to the nearest `j / 2^bits` with `1 <= j < 2^bits`, halves up.
pub fn nearest_dyadic(w: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = w * Rational::from_integer(scale.clone());
    let twice = (scaled * Rational::from_integer(2.into()) + Rational::one()).floor();
    let mut j = twice.to_integer().div_floor(&BigInt::from(2));
    j = j.clamp(BigInt::one(), &scale - 1);
    Rational::new(j, scale)
}

/// Replaces every weight by its nearest `bits`-bit dyadic value.
pub fn dyadic_adjust(f: &WeightedFormula, bits: u32) -> Result<DyadicAdjustment> {
    if bits < 1 {
        return Err(Error::Domain("dyadic adjustment needs at least one bit".into()));
    }
    require_normalized(f)?;
    let weights: BTreeMap<u32, WeightPair> = f
        .weights()
        .iter()
        .map(|(&v, w)| (v, WeightPair::complementary(nearest_dyadic(&w.pos, bits))))
        .collect();
    let gamma = match adjustment_gamma(f, &weights) {
        Gamma::Bounded(g) => g,
        Gamma::Unbounded => unreachable!("dyadic weights stay strictly inside (0, 1)"),
    };
    Ok(DyadicAdjustment { adjusted: f.with_weights(weights)?, gamma, bits })
}

/// Dyadic baseline: adjust to `bits`-bit dyadic weights, then reduce.
pub fn dyadic_reduce(f: &WeightedFormula, bits: u32) -> Result<Reduction> {
    let adj = dyadic_adjust(f, bits)?;
    let mut red = deweight_reduce(&adj.adjusted)?;
    red.mode = ReductionMode::Dyadic;
    red.gamma = Some(Gamma::Bounded(adj.gamma));
    Ok(red)
}

/// Error of an `(epsilon, delta)` count of a weight-adjusted instance
/// relative to the original: `epsilon * gamma + gamma + epsilon`.
pub fn combined_error(epsilon: &Rational, gamma: &Rational) -> Rational {
    epsilon * gamma + gamma + epsilon
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightChange {
    pub var: u32,
    pub original: Rational,
    pub adjusted: Rational,
}

impl WeightChange {
    pub fn distance(&self) -> Rational {
        num_traits::Signed::abs(&(&self.original - &self.adjusted))
    }

    /// The weight was rounded to 0 or 1 and replaced by a unit clause.
    pub fn eliminated(&self) -> bool {
        self.adjusted.is_zero() || self.adjusted.is_one()
    }
}

#[derive(Debug, Clone)]
pub struct WeightApproximation {
    /// Normalized formula; weights that became 0 or 1 are unit clauses.
    pub adjusted: WeightedFormula,
    pub changes: Vec<WeightChange>,
    pub gamma: Gamma,
}

/// Replaces every weight by its nearest `budget`-bit fraction.
pub fn approximate_weights(f: &WeightedFormula, budget: u32) -> Result<WeightApproximation> {
    require_normalized(f)?;
    let mut changes = Vec::with_capacity(f.weights().len());
    let mut weights = BTreeMap::new();
    for (&var, w) in f.weights() {
        let (p, q) = unit_parts(&w.pos).expect("normalized weight lies in (0, 1)");
        let adjusted = nearest_mbit_fraction(&p, &q, u64::from(budget))?.to_rational();
        weights.insert(var, WeightPair::complementary(adjusted.clone()));
        changes.push(WeightChange { var, original: w.pos.clone(), adjusted });
    }
    let snapped = f.with_weights(weights)?.normalize()?;
    let gamma = adjustment_gamma(f, snapped.weights());
    Ok(WeightApproximation { adjusted: snapped, changes, gamma })
}

/// Farey preprocessing under a per-variable bit budget, then reduction.
pub fn budget_reduce(f: &WeightedFormula, budget: u32) -> Result<(Reduction, Gamma)> {
    let approx = approximate_weights(f, budget)?;
    let mut red = deweight_reduce(&approx.adjusted)?;
    red.mode = ReductionMode::Budget;
    red.gamma = Some(approx.gamma.clone());
    Ok((red, approx.gamma))
}
