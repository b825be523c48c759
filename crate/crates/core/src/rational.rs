//! Exact rational arithmetic helpers and the nearest m-bit fraction search.
//!
//! Weights are carried as [`Rational`] (an arbitrary-precision fraction kept
//! in lowest terms). The mediant walk works on raw [`Fraction`] pairs instead,
//! mirroring a descent through the Stern–Brocot tree restricted to `[0, 1]`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational in canonical form (positive denominator,
/// numerator and denominator coprime).
pub type Rational = num_rational::BigRational;

/// Parses a weight written as an integer, a finite decimal (`0.25`, `.5`,
/// `-1.0`) or an integer fraction (`2/3`). The conversion is exact.
pub fn parse_weight(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = |reason: &str| Error::Parse {
        line: None,
        token: s.to_string(),
        reason: reason.to_string(),
    };
    if s.is_empty() {
        return Err(bad("empty weight"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_integer(num).ok_or_else(|| bad("malformed numerator"))?;
        let den = parse_integer(den).ok_or_else(|| bad("malformed denominator"))?;
        if den.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }

    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no digits"));
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad("not a decimal number"));
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(|| bad("not a decimal number"))?;
    if negative {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    Ok(Rational::new(numer, denom))
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let s = s.trim();
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Formats a rational as `p/q`, or `p` when the denominator is one.
pub fn format_fraction(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders `r` in scientific notation with `digits` significant digits,
/// rounding half away from zero. Exact: no floating point is involved.
pub fn to_scientific(r: &Rational, digits: usize) -> String {
    let digits = digits.max(1);
    if r.is_zero() {
        return format!("{:.*}e0", digits - 1, 0.0);
    }
    let sign = if r.is_negative() { "-" } else { "" };
    let num = r.numer().magnitude().clone();
    let den = r.denom().magnitude().clone();

    // exponent e with 10^e <= |r| < 10^(e+1)
    let mut exp = num.to_string().len() as i64 - den.to_string().len() as i64;
    let ten = BigUint::from(10u32);
    let scaled_ge = |e: i64| -> bool {
        // |r| >= 10^e
        if e >= 0 {
            num >= &den * num_traits::pow(ten.clone(), e as usize)
        } else {
            &num * num_traits::pow(ten.clone(), (-e) as usize) >= den
        }
    };
    while !scaled_ge(exp) {
        exp -= 1;
    }
    while scaled_ge(exp + 1) {
        exp += 1;
    }

    // mantissa digits: round(|r| * 10^(digits-1-exp))
    let shift = digits as i64 - 1 - exp;
    let (n, d) = if shift >= 0 {
        (num * num_traits::pow(ten.clone(), shift as usize), den)
    } else {
        (num, den * num_traits::pow(ten.clone(), (-shift) as usize))
    };
    let (mut q, rem) = n.div_rem(&d);
    if rem * 2u32 >= d {
        q += 1u32;
    }
    let mut mantissa = q.to_string();
    if mantissa.len() > digits {
        // rounding carried into a new digit (9.99.. -> 10.0..)
        mantissa.truncate(digits);
        exp += 1;
    }
    let (head, tail) = mantissa.split_at(1);
    if tail.is_empty() {
        format!("{sign}{head}e{exp}")
    } else {
        format!("{sign}{head}.{tail}e{exp}")
    }
}

/// Exact decimal rendering when the value has a terminating expansion
/// (denominator of the form 2^a 5^b), otherwise `None`.
pub fn to_terminating_decimal(r: &Rational) -> Option<String> {
    let mut den = r.denom().magnitude().clone();
    let (two, five) = (BigUint::from(2u32), BigUint::from(5u32));
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = r * Rational::from_integer(num_traits::pow(BigInt::from(10u32), places));
    let digits = scaled.to_integer().magnitude().to_string();
    let sign = if r.is_negative() { "-" } else { "" };
    if places == 0 {
        return Some(format!("{sign}{digits}"));
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    Some(format!("{sign}{int}.{frac}"))
}

/// `⌈log₂ x⌉` by bit length, with `⌈log₂ 0⌉ = ⌈log₂ 1⌉ = 0`.
pub fn ceil_log2(x: &BigUint) -> u64 {
    if x.is_zero() {
        return 0;
    }
    (x - 1u32).bits()
}

/// Number of fresh variables needed to encode a weight `p/q` with two chain
/// formulas sharing one block: the smallest `m` with `p <= 2^m` and
/// `q - p <= 2^m`.
pub fn bits_required(p: &BigUint, q: &BigUint) -> Result<u64> {
    if p.is_zero() || p >= q {
        return Err(Error::Domain(format!(
            "bits_required needs 0 < p < q, got p={p}, q={q}"
        )));
    }
    Ok(ceil_log2(p).max(ceil_log2(&(q - p))))
}

/// A raw numerator/denominator pair inside `[0, 1]`, not necessarily reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub a: BigUint,
    pub b: BigUint,
}

impl Fraction {
    pub fn new(a: impl Into<BigUint>, b: impl Into<BigUint>) -> Self {
        Fraction { a: a.into(), b: b.into() }
    }

    pub fn zero() -> Self {
        Fraction::new(0u32, 1u32)
    }

    pub fn one() -> Self {
        Fraction::new(1u32, 1u32)
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(
            BigInt::from_biguint(Sign::Plus, self.a.clone()),
            BigInt::from_biguint(Sign::Plus, self.b.clone()),
        )
    }

    /// Compares the values `a/b` by cross multiplication.
    pub fn cmp_value(&self, other: &Fraction) -> Ordering {
        (&self.a * &other.b).cmp(&(&other.a * &self.b))
    }

    fn reduced(&self) -> Fraction {
        let g = self.a.gcd(&self.b);
        if g.is_one() || g.is_zero() {
            self.clone()
        } else {
            Fraction { a: &self.a / &g, b: &self.b / &g }
        }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.a, self.b)
    }
}

pub fn mediant(lo: &Fraction, hi: &Fraction) -> Fraction {
    Fraction { a: &lo.a + &hi.a, b: &lo.b + &hi.b }
}

/// True iff `a/b` is irreducible with `a <= 2^m` and `b - a <= 2^m`.
pub fn is_mbit_fraction(f: &Fraction, m: u64) -> bool {
    if f.b.is_zero() || f.a > f.b || !f.a.gcd(&f.b).is_one() {
        return false;
    }
    within_bits(f, m)
}

fn within_bits(f: &Fraction, m: u64) -> bool {
    ceil_log2(&f.a) <= m && ceil_log2(&(&f.b - &f.a)) <= m
}

/// One bracketing step of the mediant walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkStep {
    pub lo: Fraction,
    pub hi: Fraction,
    pub mediant: Fraction,
}

/// Iterative mediant walk toward `p/q`, starting from the bracket `[0/1, 1/1]`.
///
/// Iterating yields each bracket together with the mediant it produced; the
/// walk ends when the target is hit or the mediant exceeds the bit budget.
/// [`MediantWalk::result`] then reports the nearest m-bit fraction.
#[derive(Debug, Clone)]
pub struct MediantWalk {
    target: Fraction,
    m: u64,
    lo: Fraction,
    hi: Fraction,
    outcome: Option<Fraction>,
}

impl MediantWalk {
    pub fn new(p: &BigUint, q: &BigUint, m: u64) -> Result<Self> {
        if q.is_zero() || p > q {
            return Err(Error::Domain(format!(
                "nearest m-bit fraction needs 0 <= p <= q and q >= 1, got p={p}, q={q}"
            )));
        }
        let target = Fraction { a: p.clone(), b: q.clone() }.reduced();
        let (lo, hi) = (Fraction::zero(), Fraction::one());
        let outcome = if target == lo || target == hi {
            Some(target.clone())
        } else {
            None
        };
        Ok(MediantWalk { target, m, lo, hi, outcome })
    }

    pub fn target(&self) -> &Fraction {
        &self.target
    }

    /// Runs the walk to completion and returns the nearest m-bit fraction.
    pub fn result(mut self) -> Fraction {
        while self.next().is_some() {}
        self.outcome.expect("walk finished without an outcome")
    }

    fn pick_closer(&self) -> Fraction {
        let target = self.target.to_rational();
        let d_lo = (&target - self.lo.to_rational()).abs();
        let d_hi = (self.hi.to_rational() - &target).abs();
        match d_lo.cmp(&d_hi) {
            Ordering::Less => self.lo.clone(),
            Ordering::Greater => self.hi.clone(),
            // equidistant: smaller denominator, then smaller value
            Ordering::Equal => {
                if self.hi.b < self.lo.b {
                    self.hi.clone()
                } else {
                    self.lo.clone()
                }
            }
        }
    }
}

impl Iterator for MediantWalk {
    type Item = WalkStep;

    fn next(&mut self) -> Option<WalkStep> {
        if self.outcome.is_some() {
            return None;
        }
        let med = mediant(&self.lo, &self.hi);
        let step = WalkStep { lo: self.lo.clone(), hi: self.hi.clone(), mediant: med.clone() };
        // the budget check comes first: a target reached by a mediant that is
        // itself over budget must not be returned
        if !within_bits(&med, self.m) {
            self.outcome = Some(self.pick_closer());
        } else if med == self.target {
            self.outcome = Some(med);
        } else {
            match med.cmp_value(&self.target) {
                Ordering::Less => self.lo = med,
                Ordering::Greater => self.hi = med,
                Ordering::Equal => unreachable!("reduced mediant equal in value to reduced target"),
            }
        }
        Some(step)
    }
}

/// Nearest m-bit fraction to `p/q` (Farey mediant search).
///
/// Returns `p/q` itself (reduced) when it already fits the budget. Targets
/// `0` and `1` return `0/1` and `1/1`.
pub fn nearest_mbit_fraction(p: &BigUint, q: &BigUint, m: u64) -> Result<Fraction> {
    Ok(MediantWalk::new(p, q, m)?.result())
}

/// Splits a rational in `[0, 1]` into unsigned numerator and denominator.
pub fn unit_parts(r: &Rational) -> Option<(BigUint, BigUint)> {
    if r.is_negative() || r > &Rational::one() {
        return None;
    }
    Some((r.numer().magnitude().clone(), r.denom().magnitude().clone()))
}

/// Lossy conversion for display and plotting only.
pub fn approx_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn from_biguint(x: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, x.clone()))
}
