//! CNF instances with a sampling set and literal weights, plus the DIMACS
//! reader and writer.
//!
//! Weight lines use `c p weight <lit> <w> 0`; the older `w <lit> <w>` form is
//! also read, but a file must stick to one of the two. Sampling sets come from
//! `c ind ... 0` lines; without any, every variable is in the sampling set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::ops::Not;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_fraction, parse_weight, Rational};

const IND_VARS_PER_LINE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variable indices start at 1");
        Literal { var, positive }
    }

    pub fn pos(var: u32) -> Self {
        Literal::new(var, true)
    }

    pub fn neg(var: u32) -> Self {
        Literal::new(var, false)
    }

    pub fn from_dimacs(lit: i64) -> Option<Self> {
        let var = u32::try_from(lit.unsigned_abs()).ok()?;
        (var != 0).then(|| Literal::new(var, lit > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// Truth value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }
}

impl Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal { var: self.var, positive: !self.positive }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals. The empty clause is allowed and is false.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause { literals }
    }

    pub fn unit(lit: Literal) -> Self {
        Clause { literals: vec![lit] }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Evaluates the clause under a total assignment indexed by variable
    /// (index 0 unused).
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.literals.iter().any(|l| l.eval(assignment[l.var as usize]))
    }
}

impl From<Vec<Literal>> for Clause {
    fn from(literals: Vec<Literal>) -> Self {
        Clause::new(literals)
    }
}

impl FromIterator<Literal> for Clause {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Clause::new(iter.into_iter().collect())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for lit in &self.literals {
            write!(f, "{lit} ")?;
        }
        f.write_str("0")
    }
}

/// Weights of the two literals of one variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightPair {
    pub pos: Rational,
    pub neg: Rational,
}

impl WeightPair {
    pub fn new(pos: Rational, neg: Rational) -> Self {
        WeightPair { pos, neg }
    }

    /// `W(x) = w`, `W(!x) = 1 - w`.
    pub fn complementary(pos: Rational) -> Self {
        let neg = Rational::one() - &pos;
        WeightPair { pos, neg }
    }

    pub fn literal(&self, positive: bool) -> &Rational {
        if positive {
            &self.pos
        } else {
            &self.neg
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.pos.is_positive() && self.neg.is_positive() && (&self.pos + &self.neg).is_one()
    }
}

/// A CNF formula with a sampling set `P` and literal weights over `P`.
///
/// Variables of `P` without a weight entry count both polarities with
/// weight 1, so an instance with no weights is a plain projected counting
/// query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    sampling_set: BTreeSet<u32>,
    weights: BTreeMap<u32, WeightPair>,
}

impl WeightedFormula {
    /// Builds and validates a formula. `sampling_set = None` means all
    /// variables.
    pub fn new(
        num_vars: u32,
        clauses: Vec<Clause>,
        sampling_set: Option<BTreeSet<u32>>,
        weights: BTreeMap<u32, WeightPair>,
    ) -> Result<Self> {
        let sampling_set = sampling_set.unwrap_or_else(|| (1..=num_vars).collect());
        let f = WeightedFormula { num_vars, clauses, sampling_set, weights };
        f.validate()?;
        Ok(f)
    }

    /// Unweighted formula over all variables.
    pub fn unweighted(num_vars: u32, clauses: Vec<Clause>) -> Result<Self> {
        WeightedFormula::new(num_vars, clauses, None, BTreeMap::new())
    }

    fn validate(&self) -> Result<()> {
        for clause in &self.clauses {
            if let Some(l) = clause.literals.iter().find(|l| l.var > self.num_vars) {
                return Err(Error::Format(format!(
                    "literal {l} out of range for {} variables",
                    self.num_vars
                )));
            }
        }
        if let Some(v) = self.sampling_set.iter().find(|&&v| v == 0 || v > self.num_vars) {
            return Err(Error::Format(format!("sampling variable {v} out of range")));
        }
        for (&v, w) in &self.weights {
            if !self.sampling_set.contains(&v) {
                return Err(Error::Format(format!(
                    "variable {v} carries a weight but is not in the sampling set"
                )));
            }
            if w.pos.is_negative() || w.neg.is_negative() {
                return Err(Error::Domain(format!("variable {v} has a negative weight")));
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn sampling_set(&self) -> &BTreeSet<u32> {
        &self.sampling_set
    }

    pub fn weights(&self) -> &BTreeMap<u32, WeightPair> {
        &self.weights
    }

    pub fn weight(&self, var: u32) -> Option<&WeightPair> {
        self.weights.get(&var)
    }

    pub fn is_weighted(&self) -> bool {
        !self.weights.is_empty()
    }

    /// True when every weight pair lies strictly inside `(0, 1)` and sums to 1.
    pub fn is_normalized(&self) -> bool {
        self.weights.values().all(WeightPair::is_normalized)
    }

    /// Same clauses and sampling set, different weights.
    pub fn with_weights(&self, weights: BTreeMap<u32, WeightPair>) -> Result<Self> {
        WeightedFormula::new(self.num_vars, self.clauses.clone(), Some(self.sampling_set.clone()), weights)
    }

    pub fn without_weights(&self) -> Self {
        WeightedFormula { weights: BTreeMap::new(), ..self.clone() }
    }

    /// Rescales each weight pair to sum to 1 and replaces weights 0 and 1 by
    /// unit clauses.
    pub fn normalize(&self) -> Result<Self> {
        let mut clauses = self.clauses.clone();
        let mut weights = BTreeMap::new();
        for (&v, w) in &self.weights {
            let sum = &w.pos + &w.neg;
            if sum.is_zero() {
                return Err(Error::ZeroWeightSum(v));
            }
            let pos = &w.pos / &sum;
            if pos.is_one() {
                clauses.push(Clause::unit(Literal::pos(v)));
            } else if pos.is_zero() {
                clauses.push(Clause::unit(Literal::neg(v)));
            } else {
                weights.insert(v, WeightPair::complementary(pos));
            }
        }
        Ok(WeightedFormula {
            num_vars: self.num_vars,
            clauses,
            sampling_set: self.sampling_set.clone(),
            weights,
        })
    }

    /// Reads DIMACS CNF with optional `c ind` and weight lines.
    pub fn parse(text: &str) -> Result<Self> {
        Parser::default().run(text)
    }

    /// Writes canonical DIMACS text.
    pub fn emit(&self, include_weights: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        if self.sampling_set.is_empty() {
            out.push_str("c ind 0\n");
        }
        let vars: Vec<u32> = self.sampling_set.iter().copied().collect();
        for chunk in vars.chunks(IND_VARS_PER_LINE) {
            out.push_str("c ind");
            for v in chunk {
                let _ = write!(out, " {v}");
            }
            out.push_str(" 0\n");
        }
        if include_weights {
            for (v, w) in &self.weights {
                let _ = writeln!(out, "c p weight {v} {} 0", format_fraction(&w.pos));
                let _ = writeln!(out, "c p weight -{v} {} 0", format_fraction(&w.neg));
            }
        }
        for clause in &self.clauses {
            let _ = writeln!(out, "{clause}");
        }
        out
    }

    /// Evaluates the CNF under a total assignment (index 0 unused).
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.eval(assignment))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WeightSyntax {
    Competition,
    Legacy,
}

#[derive(Default)]
struct Parser {
    header: Option<(u32, usize)>,
    clauses: Vec<Clause>,
    pending: Vec<Literal>,
    sampling: Option<BTreeSet<u32>>,
    literal_weights: BTreeMap<Literal, Rational>,
    syntax: Option<WeightSyntax>,
}

impl Parser {
    fn run(mut self, text: &str) -> Result<WeightedFormula> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "c" => self.comment(&tokens, line_no)?,
                "p" => self.header(&tokens, line_no)?,
                "w" => {
                    self.use_syntax(WeightSyntax::Legacy, line_no)?;
                    if tokens.len() < 3 || tokens.len() > 4 || (tokens.len() == 4 && tokens[3] != "0") {
                        return Err(perr(line_no, line, "expected `w <lit> <weight>`"));
                    }
                    self.weight(tokens[1], tokens[2], line_no)?;
                }
                t if t.starts_with('c') => {}
                _ => self.clause_tokens(&tokens, line_no)?,
            }
        }
        if !self.pending.is_empty() {
            let tail: Vec<String> = self.pending.iter().map(|l| l.to_string()).collect();
            return Err(Error::Parse {
                line: None,
                token: tail.join(" "),
                reason: "clause not terminated by 0".into(),
            });
        }
        let (num_vars, declared) = self.header.ok_or_else(|| Error::Format("missing `p cnf` header".into()))?;
        if declared != self.clauses.len() {
            return Err(Error::Format(format!(
                "header declares {declared} clauses but {} were found",
                self.clauses.len()
            )));
        }

        let mut grouped: BTreeMap<u32, (Option<Rational>, Option<Rational>)> = BTreeMap::new();
        for (lit, w) in self.literal_weights {
            let entry = grouped.entry(lit.var()).or_default();
            if lit.is_positive() {
                entry.0 = Some(w);
            } else {
                entry.1 = Some(w);
            }
        }
        let mut weights = BTreeMap::new();
        for (v, pair) in grouped {
            if v > num_vars {
                return Err(Error::Format(format!("weight on variable {v} out of range")));
            }
            let pair = match pair {
                (Some(p), Some(n)) => WeightPair::new(p, n),
                (Some(p), None) => single_weight(v, p, true)?,
                (None, Some(n)) => single_weight(v, n, false)?,
                (None, None) => unreachable!(),
            };
            weights.insert(v, pair);
        }
        WeightedFormula::new(num_vars, self.clauses, self.sampling, weights)
    }

    fn use_syntax(&mut self, syntax: WeightSyntax, line: usize) -> Result<()> {
        match self.syntax {
            Some(s) if s != syntax => Err(Error::Format(format!(
                "line {line}: `c p weight` and legacy `w` weight lines cannot be mixed"
            ))),
            _ => {
                self.syntax = Some(syntax);
                Ok(())
            }
        }
    }

    fn header(&mut self, tokens: &[&str], line: usize) -> Result<()> {
        if self.header.is_some() {
            return Err(Error::Format(format!("line {line}: duplicate `p` header")));
        }
        if tokens.len() != 4 || tokens[1] != "cnf" {
            return Err(perr(line, &tokens.join(" "), "expected `p cnf <vars> <clauses>`"));
        }
        let vars = tokens[2].parse::<u32>().map_err(|_| perr(line, tokens[2], "bad variable count"))?;
        let clauses = tokens[3].parse::<usize>().map_err(|_| perr(line, tokens[3], "bad clause count"))?;
        self.header = Some((vars, clauses));
        Ok(())
    }

    fn comment(&mut self, tokens: &[&str], line: usize) -> Result<()> {
        match tokens.get(1).copied() {
            Some("ind") => {
                let set = self.sampling.get_or_insert_with(BTreeSet::new);
                let body = &tokens[2..];
                if body.last() != Some(&"0") {
                    return Err(perr(line, &tokens.join(" "), "`c ind` line not terminated by 0"));
                }
                for tok in &body[..body.len() - 1] {
                    let v = tok.parse::<u32>().map_err(|_| perr(line, tok, "bad sampling variable"))?;
                    if v == 0 {
                        return Err(perr(line, tok, "0 inside `c ind` list"));
                    }
                    set.insert(v);
                }
                Ok(())
            }
            Some("p") if tokens.get(2) == Some(&"weight") => {
                self.use_syntax(WeightSyntax::Competition, line)?;
                let ok_len = tokens.len() == 5 || (tokens.len() == 6 && tokens[5] == "0");
                if !ok_len {
                    return Err(perr(line, &tokens.join(" "), "expected `c p weight <lit> <weight> 0`"));
                }
                self.weight(tokens[3], tokens[4], line)
            }
            _ => Ok(()),
        }
    }

    fn weight(&mut self, lit: &str, value: &str, line: usize) -> Result<()> {
        let lit = lit
            .parse::<i64>()
            .ok()
            .and_then(Literal::from_dimacs)
            .ok_or_else(|| perr(line, lit, "bad weighted literal"))?;
        let w = parse_weight(value).map_err(|e| match e {
            Error::Parse { token, reason, .. } => Error::Parse { line: Some(line), token, reason },
            other => other,
        })?;
        if w.is_negative() {
            return Err(perr(line, value, "negative weight"));
        }
        if self.literal_weights.insert(lit, w).is_some() {
            return Err(perr(line, &lit.to_string(), "duplicate weight for literal"));
        }
        Ok(())
    }

    fn clause_tokens(&mut self, tokens: &[&str], line: usize) -> Result<()> {
        let Some((num_vars, _)) = self.header else {
            return Err(perr(line, tokens[0], "clause before `p cnf` header"));
        };
        for tok in tokens {
            let lit: i64 = tok.parse().map_err(|_| perr(line, tok, "not an integer literal"))?;
            if lit == 0 {
                self.clauses.push(Clause::new(std::mem::take(&mut self.pending)));
                continue;
            }
            let lit = Literal::from_dimacs(lit).ok_or_else(|| perr(line, tok, "literal out of range"))?;
            if lit.var() > num_vars {
                return Err(perr(line, tok, "variable index exceeds header count"));
            }
            self.pending.push(lit);
        }
        Ok(())
    }
}

fn single_weight(var: u32, w: Rational, positive: bool) -> Result<WeightPair> {
    if w > Rational::one() {
        return Err(Error::Domain(format!(
            "variable {var}: single literal weight {} exceeds 1",
            format_fraction(&w)
        )));
    }
    let other = Rational::one() - &w;
    Ok(if positive {
        WeightPair::new(w, other)
    } else {
        WeightPair::new(other, w)
    })
}

fn perr(line: usize, token: &str, reason: &str) -> Error {
    Error::Parse { line: Some(line), token: token.to_string(), reason: reason.to_string() }
}
