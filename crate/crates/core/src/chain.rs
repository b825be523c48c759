//! Chain formulas: formulas over `m` variables with exactly `k` models.
//!
//! With `c_1 .. c_m` the m-bit binary expansion of `k` (most significant bit
//! first) and `t` the position of its last set bit, the chain formula is
//! `a_1 C_1 (a_2 C_2 (... (a_{t-1} C_{t-1} a_t)))` where `C_j` is `or` when
//! `c_j = 1` and `and` otherwise. `k = 2^m` is the tautology.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::{Clause, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connector {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFormula {
    k: BigUint,
    m: u32,
    /// `c_1 .. c_m`; empty for the tautology.
    bits: Vec<bool>,
    first_var: u32,
}

impl ChainFormula {
    /// Builds `phi_{k,m}` over variables `first_var .. first_var + m`.
    pub fn build(k: &BigUint, m: u32, first_var: u32) -> Result<Self> {
        let full = BigUint::one() << m;
        if k.is_zero() || k > &full {
            return Err(Error::Domain(format!("chain formula needs 1 <= k <= 2^{m}, got k={k}")));
        }
        if first_var == 0 || first_var.checked_add(m).is_none() {
            return Err(Error::Domain(format!("fresh block starting at {first_var} does not fit")));
        }
        let bits = if k == &full {
            Vec::new()
        } else {
            (0..m).map(|j| k.bit(u64::from(m - 1 - j))).collect()
        };
        Ok(ChainFormula { k: k.clone(), m, bits, first_var })
    }

    pub fn k(&self) -> &BigUint {
        &self.k
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_tautology(&self) -> bool {
        self.bits.is_empty()
    }

    /// 1-based position of the last set bit; `None` for the tautology.
    pub fn last_set_bit(&self) -> Option<usize> {
        self.bits.iter().rposition(|&b| b).map(|i| i + 1)
    }

    /// The variable block `a_1 .. a_m`.
    pub fn variables(&self) -> std::ops::Range<u32> {
        self.first_var..self.first_var + self.m
    }

    fn var(&self, j: usize) -> u32 {
        self.first_var + j as u32 - 1
    }

    /// Connectors `C_1 .. C_{t-1}`.
    pub fn connectors(&self) -> Vec<Connector> {
        let t = self.last_set_bit().unwrap_or(0);
        self.bits[..t.saturating_sub(1)]
            .iter()
            .map(|&b| if b { Connector::Or } else { Connector::And })
            .collect()
    }

    /// Evaluates the formula body on values of `a_1 .. a_m`.
    pub fn eval(&self, values: &[bool]) -> bool {
        let Some(t) = self.last_set_bit() else {
            return true;
        };
        let mut acc = values[t - 1];
        for (j, conn) in self.connectors().iter().enumerate().rev() {
            acc = match conn {
                Connector::Or => values[j] || acc,
                Connector::And => values[j] && acc,
            };
        }
        acc
    }

    /// CNF of `guard -> phi_{k,m}` without auxiliary variables.
    ///
    /// Walking the chain left to right, the `or`-connected variables seen so
    /// far form a prefix that every later clause carries; each `and`
    /// connector closes one clause.
    pub fn guarded_cnf(&self, guard: Literal) -> Vec<Clause> {
        let Some(t) = self.last_set_bit() else {
            return Vec::new();
        };
        let mut prefix = vec![!guard];
        let mut clauses = Vec::new();
        for (j, conn) in self.connectors().into_iter().enumerate() {
            let a_j = Literal::pos(self.var(j + 1));
            match conn {
                Connector::Or => prefix.push(a_j),
                Connector::And => {
                    let mut c = prefix.clone();
                    c.push(a_j);
                    clauses.push(Clause::new(c));
                }
            }
        }
        prefix.push(Literal::pos(self.var(t)));
        clauses.push(Clause::new(prefix));
        clauses
    }

    /// Flips bit `c_j` (1-based) in place. Used by the self-test fault mode.
    pub(crate) fn flip_bit(&mut self, j: usize) {
        if let Some(b) = self.bits.get_mut(j - 1) {
            *b = !*b;
        }
    }
}

impl fmt::Display for ChainFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(t) = self.last_set_bit() else {
            return f.write_str("true");
        };
        let conns = self.connectors();
        for (j, conn) in conns.iter().enumerate() {
            let op = match conn {
                Connector::Or => "|",
                Connector::And => "&",
            };
            write!(f, "a{} {op} ", j + 1)?;
            if j + 1 < conns.len() {
                f.write_str("(")?;
            }
        }
        write!(f, "a{t}")?;
        for _ in 1..conns.len() {
            f.write_str(")")?;
        }
        Ok(())
    }
}
