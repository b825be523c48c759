//! Reduction of literal-weighted model counting (discrete integration) to
//! unweighted projected model counting.
//!
//! A weight `W(x) = p/q` is simulated by two chain formulas over a shared
//! block of `⌈log₂ max(p, q-p)⌉` fresh variables, one guarded by `x` with
//! `p` models and one guarded by `!x` with `q - p` models. The projected model
//! count of the result, divided by the product of the denominators, is the
//! weighted count. The crate also provides the nearest m-bit fraction search
//! used to fit weights under a bit budget, a dyadic baseline with its error
//! bound, exact and external counting backends, and a seeded self-test.
//!
//! ```
//! use deweight::{integrate, ExactCounter, Rational, WeightedFormula};
//!
//! let text = "p cnf 2 1\nc p weight 1 2/3 0\nc p weight 2 1/2 0\n1 2 0\n";
//! let f = WeightedFormula::parse(text)?.normalize()?;
//! let zero = Rational::from_integer(0.into());
//! let r = integrate(&f, &zero, &zero, &ExactCounter::default())?;
//! assert_eq!(r.value, Rational::new(5.into(), 6.into()));
//! # Ok::<(), deweight::Error>(())
//! ```

pub mod chain;
pub mod count;
pub mod error;
pub mod formula;
pub mod random;
pub mod rational;
pub mod reduce;
pub mod selftest;

pub use chain::ChainFormula;
pub use count::{integrate, integrate_reduction, CountResult, CounterProfile, ExactCounter, ModelCounter, OutputPattern};
#[cfg(feature = "external")]
pub use count::ExternalCounter;
pub use error::{Error, Result};
pub use formula::{Clause, Literal, WeightPair, WeightedFormula};
pub use rational::{Fraction, Rational};
pub use reduce::{Gamma, Reduction, ReductionMetadata, ReductionMode};
