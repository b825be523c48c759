//! Counting backends and the end-to-end weighted counting pipeline.
//!
//! [`ExactCounter`] is a small projected model counter (branching on
//! sampling variables, component splitting, DPLL for the existential part).
//! It exists to check reductions at desk scale. [`ExternalCounter`] hands the reduced instance to an external
//! (approximate) projected model counter.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::{Clause, Literal, WeightedFormula};
use crate::rational::Rational;
use crate::reduce::{deweight_reduce, Reduction};

/// Default limit on the sampling-set size accepted by the exact backend.
pub const DEFAULT_EXACT_CAP: usize = 24;

/// Enumeration masks are `u64`.
const MAX_ENUMERATED: usize = 63;

/// DPLL satisfiability check with unit propagation and chronological
/// backtracking. Branches on the lowest unassigned variable, false first.
pub struct Dpll<'a> {
    clauses: &'a [Clause],
    /// Variables occurring in some clause, ascending.
    branch_vars: Vec<u32>,
    values: Vec<Option<bool>>,
    trail: Vec<u32>,
}

impl<'a> Dpll<'a> {
    pub fn new(num_vars: u32, clauses: &'a [Clause]) -> Self {
        let mut seen = vec![false; num_vars as usize + 1];
        for c in clauses {
            for l in c.literals() {
                seen[l.var() as usize] = true;
            }
        }
        let branch_vars = (1..=num_vars).filter(|&v| seen[v as usize]).collect();
        Dpll { clauses, branch_vars, values: vec![None; num_vars as usize + 1], trail: Vec::new() }
    }

    fn assign(&mut self, lit: Literal) {
        self.values[lit.var() as usize] = Some(lit.is_positive());
        self.trail.push(lit.var());
    }

    fn undo_to(&mut self, len: usize) {
        for v in self.trail.drain(len..) {
            self.values[v as usize] = None;
        }
    }

    /// Runs unit propagation to a fixpoint. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for clause in self.clauses {
                let mut open = None;
                let mut open_count = 0;
                let mut satisfied = false;
                for &lit in clause.literals() {
                    match self.values[lit.var() as usize] {
                        Some(v) if lit.eval(v) => {
                            satisfied = true;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            open_count += 1;
                            open = Some(lit);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match (open_count, open) {
                    (0, _) => return false,
                    (1, Some(lit)) => {
                        self.assign(lit);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// True iff some total extension of `fixed` satisfies every clause.
    pub fn solve(&mut self, fixed: &[Literal]) -> bool {
        self.undo_to(0);
        for &lit in fixed {
            match self.values[lit.var() as usize] {
                Some(v) if v != lit.is_positive() => return false,
                Some(_) => {}
                None => self.assign(lit),
            }
        }
        // (trail length before the decision, variable, already flipped)
        let mut decisions: Vec<(usize, u32, bool)> = Vec::new();
        loop {
            if self.propagate() {
                let next = self.branch_vars.iter().copied().find(|&v| self.values[v as usize].is_none());
                match next {
                    None => return true,
                    Some(v) => {
                        decisions.push((self.trail.len(), v, false));
                        self.assign(Literal::neg(v));
                    }
                }
            } else {
                loop {
                    let Some((len, v, flipped)) = decisions.pop() else {
                        return false;
                    };
                    self.undo_to(len);
                    if !flipped {
                        decisions.push((len, v, true));
                        self.assign(Literal::pos(v));
                        break;
                    }
                }
            }
        }
    }
}

pub fn dpll_sat(num_vars: u32, clauses: &[Clause], fixed: &[Literal]) -> bool {
    Dpll::new(num_vars, clauses).solve(fixed)
}

fn fixed_literals(vars: &[u32], mask: u64, out: &mut Vec<Literal>) {
    out.clear();
    out.extend(vars.iter().enumerate().map(|(i, &v)| Literal::new(v, mask >> i & 1 == 1)));
}

fn check_cap(size: usize, cap: usize) -> Result<()> {
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(())
}

/// Folds `map(mask)` over every sampling-set point that extends to a model.
fn fold_projection<T, M, C>(
    num_vars: u32,
    clauses: &[Clause],
    vars: &[u32],
    identity: fn() -> T,
    map: M,
    combine: C,
) -> T
where
    T: Send,
    M: Fn(u64) -> T + Sync,
    C: Fn(T, T) -> T + Sync + Send,
{
    let total = 1u64 << vars.len();

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..total)
            .into_par_iter()
            .fold(
                || (Dpll::new(num_vars, clauses), Vec::new(), identity()),
                |(mut solver, mut fixed, acc), mask| {
                    fixed_literals(vars, mask, &mut fixed);
                    let acc = if solver.solve(&fixed) { combine(acc, map(mask)) } else { acc };
                    (solver, fixed, acc)
                },
            )
            .map(|(_, _, acc)| acc)
            .reduce(identity, &combine)
    }

    #[cfg(not(feature = "parallel"))]
    {
        let mut solver = Dpll::new(num_vars, clauses);
        let mut fixed = Vec::new();
        (0..total).fold(identity(), |acc, mask| {
            fixed_literals(vars, mask, &mut fixed);
            if solver.solve(&fixed) {
                combine(acc, map(mask))
            } else {
                acc
            }
        })
    }
}

/// Number of assignments to `projection` that extend to a model.
///
/// Branches on sampling variables only, with unit propagation, factoring of
/// sampling variables that no remaining clause mentions, and splitting of the
/// residual clauses into variable-disjoint components. Components without
/// sampling variables only need a satisfiability check. Refuses projections
/// larger than `cap`.
pub fn exact_projected_count(num_vars: u32, clauses: &[Clause], projection: &[u32], cap: usize) -> Result<BigUint> {
    check_cap(projection.len(), cap)?;
    let mut in_projection = vec![false; num_vars as usize + 1];
    for &v in projection {
        in_projection[v as usize] = true;
    }
    let counter = ComponentCounter { num_vars, in_projection };
    let scope: Vec<u32> = {
        let mut p = projection.to_vec();
        p.sort_unstable();
        p.dedup();
        p
    };
    Ok(counter.count(clauses.to_vec(), scope))
}

/// Same value as [`exact_projected_count`] by plain enumeration of all
/// `2^|projection|` points, each checked with [`Dpll`].
pub fn enumerated_projected_count(num_vars: u32, clauses: &[Clause], projection: &[u32], cap: usize) -> Result<BigUint> {
    check_cap(projection.len(), cap.min(MAX_ENUMERATED))?;
    let n = fold_projection(num_vars, clauses, projection, || 0u64, |_| 1u64, |a, b| a + b);
    Ok(BigUint::from(n))
}

struct ComponentCounter {
    num_vars: u32,
    in_projection: Vec<bool>,
}

impl ComponentCounter {
    /// Counts assignments to `scope` (unassigned sampling variables, sorted)
    /// extending to models of `clauses`.
    fn count(&self, mut clauses: Vec<Clause>, scope: Vec<u32>) -> BigUint {
        let Some(assigned) = propagate_owned(&mut clauses) else {
            return BigUint::zero();
        };

        let mut occurs = vec![false; self.num_vars as usize + 1];
        for c in &clauses {
            for l in c.literals() {
                occurs[l.var() as usize] = true;
            }
        }
        let free = scope
            .iter()
            .filter(|&&v| !occurs[v as usize] && !assigned.contains(&v))
            .count();
        let mut total = BigUint::one() << free;

        for component in split_components(self.num_vars, clauses) {
            let mut vars: Vec<u32> = component
                .iter()
                .flat_map(|c| c.literals().iter().map(|l| l.var()))
                .filter(|&v| self.in_projection[v as usize])
                .collect();
            vars.sort_unstable();
            vars.dedup();

            let n = match vars.first().copied() {
                None => {
                    if Dpll::new(self.num_vars, &component).solve(&[]) {
                        BigUint::one()
                    } else {
                        BigUint::zero()
                    }
                }
                Some(v) => [Literal::neg(v), Literal::pos(v)]
                    .into_iter()
                    .map(|lit| {
                        let mut branch = component.clone();
                        branch.push(Clause::unit(lit));
                        self.count(branch, vars.clone())
                    })
                    .sum(),
            };
            if n.is_zero() {
                return n;
            }
            total *= n;
        }
        total
    }
}

/// Unit propagation that rewrites the clause list in place. Returns the
/// variables it assigned, or `None` on conflict.
fn propagate_owned(clauses: &mut Vec<Clause>) -> Option<Vec<u32>> {
    let mut assigned = Vec::new();
    loop {
        if clauses.iter().any(Clause::is_empty) {
            return None;
        }
        let Some(unit) = clauses.iter().find(|c| c.len() == 1).map(|c| c.literals()[0]) else {
            return Some(assigned);
        };
        assigned.push(unit.var());
        let mut next = Vec::with_capacity(clauses.len());
        for c in clauses.drain(..) {
            if c.literals().contains(&unit) {
                continue;
            }
            if c.literals().contains(&!unit) {
                next.push(c.literals().iter().copied().filter(|&l| l != !unit).collect());
            } else {
                next.push(c);
            }
        }
        *clauses = next;
    }
}

/// Groups clauses into connected components of the shared-variable graph.
fn split_components(num_vars: u32, clauses: Vec<Clause>) -> Vec<Vec<Clause>> {
    let mut parent: Vec<u32> = (0..=num_vars).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for c in &clauses {
        let lits = c.literals();
        for w in lits.windows(2) {
            let (a, b) = (find(&mut parent, w[0].var()), find(&mut parent, w[1].var()));
            if a != b {
                parent[a as usize] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<u32, Vec<Clause>> = std::collections::BTreeMap::new();
    for c in clauses {
        let root = find(&mut parent, c.literals()[0].var());
        groups.entry(root).or_default().push(c);
    }
    groups.into_values().collect()
}

/// Weighted projected count by enumeration. Weighted variables contribute
/// their literal weight; unweighted sampling variables contribute 1.
pub fn exact_weighted_count(f: &WeightedFormula, cap: usize) -> Result<Rational> {
    let vars: Vec<u32> = f.sampling_set().iter().copied().collect();
    check_cap(vars.len(), cap.min(MAX_ENUMERATED))?;
    let weights: Vec<Option<(&Rational, &Rational)>> = vars
        .iter()
        .map(|v| f.weight(*v).map(|w| (&w.pos, &w.neg)))
        .collect();
    let weight_of = |mask: u64| -> Rational {
        let mut w = Rational::one();
        for (i, pair) in weights.iter().enumerate() {
            if let Some((pos, neg)) = pair {
                w *= if mask >> i & 1 == 1 { *pos } else { *neg };
            }
        }
        w
    };
    Ok(fold_projection(f.num_vars(), f.clauses(), &vars, Rational::zero, weight_of, |a, b| a + b))
}

/// A projected model counter for unweighted formulas.
pub trait ModelCounter {
    fn name(&self) -> String;

    /// Whether counts are exact (`epsilon = delta = 0`).
    fn is_exact(&self) -> bool;

    /// Counts assignments to `f`'s sampling set that extend to models.
    fn count(&self, f: &WeightedFormula, epsilon: &Rational, delta: &Rational) -> Result<BigUint>;
}

#[derive(Debug, Clone, Copy)]
pub struct ExactCounter {
    pub cap: usize,
}

impl Default for ExactCounter {
    fn default() -> Self {
        ExactCounter { cap: DEFAULT_EXACT_CAP }
    }
}

impl ModelCounter for ExactCounter {
    fn name(&self) -> String {
        "exact".into()
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn count(&self, f: &WeightedFormula, _: &Rational, _: &Rational) -> Result<BigUint> {
        let vars: Vec<u32> = f.sampling_set().iter().copied().collect();
        exact_projected_count(f.num_vars(), f.clauses(), &vars, self.cap)
    }
}

/// How to read a count from the external tool's standard output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputPattern {
    /// A line `s mc <N>`.
    SMc,
    /// A line `Number of solutions is: <a> x 2^<b>`.
    MultPow2,
}

impl std::str::FromStr for OutputPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s-mc" => Ok(OutputPattern::SMc),
            "mult-pow2" => Ok(OutputPattern::MultPow2),
            other => Err(Error::Domain(format!("unknown counter output pattern `{other}`"))),
        }
    }
}

impl fmt::Display for OutputPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputPattern::SMc => "s-mc",
            OutputPattern::MultPow2 => "mult-pow2",
        })
    }
}

/// Extracts the model count from counter output.
pub fn parse_counter_output(output: &str, pattern: OutputPattern) -> Result<BigUint> {
    let fail = || Error::Backend {
        message: format!("no `{pattern}` count line in counter output"),
        exit_code: Some(0),
        output: output.to_string(),
    };
    for line in output.lines().map(str::trim) {
        match pattern {
            OutputPattern::SMc => {
                if line == "s UNSATISFIABLE" {
                    return Ok(BigUint::zero());
                }
                if let Some(rest) = line.strip_prefix("s mc ") {
                    return rest.trim().parse::<BigUint>().map_err(|_| fail());
                }
            }
            OutputPattern::MultPow2 => {
                let Some(rest) = line.split_once("Number of solutions is:").map(|(_, r)| r) else {
                    continue;
                };
                let (mult, exp) = rest
                    .split_once("x 2^")
                    .or_else(|| rest.split_once("*2^"))
                    .ok_or_else(fail)?;
                let mult: BigUint = mult.trim().parse().map_err(|_| fail())?;
                let exp: u32 = exp.trim().parse().map_err(|_| fail())?;
                return Ok(mult << exp);
            }
        }
    }
    Err(fail())
}

/// Command line and output convention of an external counter.
#[derive(Debug, Clone)]
pub struct CounterProfile {
    /// Shell command with `{file}`, `{epsilon}` and `{delta}` placeholders.
    pub command_template: String,
    pub pattern: OutputPattern,
    pub timeout: Duration,
}

impl CounterProfile {
    pub fn new(command_template: impl Into<String>, pattern: OutputPattern, timeout: Duration) -> Result<Self> {
        let command_template = command_template.into();
        if !command_template.contains("{file}") {
            return Err(Error::Domain("counter command must contain a {file} placeholder".into()));
        }
        Ok(CounterProfile { command_template, pattern, timeout })
    }

    /// Expands the template for one invocation.
    pub fn command_line(&self, file: &std::path::Path, epsilon: &Rational, delta: &Rational) -> String {
        self.command_template
            .replace("{file}", &shell_quote(&file.to_string_lossy()))
            .replace("{epsilon}", &render_parameter(epsilon))
            .replace("{delta}", &render_parameter(delta))
    }
}

fn render_parameter(r: &Rational) -> String {
    crate::rational::to_terminating_decimal(r).unwrap_or_else(|| crate::rational::format_fraction(r))
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Runs the external counter on a DIMACS file whose `c ind` lines already
/// carry the projection set.
pub fn external_count(
    file: &std::path::Path,
    epsilon: &Rational,
    delta: &Rational,
    profile: &CounterProfile,
) -> Result<BigUint> {
    use std::io::Read;
    use std::process::{Command, Stdio};

    let line = profile.command_line(file, epsilon, delta);
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&line)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;

    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let deadline = Instant::now() + profile.timeout;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let Some(status) = status else {
        // grandchildren may still hold the pipes open, so the readers are
        // left to finish on their own
        return Err(Error::Backend {
            message: format!("`{line}` timed out after {:?}", profile.timeout),
            exit_code: None,
            output: String::new(),
        });
    };
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let captured = if stderr.is_empty() { stdout.clone() } else { format!("{stdout}\n--- stderr ---\n{stderr}") };
    if !status.success() {
        return Err(Error::Backend {
            message: format!("`{line}` exited with {status}"),
            exit_code: status.code(),
            output: captured,
        });
    }
    parse_counter_output(&stdout, profile.pattern).map_err(|e| match e {
        Error::Backend { message, .. } => Error::Backend { message, exit_code: status.code(), output: captured },
        other => other,
    })
}

/// Counter that writes the instance to a temporary file and runs an
/// external tool on it.
#[cfg(feature = "external")]
#[derive(Debug, Clone)]
pub struct ExternalCounter {
    pub profile: CounterProfile,
}

#[cfg(feature = "external")]
impl ModelCounter for ExternalCounter {
    fn name(&self) -> String {
        format!("external ({})", self.profile.command_template)
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn count(&self, f: &WeightedFormula, epsilon: &Rational, delta: &Rational) -> Result<BigUint> {
        use std::io::Write;
        let mut file = tempfile::Builder::new().prefix("deweight-").suffix(".cnf").tempfile()?;
        file.write_all(f.without_weights().emit(false).as_bytes())?;
        file.flush()?;
        external_count(file.path(), epsilon, delta, &self.profile)
    }
}

/// Outcome of a weighted count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountResult {
    /// `raw_count / c_w`.
    pub value: Rational,
    pub epsilon: Rational,
    pub delta: Rational,
    pub backend: String,
    pub raw_count: BigUint,
    pub c_w: BigUint,
}

impl CountResult {
    /// `[value / (1 + epsilon), value * (1 + epsilon)]`.
    pub fn interval(&self) -> (Rational, Rational) {
        let factor = Rational::one() + &self.epsilon;
        (&self.value / &factor, &self.value * &factor)
    }
}

/// Counts a prepared reduction with `counter` and rescales by `C_W`.
pub fn integrate_reduction(
    reduction: &Reduction,
    epsilon: &Rational,
    delta: &Rational,
    counter: &dyn ModelCounter,
) -> Result<CountResult> {
    let raw_count = counter.count(reduction.formula(), epsilon, delta)?;
    let (epsilon, delta) = if counter.is_exact() {
        (Rational::zero(), Rational::zero())
    } else {
        (epsilon.clone(), delta.clone())
    };
    Ok(CountResult {
        value: reduction.scale(&raw_count),
        epsilon,
        delta,
        backend: counter.name(),
        raw_count,
        c_w: reduction.c_w().clone(),
    })
}

/// Weighted count of a normalized formula: reduce, count, divide by `C_W`.
pub fn integrate(
    f: &WeightedFormula,
    epsilon: &Rational,
    delta: &Rational,
    counter: &dyn ModelCounter,
) -> Result<CountResult> {
    integrate_reduction(&deweight_reduce(f)?, epsilon, delta, counter)
}
