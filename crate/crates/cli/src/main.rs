use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use deweight::count::DEFAULT_EXACT_CAP;
use deweight::rational::{format_fraction, parse_weight, to_scientific};
use deweight::reduce::{approximate_weights, budget_reduce, combined_error, deweight_reduce, dyadic_adjust, dyadic_reduce};
use deweight::selftest::{self, Fault, SelftestConfig};
use deweight::{
    integrate_reduction, CounterProfile, Error, ExactCounter, ExternalCounter, Gamma, ModelCounter, OutputPattern,
    Rational, Reduction, WeightedFormula,
};
use num_traits::{One, Zero};

#[derive(Parser)]
#[command(name = "deweight", version, about = "Weighted model counting through unweighted projected counting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a weighted DIMACS file to an unweighted projected one.
    Reduce {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Replace every weight by its nearest fraction under a bit budget.
    ApproxWeights {
        input: PathBuf,
        #[arg(long)]
        budget: u32,
        /// Defaults to standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute the weighted count through a projected model counter.
    Count {
        input: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Print the error bound of a weight adjustment without counting.
    Gamma {
        input: PathBuf,
        /// Dyadic adjustment to this many bits.
        #[arg(long, conflicts_with = "budget", required_unless_present = "budget")]
        bits: Option<u32>,
        /// Nearest-fraction adjustment under this bit budget.
        #[arg(long)]
        budget: Option<u32>,
        #[arg(long, default_value = "0.8", value_parser = rational_arg)]
        epsilon: Rational,
    },
    /// Run the seeded self-verification suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 150)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        chain_bits: u32,
        /// Deliberately break a component to check that the suites notice.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    /// Bits for `--mode dyadic`.
    #[arg(long)]
    bits: Option<u32>,
    /// Bit budget for `--mode budget`.
    #[arg(long)]
    budget: Option<u32>,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, default_value = "0.8", value_parser = rational_arg)]
    epsilon: Rational,
    #[arg(long, default_value = "0.2", value_parser = rational_arg)]
    delta: Rational,
    #[arg(long, value_enum, default_value_t = Backend::Exact)]
    backend: Backend,
    /// Command template; `{file}`, `{epsilon}` and `{delta}` are substituted.
    #[arg(long, env = "DEWEIGHT_COUNTER")]
    counter_cmd: Option<String>,
    #[arg(long, default_value = "s-mc")]
    counter_pattern: OutputPattern,
    /// Seconds before the external counter is killed.
    #[arg(long, default_value = "3600", value_parser = seconds_arg)]
    timeout: Duration,
    /// Largest projection set the exact backend accepts.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Dyadic,
    Budget,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Exact,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipConnector,
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_weight(s).map_err(|e| e.to_string())
}

fn seconds_arg(s: &str) -> Result<Duration, String> {
    let secs: f64 = s.parse().map_err(|_| format!("`{s}` is not a number of seconds"))?;
    Duration::try_from_secs_f64(secs).map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Backend { .. } => 4,
        Error::CapExceeded { .. } => 5,
        _ => 2,
    }
}

fn read_formula(path: &Path) -> deweight::Result<WeightedFormula> {
    let text = fs::read_to_string(path)?;
    WeightedFormula::parse(&text)?.normalize()
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn build_reduction(f: &WeightedFormula, mode: &ModeArgs) -> deweight::Result<Reduction> {
    match mode.mode {
        Mode::Exact => deweight_reduce(f),
        Mode::Dyadic => {
            let bits = mode.bits.ok_or_else(|| Error::Domain("--mode dyadic needs --bits".into()))?;
            dyadic_reduce(f, bits)
        }
        Mode::Budget => {
            let budget = mode.budget.ok_or_else(|| Error::Domain("--mode budget needs --budget".into()))?;
            Ok(budget_reduce(f, budget)?.0)
        }
    }
}

fn describe(r: &Rational) -> String {
    format!("{} (~{})", format_fraction(r), to_scientific(r, 6))
}

fn cmd_reduce(input: &Path, output: &Path, mode: &ModeArgs) -> deweight::Result<()> {
    let f = read_formula(input)?;
    let red = build_reduction(&f, mode)?;
    fs::write(output, red.formula().emit(false))?;
    fs::write(sidecar_path(output), red.metadata().to_json() + "\n")?;
    println!("C_W: {}", red.c_w());
    println!("fresh variables: {}", red.total_fresh());
    if let Some(g) = red.gamma() {
        println!("gamma: {g}");
    }
    Ok(())
}

fn cmd_approx_weights(input: &Path, budget: u32, output: Option<&Path>) -> deweight::Result<()> {
    let f = read_formula(input)?;
    let approx = approximate_weights(&f, budget)?;
    let report = |line: String| {
        // keep standard output clean for the formula when no file is given
        if output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    report(format!("{:>6}  {:>14}  {:>14}  {:>14}", "var", "original", "adjusted", "distance"));
    for c in &approx.changes {
        report(format!(
            "{:>6}  {:>14}  {:>14}  {:>14}",
            c.var,
            format_fraction(&c.original),
            format_fraction(&c.adjusted),
            to_scientific(&c.distance(), 4)
        ));
        if c.eliminated() {
            eprintln!(
                "warning: weight {} of variable {} rounds to {}; replaced by a unit clause",
                format_fraction(&c.original),
                c.var,
                format_fraction(&c.adjusted)
            );
        }
    }
    match &approx.gamma {
        Gamma::Bounded(g) => report(format!("gamma: {}", describe(g))),
        Gamma::Unbounded => report("gamma: unbounded (a weight was rounded to 0 or 1)".into()),
    }
    let text = approx.adjusted.emit(true);
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_count(input: &Path, mode: &ModeArgs, backend: &BackendArgs) -> deweight::Result<()> {
    let f = read_formula(input)?;
    let counter: Box<dyn ModelCounter> = match backend.backend {
        Backend::Exact => Box::new(ExactCounter { cap: backend.exact_cap }),
        Backend::External => {
            if backend.epsilon <= Rational::zero() || backend.delta < Rational::zero() || backend.delta >= Rational::one() {
                return Err(Error::Domain("external counting needs epsilon > 0 and 0 <= delta < 1".into()));
            }
            let template = backend.counter_cmd.clone().ok_or_else(|| {
                Error::Domain("--backend external needs --counter-cmd or DEWEIGHT_COUNTER".into())
            })?;
            let profile = CounterProfile::new(template, backend.counter_pattern, backend.timeout)?;
            Box::new(ExternalCounter { profile })
        }
    };

    let start = Instant::now();
    let red = build_reduction(&f, mode)?;
    let result = integrate_reduction(&red, &backend.epsilon, &backend.delta, counter.as_ref())?;
    let elapsed = start.elapsed();

    println!("estimate: {}", format_fraction(&result.value));
    println!("decimal: {}", to_scientific(&result.value, 15));
    let error = match red.gamma() {
        None => Some(result.epsilon.clone()),
        Some(Gamma::Bounded(g)) => Some(combined_error(&result.epsilon, g)),
        Some(Gamma::Unbounded) => None,
    };
    match error {
        Some(err) => {
            let factor = Rational::one() + &err;
            let (lo, hi) = (&result.value / &factor, &result.value * &factor);
            println!("interval: [{}, {}]", format_fraction(&lo), format_fraction(&hi));
            if red.gamma().is_some() {
                println!("combined error: {}, delta: {}", describe(&err), format_fraction(&result.delta));
            } else {
                println!("epsilon: {}, delta: {}", format_fraction(&result.epsilon), format_fraction(&result.delta));
            }
        }
        None => println!("interval: unbounded (a weight was rounded to 0 or 1)"),
    }
    println!("raw count: {} / C_W {}", result.raw_count, result.c_w);
    println!("backend: {}", result.backend);
    println!("time: {:.3}s", elapsed.as_secs_f64());
    Ok(())
}

fn cmd_gamma(input: &Path, bits: Option<u32>, budget: Option<u32>, epsilon: &Rational) -> deweight::Result<()> {
    let f = read_formula(input)?;
    let gamma = match (bits, budget) {
        (Some(bits), _) => Gamma::Bounded(dyadic_adjust(&f, bits)?.gamma),
        (None, Some(budget)) => approximate_weights(&f, budget)?.gamma,
        (None, None) => return Err(Error::Domain("gamma needs --bits or --budget".into())),
    };
    match gamma {
        Gamma::Bounded(g) => {
            println!("gamma: {}", describe(&g));
            println!("combined: {}", describe(&combined_error(epsilon, &g)));
        }
        Gamma::Unbounded => {
            println!("gamma: unbounded");
            println!("combined: unbounded");
        }
    }
    Ok(())
}

fn cmd_selftest(config: &SelftestConfig) -> bool {
    println!("seed: {}", config.seed);
    let mut ok = true;
    for report in selftest::run(config) {
        println!("{report}");
        ok &= report.ok();
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Reduce { input, output, mode } => cmd_reduce(input, output, mode),
        Command::ApproxWeights { input, budget, output } => cmd_approx_weights(input, *budget, output.as_deref()),
        Command::Count { input, mode, backend } => cmd_count(input, mode, backend),
        Command::Gamma { input, bits, budget, epsilon } => cmd_gamma(input, *bits, *budget, epsilon),
        Command::Selftest { seed, instances, chain_bits, inject_fault } => {
            let config = SelftestConfig {
                seed: *seed,
                fault: inject_fault.map(|FaultArg::FlipConnector| Fault::FlipConnector),
                max_chain_bits: *chain_bits,
                instances: *instances,
            };
            return if cmd_selftest(&config) { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Backend { output, .. } = &e {
                if !output.is_empty() {
                    eprintln!("counter output:\n{output}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
