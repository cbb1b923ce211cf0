use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use submax::harness::{
    self, BenchRow, ConstraintKind, EstimatorSettings, OracleMode, RoundConfig, RoundingScheme,
    RunConfig,
};
use submax::Error;

#[derive(Parser)]
#[command(name = "submax", version, about = "Low-adaptivity submodular maximization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and emit a report.
    Solve(SolveArgs),
    /// Round a fractional point to a set.
    Round(RoundArgs),
    /// Compare the solver with sequential greedy and brute force.
    Baseline {
        #[command(flatten)]
        solve: SolveArgs,
        /// Also compute the exact optimum (n ≤ 20).
        #[arg(long)]
        brute_force: bool,
    },
    /// Adaptive rounds against n on generated instances.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Constraint {
    Cardinality,
    Knapsack,
    Packing,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Coverage,
    Modular,
    Blackbox,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Cardinality,
    Partition,
    Crs,
}

#[derive(Args)]
struct SolveArgs {
    /// Load the whole run configuration from a JSON file (as echoed in a
    /// report's `config_echo`). Other flags are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    constraint: Option<Constraint>,
    #[arg(long, required_unless_present = "config")]
    instance: Option<PathBuf>,
    /// Extra file with constraint data, merged into the instance.
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "coverage")]
    oracle: Oracle,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    randomized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Partial-enumeration guess size for knapsack.
    #[arg(long = "enum", default_value_t = 0)]
    guess_size: usize,
    /// Rescale packing output to satisfy Ax ≤ 1.
    #[arg(long)]
    strict: bool,
    /// Race packing runs over several starting thresholds.
    #[arg(long)]
    race: bool,
    #[arg(long)]
    lambda0: Option<f64>,
    /// Estimator accuracy for the blackbox oracle.
    #[arg(long, default_value_t = 0.1)]
    eps_est: f64,
    #[arg(long, default_value_t = 0)]
    est_seed: u64,
    /// Fixed sample count for the blackbox oracle.
    #[arg(long)]
    samples: Option<usize>,
    /// Draw fresh samples for every point of a batch.
    #[arg(long)]
    independent_samples: bool,
    #[arg(long, default_value_t = submax::cardinality::DEFAULT_MAX_ROUNDS)]
    max_rounds: u64,
    /// Validate inputs and echo the configuration without solving.
    #[arg(long)]
    dry_run: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl SolveArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        if let Some(path) = &self.config {
            return Ok(RunConfig::load(path)?);
        }
        let constraint = match self.constraint.expect("required by clap") {
            Constraint::Cardinality => ConstraintKind::Cardinality,
            Constraint::Knapsack => ConstraintKind::Knapsack,
            Constraint::Packing => ConstraintKind::Packing,
        };
        let oracle = match self.oracle {
            Oracle::Coverage => OracleMode::Coverage,
            Oracle::Modular => OracleMode::Modular,
            Oracle::Blackbox => OracleMode::Blackbox,
        };
        let mut c = RunConfig::new(constraint, self.instance.clone().expect("required by clap"), oracle);
        c.constraints = self.constraints.clone();
        c.eps = self.eps;
        c.k = self.k;
        c.randomized = self.randomized;
        c.seed = self.seed;
        c.guess_size = self.guess_size;
        c.strict = self.strict;
        c.race = self.race;
        c.lambda0 = self.lambda0;
        c.estimator = EstimatorSettings {
            eps: self.eps_est,
            seed: self.est_seed,
            samples: self.samples,
            common_random_numbers: !self.independent_samples,
        };
        c.max_rounds = self.max_rounds;
        Ok(c)
    }
}

#[derive(Args)]
struct RoundArgs {
    #[arg(long, value_enum)]
    scheme: Scheme,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Point to round: a JSON array or a solver report.
    #[arg(long)]
    x: PathBuf,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shrink factor for cardinality rounding.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    k: Option<usize>,
    /// Scaling constant for contention resolution.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "packing")]
    constraint: Constraint,
    /// Ground-set sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64, 128, 256])]
    n: Vec<usize>,
    /// Row count per size for packing; defaults to log2(n) + 2.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn emit(json: &str, report: Option<&Path>) -> anyhow::Result<()> {
    match report {
        Some(p) => std::fs::write(p, format!("{json}\n"))
            .with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let config = args.config()?;
            if args.dry_run {
                harness::validate(&config)?;
                return emit(&pretty(&config), args.report.as_deref());
            }
            let report = harness::run(&config)?;
            emit(&report.to_json(), args.report.as_deref())
        }
        Command::Baseline { solve, brute_force } => {
            let config = solve.config()?;
            if solve.dry_run {
                harness::validate(&config)?;
                return emit(&pretty(&config), solve.report.as_deref());
            }
            let report = harness::compare_baseline(&config, brute_force)?;
            eprintln!(
                "solver {:.6} in {} rounds; greedy {:.6} in {} rounds; ratio {:.4}{}",
                report.solver.objective,
                report.solver.adaptive_rounds,
                report.greedy.value,
                report.greedy.adaptive_rounds,
                report.ratio,
                match report.pass {
                    Some(true) => " PASS",
                    Some(false) => " FAIL",
                    None => "",
                }
            );
            emit(&pretty(&report), solve.report.as_deref())
        }
        Command::Round(args) => {
            let config = RoundConfig {
                scheme: match args.scheme {
                    Scheme::Cardinality => RoundingScheme::Cardinality,
                    Scheme::Partition => RoundingScheme::Partition,
                    Scheme::Crs => RoundingScheme::Crs,
                },
                instance: args.instance,
                constraints: args.constraints,
                x: args.x,
                samples: args.samples,
                seed: args.seed,
                eps: args.eps,
                k: args.k,
                c: args.c,
            };
            if args.dry_run {
                return emit(&pretty(&config), args.report.as_deref());
            }
            let report = harness::round_report(&config)?;
            emit(&pretty(&report), args.report.as_deref())
        }
        Command::Bench(args) => {
            let constraint = match args.constraint {
                Constraint::Cardinality => ConstraintKind::Cardinality,
                Constraint::Knapsack => ConstraintKind::Knapsack,
                Constraint::Packing => ConstraintKind::Packing,
            };
            if !args.m.is_empty() && args.m.len() != args.n.len() {
                anyhow::bail!(Error::InvalidInput("--m needs one value per --n".into()));
            }
            let sizes: Vec<(usize, usize)> = args
                .n
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let m = args.m.get(i).copied().unwrap_or_else(|| (n as f64).log2() as usize + 2);
                    (n, m)
                })
                .collect();
            let rows: Vec<BenchRow> = harness::bench(constraint, &sizes, args.eps, args.seed)?;
            for r in &rows {
                eprintln!("n={:<6} m={:<4} rounds={:<8} calls={}", r.n, r.m, r.adaptive_rounds, r.oracle_calls);
            }
            emit(&pretty(&rows), args.report.as_deref())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::RoundLimit { .. }) => 3,
        Some(
            Error::InvalidInput(_) | Error::Parse(_) | Error::TooLarge { .. } | Error::Io(_) | Error::NonFinite { .. },
        ) => 2,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
