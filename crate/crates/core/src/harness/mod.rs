//! Run configuration, solver dispatch and JSON reports.

pub mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cardinality::{parallel_greedy, randomized_parallel_greedy, CardinalityParams};
use crate::error::{Error, Result};
use crate::knapsack::{
    greedy_knapsack, partial_enumeration, randomized_greedy_knapsack, KnapsackInstance,
    KnapsackParams, KnapsackSolver,
};
use crate::multilinear::{
    indicator, CoverageExtension, EstimatorConfig, ModularExtension, MultilinearOracle,
    SampledExtension,
};
use crate::oracle::{brute_force_opt, insert_sorted, SetFunction, ENUMERATION_LIMIT};
use crate::packing::{
    estimate_opt_schedule, mwu_race, mwu_solve, preprocess, scale_to_feasible, MwuParams,
    PackingInstance,
};
use crate::rounding::{
    round_cardinality, round_crs_packing, round_simple_partition, PartitionMatroid,
};
use crate::trace::{ExitReason, GreedyTrace};
use io::{InstanceFile, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Cardinality,
    Knapsack,
    Packing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Closed-form extension of a coverage objective.
    Coverage,
    /// Closed-form extension of a modular objective.
    Modular,
    /// Sampling estimator over the value oracle of whichever objective the
    /// instance holds.
    Blackbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub eps: f64,
    pub seed: u64,
    pub samples: Option<usize>,
    pub common_random_numbers: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            eps: 0.1,
            seed: 0,
            samples: None,
            common_random_numbers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub constraint: ConstraintKind,
    pub instance: PathBuf,
    pub constraints: Option<PathBuf>,
    pub oracle: OracleMode,
    pub eps: f64,
    pub k: Option<usize>,
    pub randomized: bool,
    pub seed: u64,
    /// Partial-enumeration guess size for knapsack; 0 runs the base solver.
    pub guess_size: usize,
    /// Rescale packing output to satisfy `Ax ≤ 1` against the input matrix.
    pub strict: bool,
    /// Race the packing solver over geometric `λ0` candidates.
    pub race: bool,
    pub lambda0: Option<f64>,
    pub estimator: EstimatorSettings,
    pub max_rounds: u64,
}

impl RunConfig {
    pub fn new(constraint: ConstraintKind, instance: impl Into<PathBuf>, oracle: OracleMode) -> Self {
        RunConfig {
            constraint,
            instance: instance.into(),
            constraints: None,
            oracle,
            eps: 0.1,
            k: None,
            randomized: false,
            seed: 0,
            guess_size: 0,
            strict: false,
            race: false,
            lambda0: None,
            estimator: EstimatorSettings::default(),
            max_rounds: crate::cardinality::DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn instance_file(&self) -> Result<InstanceFile> {
        let base = InstanceFile::load(&self.instance)?;
        match &self.constraints {
            Some(p) => base.merge(InstanceFile::load(p)?),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub objective: f64,
    pub adaptive_rounds: u64,
    pub oracle_calls: u64,
    /// `⟨1,x⟩/k`, `⟨a,x⟩` or `max_i (Ax)_i` of the returned solution,
    /// against the input constraint data.
    pub feasibility_slack: f64,
    pub lambda_trace: Vec<f64>,
    pub config_echo: RunConfig,
    pub seed: u64,
    pub wall_time_ms: f64,
    pub exit: ExitReason,
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub set: Option<Vec<usize>>,
}

impl SolverReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Loaded objective and constraint data.
pub struct Loaded {
    pub objective: Objective,
    pub file: InstanceFile,
}

impl Loaded {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let file = config.instance_file()?;
        let coverage = file.coverage()?;
        let modular = file.modular()?;
        let objective = match (config.oracle, coverage, modular) {
            (OracleMode::Coverage, Some(c), _) => Objective::Coverage(c),
            (OracleMode::Coverage, None, _) => {
                return Err(Error::Parse("oracle `coverage` needs `universe_size` and `sets`".into()))
            }
            (OracleMode::Modular, _, Some(m)) => Objective::Modular(m),
            (OracleMode::Modular, _, None) => {
                return Err(Error::Parse("oracle `modular` needs `weights`".into()))
            }
            (OracleMode::Blackbox, Some(c), _) => Objective::Coverage(c),
            (OracleMode::Blackbox, None, Some(m)) => Objective::Modular(m),
            (OracleMode::Blackbox, None, None) => {
                return Err(Error::Parse("instance has no objective".into()))
            }
        };
        Ok(Loaded { objective, file })
    }

    pub fn n(&self) -> usize {
        self.objective.ground_size()
    }

    pub fn oracle(&self, config: &RunConfig) -> Result<Box<dyn MultilinearOracle>> {
        Ok(match (&self.objective, config.oracle) {
            (Objective::Coverage(c), OracleMode::Coverage) => Box::new(CoverageExtension::new(c.clone())),
            (Objective::Modular(m), OracleMode::Modular) => Box::new(ModularExtension::new(m.clone())),
            (obj, _) => {
                let n = self.n().max(2) as f64;
                let est = &config.estimator;
                let mut cfg = EstimatorConfig::new(est.eps, n, n, est.seed)?;
                cfg.common_random_numbers = est.common_random_numbers;
                if let Some(s) = est.samples {
                    cfg = cfg.with_samples(s);
                }
                Box::new(SampledExtension::new(obj.clone(), cfg))
            }
        })
    }

    fn packing(&self) -> Result<PackingInstance> {
        let inst = self
            .file
            .packing()?
            .ok_or_else(|| Error::Parse("packing needs `m`, `n` and `entries`".into()))?;
        self.check_n(inst.n())?;
        Ok(inst)
    }

    fn knapsack(&self) -> Result<KnapsackInstance> {
        let inst = self
            .file
            .knapsack()?
            .ok_or_else(|| Error::Parse("knapsack needs `costs`".into()))?;
        self.check_n(inst.n())?;
        Ok(inst)
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n != self.n() {
            return Err(Error::invalid(format!(
                "constraint data has {n} elements, objective has {}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// Checks the configuration and loads every input without solving.
pub fn validate(config: &RunConfig) -> Result<()> {
    let loaded = Loaded::from_config(config)?;
    loaded.oracle(config)?;
    match config.constraint {
        ConstraintKind::Cardinality => {
            let k = config.k.ok_or_else(|| Error::invalid("cardinality needs k"))?;
            if k == 0 || k > loaded.n() {
                return Err(Error::invalid(format!("k = {k} not in [1, {}]", loaded.n())));
            }
        }
        ConstraintKind::Knapsack => {
            loaded.knapsack()?;
            if config.guess_size > 3 {
                return Err(Error::invalid(format!("guess size {} exceeds 3", config.guess_size)));
            }
        }
        ConstraintKind::Packing => {
            loaded.packing()?;
        }
    }
    if !(config.eps > 0.0 && config.eps <= 0.3) {
        return Err(Error::invalid(format!("eps {} not in (0, 0.3]", config.eps)));
    }
    Ok(())
}

/// Runs the configured solver.
pub fn run(config: &RunConfig) -> Result<SolverReport> {
    let start = Instant::now();
    let loaded = Loaded::from_config(config)?;
    let oracle = loaded.oracle(config)?;
    let oracle = oracle.as_ref();
    let n = loaded.n();
    let before = oracle.counters().calls();

    let (x, set, objective, slack, trace, extra_rounds): (
        Vec<f64>,
        Option<Vec<usize>>,
        f64,
        f64,
        GreedyTrace,
        u64,
    ) = match config.constraint {
        ConstraintKind::Cardinality => {
            let k = config.k.ok_or_else(|| Error::invalid("cardinality needs k"))?;
            let params = CardinalityParams {
                k,
                eps: config.eps,
                lambda0: config.lambda0,
                seed: config.seed,
                max_rounds: config.max_rounds,
            };
            if config.randomized {
                let (sol, trace) = randomized_parallel_greedy(oracle, &params)?;
                let slack = sol.set.len() as f64 / k as f64;
                (indicator(n, &sol.set), Some(sol.set), sol.value, slack, trace, 0)
            } else {
                let (sol, trace) = parallel_greedy(oracle, &params)?;
                (sol.x, None, sol.value, sol.max_load, trace, 0)
            }
        }
        ConstraintKind::Knapsack => {
            let inst = loaded.knapsack()?;
            let params = KnapsackParams {
                eps: config.eps,
                lambda0: config.lambda0,
                seed: config.seed,
                max_rounds: config.max_rounds,
            };
            if config.guess_size > 0 {
                let solver = if config.randomized {
                    KnapsackSolver::Randomized
                } else {
                    KnapsackSolver::Continuous
                };
                let res = partial_enumeration(oracle, &inst, &params, config.guess_size, solver)?;
                let slack = inst.cost_of(&res.x);
                let set = config.randomized.then(|| support(&res.x));
                (res.x, set, res.value, slack, res.trace, 0)
            } else if config.randomized {
                let (sol, trace) = randomized_greedy_knapsack(oracle, &inst, &params)?;
                (indicator(n, &sol.set), Some(sol.set), sol.value, sol.cost, trace, 0)
            } else {
                let (sol, trace) = greedy_knapsack(oracle, &inst, &params)?;
                (sol.x, None, sol.value, sol.max_load, trace, 0)
            }
        }
        ConstraintKind::Packing => {
            let inst = loaded.packing()?;
            let pre = preprocess(&inst, oracle, config.eps)?;
            let params = MwuParams {
                eps: config.eps,
                lambda0: config.lambda0,
                seed: config.seed,
                max_rounds: config.max_rounds,
            };
            let (sol, trace) = if config.race {
                let schedule = estimate_opt_schedule(&pre.singletons, true);
                mwu_race(oracle, &pre, &params, &schedule)?
            } else {
                mwu_solve(oracle, &pre, &params)?
            };
            let (x, value, extra) = if config.strict {
                let x = scale_to_feasible(&inst, &sol.x);
                let value = oracle.eval_f(&x)?;
                (x, value, 1)
            } else {
                (sol.x, sol.value, 0)
            };
            let slack = inst.max_load(&x);
            // one round for the singleton values of preprocessing
            (x, None, value, slack, trace, 1 + extra)
        }
    };

    Ok(SolverReport {
        objective,
        adaptive_rounds: trace.adaptive_rounds + extra_rounds,
        oracle_calls: oracle.counters().calls() - before,
        feasibility_slack: slack,
        lambda_trace: trace.lambda_trace(),
        config_echo: config.clone(),
        seed: config.seed,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        exit: trace.exit,
        x,
        set,
    })
}

fn support(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter_map(|(i, &v)| (v >= 0.5).then_some(i))
        .collect()
}

/// Classic greedy: each round evaluates every feasible one-element
/// extension in one batch and keeps the best. Stops when no extension is
/// feasible or none has positive gain.
pub fn sequential_greedy<O, P>(oracle: &O, feasible: P) -> Result<(Vec<usize>, f64, u64)>
where
    O: MultilinearOracle + ?Sized,
    P: Fn(&[usize]) -> bool,
{
    let n = oracle.ground_size();
    let mut set: Vec<usize> = Vec::new();
    let mut value = 0.0;
    let mut rounds = 0;
    loop {
        let candidates: Vec<Vec<usize>> = (0..n)
            .filter(|j| set.binary_search(j).is_err())
            .map(|j| insert_sorted(&set, j))
            .filter(|s| feasible(s))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let vals = oracle.set_values_batch(&candidates)?;
        rounds += 1;
        let (best, &v) = vals
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
        if v <= value {
            break;
        }
        set = candidates[best].clone();
        value = v;
    }
    Ok((set, value, rounds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyBaseline {
    pub value: f64,
    pub set: Vec<usize>,
    pub adaptive_rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub solver: SolverReport,
    pub brute_force: Option<f64>,
    pub greedy: GreedyBaseline,
    /// `objective / brute_force`, or against the greedy value without brute
    /// force. A zero baseline reports 1.
    pub ratio: f64,
    /// `1 - 1/e - eps - tolerance`.
    pub floor: f64,
    /// Ratio meets the floor; only meaningful with brute force.
    pub pass: Option<bool>,
}

type Feasible = Box<dyn Fn(&[usize]) -> bool>;

pub const BASELINE_TOLERANCE: f64 = 0.05;

/// Runs the solver and compares it with the sequential greedy and, when
/// requested, the exact optimum over feasible sets.
pub fn compare_baseline(config: &RunConfig, brute_force: bool) -> Result<BaselineReport> {
    let loaded = Loaded::from_config(config)?;
    let n = loaded.n();
    if brute_force && n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let solver = run(config)?;
    let feasible: Feasible = match config.constraint {
        ConstraintKind::Cardinality => {
            let k = config.k.ok_or_else(|| Error::invalid("cardinality needs k"))?;
            Box::new(move |s: &[usize]| s.len() <= k)
        }
        ConstraintKind::Knapsack => {
            let inst = loaded.knapsack()?;
            Box::new(move |s: &[usize]| inst.cost_of(&indicator(n, s)) <= 1.0 + 1e-12)
        }
        ConstraintKind::Packing => {
            let inst = loaded.packing()?;
            Box::new(move |s: &[usize]| inst.max_load(&indicator(n, s)) <= 1.0 + 1e-12)
        }
    };
    let exact = if brute_force {
        Some(brute_force_opt(&loaded.objective, |s| feasible(s))?.1)
    } else {
        None
    };
    let oracle = loaded.oracle(config)?;
    let (set, value, rounds) = sequential_greedy(oracle.as_ref(), |s| feasible(s))?;
    let reference = exact.unwrap_or(value);
    let ratio = if reference <= 0.0 {
        1.0
    } else {
        solver.objective / reference
    };
    let floor = 1.0 - (-1.0f64).exp() - config.eps - BASELINE_TOLERANCE;
    Ok(BaselineReport {
        brute_force: exact,
        greedy: GreedyBaseline {
            value,
            set,
            adaptive_rounds: rounds,
        },
        ratio,
        floor,
        pass: exact.map(|_| ratio >= floor),
        solver,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingScheme {
    Cardinality,
    Partition,
    Crs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub scheme: RoundingScheme,
    pub instance: PathBuf,
    pub constraints: Option<PathBuf>,
    pub x: PathBuf,
    pub samples: usize,
    pub seed: u64,
    /// Shrink factor for cardinality rounding.
    pub eps: f64,
    pub k: Option<usize>,
    /// CRS scaling constant.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub scheme: RoundingScheme,
    pub samples: usize,
    pub seed: u64,
    pub mean_value: f64,
    pub standard_error: f64,
    pub feasible_samples: usize,
    pub best_value: f64,
    pub best_set: Vec<usize>,
    pub config_echo: RoundConfig,
}

/// Draws `samples` independent roundings of the point, sample `s` seeded
/// with `seed + s`.
pub fn round_report(config: &RoundConfig) -> Result<RoundingReport> {
    if config.samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut file = InstanceFile::load(&config.instance)?;
    if let Some(p) = &config.constraints {
        file = file.merge(InstanceFile::load(p)?)?;
    }
    let objective = match (file.coverage()?, file.modular()?) {
        (Some(c), _) => Objective::Coverage(c),
        (None, Some(m)) => Objective::Modular(m),
        _ => return Err(Error::Parse("instance has no objective".into())),
    };
    let n = objective.ground_size();
    let x = io::load_point(&config.x)?;
    let matroid: Option<PartitionMatroid> = match config.scheme {
        RoundingScheme::Partition => Some(
            file.partition(n)?
                .ok_or_else(|| Error::Parse("partition needs `parts` and `capacities`".into()))?,
        ),
        _ => None,
    };
    let packing = match config.scheme {
        RoundingScheme::Crs => Some(
            file.packing()?
                .ok_or_else(|| Error::Parse("packing needs `m`, `n` and `entries`".into()))?,
        ),
        _ => None,
    };
    let outcomes = (0..config.samples as u64)
        .map(|s| {
            let seed = config.seed.wrapping_add(s);
            match config.scheme {
                RoundingScheme::Cardinality => {
                    let k = config.k.ok_or_else(|| Error::invalid("cardinality rounding needs k"))?;
                    round_cardinality(&objective, &x, k, config.eps, seed)
                }
                RoundingScheme::Partition => {
                    round_simple_partition(&objective, &x, matroid.as_ref().unwrap(), seed)
                }
                RoundingScheme::Crs => {
                    round_crs_packing(&objective, &x, packing.as_ref().unwrap(), config.c, seed)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let (mean, se) = mean_and_se(&values);
    let best = outcomes
        .iter()
        .filter(|o| o.feasible)
        .fold(None::<&crate::rounding::RoundingOutcome>, |acc, o| match acc {
            Some(b) if b.value >= o.value => Some(b),
            _ => Some(o),
        });
    Ok(RoundingReport {
        scheme: config.scheme,
        samples: config.samples,
        seed: config.seed,
        mean_value: mean,
        standard_error: se,
        feasible_samples: outcomes.iter().filter(|o| o.feasible).count(),
        best_value: best.map_or(0.0, |b| b.value),
        best_set: best.map_or_else(Vec::new, |b| b.set.clone()),
        config_echo: config.clone(),
    })
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row of a scaling benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub constraint: ConstraintKind,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub adaptive_rounds: u64,
    pub oracle_calls: u64,
    pub objective: f64,
    pub feasibility_slack: f64,
    pub wall_time_ms: f64,
}

/// Random coverage objective with `2n` universe elements at density
/// `min(4/n, 1/2)`, so each set holds about eight elements.
pub fn bench_coverage(n: usize, seed: u64) -> Result<crate::oracle::CoverageSystem> {
    let density = (4.0 / n as f64).min(0.5);
    crate::oracle::generate_random_coverage(2 * n, n, density, seed)
}

/// Random packing matrix: each entry is nonzero with probability
/// `density`, and nonzero entries are uniform in `[eps/n, 1]`.
pub fn random_packing(m: usize, n: usize, density: f64, eps: f64, seed: u64) -> Result<PackingInstance> {
    use rand::Rng;
    let mut rng = crate::seed::rng_at(seed, crate::seed::Stream::Instance, 1);
    let lo = eps / n as f64;
    let mut entries = Vec::new();
    for j in 0..n {
        for i in 0..m {
            if rng.gen::<f64>() < density {
                entries.push((i, j, lo + (1.0 - lo) * rng.gen::<f64>()));
            }
        }
    }
    PackingInstance::new(m, n, &entries)
}

/// Solves one generated instance per size and reports rounds and calls.
/// Cardinality rows use `k = n/8` (at least 1).
pub fn bench(
    constraint: ConstraintKind,
    sizes: &[(usize, usize)],
    eps: f64,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    sizes
        .iter()
        .map(|&(n, m)| {
            let sys = bench_coverage(n, seed)?;
            let oracle = CoverageExtension::new(sys);
            let start = Instant::now();
            let row = match constraint {
                ConstraintKind::Cardinality => {
                    let k = (n / 8).max(1);
                    let (sol, trace) = parallel_greedy(&oracle, &CardinalityParams::new(k, eps))?;
                    (k, sol.value, sol.max_load, trace.adaptive_rounds)
                }
                ConstraintKind::Packing => {
                    let inst = random_packing(m, n, 0.3, eps, seed)?;
                    let pre = preprocess(&inst, &oracle, eps)?;
                    let (sol, trace) = mwu_solve(&oracle, &pre, &MwuParams::new(eps))?;
                    (0, sol.value, inst.max_load(&sol.x), trace.adaptive_rounds + 1)
                }
                ConstraintKind::Knapsack => {
                    let costs: Vec<f64> = (0..n).map(|j| 0.5 / n as f64 + 0.3 * ((j * 7919) % n) as f64 / n as f64).collect();
                    let inst = KnapsackInstance::new(costs)?;
                    let (sol, trace) = greedy_knapsack(&oracle, &inst, &KnapsackParams::new(eps))?;
                    (0, sol.value, sol.max_load, trace.adaptive_rounds)
                }
            };
            Ok(BenchRow {
                constraint,
                n,
                m,
                k: row.0,
                adaptive_rounds: row.3,
                oracle_calls: oracle.counters().calls(),
                objective: row.1,
                feasibility_slack: row.2,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_instance(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("submax-harness-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    fn modular_config(name: &str, body: &str, k: usize) -> RunConfig {
        let mut c = RunConfig::new(
            ConstraintKind::Cardinality,
            write_instance(name, body),
            OracleMode::Modular,
        );
        c.k = Some(k);
        c
    }

    #[test]
    fn modular_fixture_passes_the_floor() {
        let c = modular_config("m3.json", r#"{"weights": [3, 2, 1]}"#, 2);
        let r = compare_baseline(&c, true).unwrap();
        assert_eq!(r.brute_force, Some(5.0));
        assert!((r.solver.objective - 5.0).abs() < 1e-6);
        assert_eq!(r.pass, Some(true));
        assert_eq!(r.greedy.adaptive_rounds, 2);
        assert_eq!(r.greedy.set, vec![0, 1]);
    }

    #[test]
    fn zero_baseline_reports_ratio_one() {
        let mut c = modular_config("zero.json", r#"{"weights": [0, 0], "m": 1, "n": 2, "entries": [[0, 0, 1], [0, 1, 1]]}"#, 1);
        c.constraint = ConstraintKind::Packing;
        let r = compare_baseline(&c, true).unwrap();
        assert_eq!(r.brute_force, Some(0.0));
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn greedy_baseline_takes_k_rounds_on_coverage() {
        let sys = bench_coverage(32, 3).unwrap();
        let oracle = CoverageExtension::new(sys);
        for k in [1, 3, 5] {
            let (set, _, rounds) = sequential_greedy(&oracle, |s| s.len() <= k).unwrap();
            assert_eq!(set.len(), k);
            assert_eq!(rounds, k as u64);
        }
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let weights: Vec<String> = (0..21).map(|_| "1".into()).collect();
        let c = modular_config("big.json", &format!(r#"{{"weights": [{}]}}"#, weights.join(",")), 2);
        assert!(matches!(compare_baseline(&c, true), Err(Error::TooLarge { n: 21, .. })));
        assert!(compare_baseline(&c, false).is_ok());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut c = modular_config("rt.json", r#"{"weights": [1]}"#, 1);
        c.estimator.samples = Some(40);
        c.lambda0 = Some(2.5);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn blackbox_oracle_runs_on_the_value_oracle() {
        let mut c = modular_config("bb.json", r#"{"weights": [3, 2, 1]}"#, 2);
        c.oracle = OracleMode::Blackbox;
        c.estimator.samples = Some(200);
        let r = run(&c).unwrap();
        assert!(r.objective > 4.0, "{}", r.objective);
    }
}
