//! Multiplicative-weights threshold greedy for `max F(x)` s.t. `Ax ≤ 1`,
//! `x ∈ [0,1]^n`, with `A` nonnegative and entries at most 1.
//!
//! Each constraint carries a weight `w_i = exp((ln m / eps)(Ax)_i)`. Good
//! coordinates are those with a high gradient per unit of weighted cost,
//! and they grow multiplicatively, `x ← x + δγ(x ∧ S)`, so the per-step
//! weight growth stays bounded no matter how the entries of `A` are spread.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cardinality::{guard, refreshed_gradient, threshold_record, SATURATED};
use crate::error::{Error, Result};
use crate::multilinear::MultilinearOracle;
use crate::step::{scan_steps, step_grid};
use crate::trace::{
    ExitReason, FractionalSolution, GreedyTrace, IterationRecord, Meter, StepBound, StepKind,
};

/// Sparse `m × n` constraint matrix, stored by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingInstance {
    m: usize,
    n: usize,
    columns: Vec<Vec<(usize, f64)>>,
    pruned: bool,
}

impl PackingInstance {
    /// Builds from `(row, column, value)` triplets. Zero values are dropped,
    /// repeated positions are rejected.
    pub fn new(m: usize, n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("packing instance needs m ≥ 1 and n ≥ 1"));
        }
        let mut columns = vec![Vec::new(); n];
        for &(i, j, a) in entries {
            if i >= m || j >= n {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {m} x {n} matrix"
                )));
            }
            if !a.is_finite() || a < 0.0 {
                return Err(Error::invalid(format!("entry ({i}, {j}) = {a} is not in [0, 1]")));
            }
            if a > 1.0 {
                return Err(Error::invalid(format!(
                    "column {j} violates A e_j ≤ 1: entry ({i}, {j}) = {a}"
                )));
            }
            if a > 0.0 {
                columns[j].push((i, a));
            }
        }
        for (j, col) in columns.iter_mut().enumerate() {
            col.sort_by_key(|&(i, _)| i);
            if col.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!("column {j} has a repeated row index")));
            }
        }
        Ok(PackingInstance {
            m,
            n,
            columns,
            pruned: false,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (j, col) in self.columns.iter().enumerate() {
            out.extend(col.iter().map(|&(i, a)| (i, j, a)));
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// `Ax`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.m];
        for (col, &xj) in self.columns.iter().zip(x) {
            for &(i, a) in col {
                ax[i] += a * xj;
            }
        }
        ax
    }

    /// `Aᵀw`.
    pub fn transpose_apply(&self, w: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(i, a)| a * w[i]).sum())
            .collect()
    }

    /// `max_i (Ax)_i`.
    pub fn max_load(&self, x: &[f64]) -> f64 {
        self.apply(x).into_iter().fold(0.0, f64::max)
    }

    /// Largest number of nonzeros in one column.
    pub fn column_sparsity(&self) -> usize {
        self.columns.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Result of [`preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Instance with entries below `eps/n` set to zero.
    pub instance: PackingInstance,
    /// Elements kept after dropping those with tiny singleton value.
    pub active: Vec<bool>,
    pub x_init: Vec<f64>,
    /// `f({j})` for every element.
    pub singletons: Vec<f64>,
    pub eps: f64,
}

impl Preprocessed {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Drops elements with `f(j) < (eps/n)·max f`, zeroes entries below
/// `eps/n`, and starts each kept coordinate at the largest `x_j ≤ 1` with
/// `A_ij x_j ≤ eps/n`. Costs one round for the singleton values.
pub fn preprocess<O: MultilinearOracle + ?Sized>(
    instance: &PackingInstance,
    oracle: &O,
    eps: f64,
) -> Result<Preprocessed> {
    let n = instance.n;
    if oracle.ground_size() != n {
        return Err(Error::invalid(format!(
            "oracle has {} elements, constraint matrix has {n} columns",
            oracle.ground_size()
        )));
    }
    validate_eps(eps)?;
    let singletons = oracle.set_values_batch(&(0..n).map(|j| vec![j]).collect::<Vec<_>>())?;
    Ok(preprocess_with(instance, singletons, eps))
}

pub(crate) fn preprocess_with(
    instance: &PackingInstance,
    singletons: Vec<f64>,
    eps: f64,
) -> Preprocessed {
    let n = instance.n;
    let floor = eps / n as f64;
    let fmax = singletons.iter().copied().fold(0.0, f64::max);
    let active: Vec<bool> = singletons.iter().map(|&v| v > 0.0 && v >= floor * fmax).collect();
    let columns: Vec<Vec<(usize, f64)>> = instance
        .columns
        .iter()
        .map(|col| col.iter().copied().filter(|&(_, a)| a >= floor).collect())
        .collect();
    let x_init = columns
        .iter()
        .zip(&active)
        .map(|(col, &on)| {
            if !on {
                return 0.0;
            }
            let amax = col.iter().map(|&(_, a)| a).fold(0.0, f64::max);
            if amax == 0.0 {
                1.0
            } else {
                (floor / amax).min(1.0)
            }
        })
        .collect();
    Preprocessed {
        instance: PackingInstance {
            m: instance.m,
            n,
            columns,
            pruned: true,
        },
        active,
        x_init,
        singletons,
        eps,
    }
}

fn validate_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.3) {
        return Err(Error::invalid(format!("eps {eps} not in (0, 0.3]")));
    }
    Ok(())
}

/// `ln m`, with `m = 1` treated as `m = 2`.
pub fn log_m(m: usize) -> f64 {
    (m.max(2) as f64).ln()
}

/// Log-domain MWU weights `ℓ_i = (ln m / eps)(Ax)_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    pub log_weights: Vec<f64>,
    pub ax: Vec<f64>,
    /// `ln W` captured at the start of the current phase.
    pub phase_log_total: f64,
    scale: f64,
}

impl WeightState {
    pub fn new(instance: &PackingInstance, x: &[f64], eps: f64) -> Self {
        let scale = log_m(instance.m) / eps;
        let ax = instance.apply(x);
        let log_weights: Vec<f64> = ax.iter().map(|v| scale * v).collect();
        let phase_log_total = log_sum_exp(&log_weights);
        WeightState {
            log_weights,
            ax,
            phase_log_total,
            scale,
        }
    }

    /// `ln ⟨w,1⟩`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp(&self.log_weights)
    }

    pub fn capture_phase(&mut self) {
        self.phase_log_total = self.log_total();
    }

    /// `w_i / W` for the phase-start total `W`.
    pub fn phase_relative(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .map(|l| (l - self.phase_log_total).exp())
            .collect()
    }

    /// `(1 - eps)⟨w,1⟩ ≤ W`.
    pub fn within_phase(&self, eps: f64) -> bool {
        (1.0 - eps).ln() + self.log_total() <= self.phase_log_total + 1e-12
    }
}

/// Adds `A·x_delta` to the cached loads and updates the exponents.
pub fn weight_refresh(
    mut state: WeightState,
    instance: &PackingInstance,
    x_delta: &[f64],
) -> WeightState {
    for (col, &d) in instance.columns.iter().zip(x_delta) {
        if d == 0.0 {
            continue;
        }
        for &(i, a) in col {
            state.ax[i] += a * d;
        }
    }
    for (l, v) in state.log_weights.iter_mut().zip(&state.ax) {
        *l = state.scale * v;
    }
    state
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + v.iter().map(|l| (l - hi).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwuParams {
    pub eps: f64,
    /// Upper bound on OPT. Defaults to the sum of active singleton values.
    pub lambda0: Option<f64>,
    pub seed: u64,
    pub max_rounds: u64,
}

impl MwuParams {
    pub fn new(eps: f64) -> Self {
        MwuParams {
            eps,
            lambda0: None,
            seed: 0,
            max_rounds: crate::cardinality::DEFAULT_MAX_ROUNDS,
        }
    }
}

/// Potential `⟨F'(x), x ∧ S⟩`.
fn potential(grad: &[f64], x: &[f64], set: &[usize]) -> f64 {
    set.iter().fold(0.0, |acc, &j| acc + grad[j] * x[j])
}

/// Good coordinates among `pool`: `F'_j ≥ (1-eps)³ λ ⟨Aᵀw⟩_j / W` and
/// `F'_j ≥ eps(1-eps) λ / n`.
fn good_set(
    pool: impl Iterator<Item = usize>,
    grad: &[f64],
    x: &[f64],
    cost: &[f64],
    lambda: f64,
    eps: f64,
    n: usize,
) -> Vec<usize> {
    let ratio_thr = (1.0 - eps).powi(3) * lambda;
    let abs_thr = eps * (1.0 - eps) * lambda / n as f64;
    pool.filter(|&j| {
        x[j] < 1.0 - SATURATED && grad[j] >= abs_thr && grad[j] >= ratio_thr * cost[j]
    })
    .collect()
}

/// Runs the MWU greedy from the preprocessed starting point.
pub fn mwu_solve<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    pre: &Preprocessed,
    params: &MwuParams,
) -> Result<(FractionalSolution, GreedyTrace)> {
    let inst = &pre.instance;
    let n = inst.n;
    if oracle.ground_size() != n {
        return Err(Error::invalid(format!(
            "oracle has {} elements, constraint matrix has {n} columns",
            oracle.ground_size()
        )));
    }
    let eps = params.eps;
    validate_eps(eps)?;
    let meter = Meter::start(oracle.counters());
    let log_m = log_m(inst.m);
    let active: Vec<usize> = (0..n).filter(|&j| pre.active[j]).collect();
    let n_active = active.len().max(1);
    let fmax = pre.singletons.iter().copied().fold(0.0, f64::max);
    let lambda0 = match params.lambda0 {
        None => active.iter().map(|&j| pre.singletons[j]).sum(),
        Some(l) if l.is_finite() && l >= fmax * (1.0 - 1e-12) => l,
        Some(l) => {
            return Err(Error::invalid(format!(
                "lambda0 = {l} is below max_j f(j) = {fmax}, not an upper bound on OPT"
            )))
        }
    };
    let lambda_stop = lambda0 / (std::f64::consts::E * n_active as f64);
    let mut trace = GreedyTrace::new(lambda0, lambda_stop);
    let mut x = pre.x_init.clone();
    let mut weights = WeightState::new(inst, &x, eps);
    let lo = (eps / n as f64).powi(3);
    let mut lambda = lambda0;
    let mut t = 0.0;

    guard(&trace, params.max_rounds)?;
    let mut value = oracle.eval_f(&x)?;
    trace.adaptive_rounds += 1;
    if lambda0 <= 0.0 || active.is_empty() {
        trace.exit = ExitReason::Saturated;
        meter.finish(oracle.counters(), &mut trace);
        return Ok((packing_solution(inst, x, value), trace));
    }
    guard(&trace, params.max_rounds)?;
    let mut grad = refreshed_gradient(oracle, &x)?;
    trace.adaptive_rounds += 1;
    let mut phase = 0usize;

    loop {
        if t >= 1.0 - 1e-12 {
            trace.exit = ExitReason::BudgetExhausted;
            break;
        }
        if lambda < lambda_stop {
            trace.exit = ExitReason::ThresholdReached;
            break;
        }
        if active.iter().all(|&j| x[j] >= 1.0 - SATURATED) {
            trace.exit = ExitReason::Saturated;
            break;
        }
        weights.capture_phase();
        let mut rel = weights.phase_relative();
        let mut cost = inst.transpose_apply(&rel);
        let mut good = good_set(active.iter().copied(), &grad, &x, &cost, lambda, eps, n);

        while !good.is_empty() && weights.within_phase(eps) && t < 1.0 - 1e-12 {
            let load: f64 = good.iter().map(|&j| cost[j] * x[j]).sum();
            if !(load > 0.0) {
                good.clear();
                break;
            }
            guard(&trace, params.max_rounds)?;
            let gamma = 1.0 / load;
            let mut dir = vec![0.0; n];
            for &j in &good {
                dir[j] = gamma * x[j];
            }
            let weight_cap = eps * eps / (4.0 * gamma * log_m);
            let time_cap = 1.0 - t;
            let cap = weight_cap.min(time_cap);
            let rate = (1.0 - eps).powi(4) * lambda;
            let scan = scan_steps(oracle, &x, &dir, rate, step_grid(lo, 1.0 + eps, cap))?;
            trace.adaptive_rounds += 1;
            let (adv, bound) = match scan.advance() {
                Some(a) if a.capped => (
                    a,
                    if weight_cap <= time_cap {
                        StepBound::Weight
                    } else {
                        StepBound::Time
                    },
                ),
                Some(a) => (a, StepBound::Gradient),
                None => (scan.floor(), StepBound::GridFloor),
            };
            let delta = adv.step;
            let before = potential(&grad, &x, &good);
            let log_total_before = weights.log_total();
            let mut x_delta = vec![0.0; n];
            for &j in &good {
                let next = (x[j] + delta * dir[j]).min(1.0);
                x_delta[j] = next - x[j];
                x[j] = next;
            }
            t += delta;
            value = adv.value;
            weights = weight_refresh(weights, inst, &x_delta);
            debug_assert!(
                weights.log_total()
                    <= log_total_before + (delta * gamma * (1.0 + eps) * log_m / eps).ln_1p() + 1e-9
            );

            guard(&trace, params.max_rounds)?;
            grad = refreshed_gradient(oracle, &x)?;
            trace.adaptive_rounds += 1;
            rel = weights.phase_relative();
            cost = inst.transpose_apply(&rel);
            let next = good_set(good.iter().copied(), &grad, &x, &cost, lambda, eps, n);
            let after = potential(&grad, &x, &next);
            trace.records.push(IterationRecord {
                kind: StepKind::Step,
                lambda,
                set_size: good.len(),
                delta,
                bound: Some(bound),
                measure_before: before,
                measure_after: after,
                progress: t,
                objective: value,
                log_weight_total: Some(weights.log_total()),
                phase: Some(phase),
            });
            good = next;
        }

        if good.is_empty() && weights.within_phase(eps) {
            lambda *= 1.0 - eps;
            let mut rec = threshold_record(lambda, t, value);
            rec.log_weight_total = Some(weights.log_total());
            rec.phase = Some(phase);
            trace.records.push(rec);
        }
        phase += 1;
    }

    meter.finish(oracle.counters(), &mut trace);
    Ok((packing_solution(inst, x, value), trace))
}

fn packing_solution(inst: &PackingInstance, x: Vec<f64>, value: f64) -> FractionalSolution {
    let max_load = inst.max_load(&x);
    FractionalSolution { x, value, max_load }
}

/// Starting thresholds for [`mwu_solve`]. The default is the single upper
/// bound `Σ_j f(j)`. With `race` set, returns `ℓ·2^i` clipped at `u`, where
/// `ℓ = max_j f(j)` and `u = Σ_j f(j)`; at most `⌈log₂ n⌉ + 1` values.
pub fn estimate_opt_schedule(singletons: &[f64], race: bool) -> Vec<f64> {
    let u: f64 = singletons.iter().sum();
    let l = singletons.iter().copied().fold(0.0, f64::max);
    if !race || l <= 0.0 {
        return vec![u];
    }
    let mut out = Vec::new();
    let mut v = l;
    while v < u * (1.0 - 1e-12) {
        out.push(v);
        v *= 2.0;
    }
    out.push(u);
    out
}

/// Runs [`mwu_solve`] once per threshold in parallel and keeps the best
/// final value. The trace's round count is the largest among the runs, the
/// call count is the total.
pub fn mwu_race<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    pre: &Preprocessed,
    params: &MwuParams,
    schedule: &[f64],
) -> Result<(FractionalSolution, GreedyTrace)> {
    if schedule.is_empty() {
        return Err(Error::invalid("empty threshold schedule"));
    }
    let meter = Meter::start(oracle.counters());
    let runs = schedule
        .par_iter()
        .map(|&l| {
            let mut p = params.clone();
            p.lambda0 = Some(l);
            mwu_solve(oracle, pre, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    let rounds = runs.iter().map(|(_, tr)| tr.adaptive_rounds).max().unwrap_or(0);
    let (sol, mut trace) = runs
        .into_iter()
        .reduce(|a, b| if b.0.value > a.0.value { b } else { a })
        .expect("nonempty schedule");
    trace.adaptive_rounds = rounds;
    meter.finish(oracle.counters(), &mut trace);
    Ok((sol, trace))
}

/// Scales `x` by `1 / max(1, max_i (Ax)_i)` against the given matrix so the
/// result satisfies `Ax ≤ 1` exactly.
pub fn scale_to_feasible(instance: &PackingInstance, x: &[f64]) -> Vec<f64> {
    let load = instance.max_load(x);
    let s = 1.0 / load.max(1.0);
    x.iter().map(|v| v * s).collect()
}
