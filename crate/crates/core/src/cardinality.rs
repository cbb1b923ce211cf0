//! Threshold greedy under a cardinality budget `⟨1,x⟩ ≤ k`.
//!
//! [`parallel_greedy`] is the continuous version: it raises every good
//! coordinate at once, with all step-size candidates probed in one round.
//! [`randomized_parallel_greedy`] follows the same schedule but samples a
//! discrete set instead of holding a fractional point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multilinear::{indicator, MultilinearOracle};
use crate::oracle::insert_sorted;
use crate::seed::{self, Stream};
use crate::step::{scan_steps, step_grid};
use crate::trace::{
    ExitReason, FractionalSolution, GreedyTrace, IterationRecord, Meter, StepBound, StepKind,
};

/// Coordinates at or above `1 - SATURATED` count as saturated.
pub(crate) const SATURATED: f64 = 1e-12;

pub const DEFAULT_MAX_ROUNDS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityParams {
    pub k: usize,
    pub eps: f64,
    /// Upper bound on OPT. Defaults to `Σ_j f({j})`.
    pub lambda0: Option<f64>,
    /// Seed for the sampling steps of the randomized variant.
    pub seed: u64,
    pub max_rounds: u64,
}

impl CardinalityParams {
    pub fn new(k: usize, eps: f64) -> Self {
        CardinalityParams {
            k,
            eps,
            lambda0: None,
            seed: 0,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::invalid(format!("budget k = {} not in [1, {n}]", self.k)));
        }
        if !(self.eps > 0.0 && self.eps <= 0.3) {
            return Err(Error::invalid(format!("eps {} not in (0, 0.3]", self.eps)));
        }
        Ok(())
    }
}

/// Singleton values in one round, returned with `λ0`. A supplied `λ0` is
/// checked against the largest singleton.
pub(crate) fn initial_lambda<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    supplied: Option<f64>,
) -> Result<(f64, Vec<f64>)> {
    let n = oracle.ground_size();
    let singles = oracle.set_values_batch(&(0..n).map(|j| vec![j]).collect::<Vec<_>>())?;
    let max = singles.iter().copied().fold(0.0, f64::max);
    let sum: f64 = singles.iter().sum();
    let lambda0 = match supplied {
        None => sum,
        Some(l) => {
            if !l.is_finite() || l < max * (1.0 - 1e-12) {
                return Err(Error::invalid(format!(
                    "lambda0 = {l} is below max_j f(j) = {max}, not an upper bound on OPT"
                )));
            }
            l
        }
    };
    Ok((lambda0, singles))
}

/// `F'(x)` with saturated coordinates zeroed, one round.
pub(crate) fn refreshed_gradient<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut grad = oracle.grad_batch(x, &(0..n).collect::<Vec<_>>())?;
    for (g, &xj) in grad.iter_mut().zip(x) {
        if xj >= 1.0 - SATURATED {
            *g = 0.0;
        }
    }
    Ok(grad)
}

pub(crate) fn guard(trace: &GreedyTrace, limit: u64) -> Result<()> {
    if trace.adaptive_rounds >= limit {
        return Err(Error::RoundLimit {
            limit,
            trace: Box::new(trace.clone()),
        });
    }
    Ok(())
}

pub(crate) fn threshold_record(lambda: f64, progress: f64, objective: f64) -> IterationRecord {
    IterationRecord {
        kind: StepKind::Threshold,
        lambda,
        set_size: 0,
        delta: 0.0,
        bound: None,
        measure_before: 0.0,
        measure_after: 0.0,
        progress,
        objective,
        log_weight_total: None,
        phase: None,
    }
}

/// Continuous threshold greedy for `max F(x)` s.t. `⟨1,x⟩ ≤ k`, `x ∈ [0,1]^n`.
pub fn parallel_greedy<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    params: &CardinalityParams,
) -> Result<(FractionalSolution, GreedyTrace)> {
    let n = oracle.ground_size();
    params.validate(n)?;
    let meter = Meter::start(oracle.counters());
    let eps = params.eps;
    let k = params.k as f64;

    let (lambda0, _) = initial_lambda(oracle, params.lambda0)?;
    let lambda_stop = lambda0 / (std::f64::consts::E * n as f64);
    let mut trace = GreedyTrace::new(lambda0, lambda_stop);
    trace.adaptive_rounds = 1;

    let mut x = vec![0.0; n];
    let mut value = 0.0;
    let mut lambda = lambda0;
    let lo = (eps / n as f64).powi(3);

    if lambda0 <= 0.0 {
        trace.exit = ExitReason::Saturated;
        meter.finish(oracle.counters(), &mut trace);
        return Ok((solution(x, value, k), trace));
    }

    guard(&trace, params.max_rounds)?;
    let mut grad = refreshed_gradient(oracle, &x)?;
    trace.adaptive_rounds += 1;

    loop {
        let used: f64 = x.iter().sum();
        if k - used <= 1e-9 * k {
            trace.exit = ExitReason::BudgetExhausted;
            break;
        }
        if x.iter().all(|&v| v >= 1.0 - SATURATED) {
            trace.exit = ExitReason::Saturated;
            break;
        }
        if lambda < lambda_stop {
            trace.exit = ExitReason::ThresholdReached;
            break;
        }
        let thr = (1.0 - eps) * lambda / k;
        let mut good: Vec<usize> = (0..n)
            .filter(|&j| x[j] < 1.0 - SATURATED && grad[j] >= thr)
            .collect();

        while !good.is_empty() {
            let used: f64 = x.iter().sum();
            let left = k - used;
            if left <= 1e-9 * k {
                break;
            }
            guard(&trace, params.max_rounds)?;
            let size = good.len() as f64;
            let room = good.iter().map(|&j| 1.0 - x[j]).fold(f64::INFINITY, f64::min);
            let cap = (left / size).min(room);
            let rate = (1.0 - eps).powi(2) * lambda * size / k;
            let scan = scan_steps(
                oracle,
                &x,
                &indicator(n, &good),
                rate,
                step_grid(lo, 1.0 + eps / 2.0, cap),
            )?;
            trace.adaptive_rounds += 1;
            let Some(adv) = scan.advance() else {
                // estimates disagree with the filter; move to the next threshold
                good.clear();
                break;
            };
            for &j in &good {
                x[j] = (x[j] + adv.step).min(1.0);
            }
            value = adv.value;

            guard(&trace, params.max_rounds)?;
            grad = refreshed_gradient(oracle, &x)?;
            trace.adaptive_rounds += 1;
            let next: Vec<usize> = good
                .iter()
                .copied()
                .filter(|&j| x[j] < 1.0 - SATURATED && grad[j] >= thr)
                .collect();
            trace.records.push(IterationRecord {
                kind: StepKind::Step,
                lambda,
                set_size: good.len(),
                delta: adv.step,
                bound: Some(if adv.capped {
                    StepBound::Budget
                } else {
                    StepBound::Gradient
                }),
                measure_before: size,
                measure_after: next.len() as f64,
                progress: x.iter().sum(),
                objective: value,
                log_weight_total: None,
                phase: None,
            });
            good = next;
        }

        let used: f64 = x.iter().sum();
        if k - used <= 1e-9 * k {
            continue;
        }
        lambda *= 1.0 - eps;
        trace.records.push(threshold_record(lambda, used, value));
    }

    meter.finish(oracle.counters(), &mut trace);
    Ok((solution(x, value, k), trace))
}

fn solution(x: Vec<f64>, value: f64, k: f64) -> FractionalSolution {
    let max_load = x.iter().sum::<f64>() / k;
    FractionalSolution { x, value, max_load }
}

/// Output of [`randomized_parallel_greedy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub set: Vec<usize>,
    pub value: f64,
    /// Running `Σ δ|S|`, the expected size of `set`.
    pub expected_size: f64,
}

/// Threshold greedy that samples `R ∼ δS` at each step and adds it to `Q`.
/// The expected size is capped at `(1 - 2 eps) k`. A draw with `|Q| > k`
/// ends the run with [`ExitReason::BudgetViolated`].
pub fn randomized_parallel_greedy<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    params: &CardinalityParams,
) -> Result<(DiscreteSolution, GreedyTrace)> {
    let n = oracle.ground_size();
    params.validate(n)?;
    let meter = Meter::start(oracle.counters());
    let eps = params.eps;
    let k = params.k as f64;
    let t_cap = (1.0 - 2.0 * eps) * k;
    let mut rng = seed::rng(params.seed, Stream::CardinalitySampling);

    let (lambda0, singles) = initial_lambda(oracle, params.lambda0)?;
    let lambda_stop = lambda0 / (std::f64::consts::E * n as f64);
    let mut trace = GreedyTrace::new(lambda0, lambda_stop);
    trace.adaptive_rounds = 1;

    let mut q: Vec<usize> = Vec::new();
    let mut value = 0.0;
    let mut t = 0.0;
    let mut lambda = lambda0;
    let mut margins = singles;
    let lo = (eps / n as f64).powi(3);

    if lambda0 <= 0.0 {
        trace.exit = ExitReason::Saturated;
        meter.finish(oracle.counters(), &mut trace);
        return Ok((DiscreteSolution { set: q, value, expected_size: t }, trace));
    }

    'outer: loop {
        if t_cap - t <= 1e-9 * k {
            trace.exit = ExitReason::BudgetExhausted;
            break;
        }
        if q.len() == n {
            trace.exit = ExitReason::Saturated;
            break;
        }
        if lambda < lambda_stop {
            trace.exit = ExitReason::ThresholdReached;
            break;
        }
        let thr = (1.0 - eps) * lambda / k;
        let mut good: Vec<usize> = (0..n)
            .filter(|&j| q.binary_search(&j).is_err() && margins[j] >= thr)
            .collect();

        while !good.is_empty() {
            let left = t_cap - t;
            if left <= 1e-9 * k {
                break;
            }
            guard(&trace, params.max_rounds)?;
            let size = good.len() as f64;
            let cap = (left / size).min(1.0);
            let rate = (1.0 - eps).powi(2) * lambda * size / k;
            let scan = scan_steps(
                oracle,
                &indicator(n, &q),
                &indicator(n, &good),
                rate,
                step_grid(lo, 1.0 + eps / 2.0, cap),
            )?;
            trace.adaptive_rounds += 1;
            let Some(adv) = scan.advance() else {
                good.clear();
                break;
            };
            let delta = adv.step;
            for &j in &good {
                if delta >= 1.0 || rng.gen::<f64>() < delta {
                    q = insert_sorted(&q, j);
                }
            }
            t += delta * size;
            if q.len() > params.k {
                trace.exit = ExitReason::BudgetViolated { size: q.len() };
                trace.records.push(step_record(lambda, good.len(), &adv, size, size, t, value));
                break 'outer;
            }

            guard(&trace, params.max_rounds)?;
            let mut sets = vec![q.clone()];
            sets.extend(good.iter().map(|&j| insert_sorted(&q, j)));
            let vals = oracle.set_values_batch(&sets)?;
            trace.adaptive_rounds += 1;
            value = vals[0];
            for (&j, v) in good.iter().zip(&vals[1..]) {
                margins[j] = v - value;
            }
            let next: Vec<usize> = good
                .iter()
                .copied()
                .filter(|&j| q.binary_search(&j).is_err() && margins[j] >= thr)
                .collect();
            trace
                .records
                .push(step_record(lambda, good.len(), &adv, size, next.len() as f64, t, value));
            good = next;
        }

        if t_cap - t <= 1e-9 * k {
            continue;
        }
        // margins outside the last good set are stale but only overestimate
        lambda *= 1.0 - eps;
        trace.records.push(threshold_record(lambda, t, value));
        if lambda >= lambda_stop && !q.is_empty() {
            guard(&trace, params.max_rounds)?;
            let mut sets = vec![q.clone()];
            let outside: Vec<usize> = (0..n).filter(|j| q.binary_search(j).is_err()).collect();
            let thr = (1.0 - eps) * lambda / k;
            let candidates: Vec<usize> =
                outside.into_iter().filter(|&j| margins[j] >= thr).collect();
            if candidates.is_empty() {
                continue;
            }
            sets.extend(candidates.iter().map(|&j| insert_sorted(&q, j)));
            let vals = oracle.set_values_batch(&sets)?;
            trace.adaptive_rounds += 1;
            for (&j, v) in candidates.iter().zip(&vals[1..]) {
                margins[j] = v - vals[0];
            }
        }
    }

    meter.finish(oracle.counters(), &mut trace);
    Ok((
        DiscreteSolution {
            set: q,
            value,
            expected_size: t,
        },
        trace,
    ))
}

fn step_record(
    lambda: f64,
    set_size: usize,
    adv: &crate::step::Advance,
    before: f64,
    after: f64,
    t: f64,
    value: f64,
) -> IterationRecord {
    IterationRecord {
        kind: StepKind::Step,
        lambda,
        set_size,
        delta: adv.step,
        bound: Some(if adv.capped {
            StepBound::Budget
        } else {
            StepBound::Gradient
        }),
        measure_before: before,
        measure_after: after,
        progress: t,
        objective: value,
        log_weight_total: None,
        phase: None,
    }
}
