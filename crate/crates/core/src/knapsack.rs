//! Threshold greedy under one knapsack constraint `⟨a,x⟩ ≤ 1`.
//!
//! Items are judged by bang-for-buck `F'_j(x) / a_j`. Heavy items (cost at
//! least `c·eps²/ln n`) are taken whole, one per round; light items advance
//! together as in the cardinality solver. [`partial_enumeration`] removes
//! the dependence of the guarantee on the largest cost by seeding the
//! solution with every small set of items.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cardinality::{guard, initial_lambda, refreshed_gradient, threshold_record, SATURATED};
use crate::error::{Error, Result};
use crate::multilinear::{indicator, MultilinearOracle, QueryTag};
use crate::oracle::{insert_sorted, Counters};
use crate::seed::{self, Stream};
use crate::step::{scan_steps, step_grid, Advance};
use crate::trace::{
    ExitReason, FractionalSolution, GreedyTrace, IterationRecord, Meter, StepBound, StepKind,
};

pub const DEFAULT_HEAVY_CONSTANT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    costs: Vec<f64>,
    /// `c` in the heavy cutoff `c·eps²/ln n`. The same constant scales the
    /// deterministic-margin cutoff of the randomized variant.
    pub heavy_constant: f64,
}

impl KnapsackInstance {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::invalid("knapsack instance needs at least one item"));
        }
        if let Some((j, a)) = costs
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a > 0.0 && a <= 1.0))
        {
            return Err(Error::invalid(format!("cost a_{j} = {a} not in (0, 1]")));
        }
        Ok(KnapsackInstance {
            costs,
            heavy_constant: DEFAULT_HEAVY_CONSTANT,
        })
    }

    pub fn with_heavy_constant(mut self, c: f64) -> Self {
        self.heavy_constant = c;
        self
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    /// `c·eps²/ln max(n, 2)`.
    pub fn heavy_threshold(&self, eps: f64) -> f64 {
        self.heavy_constant * eps * eps / (self.n().max(2) as f64).ln()
    }

    pub fn cost_of(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn max_cost(&self) -> f64 {
        self.costs.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackParams {
    pub eps: f64,
    /// Upper bound on OPT. Defaults to `Σ_j f({j})`.
    pub lambda0: Option<f64>,
    pub seed: u64,
    pub max_rounds: u64,
}

impl KnapsackParams {
    pub fn new(eps: f64) -> Self {
        KnapsackParams {
            eps,
            lambda0: None,
            seed: 0,
            max_rounds: crate::cardinality::DEFAULT_MAX_ROUNDS,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 0.3) {
            return Err(Error::invalid(format!("eps {} not in (0, 0.3]", self.eps)));
        }
        Ok(())
    }
}

fn check_size<O: MultilinearOracle + ?Sized>(oracle: &O, inst: &KnapsackInstance) -> Result<()> {
    if oracle.ground_size() != inst.n() {
        return Err(Error::invalid(format!(
            "oracle has {} elements, knapsack has {} items",
            oracle.ground_size(),
            inst.n()
        )));
    }
    Ok(())
}

fn cost_of_set(costs: &[f64], set: &[usize]) -> f64 {
    set.iter().fold(0.0, |acc, &j| acc + costs[j])
}

fn step_record(
    lambda: f64,
    set_size: usize,
    delta: f64,
    bound: StepBound,
    before: f64,
    after: f64,
    progress: f64,
    objective: f64,
) -> IterationRecord {
    IterationRecord {
        kind: StepKind::Step,
        lambda,
        set_size,
        delta,
        bound: Some(bound),
        measure_before: before,
        measure_after: after,
        progress,
        objective,
        log_weight_total: None,
        phase: None,
    }
}

fn light_bound(adv: &Advance) -> StepBound {
    if adv.capped {
        StepBound::Budget
    } else {
        StepBound::Gradient
    }
}

/// Continuous threshold greedy over the knapsack polytope. On a heavy item
/// that no longer fits, returns the current point with
/// [`ExitReason::HeavyExit`].
pub fn greedy_knapsack<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    inst: &KnapsackInstance,
    params: &KnapsackParams,
) -> Result<(FractionalSolution, GreedyTrace)> {
    check_size(oracle, inst)?;
    params.validate()?;
    let n = inst.n();
    let a = inst.costs();
    let eps = params.eps;
    let meter = Meter::start(oracle.counters());
    let heavy = inst.heavy_threshold(eps);
    let cheap = eps / n as f64;

    let (lambda0, _) = initial_lambda(oracle, params.lambda0)?;
    let lambda_stop = lambda0 / (std::f64::consts::E * n as f64);
    let mut trace = GreedyTrace::new(lambda0, lambda_stop);
    trace.adaptive_rounds = 1;

    let mut x: Vec<f64> = a.iter().map(|&c| if c <= cheap { 1.0 } else { 0.0 }).collect();
    let mut lambda = lambda0;
    let lo = (eps / n as f64).powi(3);

    guard(&trace, params.max_rounds)?;
    let mut value = oracle.eval_f(&x)?;
    trace.adaptive_rounds += 1;
    if lambda0 <= 0.0 {
        trace.exit = ExitReason::Saturated;
        meter.finish(oracle.counters(), &mut trace);
        return Ok((knapsack_solution(inst, x, value), trace));
    }
    guard(&trace, params.max_rounds)?;
    let mut grad = refreshed_gradient(oracle, &x)?;
    trace.adaptive_rounds += 1;

    'outer: loop {
        let used = inst.cost_of(&x);
        if used >= 1.0 - 1e-9 {
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
        let keep = |j: usize, x: &[f64], grad: &[f64]| {
            x[j] < 1.0 - SATURATED && grad[j] >= (1.0 - eps) * lambda * a[j]
        };
        let mut good: Vec<usize> = (0..n).filter(|&j| keep(j, &x, &grad)).collect();

        while !good.is_empty() {
            let used = inst.cost_of(&x);
            if used >= 1.0 - 1e-9 {
                break;
            }
            guard(&trace, params.max_rounds)?;
            let mass = cost_of_set(a, &good);
            let record;
            if let Some(&j) = good.iter().find(|&&j| a[j] >= heavy) {
                if used + a[j] > 1.0 + 1e-12 {
                    trace.exit = ExitReason::HeavyExit { item: j };
                    break 'outer;
                }
                // F is linear in x_j, so the gain is (1 - x_j)·F'_j(x)
                value += (1.0 - x[j]) * grad[j];
                x[j] = 1.0;
                grad = refreshed_gradient(oracle, &x)?;
                trace.adaptive_rounds += 1;
                record = (1.0, StepBound::Integral, good.len());
            } else {
                let room = good.iter().map(|&j| 1.0 - x[j]).fold(f64::INFINITY, f64::min);
                let cap = ((1.0 - used) / mass).min(room);
                let rate = (1.0 - eps).powi(2) * lambda * mass;
                let scan = scan_steps(
                    oracle,
                    &x,
                    &indicator(n, &good),
                    rate,
                    step_grid(lo, 1.0 + eps / 2.0, cap),
                )?;
                trace.adaptive_rounds += 1;
                let Some(adv) = scan.advance() else {
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
                record = (adv.step, light_bound(&adv), good.len());
            }
            let next: Vec<usize> = good.iter().copied().filter(|&j| keep(j, &x, &grad)).collect();
            trace.records.push(step_record(
                lambda,
                record.2,
                record.0,
                record.1,
                mass,
                cost_of_set(a, &next),
                inst.cost_of(&x),
                value,
            ));
            good = next;
        }

        if inst.cost_of(&x) >= 1.0 - 1e-9 {
            continue;
        }
        lambda *= 1.0 - eps;
        trace.records.push(threshold_record(lambda, inst.cost_of(&x), value));
    }

    meter.finish(oracle.counters(), &mut trace);
    Ok((knapsack_solution(inst, x, value), trace))
}

fn knapsack_solution(inst: &KnapsackInstance, x: Vec<f64>, value: f64) -> FractionalSolution {
    let max_load = inst.cost_of(&x);
    FractionalSolution { x, value, max_load }
}

/// Output of [`randomized_greedy_knapsack`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSet {
    pub set: Vec<usize>,
    pub value: f64,
    /// Running `t`, the expected cost of `set`.
    pub expected_cost: f64,
    pub cost: f64,
}

/// Discrete variant: items that are heavy or have a large margin
/// (`f_Q(j) ≥ c·eps²λ/ln n`) are added deterministically, one per round;
/// the rest are sampled as `R ∼ δS`. The expected cost `t` is capped at
/// `1 - eps`.
pub fn randomized_greedy_knapsack<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    inst: &KnapsackInstance,
    params: &KnapsackParams,
) -> Result<(KnapsackSet, GreedyTrace)> {
    check_size(oracle, inst)?;
    params.validate()?;
    let n = inst.n();
    let a = inst.costs();
    let eps = params.eps;
    let meter = Meter::start(oracle.counters());
    let heavy = inst.heavy_threshold(eps);
    let margin_scale = inst.heavy_constant * eps * eps / (n.max(2) as f64).ln();
    let t_cap = 1.0 - eps;
    let mut rng = seed::rng(params.seed, Stream::KnapsackSampling);

    let (lambda0, singles) = initial_lambda(oracle, params.lambda0)?;
    let lambda_stop = lambda0 / (std::f64::consts::E * n as f64);
    let mut trace = GreedyTrace::new(lambda0, lambda_stop);
    trace.adaptive_rounds = 1;

    let mut q: Vec<usize> = Vec::new();
    let mut margins = singles;
    let mut value = 0.0;
    let mut t = 0.0;
    let mut lambda = lambda0;
    let lo = (eps / n as f64).powi(3);

    'outer: loop {
        if lambda0 <= 0.0 || q.len() == n {
            trace.exit = ExitReason::Saturated;
            break;
        }
        // the inner guard t ≤ 1 - eps is stricter than the outer t ≤ 1, so
        // once it fails no further step can happen
        if t > t_cap - 1e-12 {
            trace.exit = ExitReason::BudgetExhausted;
            break;
        }
        if lambda < lambda_stop {
            trace.exit = ExitReason::ThresholdReached;
            break;
        }
        let keep = |j: usize, q: &[usize], margins: &[f64]| {
            q.binary_search(&j).is_err() && margins[j] >= (1.0 - eps) * lambda * a[j]
        };
        let mut good: Vec<usize> = (0..n).filter(|&j| keep(j, &q, &margins)).collect();

        while !good.is_empty() && t <= t_cap - 1e-12 {
            guard(&trace, params.max_rounds)?;
            let mass = cost_of_set(a, &good);
            let deterministic = good
                .iter()
                .copied()
                .find(|&j| a[j] >= heavy || margins[j] >= margin_scale * lambda);
            let (delta, bound) = if let Some(j) = deterministic {
                if t + a[j] > t_cap + 1e-12 {
                    trace.exit = ExitReason::HeavyExit { item: j };
                    break 'outer;
                }
                q = insert_sorted(&q, j);
                t += a[j];
                (1.0, StepBound::Integral)
            } else {
                let cap = ((t_cap - t) / mass).min(1.0);
                let rate = (1.0 - eps).powi(2) * lambda * mass;
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
                for &j in &good {
                    if adv.step >= 1.0 || rng.gen::<f64>() < adv.step {
                        q = insert_sorted(&q, j);
                    }
                }
                t += adv.step * mass;
                guard(&trace, params.max_rounds)?;
                (adv.step, light_bound(&adv))
            };

            let mut sets = vec![q.clone()];
            sets.extend(good.iter().map(|&j| insert_sorted(&q, j)));
            let vals = oracle.set_values_batch(&sets)?;
            trace.adaptive_rounds += 1;
            value = vals[0];
            for (&j, v) in good.iter().zip(&vals[1..]) {
                margins[j] = v - value;
            }
            let next: Vec<usize> = good.iter().copied().filter(|&j| keep(j, &q, &margins)).collect();
            trace.records.push(step_record(
                lambda,
                good.len(),
                delta,
                bound,
                mass,
                cost_of_set(a, &next),
                t,
                value,
            ));
            good = next;
        }

        if t > t_cap - 1e-12 {
            continue;
        }
        lambda *= 1.0 - eps;
        trace.records.push(threshold_record(lambda, t, value));
        // margins of items outside the last good set are stale overestimates
        if lambda >= lambda_stop {
            let thr = |j: usize| (1.0 - eps) * lambda * a[j];
            let stale: Vec<usize> = (0..n)
                .filter(|&j| q.binary_search(&j).is_err() && margins[j] >= thr(j))
                .collect();
            if !stale.is_empty() && !q.is_empty() {
                guard(&trace, params.max_rounds)?;
                let mut sets = vec![q.clone()];
                sets.extend(stale.iter().map(|&j| insert_sorted(&q, j)));
                let vals = oracle.set_values_batch(&sets)?;
                trace.adaptive_rounds += 1;
                for (&j, v) in stale.iter().zip(&vals[1..]) {
                    margins[j] = v - vals[0];
                }
            }
        }
    }

    meter.finish(oracle.counters(), &mut trace);
    let cost = cost_of_set(a, &q);
    Ok((
        KnapsackSet {
            set: q,
            value,
            expected_cost: t,
            cost,
        },
        trace,
    ))
}

/// `f_G` on the items that still fit after fixing the guess `G`: the
/// residual point is embedded with `x_G = 1` and every dropped item at 0,
/// and `f(G)` is subtracted.
struct Contracted<'a, O: ?Sized> {
    inner: &'a O,
    base: Vec<f64>,
    guess: Vec<usize>,
    map: Vec<usize>,
    base_value: f64,
}

impl<O: MultilinearOracle + ?Sized> Contracted<'_, O> {
    fn embed(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (&j, &v) in self.map.iter().zip(x) {
            full[j] = v;
        }
        full
    }
}

impl<O: MultilinearOracle + ?Sized> MultilinearOracle for Contracted<'_, O> {
    fn ground_size(&self) -> usize {
        self.map.len()
    }

    fn counters(&self) -> &Counters {
        self.inner.counters()
    }

    fn point_value(&self, x: &[f64], tag: QueryTag) -> Result<f64> {
        Ok(self.inner.point_value(&self.embed(x), tag)? - self.base_value)
    }

    fn point_grad(&self, x: &[f64], j: usize, tag: QueryTag) -> Result<f64> {
        self.inner.point_grad(&self.embed(x), self.map[j], tag)
    }

    fn set_value(&self, set: &[usize]) -> Result<f64> {
        let mut full = self.guess.clone();
        full.extend(set.iter().map(|&j| self.map[j]));
        full.sort_unstable();
        Ok(self.inner.set_value(&full)? - self.base_value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnapsackSolver {
    Continuous,
    Randomized,
}

/// Best solution found by [`partial_enumeration`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    /// Point over the full ground set; integral for the randomized solver.
    pub x: Vec<f64>,
    pub value: f64,
    pub guess: Vec<usize>,
    /// Exit item added on its own to the guess, when that was the winner.
    pub completion: Option<usize>,
    /// Rounds are the largest over all guesses plus one for the guess
    /// values; calls are the total.
    pub trace: GreedyTrace,
}

fn guesses(costs: &[f64], size: usize) -> Vec<Vec<usize>> {
    fn extend(costs: &[f64], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if cur.len() == size {
            return;
        }
        for j in start..costs.len() {
            cur.push(j);
            if cost_of_set(costs, cur) <= 1.0 + 1e-12 {
                extend(costs, size, j + 1, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(costs, size, 0, &mut Vec::new(), &mut out);
    out
}

/// Runs the chosen knapsack solver from every seed set `G` with
/// `|G| ≤ guess_size` and `a(G) ≤ 1`, all guesses in parallel, and keeps
/// the best of `G ∪ x` and `G ∪ {exit item}` over all guesses.
pub fn partial_enumeration<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    inst: &KnapsackInstance,
    params: &KnapsackParams,
    guess_size: usize,
    solver: KnapsackSolver,
) -> Result<EnumerationResult> {
    check_size(oracle, inst)?;
    params.validate()?;
    if guess_size > 3 {
        return Err(Error::invalid(format!("guess size {guess_size} exceeds 3")));
    }
    let meter = Meter::start(oracle.counters());
    let n = inst.n();
    let a = inst.costs();
    let all = guesses(a, guess_size);
    let base_values = oracle.set_values_batch(&all)?;

    struct Outcome {
        x: Vec<f64>,
        value: f64,
        exit_item: Option<usize>,
        trace: Option<GreedyTrace>,
    }

    let outcomes = all
        .par_iter()
        .zip(&base_values)
        .map(|(g, &fg)| -> Result<Outcome> {
            let budget = 1.0 - cost_of_set(a, g);
            let map: Vec<usize> = (0..n)
                .filter(|j| g.binary_search(j).is_err() && a[*j] <= budget + 1e-12)
                .collect();
            let mut base = vec![0.0; n];
            for &j in g {
                base[j] = 1.0;
            }
            if map.is_empty() || budget <= 1e-12 {
                return Ok(Outcome {
                    x: base,
                    value: fg,
                    exit_item: None,
                    trace: None,
                });
            }
            let sub = Contracted {
                inner: oracle,
                base,
                guess: g.clone(),
                map,
                base_value: fg,
            };
            let residual = KnapsackInstance {
                costs: sub.map.iter().map(|&j| (a[j] / budget).min(1.0)).collect(),
                heavy_constant: inst.heavy_constant,
            };
            let mut sub_params = params.clone();
            sub_params.lambda0 = None;
            let (x_sub, value_sub, trace) = match solver {
                KnapsackSolver::Continuous => {
                    let (sol, trace) = greedy_knapsack(&sub, &residual, &sub_params)?;
                    (sol.x, sol.value, trace)
                }
                KnapsackSolver::Randomized => {
                    let (sol, trace) = randomized_greedy_knapsack(&sub, &residual, &sub_params)?;
                    (indicator(sub.map.len(), &sol.set), sol.value, trace)
                }
            };
            let exit_item = match trace.exit {
                ExitReason::HeavyExit { item } => Some(sub.map[item]),
                _ => None,
            };
            Ok(Outcome {
                x: sub.embed(&x_sub),
                value: fg + value_sub,
                exit_item,
                trace: Some(trace),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rounds = 1 + outcomes
        .iter()
        .filter_map(|o| o.trace.as_ref().map(|t| t.adaptive_rounds))
        .max()
        .unwrap_or(0);

    // G ∪ {exit item} for every guess that hit a heavy item, one round
    let completions: Vec<(usize, usize)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.exit_item.map(|j| (i, j)))
        .collect();
    let completion_values = if completions.is_empty() {
        Vec::new()
    } else {
        rounds += 1;
        oracle.set_values_batch(
            &completions
                .iter()
                .map(|&(i, j)| insert_sorted(&all[i], j))
                .collect::<Vec<_>>(),
        )?
    };

    let mut best: Option<(usize, Option<usize>, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if best.is_none_or(|b| o.value > b.2) {
            best = Some((i, None, o.value));
        }
    }
    for (&(i, j), &v) in completions.iter().zip(&completion_values) {
        if best.is_none_or(|b| v > b.2) {
            best = Some((i, Some(j), v));
        }
    }
    let (idx, completion, value) = best.expect("the empty guess is always present");
    let mut outcomes = outcomes;
    let winner = outcomes.swap_remove(idx);
    let x = match completion {
        None => winner.x,
        Some(j) => {
            let mut x = indicator(n, &all[idx]);
            x[j] = 1.0;
            x
        }
    };
    let mut trace = winner.trace.unwrap_or_else(|| {
        let mut t = GreedyTrace::new(value, value);
        t.exit = ExitReason::Saturated;
        t
    });
    trace.adaptive_rounds = rounds;
    meter.finish(oracle.counters(), &mut trace);
    Ok(EnumerationResult {
        x,
        value,
        guess: all[idx].clone(),
        completion,
        trace,
    })
}
