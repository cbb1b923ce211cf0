//! Solver outputs and per-iteration traces.

use serde::{Deserialize, Serialize};

/// A point of `[0,1]^n` returned by a continuous solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub x: Vec<f64>,
    /// `F(x)` as last measured by the solver.
    pub value: f64,
    /// Largest constraint load: `⟨1,x⟩/k`, `⟨a,x⟩` or `max_i (Ax)_i`.
    pub max_load: f64,
}

/// Which limit fixed a step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBound {
    /// The rate condition `F(x'|x) ≥ rate · δ` failed just above the step.
    Gradient,
    /// Cardinality or knapsack budget, or the box `x ≤ 1`.
    Budget,
    /// MWU weight-growth cap `γδ ≤ eps²/(4 ln m)`.
    Weight,
    /// MWU time horizon `t + δ ≤ 1`.
    Time,
    /// No grid candidate passed; the smallest candidate was taken.
    GridFloor,
    /// An item set integrally (knapsack heavy items).
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Uniform increase along the good set.
    Step,
    /// Threshold decrease `λ ← (1 - eps) λ`.
    Threshold,
}

/// One solver iteration.
///
/// `measure_before`/`measure_after` hold the quantity whose decay bounds the
/// iteration count: `|S|` for cardinality, `⟨a,S⟩` for knapsack, the
/// potential `⟨F'(x), x ∧ S⟩` for packing. `measure_after` is taken on the
/// refreshed good set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub kind: StepKind,
    pub lambda: f64,
    pub set_size: usize,
    pub delta: f64,
    pub bound: Option<StepBound>,
    pub measure_before: f64,
    pub measure_after: f64,
    /// `⟨1,x⟩`, `⟨a,x⟩`, or `t` after the iteration.
    pub progress: f64,
    pub objective: f64,
    /// `ln ⟨w,1⟩` after the iteration (packing only).
    pub log_weight_total: Option<f64>,
    /// Outer MWU phase index (packing only).
    pub phase: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExitReason {
    /// Budget or time horizon used up.
    BudgetExhausted,
    /// `λ` fell below the stopping threshold.
    ThresholdReached,
    /// A good heavy item did not fit in the remaining knapsack budget.
    HeavyExit { item: usize },
    /// The randomized solver drew a set larger than its budget.
    BudgetViolated { size: usize },
    /// Nothing left to improve (every coordinate saturated or inactive).
    Saturated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub records: Vec<IterationRecord>,
    /// Adaptive rounds issued by this run, counted by the solver itself so
    /// that concurrent runs on a shared oracle stay separable.
    pub adaptive_rounds: u64,
    /// Growth of the oracle's call counter over the run. Exact for a run
    /// that has the oracle to itself.
    pub oracle_calls: u64,
    pub lambda0: f64,
    pub lambda_stop: f64,
    pub exit: ExitReason,
}

impl GreedyTrace {
    pub(crate) fn new(lambda0: f64, lambda_stop: f64) -> Self {
        GreedyTrace {
            records: Vec::new(),
            adaptive_rounds: 0,
            oracle_calls: 0,
            lambda0,
            lambda_stop,
            exit: ExitReason::ThresholdReached,
        }
    }

    /// Distinct `λ` values in order of use.
    pub fn lambda_trace(&self) -> Vec<f64> {
        let mut out = vec![self.lambda0];
        for r in &self.records {
            if r.kind == StepKind::Threshold {
                out.push(r.lambda);
            }
        }
        out
    }

    pub fn steps(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.kind == StepKind::Step)
    }

    /// Steps whose size was set by the rate condition.
    pub fn gradient_steps(&self) -> impl Iterator<Item = &IterationRecord> {
        self.steps()
            .filter(|r| r.bound == Some(StepBound::Gradient))
    }

    /// Every gradient-bound step satisfies
    /// `measure_after ≤ factor · measure_before (+ tol)`. Returns the first
    /// offending record otherwise.
    pub fn check_decay(&self, factor: f64, tol: f64) -> Option<&IterationRecord> {
        self.gradient_steps()
            .find(|r| r.measure_after > factor * r.measure_before + tol)
    }
}

/// Call-counter snapshot taken at the start of a run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Meter {
    calls: u64,
}

impl Meter {
    pub(crate) fn start(counters: &crate::oracle::Counters) -> Self {
        Meter {
            calls: counters.calls(),
        }
    }

    pub(crate) fn finish(&self, counters: &crate::oracle::Counters, trace: &mut GreedyTrace) {
        trace.oracle_calls = counters.calls() - self.calls;
    }
}
