//! Batched step-size search along a nonnegative direction.
//!
//! All candidate step sizes are probed in one adaptive round. Candidates
//! form a geometric grid from a floor up to the cap, with the cap itself
//! always included.
//!
//! For a concave restriction `δ ↦ F(x + δd)`, the average rate
//! `F(x + δd | x) / δ` is non-increasing in `δ`, so the passing candidates
//! form a prefix of the grid. A solver takes the cap when it passes;
//! otherwise it takes the first candidate past the largest passing one.
//! That step is within one grid ratio of the exact maximal step, and because
//! the rate condition fails there, the good set is guaranteed to shrink.

use crate::error::{Error, Result};
use crate::multilinear::MultilinearOracle;

/// Geometric grid `lo, lo·ratio, lo·ratio², … < cap`, followed by `cap`.
/// A floor above the cap collapses the grid to `[cap]`.
pub fn step_grid(lo: f64, ratio: f64, cap: f64) -> Vec<f64> {
    if !(cap > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut v = lo.min(cap);
    while v < cap * (1.0 - 1e-12) {
        out.push(v);
        v *= ratio;
    }
    out.push(cap);
    out
}

/// Result of probing every grid candidate.
#[derive(Debug, Clone)]
pub struct GridScan {
    pub candidates: Vec<f64>,
    /// `F(x + δd)` for each candidate.
    pub values: Vec<f64>,
    pub base_value: f64,
    /// Index of the largest candidate meeting the rate condition.
    pub passing: Option<usize>,
}

/// The step a solver should take after a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub step: f64,
    pub value: f64,
    /// The cap passed the rate condition and was taken.
    pub capped: bool,
}

impl GridScan {
    pub fn largest_passing(&self) -> Option<f64> {
        self.passing.map(|i| self.candidates[i])
    }

    pub fn advance(&self) -> Option<Advance> {
        let i = self.passing?;
        let last = self.candidates.len() - 1;
        let j = if i == last { last } else { i + 1 };
        Some(Advance {
            step: self.candidates[j],
            value: self.values[j],
            capped: i == last,
        })
    }

    /// Smallest candidate, used when nothing passes.
    pub fn floor(&self) -> Advance {
        Advance {
            step: self.candidates[0],
            value: self.values[0],
            capped: self.candidates.len() == 1,
        }
    }
}

/// Probes `F(base + δ·direction)` for every grid candidate in one round.
/// Candidate `δ` passes when `F(base + δd) - F(base) ≥ rate · δ`.
pub fn scan_steps<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    base: &[f64],
    direction: &[f64],
    rate: f64,
    grid: Vec<f64>,
) -> Result<GridScan> {
    if grid.is_empty() {
        return Err(Error::invalid("step search needs a positive cap"));
    }
    let mut points = Vec::with_capacity(grid.len() + 1);
    points.push(base.to_vec());
    for &delta in &grid {
        points.push(
            base.iter()
                .zip(direction)
                .map(|(b, d)| b + delta * d)
                .collect(),
        );
    }
    let mut values = oracle.eval_batch(&points)?;
    let base_value = values.remove(0);
    let slack = 1e-12 * base_value.abs().max(1.0);
    let passing = grid
        .iter()
        .zip(&values)
        .rposition(|(&delta, &v)| v - base_value >= rate * delta - slack);
    Ok(GridScan {
        candidates: grid,
        values,
        base_value,
        passing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// Largest passing grid value; `capped` when it equals the cap.
    Found { delta: f64, capped: bool },
    /// No candidate meets the rate condition.
    Empty,
}

/// Largest `δ` on the grid `{(eps/n)³ (1 + eps/2)^i} ∩ (0, cap]` with
/// `F(x + δS | x) ≥ target_rate · δ`, all candidates in one round.
pub fn find_step_size<O: MultilinearOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    set: &[usize],
    target_rate: f64,
    budget_cap: f64,
    eps: f64,
) -> Result<StepSize> {
    if set.is_empty() {
        return Err(Error::invalid("step search needs a nonempty set"));
    }
    if !(target_rate > 0.0) {
        return Err(Error::invalid(format!("target rate {target_rate} must be positive")));
    }
    let n = oracle.ground_size();
    let direction = crate::multilinear::indicator(n, set);
    let lo = (eps / n as f64).powi(3);
    let scan = scan_steps(
        oracle,
        x,
        &direction,
        target_rate,
        step_grid(lo, 1.0 + eps / 2.0, budget_cap),
    )?;
    Ok(match scan.passing {
        None => StepSize::Empty,
        Some(i) => StepSize::Found {
            delta: scan.candidates[i],
            capped: i + 1 == scan.candidates.len(),
        },
    })
}
