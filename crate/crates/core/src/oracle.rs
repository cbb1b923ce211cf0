//! Set-function value oracles and the instrumentation shared by every solver.
//!
//! A subset of the ground set `0..n` is passed around as a sorted slice of
//! indices. For `n <= 64` the bitmask entry points (`value_mask`,
//! [`mask_to_indices`]) give cheap exhaustive enumeration; both forms reach
//! the same oracle.
//!
//! Every query goes through an [`Oracle`] wrapper that owns two atomic
//! counters: one for individual oracle calls and one for adaptive rounds. A
//! round is a batch of queries issued together, none of which depends on the
//! answer of another query in the same batch.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Largest ground set that exhaustive enumeration accepts.
pub const ENUMERATION_LIMIT: usize = 20;

/// Number of elements of a ground set `0..n`. Never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSet(usize);

impl GroundSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ground set must have at least one element"));
        }
        Ok(GroundSet(n))
    }

    pub fn len(&self) -> usize {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn mask_to_indices(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut rest = mask;
    while rest != 0 {
        let j = rest.trailing_zeros() as usize;
        out.push(j);
        rest &= rest - 1;
    }
    out
}

/// Bitmask of a subset, or `None` if some index does not fit in 64 bits.
pub fn indices_to_mask(set: &[usize]) -> Option<u64> {
    set.iter().try_fold(0u64, |acc, &j| (j < 64).then(|| acc | (1u64 << j)))
}

/// A normalized, nonnegative, monotone submodular set function.
///
/// `value` receives a sorted, duplicate-free slice of indices below
/// `ground_size()`.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;

    fn value(&self, set: &[usize]) -> f64;

    fn value_mask(&self, mask: u64) -> f64 {
        self.value(&mask_to_indices(mask))
    }

    /// `f(base + j) - f(base)`. Implementations with an incremental
    /// evaluation may override this; nothing requires it.
    fn marginal(&self, base: &[usize], j: usize) -> f64 {
        if base.binary_search(&j).is_ok() {
            return 0.0;
        }
        let with = insert_sorted(base, j);
        self.value(&with) - self.value(base)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for &F {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn value(&self, set: &[usize]) -> f64 {
        (**self).value(set)
    }
    fn value_mask(&self, mask: u64) -> f64 {
        (**self).value_mask(mask)
    }
    fn marginal(&self, base: &[usize], j: usize) -> f64 {
        (**self).marginal(base, j)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for Arc<F> {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn value(&self, set: &[usize]) -> f64 {
        (**self).value(set)
    }
    fn value_mask(&self, mask: u64) -> f64 {
        (**self).value_mask(mask)
    }
    fn marginal(&self, base: &[usize], j: usize) -> f64 {
        (**self).marginal(base, j)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for Box<F> {
    fn ground_size(&self) -> usize {
        (**self).ground_size()
    }
    fn value(&self, set: &[usize]) -> f64 {
        (**self).value(set)
    }
    fn value_mask(&self, mask: u64) -> f64 {
        (**self).value_mask(mask)
    }
    fn marginal(&self, base: &[usize], j: usize) -> f64 {
        (**self).marginal(base, j)
    }
}

pub(crate) fn insert_sorted(set: &[usize], j: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(set.len() + 1);
    let pos = set.partition_point(|&i| i < j);
    out.extend_from_slice(&set[..pos]);
    if set.get(pos) != Some(&j) {
        out.push(j);
    }
    out.extend_from_slice(&set[pos..]);
    out
}

/// Monotone counters of oracle calls and adaptive rounds.
#[derive(Debug, Default)]
pub struct Counters {
    calls: AtomicU64,
    rounds: AtomicU64,
}

impl Counters {
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn rounds(&self) -> u64 {
        self.rounds.load(Ordering::SeqCst)
    }

    pub fn add_calls(&self, k: u64) {
        self.calls.fetch_add(k, Ordering::SeqCst);
    }

    /// Opens a new adaptive round and returns its index (0-based).
    pub fn begin_round(&self) -> u64 {
        self.rounds.fetch_add(1, Ordering::SeqCst)
    }

    pub fn snapshot(&self) -> (u64, u64) {
        (self.calls(), self.rounds())
    }
}

/// Instrumented wrapper around a [`SetFunction`].
#[derive(Debug)]
pub struct Oracle<F> {
    function: F,
    counters: Counters,
}

impl<F: SetFunction> Oracle<F> {
    pub fn new(function: F) -> Self {
        Oracle {
            function,
            counters: Counters::default(),
        }
    }

    pub fn function(&self) -> &F {
        &self.function
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn ground_size(&self) -> usize {
        self.function.ground_size()
    }

    /// A lone query: one call, one round.
    pub fn evaluate(&self, set: &[usize]) -> f64 {
        self.counters.begin_round();
        self.counters.add_calls(1);
        self.function.value(set)
    }

    /// All sets queried in one round, evaluated concurrently.
    pub fn evaluate_batch(&self, sets: &[Vec<usize>]) -> Vec<f64> {
        self.round(|batch| sets.par_iter().map(|s| batch.value(s)).collect())
    }

    /// Runs `job` as a single adaptive round. Queries issued through the
    /// [`Batch`] handle count as calls but do not open new rounds.
    pub fn round<R>(&self, job: impl FnOnce(&Batch<'_, F>) -> R) -> R {
        let index = self.counters.begin_round();
        job(&Batch {
            oracle: self,
            index,
        })
    }
}

/// Query handle valid for the duration of one adaptive round.
pub struct Batch<'a, F> {
    oracle: &'a Oracle<F>,
    index: u64,
}

impl<F: SetFunction> Batch<'_, F> {
    pub fn value(&self, set: &[usize]) -> f64 {
        self.oracle.counters.add_calls(1);
        self.oracle.function.value(set)
    }

    pub fn value_mask(&self, mask: u64) -> f64 {
        self.oracle.counters.add_calls(1);
        self.oracle.function.value_mask(mask)
    }

    /// Index of the round this batch belongs to.
    pub fn round_index(&self) -> u64 {
        self.index
    }
}

/// Set system `A_1..A_n` over a universe of `r` elements; `f(S)` counts the
/// universe elements covered by the sets in `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSystem {
    universe_size: usize,
    sets: Vec<Vec<usize>>,
    element_to_sets: Vec<Vec<usize>>,
}

impl CoverageSystem {
    pub fn new(universe_size: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        if universe_size == 0 {
            return Err(Error::invalid("universe_size must be positive"));
        }
        if sets.is_empty() {
            return Err(Error::invalid("coverage system needs at least one set"));
        }
        let mut sets = sets;
        let mut element_to_sets = vec![Vec::new(); universe_size];
        for (i, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&e) = set.iter().find(|&&e| e >= universe_size) {
                return Err(Error::invalid(format!(
                    "set {i} contains element {e} outside the universe of size {universe_size}"
                )));
            }
            for &e in set.iter() {
                element_to_sets[e].push(i);
            }
        }
        Ok(CoverageSystem {
            universe_size,
            sets,
            element_to_sets,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Sets containing universe element `e`, in increasing order.
    pub fn covering(&self, e: usize) -> &[usize] {
        &self.element_to_sets[e]
    }

    /// `|∪_{i∈S} A_i|`, rejecting out-of-range indices.
    pub fn coverage_value(&self, set: &[usize]) -> Result<f64> {
        if let Some(&j) = set.iter().find(|&&j| j >= self.sets.len()) {
            return Err(Error::invalid(format!(
                "index {j} out of range for {} sets",
                self.sets.len()
            )));
        }
        Ok(self.union_size(set.iter().copied()))
    }

    fn union_size(&self, members: impl Iterator<Item = usize>) -> f64 {
        let mut seen = vec![0u64; self.universe_size.div_ceil(64)];
        let mut count = 0usize;
        for j in members {
            for &e in &self.sets[j] {
                let (w, b) = (e / 64, 1u64 << (e % 64));
                if seen[w] & b == 0 {
                    seen[w] |= b;
                    count += 1;
                }
            }
        }
        count as f64
    }
}

impl SetFunction for CoverageSystem {
    fn ground_size(&self) -> usize {
        self.sets.len()
    }

    fn value(&self, set: &[usize]) -> f64 {
        self.union_size(set.iter().copied())
    }

    fn value_mask(&self, mask: u64) -> f64 {
        self.union_size(mask_to_indices(mask).into_iter())
    }

    fn marginal(&self, base: &[usize], j: usize) -> f64 {
        if base.binary_search(&j).is_ok() {
            return 0.0;
        }
        self.sets[j]
            .iter()
            .filter(|&&e| {
                !self.element_to_sets[e]
                    .iter()
                    .any(|i| base.binary_search(i).is_ok())
            })
            .count() as f64
    }
}

/// `f(S) = Σ_{j∈S} c_j` with `c ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularFunction {
    weights: Vec<f64>,
}

impl ModularFunction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("modular function needs at least one weight"));
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::invalid(format!(
                "weight {j} is {w}; weights must be finite and nonnegative"
            )));
        }
        Ok(ModularFunction { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SetFunction for ModularFunction {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, set: &[usize]) -> f64 {
        set.iter().map(|&j| self.weights[j]).sum()
    }

    fn marginal(&self, base: &[usize], j: usize) -> f64 {
        if base.binary_search(&j).is_ok() {
            0.0
        } else {
            self.weights[j]
        }
    }
}

/// Exact maximum of `f` over all subsets accepted by `feasible`.
///
/// Ties resolve to the lexicographically smallest sorted index list.
pub fn brute_force_opt<F, P>(f: &F, feasible: P) -> Result<(Vec<usize>, f64)>
where
    F: SetFunction + ?Sized,
    P: Fn(&[usize]) -> bool,
{
    let n = f.ground_size();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 0u64..(1u64 << n) {
        let set = mask_to_indices(mask);
        if !feasible(&set) {
            continue;
        }
        let v = f.value_mask(mask);
        let better = match &best {
            None => true,
            Some((bs, bv)) => {
                let tol = 1e-12 * bv.abs().max(1.0);
                v > bv + tol || ((v - bv).abs() <= tol && set < *bs)
            }
        };
        if better {
            best = Some((set, v));
        }
    }
    best.ok_or_else(|| Error::invalid("no feasible subset"))
}

/// Random set system: each universe element joins each set independently
/// with probability `density`.
pub fn generate_random_coverage(
    universe_size: usize,
    n: usize,
    density: f64,
    seed: u64,
) -> Result<CoverageSystem> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!("density {density} not in (0, 1]")));
    }
    if universe_size == 0 || n == 0 {
        return Err(Error::invalid("universe size and set count must be positive"));
    }
    let mut rng = seed::rng(seed, seed::Stream::Instance);
    let sets = (0..n)
        .map(|_| {
            (0..universe_size)
                .filter(|_| density >= 1.0 || rng.gen::<f64>() < density)
                .collect()
        })
        .collect();
    CoverageSystem::new(universe_size, sets)
}
