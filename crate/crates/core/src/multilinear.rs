//! The multilinear extension `F(x) = E[f(Q)]`, `Q ∼ x`, its partial
//! derivatives and continuous marginals.
//!
//! [`MultilinearOracle`] separates two layers. Backends implement the
//! per-query primitives (`point_value`, `point_grad`, `set_value`), which
//! account oracle calls but never open rounds. The provided methods
//! (`eval_f`, `grad_batch`, `eval_batch`, ...) are the only entry points the
//! solvers use, and each of them is exactly one adaptive round no matter how
//! many queries it carries.
//!
//! Points outside the unit cube are truncated, `F(x) = F(x ∧ 1)`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::{
    insert_sorted, CoverageSystem, ModularFunction, Oracle, SetFunction, ENUMERATION_LIMIT,
};
use crate::oracle::Counters;
use crate::seed::{self, Stream};

/// Identifies one query inside one adaptive round. Sampling backends derive
/// their random streams from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryTag {
    pub round: u64,
    pub slot: u64,
}

pub trait MultilinearOracle: Send + Sync {
    fn ground_size(&self) -> usize;

    fn counters(&self) -> &Counters;

    /// `F(x)` for `x` already validated and inside `[0,1]^n`.
    fn point_value(&self, x: &[f64], tag: QueryTag) -> Result<f64>;

    /// `F'_j(x) = F(x | x_j = 1) - F(x | x_j = 0)`.
    fn point_grad(&self, x: &[f64], j: usize, tag: QueryTag) -> Result<f64> {
        let mut hi = x.to_vec();
        hi[j] = 1.0;
        let mut lo = x.to_vec();
        lo[j] = 0.0;
        Ok(self.point_value(&hi, tag)? - self.point_value(&lo, tag)?)
    }

    /// `f(set)` for a sorted index list.
    fn set_value(&self, set: &[usize]) -> Result<f64>;

    fn eval_f(&self, x: &[f64]) -> Result<f64> {
        let x = truncate(x, self.ground_size())?;
        let round = self.counters().begin_round();
        finite("F(x)", self.point_value(&x, QueryTag { round, slot: 0 })?)
    }

    fn grad_coord(&self, x: &[f64], j: usize) -> Result<f64> {
        Ok(self.grad_batch(x, &[j])?[0])
    }

    /// `F(x | y) = F(x ∨ y) - F(y)`, both values queried in one round.
    fn marginal_f(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.ground_size();
        let x = truncate(x, n)?;
        let y = truncate(y, n)?;
        let join: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a.max(*b)).collect();
        let vals = self.eval_batch(&[join, y])?;
        Ok(vals[0] - vals[1])
    }

    /// Gradient coordinates for every `j` in `coords`, one round.
    fn grad_batch(&self, x: &[f64], coords: &[usize]) -> Result<Vec<f64>> {
        let n = self.ground_size();
        if coords.is_empty() {
            return Err(Error::invalid("gradient batch needs at least one coordinate"));
        }
        if let Some(&j) = coords.iter().find(|&&j| j >= n) {
            return Err(Error::invalid(format!("coordinate {j} out of range for n = {n}")));
        }
        let x = truncate(x, n)?;
        let round = self.counters().begin_round();
        coords
            .par_iter()
            .enumerate()
            .map(|(slot, &j)| {
                let tag = QueryTag {
                    round,
                    slot: slot as u64,
                };
                finite("F'_j(x)", self.point_grad(&x, j, tag)?)
            })
            .collect()
    }

    /// `F` at every point, one round.
    fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.ground_size();
        let points = points
            .iter()
            .map(|p| truncate(p, n))
            .collect::<Result<Vec<_>>>()?;
        let round = self.counters().begin_round();
        points
            .par_iter()
            .enumerate()
            .map(|(slot, p)| {
                let tag = QueryTag {
                    round,
                    slot: slot as u64,
                };
                finite("F(x)", self.point_value(p, tag)?)
            })
            .collect()
    }

    /// `f` on every set, one round.
    fn set_values_batch(&self, sets: &[Vec<usize>]) -> Result<Vec<f64>> {
        let n = self.ground_size();
        for s in sets {
            if let Some(&j) = s.iter().find(|&&j| j >= n) {
                return Err(Error::invalid(format!("index {j} out of range for n = {n}")));
            }
        }
        self.counters().begin_round();
        sets.par_iter()
            .map(|s| finite("f(S)", self.set_value(s)?))
            .collect()
    }
}

fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}

/// Validates a point and applies the truncation `x ∧ 1`.
pub fn truncate(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n {
        return Err(Error::invalid(format!(
            "point has {} coordinates, expected {n}",
            x.len()
        )));
    }
    x.iter()
        .enumerate()
        .map(|(j, &v)| {
            if !v.is_finite() || v < 0.0 {
                Err(Error::invalid(format!("coordinate {j} is {v}; points must be finite and nonnegative")))
            } else {
                Ok(v.min(1.0))
            }
        })
        .collect()
}

/// `Π (1 - x_i)` over the given coordinates. Switches to a log-domain sum
/// when any factor drops below `1e-12`.
fn complement_product(x: &[f64], members: &[usize], skip: Option<usize>) -> f64 {
    let mut direct = 1.0;
    let mut tiny = false;
    for &i in members {
        if Some(i) == skip {
            continue;
        }
        let c = 1.0 - x[i];
        if c <= 0.0 {
            return 0.0;
        }
        tiny |= c < 1e-12;
        direct *= c;
    }
    if !tiny {
        return direct;
    }
    members
        .iter()
        .filter(|&&i| Some(i) != skip)
        .map(|&i| (1.0 - x[i]).ln())
        .sum::<f64>()
        .exp()
}

/// Closed form for coverage functions:
/// `F(x) = Σ_e (1 - Π_{i ∋ e} (1 - x_i))`.
#[derive(Debug)]
pub struct CoverageExtension {
    oracle: Oracle<CoverageSystem>,
}

impl CoverageExtension {
    pub fn new(system: CoverageSystem) -> Self {
        CoverageExtension {
            oracle: Oracle::new(system),
        }
    }

    pub fn system(&self) -> &CoverageSystem {
        self.oracle.function()
    }
}

impl MultilinearOracle for CoverageExtension {
    fn ground_size(&self) -> usize {
        self.oracle.ground_size()
    }

    fn counters(&self) -> &Counters {
        self.oracle.counters()
    }

    fn point_value(&self, x: &[f64], _tag: QueryTag) -> Result<f64> {
        self.counters().add_calls(1);
        let sys = self.system();
        Ok((0..sys.universe_size())
            .map(|e| 1.0 - complement_product(x, sys.covering(e), None))
            .sum())
    }

    fn point_grad(&self, x: &[f64], j: usize, _tag: QueryTag) -> Result<f64> {
        self.counters().add_calls(1);
        let sys = self.system();
        Ok(sys.sets()[j]
            .iter()
            .map(|&e| complement_product(x, sys.covering(e), Some(j)))
            .sum())
    }

    fn set_value(&self, set: &[usize]) -> Result<f64> {
        self.counters().add_calls(1);
        Ok(self.system().value(set))
    }
}

/// `F(x) = ⟨c, x⟩`.
#[derive(Debug)]
pub struct ModularExtension {
    oracle: Oracle<ModularFunction>,
}

impl ModularExtension {
    pub fn new(function: ModularFunction) -> Self {
        ModularExtension {
            oracle: Oracle::new(function),
        }
    }
}

impl MultilinearOracle for ModularExtension {
    fn ground_size(&self) -> usize {
        self.oracle.ground_size()
    }

    fn counters(&self) -> &Counters {
        self.oracle.counters()
    }

    fn point_value(&self, x: &[f64], _tag: QueryTag) -> Result<f64> {
        self.counters().add_calls(1);
        let c = self.oracle.function().weights();
        Ok(c.iter().zip(x).map(|(c, x)| c * x).sum())
    }

    fn point_grad(&self, _x: &[f64], j: usize, _tag: QueryTag) -> Result<f64> {
        self.counters().add_calls(1);
        Ok(self.oracle.function().weights()[j])
    }

    fn set_value(&self, set: &[usize]) -> Result<f64> {
        self.counters().add_calls(1);
        Ok(self.oracle.function().value(set))
    }
}

/// Exact extension of an arbitrary set function by full enumeration.
/// The value table is built once; each query folds it one coordinate at a
/// time in `O(2^n)`.
#[derive(Debug)]
pub struct EnumeratedExtension<F> {
    oracle: Oracle<F>,
    table: Vec<f64>,
}

impl<F: SetFunction> EnumeratedExtension<F> {
    pub fn new(function: F) -> Result<Self> {
        let n = function.ground_size();
        if n > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                n,
                limit: ENUMERATION_LIMIT,
            });
        }
        let table: Vec<f64> = (0u64..(1u64 << n))
            .into_par_iter()
            .map(|mask| function.value_mask(mask))
            .collect();
        Ok(EnumeratedExtension {
            oracle: Oracle::new(function),
            table,
        })
    }

    pub fn function(&self) -> &F {
        self.oracle.function()
    }
}

impl<F: SetFunction> MultilinearOracle for EnumeratedExtension<F> {
    fn ground_size(&self) -> usize {
        self.oracle.ground_size()
    }

    fn counters(&self) -> &Counters {
        self.oracle.counters()
    }

    fn point_value(&self, x: &[f64], _tag: QueryTag) -> Result<f64> {
        self.counters().add_calls(1);
        // Fold the highest coordinate first so index `mask` keeps meaning
        // "low bits = membership of the remaining coordinates".
        let mut cur = self.table.clone();
        for i in (0..x.len()).rev() {
            let half = 1usize << i;
            let (lo, hi) = cur.split_at(half);
            let next: Vec<f64> = lo
                .iter()
                .zip(&hi[..half])
                .map(|(a, b)| (1.0 - x[i]) * a + x[i] * b)
                .collect();
            cur = next;
        }
        Ok(cur[0])
    }

    fn set_value(&self, set: &[usize]) -> Result<f64> {
        self.counters().add_calls(1);
        Ok(self.oracle.function().value(set))
    }
}

/// Parameters of the sampling estimator. The number of samples per estimate
/// is `⌈C · p · ln(d) / eps²⌉` with `C = 3` unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub eps: f64,
    pub p: f64,
    pub d: f64,
    pub seed: u64,
    pub constant: f64,
    /// Reuse one set of samples for every query of a round.
    pub common_random_numbers: bool,
    pub samples_override: Option<usize>,
}

pub const DEFAULT_SAMPLE_CONSTANT: f64 = 3.0;

impl EstimatorConfig {
    pub fn new(eps: f64, p: f64, d: f64, seed: u64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::invalid(format!("estimator eps {eps} not in (0, 1/2)")));
        }
        if !(p >= 1.0) {
            return Err(Error::invalid(format!("estimator p {p} must be at least 1")));
        }
        if !(d >= 2.0) {
            return Err(Error::invalid(format!("estimator d {d} must be at least 2")));
        }
        Ok(EstimatorConfig {
            eps,
            p,
            d,
            seed,
            constant: DEFAULT_SAMPLE_CONSTANT,
            common_random_numbers: true,
            samples_override: None,
        })
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples_override = Some(samples.max(1));
        self
    }

    pub fn sample_count(&self) -> usize {
        self.samples_override.unwrap_or_else(|| {
            ((self.constant * self.p * self.d.ln() / (self.eps * self.eps)).ceil() as usize).max(1)
        })
    }
}

/// Monte Carlo estimator over a black-box value oracle: the plain mean of
/// `f(Q)` over independent samples `Q ∼ x`.
#[derive(Debug)]
pub struct SampledExtension<F> {
    oracle: Oracle<F>,
    config: EstimatorConfig,
}

impl<F: SetFunction> SampledExtension<F> {
    pub fn new(function: F, config: EstimatorConfig) -> Self {
        SampledExtension {
            oracle: Oracle::new(function),
            config,
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn function(&self) -> &F {
        self.oracle.function()
    }

    fn stream_index(&self, tag: QueryTag, sample: u64) -> u64 {
        let slot = if self.config.common_random_numbers {
            0
        } else {
            tag.slot
        };
        seed::splitmix64(seed::splitmix64(tag.round) ^ slot.wrapping_mul(0x2545_F491_4F6C_DD1D))
            ^ sample
    }

    fn draw(&self, x: &[f64], tag: QueryTag, sample: u64) -> Vec<usize> {
        let mut rng = seed::rng_at(self.config.seed, Stream::Estimator, self.stream_index(tag, sample));
        x.iter()
            .enumerate()
            .filter_map(|(i, &p)| (rng.gen::<f64>() < p).then_some(i))
            .collect()
    }
}

impl<F: SetFunction> MultilinearOracle for SampledExtension<F> {
    fn ground_size(&self) -> usize {
        self.oracle.ground_size()
    }

    fn counters(&self) -> &Counters {
        self.oracle.counters()
    }

    fn point_value(&self, x: &[f64], tag: QueryTag) -> Result<f64> {
        let r = self.config.sample_count();
        let f = self.oracle.function();
        let total: f64 = (0..r as u64).map(|s| f.value(&self.draw(x, tag, s))).sum();
        self.counters().add_calls(r as u64);
        Ok(total / r as f64)
    }

    fn point_grad(&self, x: &[f64], j: usize, tag: QueryTag) -> Result<f64> {
        let r = self.config.sample_count();
        let f = self.oracle.function();
        let total: f64 = (0..r as u64)
            .map(|s| {
                let mut q = self.draw(x, tag, s);
                q.retain(|&i| i != j);
                f.value(&insert_sorted(&q, j)) - f.value(&q)
            })
            .sum();
        self.counters().add_calls(2 * r as u64);
        Ok(total / r as f64)
    }

    fn set_value(&self, set: &[usize]) -> Result<f64> {
        self.counters().add_calls(1);
        Ok(self.oracle.function().value(set))
    }
}

/// Indicator vector of a set.
pub fn indicator(n: usize, set: &[usize]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &j in set {
        x[j] = 1.0;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sets() -> CoverageSystem {
        CoverageSystem::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap()
    }

    /// `Σ_S f(S) Π_{i∈S} x_i Π_{i∉S} (1 - x_i)`, summed term by term.
    fn expectation_by_enumeration(f: &dyn SetFunction, x: &[f64]) -> f64 {
        let n = f.ground_size();
        (0u64..(1 << n))
            .map(|mask| {
                let p: f64 = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { x[i] } else { 1.0 - x[i] })
                    .product();
                p * f.value_mask(mask)
            })
            .sum()
    }

    #[test]
    fn eval_examples() {
        let ext = CoverageExtension::new(two_sets());
        assert!((ext.eval_f(&[0.5, 0.5]).unwrap() - 1.75).abs() < 1e-12);
        assert_eq!(ext.eval_f(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ext.eval_f(&[1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(
            expectation_by_enumeration(&two_sets(), &[0.5, 0.5]),
            1.75
        );
    }

    #[test]
    fn grad_examples() {
        let ext = CoverageExtension::new(two_sets());
        assert!((ext.grad_coord(&[0.5, 0.5], 0).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(ext.grad_batch(&[0.5, 0.5], &[0, 1]).unwrap(), vec![1.5, 1.5]);

        let modular = ModularExtension::new(ModularFunction::new(vec![3.0, 2.0, 1.0]).unwrap());
        assert_eq!(
            modular.grad_batch(&[0.2, 0.9, 0.4], &[0, 1, 2]).unwrap(),
            vec![3.0, 2.0, 1.0]
        );

        // set 1 = {e2} is contained in set 0, fully redundant at x = 1
        let redundant = CoverageSystem::new(2, vec![vec![0, 1], vec![1]]).unwrap();
        let ext = CoverageExtension::new(redundant);
        assert_eq!(ext.grad_coord(&[1.0, 1.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn marginal_examples() {
        let ext = CoverageExtension::new(two_sets());
        assert_eq!(ext.marginal_f(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((ext.marginal_f(&[0.5, 0.5], &[0.0, 0.0]).unwrap() - 1.75).abs() < 1e-12);

        let modular = ModularExtension::new(ModularFunction::new(vec![3.0, 2.0, 1.0]).unwrap());
        let m = modular.marginal_f(&[0.5, 0.5, 0.5], &[0.1, 0.2, 0.3]).unwrap();
        assert!((m - (3.0 * 0.4 + 2.0 * 0.3 + 1.0 * 0.2)).abs() < 1e-12);
    }

    #[test]
    fn one_round_per_batch() {
        let ext = CoverageExtension::new(two_sets());
        ext.grad_batch(&[0.5, 0.5], &[0, 1]).unwrap();
        assert_eq!(ext.counters().snapshot(), (2, 1));
        ext.eval_batch(&[vec![0.1, 0.1], vec![0.2, 0.2], vec![0.3, 0.3]])
            .unwrap();
        assert_eq!(ext.counters().snapshot(), (5, 2));
        ext.marginal_f(&[0.1, 0.1], &[0.2, 0.0]).unwrap();
        assert_eq!(ext.counters().snapshot(), (7, 3));
        ext.set_values_batch(&[vec![0], vec![0, 1]]).unwrap();
        assert_eq!(ext.counters().snapshot(), (9, 4));
    }

    #[test]
    fn enumerated_matches_closed_form() {
        let sys = crate::oracle::generate_random_coverage(12, 7, 0.3, 5).unwrap();
        let exact = CoverageExtension::new(sys.clone());
        let enumerated = EnumeratedExtension::new(sys.clone()).unwrap();
        let x = [0.1, 0.9, 0.35, 0.0, 1.0, 0.5, 0.77];
        let a = exact.eval_f(&x).unwrap();
        let b = enumerated.eval_f(&x).unwrap();
        let c = expectation_by_enumeration(&sys, &x);
        assert!((a - c).abs() < 1e-9 && (b - c).abs() < 1e-9, "{a} {b} {c}");
        for j in 0..7 {
            let ga = exact.grad_coord(&x, j).unwrap();
            let gb = enumerated.grad_coord(&x, j).unwrap();
            assert!((ga - gb).abs() < 1e-9);
        }
    }

    #[test]
    fn generic_backend_refuses_large_n() {
        let m = ModularFunction::new(vec![1.0; 21]).unwrap();
        assert!(matches!(
            EnumeratedExtension::new(m),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn truncation_and_validation() {
        let ext = CoverageExtension::new(two_sets());
        assert_eq!(
            ext.eval_f(&[3.0, 0.5]).unwrap(),
            ext.eval_f(&[1.0, 0.5]).unwrap()
        );
        assert!(ext.eval_f(&[-0.1, 0.5]).is_err());
        assert!(ext.eval_f(&[0.1]).is_err());
        assert!(ext.eval_f(&[f64::NAN, 0.5]).is_err());
        assert!(ext.grad_batch(&[0.1, 0.1], &[]).is_err());
        assert!(ext.grad_batch(&[0.1, 0.1], &[2]).is_err());
    }

    #[test]
    fn log_domain_product_handles_near_saturation() {
        // 1 - x_i = 1e-13 for each of the three covering sets
        let sys = CoverageSystem::new(1, vec![vec![0], vec![0], vec![0]]).unwrap();
        let ext = CoverageExtension::new(sys);
        let x = [1.0 - 1e-13; 3];
        let v = ext.eval_f(&x).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let g = ext.grad_coord(&x, 0).unwrap();
        assert!(g > 0.0 && g < 1e-24);
    }

    #[test]
    fn sample_count_formula() {
        let cfg = EstimatorConfig::new(0.1, 16.0, 16.0, 0).unwrap();
        assert_eq!(cfg.sample_count(), (3.0 * 16.0 * 16f64.ln() / 0.01).ceil() as usize);
        assert!(EstimatorConfig::new(0.5, 1.0, 2.0, 0).is_err());
        assert!(EstimatorConfig::new(0.1, 0.5, 2.0, 0).is_err());
        assert!(EstimatorConfig::new(0.1, 1.0, 1.0, 0).is_err());
        assert_eq!(cfg.with_samples(0).sample_count(), 1);
    }

    #[test]
    fn sampling_endpoints_are_exact() {
        let cfg = EstimatorConfig::new(0.2, 2.0, 2.0, 9).unwrap().with_samples(50);
        let ext = SampledExtension::new(two_sets(), cfg);
        assert_eq!(ext.eval_f(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ext.eval_f(&[1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(ext.counters().snapshot(), (100, 2));
    }

    #[test]
    fn common_random_numbers_share_samples_within_a_round() {
        let sys = crate::oracle::generate_random_coverage(10, 5, 0.4, 2).unwrap();
        let cfg = EstimatorConfig::new(0.2, 2.0, 2.0, 4).unwrap().with_samples(20);
        let ext = SampledExtension::new(sys, cfg.clone());
        let x = vec![0.5; 5];
        let vals = ext.eval_batch(&[x.clone(), x.clone()]).unwrap();
        assert_eq!(vals[0], vals[1]);

        let mut independent = cfg;
        independent.common_random_numbers = false;
        let sys = crate::oracle::generate_random_coverage(10, 5, 0.4, 2).unwrap();
        let ext = SampledExtension::new(sys, independent);
        let vals = ext.eval_batch(&[x.clone(), x]).unwrap();
        assert_ne!(vals[0], vals[1]);
    }
}
