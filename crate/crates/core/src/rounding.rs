//! Rounding a fractional point to a set, with every draw made in parallel.
//!
//! - [`round_cardinality`]: independent inclusion with probability `(1-eps)x_i`.
//! - [`round_simple_partition`]: one categorical draw per part of a
//!   partition matroid with unit capacities.
//! - [`lift_to_simple_partition`]: reduces general capacities to unit ones
//!   by copying elements.
//! - [`round_crs_packing`]: scaled independent sampling followed by a
//!   per-constraint alteration that restores `A·1_S ≤ 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::SetFunction;
use crate::packing::PackingInstance;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    pub set: Vec<usize>,
    /// Feasibility against the target constraint, checked exactly.
    pub feasible: bool,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMatroid {
    parts: Vec<Vec<usize>>,
    capacities: Vec<usize>,
    part_of: Vec<usize>,
}

impl PartitionMatroid {
    pub fn new(n: usize, parts: Vec<Vec<usize>>, capacities: Vec<usize>) -> Result<Self> {
        if parts.len() != capacities.len() {
            return Err(Error::invalid(format!(
                "{} parts but {} capacities",
                parts.len(),
                capacities.len()
            )));
        }
        if let Some(j) = capacities.iter().position(|&k| k == 0) {
            return Err(Error::invalid(format!("part {j} has capacity 0")));
        }
        let mut part_of = vec![usize::MAX; n];
        let mut parts = parts;
        for (p, part) in parts.iter_mut().enumerate() {
            part.sort_unstable();
            for &i in part.iter() {
                if i >= n {
                    return Err(Error::invalid(format!("element {i} outside ground set of {n}")));
                }
                if part_of[i] != usize::MAX {
                    return Err(Error::invalid(format!("element {i} appears in two parts")));
                }
                part_of[i] = p;
            }
        }
        if let Some(i) = part_of.iter().position(|&p| p == usize::MAX) {
            return Err(Error::invalid(format!("element {i} belongs to no part")));
        }
        Ok(PartitionMatroid {
            parts,
            capacities,
            part_of,
        })
    }

    /// A single part holding every element.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        PartitionMatroid::new(n, vec![(0..n).collect()], vec![k])
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn ground_size(&self) -> usize {
        self.part_of.len()
    }

    pub fn part_of(&self, i: usize) -> usize {
        self.part_of[i]
    }

    pub fn is_simple(&self) -> bool {
        self.capacities.iter().all(|&k| k == 1)
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut used = vec![0usize; self.parts.len()];
        for &i in set {
            used[self.part_of[i]] += 1;
        }
        used.iter().zip(&self.capacities).all(|(u, k)| u <= k)
    }
}

fn validate_point(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::invalid(format!("point has {} coordinates, expected {n}", x.len())));
    }
    if let Some((i, v)) = x
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v.is_finite() && (0.0..=1.0).contains(&v)))
    {
        return Err(Error::invalid(format!("x_{i} = {v} not in [0, 1]")));
    }
    Ok(())
}

/// Includes each `i` independently with probability `(1 - eps)x_i`. The
/// result is never trimmed; `feasible` reports `|S| ≤ k`.
pub fn round_cardinality<F: SetFunction + ?Sized>(
    f: &F,
    x: &[f64],
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<RoundingOutcome> {
    validate_point(x, f.ground_size())?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("eps {eps} not in [0, 1)")));
    }
    let mut rng = seed::rng(seed, Stream::Rounding);
    let set: Vec<usize> = x
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            let u: f64 = rng.gen();
            (u < (1.0 - eps) * v).then_some(i)
        })
        .collect();
    Ok(RoundingOutcome {
        feasible: set.len() <= k,
        value: f.value(&set),
        set,
        seed,
    })
}

/// One categorical draw per part: element `i` with probability `x_i`,
/// nothing with probability `1 - Σ x`. Needs unit capacities.
pub fn round_simple_partition<F: SetFunction + ?Sized>(
    f: &F,
    x: &[f64],
    matroid: &PartitionMatroid,
    seed: u64,
) -> Result<RoundingOutcome> {
    validate_point(x, f.ground_size())?;
    if matroid.ground_size() != x.len() {
        return Err(Error::invalid("matroid and point disagree on the ground set"));
    }
    if !matroid.is_simple() {
        return Err(Error::invalid("simple-partition rounding needs every capacity to be 1"));
    }
    for (p, part) in matroid.parts.iter().enumerate() {
        let mass: f64 = part.iter().map(|&i| x[i]).sum();
        if mass > 1.0 + 1e-9 {
            return Err(Error::invalid(format!("part {p} has mass {mass} > 1")));
        }
    }
    let mut rng = seed::rng(seed, Stream::Rounding);
    let mut set = Vec::new();
    for part in &matroid.parts {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &i in part {
            acc += x[i];
            if u < acc {
                set.push(i);
                break;
            }
        }
    }
    set.sort_unstable();
    Ok(RoundingOutcome {
        feasible: matroid.is_independent(&set),
        value: f.value(&set),
        set,
        seed,
    })
}

/// `g(A) = f(π(A))` where `π` maps each copy to its original element.
#[derive(Debug, Clone)]
pub struct LiftedFunction<F> {
    inner: F,
    origin: Vec<usize>,
}

impl<F: SetFunction> LiftedFunction<F> {
    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    /// Original elements behind a set of copies, sorted and deduplicated.
    pub fn project(&self, set: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().map(|&c| self.origin[c]).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl<F: SetFunction> SetFunction for LiftedFunction<F> {
    fn ground_size(&self) -> usize {
        self.origin.len()
    }

    fn value(&self, set: &[usize]) -> f64 {
        self.inner.value(&self.project(set))
    }
}

/// Replaces every part with capacity `k_j > 1` (and `k_j ≤ max_lift`, when
/// given) by `k_j` unit-capacity copies of itself. Copies of part `j` are
/// numbered consecutively, copy by copy.
pub fn lift_to_simple_partition<F: SetFunction>(
    f: F,
    matroid: &PartitionMatroid,
    max_lift: Option<usize>,
) -> Result<(LiftedFunction<F>, PartitionMatroid)> {
    if f.ground_size() != matroid.ground_size() {
        return Err(Error::invalid("matroid and function disagree on the ground set"));
    }
    let mut origin = Vec::new();
    let mut parts = Vec::new();
    let mut capacities = Vec::new();
    for (part, &k) in matroid.parts.iter().zip(&matroid.capacities) {
        let lift = k > 1 && max_lift.is_none_or(|m| k <= m);
        let copies = if lift { k } else { 1 };
        for _ in 0..copies {
            let start = origin.len();
            origin.extend_from_slice(part);
            parts.push((start..origin.len()).collect());
            capacities.push(if lift { 1 } else { k });
        }
    }
    let simple = PartitionMatroid::new(origin.len(), parts, capacities)?;
    Ok((LiftedFunction { inner: f, origin }, simple))
}

/// Samples `R` with probabilities `c·x_i/Δ`, `Δ` the largest number of
/// nonzeros in a column, then lets each constraint scan `R` in increasing
/// index order and reject the members that would push its load past 1.
/// Returns the members rejected by no constraint.
pub fn round_crs_packing<F: SetFunction + ?Sized>(
    f: &F,
    x: &[f64],
    instance: &PackingInstance,
    c: f64,
    seed: u64,
) -> Result<RoundingOutcome> {
    let n = instance.n();
    validate_point(x, n)?;
    if f.ground_size() != n {
        return Err(Error::invalid("function and instance disagree on the ground set"));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!("CRS scaling {c} not in (0, 1)")));
    }
    let delta = instance.column_sparsity().max(1) as f64;
    let mut rng = seed::rng(seed, Stream::Rounding);
    let sample: Vec<usize> = (0..n)
        .filter(|&i| {
            let u: f64 = rng.gen();
            u < c * x[i] / delta
        })
        .collect();
    let set = crs_alteration(instance, &sample);
    let load = instance.max_load(&crate::multilinear::indicator(n, &set));
    Ok(RoundingOutcome {
        feasible: load <= 1.0 + 1e-12,
        value: f.value(&set),
        set,
        seed,
    })
}

/// Alteration step of [`round_crs_packing`], a deterministic function of
/// the sample.
pub fn crs_alteration(instance: &PackingInstance, sample: &[usize]) -> Vec<usize> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); instance.m()];
    for &j in sample {
        for &(i, a) in instance.column(j) {
            rows[i].push((j, a));
        }
    }
    let mut rejected = vec![false; instance.n()];
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
        let mut load = 0.0;
        for &(j, a) in row.iter() {
            if load + a <= 1.0 {
                load += a;
            } else {
                rejected[j] = true;
            }
        }
    }
    sample.iter().copied().filter(|&j| !rejected[j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_opt, CoverageSystem, ModularFunction};

    fn two_sets() -> CoverageSystem {
        CoverageSystem::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap()
    }

    #[test]
    fn cardinality_examples() {
        let f = ModularFunction::new(vec![1.0, 2.0, 3.0]).unwrap();
        let out = round_cardinality(&f, &[0.0; 3], 1, 0.1, 3).unwrap();
        assert!(out.set.is_empty() && out.feasible);
        let out = round_cardinality(&f, &[1.0, 0.0, 1.0], 2, 0.0, 3).unwrap();
        assert_eq!(out.set, vec![0, 2]);
        assert_eq!(out.value, 4.0);
        assert!(round_cardinality(&f, &[1.5, 0.0, 0.0], 1, 0.1, 0).is_err());
    }

    #[test]
    fn cardinality_mean_matches_linearity() {
        let c = vec![1.0, 2.0, 3.0, 0.5];
        let f = ModularFunction::new(c.clone()).unwrap();
        let x = [0.3, 0.8, 0.5, 1.0];
        let eps = 0.1;
        let samples: Vec<f64> = (0..2000)
            .map(|s| round_cardinality(&f, &x, 4, eps, s).unwrap().value)
            .collect();
        let (mean, se) = mean_se(&samples);
        let expect: f64 = (1.0 - eps) * c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        assert!((mean - expect).abs() <= 3.0 * se, "{mean} vs {expect} (se {se})");
    }

    fn mean_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn partition_examples() {
        let sys = two_sets();
        let one = PartitionMatroid::uniform(2, 1).unwrap();
        let out = round_simple_partition(&sys, &[1.0, 0.0], &one, 0).unwrap();
        assert_eq!(out.set, vec![0]);
        let two = PartitionMatroid::new(2, vec![vec![0], vec![1]], vec![1, 1]).unwrap();
        let out = round_simple_partition(&sys, &[0.0, 0.0], &two, 0).unwrap();
        assert!(out.set.is_empty());
        assert!(round_simple_partition(&sys, &[0.7, 0.7], &one, 0).is_err());
        let wide = PartitionMatroid::uniform(2, 2).unwrap();
        assert!(round_simple_partition(&sys, &[0.5, 0.5], &wide, 0).is_err());
    }

    #[test]
    fn partition_mean_is_the_categorical_expectation() {
        let sys = two_sets();
        let one = PartitionMatroid::uniform(2, 1).unwrap();
        let samples: Vec<f64> = (0..2000)
            .map(|s| {
                let out = round_simple_partition(&sys, &[0.5, 0.5], &one, s).unwrap();
                assert!(out.feasible && out.set.len() == 1);
                out.value
            })
            .collect();
        let (mean, _) = mean_se(&samples);
        // both outcomes are worth 2
        assert!((mean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matroid_validation() {
        assert!(PartitionMatroid::new(3, vec![vec![0, 1]], vec![1]).is_err());
        assert!(PartitionMatroid::new(2, vec![vec![0, 1], vec![1]], vec![1, 1]).is_err());
        assert!(PartitionMatroid::new(2, vec![vec![0, 1]], vec![0]).is_err());
        let m = PartitionMatroid::new(3, vec![vec![2, 0], vec![1]], vec![1, 1]).unwrap();
        assert!(m.is_independent(&[0, 1]));
        assert!(!m.is_independent(&[0, 2]));
    }

    #[test]
    fn lifting_examples() {
        let f = ModularFunction::new(vec![1.0, 2.0]).unwrap();
        let m = PartitionMatroid::new(2, vec![vec![0], vec![1]], vec![1, 1]).unwrap();
        let (g, simple) = lift_to_simple_partition(f.clone(), &m, None).unwrap();
        assert_eq!(g.ground_size(), 2);
        assert_eq!(simple, m);

        let sys = crate::oracle::generate_random_coverage(10, 4, 0.4, 6).unwrap();
        let card = PartitionMatroid::uniform(4, 2).unwrap();
        let (g, simple) = lift_to_simple_partition(sys.clone(), &card, None).unwrap();
        assert_eq!(g.ground_size(), 8);
        assert_eq!(simple.parts().len(), 2);
        let (_, direct) = brute_force_opt(&sys, |s| s.len() <= 2).unwrap();
        let (best, lifted) = brute_force_opt(&g, |s| simple.is_independent(s)).unwrap();
        assert!((direct - lifted).abs() < 1e-12);
        assert!(card.is_independent(&g.project(&best)));
    }

    #[test]
    fn lifting_respects_the_cap() {
        let f = ModularFunction::new(vec![1.0; 4]).unwrap();
        let m = PartitionMatroid::new(4, vec![vec![0, 1], vec![2, 3]], vec![2, 3]).unwrap();
        let (g, simple) = lift_to_simple_partition(f, &m, Some(2)).unwrap();
        assert_eq!(g.ground_size(), 2 * 2 + 2);
        assert_eq!(simple.capacities(), &[1, 1, 3]);
    }

    #[test]
    fn crs_examples() {
        let f = ModularFunction::new(vec![1.0; 4]).unwrap();
        let inst = PackingInstance::new(1, 4, &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
            .unwrap();
        let out = round_crs_packing(&f, &[0.0; 4], &inst, 0.5, 1).unwrap();
        assert!(out.set.is_empty());
        assert_eq!(crs_alteration(&inst, &[1, 2, 3]), vec![1]);
        assert!(round_crs_packing(&f, &[0.0; 4], &inst, 1.0, 1).is_err());
    }

    #[test]
    fn crs_is_feasible_and_replayable() {
        let entries: Vec<(usize, usize, f64)> = (0..8)
            .flat_map(|j| (0..3).map(move |i| (i, j, 0.2 + 0.1 * ((i + j) % 5) as f64)))
            .collect();
        let inst = PackingInstance::new(3, 8, &entries).unwrap();
        let f = ModularFunction::new(vec![1.0; 8]).unwrap();
        let x = [0.6; 8];
        for s in 0..200 {
            let a = round_crs_packing(&f, &x, &inst, 0.5, s).unwrap();
            let b = round_crs_packing(&f, &x, &inst, 0.5, s).unwrap();
            assert!(a.feasible);
            assert_eq!(a, b);
        }
    }
}
