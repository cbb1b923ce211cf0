//! Instance files.
//!
//! One JSON object may carry the objective and any constraint data:
//!
//! ```json
//! {"universe_size": 3, "sets": [[0, 1], [1, 2]],
//!  "weights": [3, 2, 1],
//!  "m": 1, "n": 2, "entries": [[0, 0, 0.5], [0, 1, 0.5]],
//!  "costs": [0.5, 0.5],
//!  "parts": [[0], [1]], "capacities": [1, 1]}
//! ```
//!
//! Constraint data may also live in a second file that is merged in.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knapsack::KnapsackInstance;
use crate::oracle::{CoverageSystem, ModularFunction, SetFunction};
use crate::packing::PackingInstance;
use crate::rounding::PartitionMatroid;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub universe_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<usize>>,
}

macro_rules! take_field {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $(
            if $src.$f.is_some() {
                if $dst.$f.is_some() {
                    return Err(Error::Parse(format!(
                        "field `{}` is given in both files", stringify!($f)
                    )));
                }
                $dst.$f = $src.$f;
            }
        )*
    };
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fills fields from `other`; a field present in both is an error.
    pub fn merge(mut self, other: InstanceFile) -> Result<Self> {
        take_field!(self, other, universe_size, sets, weights, m, n, entries, costs, parts, capacities);
        Ok(self)
    }

    pub fn coverage(&self) -> Result<Option<CoverageSystem>> {
        match (&self.universe_size, &self.sets) {
            (Some(r), Some(sets)) => Ok(Some(CoverageSystem::new(*r, sets.clone())?)),
            (None, None) => Ok(None),
            _ => Err(Error::Parse("coverage needs both `universe_size` and `sets`".into())),
        }
    }

    pub fn modular(&self) -> Result<Option<ModularFunction>> {
        self.weights
            .as_ref()
            .map(|w| ModularFunction::new(w.clone()))
            .transpose()
    }

    pub fn packing(&self) -> Result<Option<PackingInstance>> {
        match (&self.m, &self.n, &self.entries) {
            (Some(m), Some(n), Some(e)) => Ok(Some(PackingInstance::new(*m, *n, e)?)),
            (None, None, None) => Ok(None),
            _ => Err(Error::Parse("packing needs `m`, `n` and `entries`".into())),
        }
    }

    pub fn knapsack(&self) -> Result<Option<KnapsackInstance>> {
        self.costs
            .as_ref()
            .map(|c| KnapsackInstance::new(c.clone()))
            .transpose()
    }

    pub fn partition(&self, n: usize) -> Result<Option<PartitionMatroid>> {
        match (&self.parts, &self.capacities) {
            (Some(p), Some(c)) => Ok(Some(PartitionMatroid::new(n, p.clone(), c.clone())?)),
            (None, None) => Ok(None),
            _ => Err(Error::Parse("partition needs `parts` and `capacities`".into())),
        }
    }
}

/// The objective of an instance file.
#[derive(Debug, Clone)]
pub enum Objective {
    Coverage(CoverageSystem),
    Modular(ModularFunction),
}

impl SetFunction for Objective {
    fn ground_size(&self) -> usize {
        match self {
            Objective::Coverage(c) => c.ground_size(),
            Objective::Modular(m) => m.ground_size(),
        }
    }

    fn value(&self, set: &[usize]) -> f64 {
        match self {
            Objective::Coverage(c) => c.value(set),
            Objective::Modular(m) => m.value(set),
        }
    }

    fn marginal(&self, set: &[usize], j: usize) -> f64 {
        match self {
            Objective::Coverage(c) => c.marginal(set, j),
            Objective::Modular(m) => m.marginal(set, j),
        }
    }
}

/// Reads a point from either a bare JSON array or any object with an `"x"`
/// array, such as a solver report.
pub fn load_point(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let arr = match &value {
        serde_json::Value::Array(_) => &value,
        serde_json::Value::Object(map) => map
            .get("x")
            .ok_or_else(|| Error::Parse(format!("{}: no field `x`", path.display())))?,
        _ => return Err(Error::Parse(format!("{}: expected an array or an object", path.display()))),
    };
    serde_json::from_value(arr.clone())
        .map_err(|e| Error::Parse(format!("{}: field `x`: {e}", path.display())))
}
