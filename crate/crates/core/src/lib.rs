//! Low-adaptivity maximization of monotone submodular functions.
//!
//! The solvers work on the multilinear extension `F(x) = E[f(Q)]` and issue
//! their oracle queries in batches. Every batch is one adaptive round, and
//! both rounds and individual oracle calls are counted.

pub mod cardinality;
pub mod error;
pub mod harness;
pub mod knapsack;
pub mod multilinear;
pub mod oracle;
pub mod packing;
pub mod rounding;
pub mod seed;
pub mod step;
pub mod trace;

pub use error::{Error, Result};
pub use multilinear::{
    CoverageExtension, EnumeratedExtension, EstimatorConfig, ModularExtension, MultilinearOracle,
    SampledExtension,
};
pub use oracle::{CoverageSystem, GroundSet, ModularFunction, Oracle, SetFunction};
pub use trace::{ExitReason, FractionalSolution, GreedyTrace, IterationRecord, StepBound};
