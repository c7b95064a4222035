//! Spatially informed difference-in-differences estimation over regional
//! panels, causal adjustment of the targets, a GRU-based probabilistic
//! forecaster with Gaussian, Laplace and Student-t heads, and sample-based
//! proper scoring rules.
//!
//! The crate is organised as the pipeline runs:
//!
//! 1. [`spatial`] builds the row-stochastic inverse-distance matrix.
//! 2. [`causal`] fits the spatial DiD regression by 2SLS + OLS and produces
//!    adjusted targets and spatially adjusted inputs.
//! 3. [`probmodel`] trains the recurrent forecaster and draws sample paths.
//! 4. [`metrics`] scores sample forecasts (CRPS, WQL, coverage, energy).
//!
//! [`synth`] generates panels with known ground truth, [`io`] reads and
//! writes the CSV artifacts and [`pipeline`] chains the stages.

pub mod causal;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod probmodel;
pub mod spatial;
pub mod synth;

pub use causal::{AdjustedPanel, DidEstimate, Panel, TargetTransform};
pub use config::RunConfig;
pub use error::{Error, ErrorClass, Result};
pub use metrics::ScoreReport;
pub use probmodel::{Family, ForecastDistribution, ForecastModel, ModelConfig};
pub use spatial::{Region, RegionSet, SpatialMatrix};
pub use synth::GeneratorSpec;
