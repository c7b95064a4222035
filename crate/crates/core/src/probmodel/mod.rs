//! Recurrent probabilistic forecaster: a stacked GRU over the adjusted input
//! and target channels, a parametric head, teacher-forced training and
//! ancestral sampling.

pub mod checkpoint;
mod distribution;
mod forecast;
mod model;

pub use distribution::{nll, softplus, sigmoid, DistributionParams, Family, NU_OFFSET, SIGMA_FLOOR};
pub use forecast::{forecast, ForecastDistribution, Rollout, SpatialCoupling};
pub use model::{
    make_windows, train, window_sequence, ForecastModel, HiddenState, LayerLayout, ModelConfig,
    ParamLayout, TensorSpec, Window, WindowSequence, INPUT_DIM, MOMENTUM,
};
