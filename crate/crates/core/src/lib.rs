//! Sparse-penalized deep neural network estimation for dependent data.

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod network;
pub mod penalty;
pub mod processes;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use data::Dataset;
pub use error::{Error, Result};
pub use losses::{LossSpec, PointLoss};
pub use network::{Activation, Architecture, Network, ParameterVector};
pub use penalty::{PenaltyFamily, PenaltySpec, Regime, TuningParams};
pub use trainer::{fit, BatchSize, TrainConfig, TrainTrace};
