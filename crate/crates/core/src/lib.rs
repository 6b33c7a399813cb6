//! Outage and diversity analysis for MIMO channels under selective fading.
//!
//! A block of `N` channel uses sees correlated Rayleigh fading described by a
//! Hermitian Toeplitz covariance. The crate samples such channels, evaluates
//! per-block mutual information and its Jensen upper bound, estimates outage
//! probabilities by Monte Carlo, fits diversity exponents, and checks space-time
//! codes against the rank criterion.
//!
//! The Monte Carlo core uses rayon when the `parallel` feature is enabled
//! (default) and runs sequentially otherwise. Counts are combined per fixed-size
//! chunk, so results do not depend on the worker count.

pub mod channel;
pub mod code_criterion;
pub mod error;
pub mod info;
pub mod linalg;
pub mod montecarlo;
pub mod rng;
pub mod stats;
pub mod tradeoff;

pub use channel::{
    AntennaConfig, ChannelRealization, CovarianceSpec, JensenChannel, PowerDelayProfile,
};
pub use code_criterion::Codebook;
pub use error::{Error, Result};
pub use info::SnrPoint;
pub use linalg::CMatrix;
pub use montecarlo::{Execution, OutageEstimate, OutageExperiment, OutageMode};
pub use tradeoff::TradeoffCurve;
