//! Simulation and verification laboratory for the one-dimensional
//! solid-on-solid interface model.

pub mod censored;
pub mod coupling;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod law;
pub mod model;
pub mod rng;
pub mod wilson;

pub use dynamics::{
    col_step, par_sweep, run_chain, ss_step, Chain, ChainKind, Direction, Parity, RecordOptions,
    Statistic, SweepOrder, TrajectorySummary, UpdateDraw,
};
pub use error::{Result, SosError};
pub use law::{
    conditional_cdf_sample, conditional_law, conditional_mean_direct, epsilon, mean_sandwich,
    ConditionalLaw, TailLength, TailSums,
};
pub use model::{energy, leq, log_gibbs_weight, Contour, HeightMode, ModelParams};
pub use rng::{stream, SimRng};
pub use wilson::{distance, gap_test_function, weights, WilsonWeights};
