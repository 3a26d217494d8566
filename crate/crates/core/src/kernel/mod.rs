//! Kernels on quantile levels, their couplings with Lebesgue measure, and
//! finite-dimensional laws of the chains they generate.

mod chain;
mod coupling;
mod density;
mod lkernel;

pub use chain::{fd_cdf, MarkovChainLaw, Threshold};
pub use coupling::{
    losup_couplings, losup_tables, pushforward_coupling, GridCdf, LevelCoupling, LosupOutcome, RealCoupling,
    Witness,
};
pub use density::LevelDensity;
pub use lkernel::{LevelKernel, TARGET_CAP};
