//! Exact one-dimensional quantile couplings, level kernels on `(0,1)`, and the
//! Markov-quantile process attached to a time-indexed family of probability
//! measures on the real line.
//!
//! Every measure is stored through a piecewise-linear quantile function and
//! every kernel on quantile levels is a finite mixture of the identity and
//! piecewise-constant densities, so composition, transposition and CDF
//! queries are carried out in closed form. A brute-force bin-matrix
//! [`oracle`] cross-checks the exact algebra on small instances.

pub mod action;
pub mod error;
pub mod grid;
pub mod invariants;
pub mod io;
pub mod kernel;
pub mod levels;
pub mod measure;
pub mod mq;
pub mod oracle;
pub mod random;

pub use error::{Error, Result};
pub use kernel::{
    fd_cdf, losup_couplings, pushforward_coupling, LevelCoupling, LevelDensity, LevelKernel,
    LosupOutcome, MarkovChainLaw, RealCoupling, Threshold,
};
pub use levels::{
    ell_of, essential, l_finite, l_interval, l_span, AtomicLevelSet, Background, Builtin, Essential,
    ExplicitFamily, LimitCertificate, MarginalFamily, Refinement, TimeFunction, TimeSpan,
};
pub use measure::{AtomInfo, Piece, RealMeasure};
pub use mq::{jump_rates, mq_coupling, JumpRates, MarkovReport, PathEnsemble, ProcessHandle, ProcessVariant};

/// Tolerances shared by the whole crate.
pub mod tol {
    /// Representation noise: grid merging, mass normalisation, canonical forms.
    pub const REPR: f64 = 1e-12;
    /// Decision threshold for `rho` and lower-orthant comparisons.
    pub const CMP: f64 = 1e-9;
    /// Default stopping tolerance of the refinement of parametric families.
    pub const REFINE: f64 = 1e-6;
}
