//! Sharp partial identification of survivor average causal effects in
//! multiarm randomized trials with an ordinal treatment and a binary outcome
//! that is truncated by death.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computations over observed-data summaries:
//!
//! - [`strata`]: the count/distribution data model and identification of
//!   principal-stratum proportions under monotone survival.
//! - [`bounds`]: closed-form trimming bounds for Bernoulli mixtures and the
//!   marginal feasible regions of stratum means and contrasts.
//! - [`stepdown`]: the sharp step-down test of the global null of no effect
//!   in any basic principal stratum.
//! - [`lp`]: a dense bounded-variable simplex solver, the feasible polytope
//!   of the stratum means, the sharp lower bound on the maximal effect, and
//!   the polytope-based compatibility check of the global null.
//! - [`posterior`]: Dirichlet posterior draws of the observed law, monotone
//!   filtering and Monte Carlo aggregation into posterior probabilities and
//!   credible intervals.
//! - `oracle` (feature `oracle`): naive grid and enumeration verifiers.
//!
//! Strata are indexed by `k`, the number of leading deaths: stratum `k` is
//! `D^k L^(m+1-k)` whose members survive exactly under levels `z >= k`.

#![no_std]
#![deny(missing_docs)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
mod error;
pub mod lp;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod posterior;
pub mod stepdown;
pub mod strata;

pub use bounds::{
    coarsened_mean, marginal_contrast_interval, marginal_mu_interval, trim_bounds, CoarsenedMean,
    Coarsening, FeasibleInterval,
};
pub use error::{Error, LpError, Result};
pub use lp::{
    build_polytope, check_h0_compatibility, h0_violation, solve_delta_max_slb, solve_lp,
    DeltaMaxBound, LinearProgram, LpSolution, LpStatus,
};
pub use posterior::{
    aggregate, analyze_distribution, evaluate_draw, filter_monotone, sample_posterior,
    summarize_posterior, CredibleInterval, DrawAnalysis, DrawSampler, PosteriorConfig,
    PosteriorSummary, PriorSpec,
};
pub use stepdown::{identify_mu_chain, stage_intervals, test_global, StepDownResult};
pub use strata::{
    enumerate_contrasts, identify_strata, stratum_label, summarize, ArmCounts, Contrast,
    ObservedDistribution, StrataProfile, TrialCounts,
};

/// Numerical slack used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Slack for identities that hold exactly in real arithmetic
    /// (sums of proportions, empty strata, monotone survival).
    pub identity: f64,
    /// Slack for optimization and interval membership comparisons.
    pub optimization: f64,
}

impl Tolerances {
    /// `1e-12` for exact identities and `1e-9` for optimization.
    pub const DEFAULT: Tolerances = Tolerances {
        identity: 1e-12,
        optimization: 1e-9,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
