use alloc::string::String;

/// Result alias used across the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong while analysing a trial.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// Fewer than two treatment arms.
    #[error("at least 2 arms are required, found {found}")]
    TooFewArms {
        /// Number of arms supplied.
        found: usize,
    },
    /// An arm without any subject.
    #[error("empty arm: arm z={z} has no subjects")]
    EmptyArm {
        /// Treatment level of the arm.
        z: usize,
    },
    /// A probability outside `[0, 1]` or not finite.
    #[error("{what} for arm z={z} is {value}, expected a probability in [0, 1]")]
    ProbabilityOutOfRange {
        /// Which quantity was invalid.
        what: &'static str,
        /// Treatment level.
        z: usize,
        /// Offending value.
        value: f64,
    },
    /// Inputs whose lengths do not line up.
    #[error("length mismatch: {what} has length {found}, expected {expected}")]
    LengthMismatch {
        /// Which input was mis-sized.
        what: &'static str,
        /// Expected length.
        expected: usize,
        /// Actual length.
        found: usize,
    },
    /// Survivors exist in an arm but no outcome mean was given.
    #[error("arm z={z} has survivors but no survivor outcome mean")]
    MissingMean {
        /// Treatment level.
        z: usize,
    },
    /// Survival probability decreases in the treatment level.
    #[error("monotonicity violated: P(S=1|Z={z}) = {current} < P(S=1|Z={prev_z}) = {previous}", prev_z = z - 1)]
    MonotonicityViolated {
        /// Level at which survival dropped.
        z: usize,
        /// Survival at `z - 1`.
        previous: f64,
        /// Survival at `z`.
        current: f64,
    },
    /// Trimming a Bernoulli law down to a subgroup of non-positive mass.
    #[error("empty subgroup: trimming fraction {omega} must lie in (0, 1]")]
    EmptySubgroup {
        /// Requested trimming fraction.
        omega: f64,
    },
    /// A Bernoulli mean outside `[0, 1]`.
    #[error("Bernoulli mean {value} outside [0, 1]")]
    MeanOutOfRange {
        /// Offending value.
        value: f64,
    },
    /// A stratum with zero mass where a positive one is required.
    #[error("stratum {stratum} is empty")]
    EmptyStratum {
        /// Stratum index `k` of `D^k L^(m+1-k)`.
        stratum: usize,
    },
    /// A contrast or stratum/level pair that is not well defined.
    #[error(
        "ill-defined comparison: stratum {stratum} at levels {high} vs {low} (m = {max_level})"
    )]
    IllDefinedContrast {
        /// Stratum index.
        stratum: usize,
        /// Higher level.
        high: usize,
        /// Lower level.
        low: usize,
        /// Highest treatment level `m`.
        max_level: usize,
    },
    /// Dirichlet hyperparameters that are not strictly positive.
    #[error("invalid prior for arm z={z}: hyperparameters must be finite and > 0")]
    InvalidPrior {
        /// Treatment level.
        z: usize,
    },
    /// A posterior run without draws.
    #[error("at least one posterior draw is required")]
    NoDraws,
    /// Too few posterior draws satisfy monotone survival.
    #[error(
        "monotonicity retention too low: {retained} of {drawn} draws retained (floor {floor})"
    )]
    RetentionTooLow {
        /// Retained draws.
        retained: usize,
        /// Total draws.
        drawn: usize,
        /// Configured minimal retention rate.
        floor: f64,
    },
    /// The feasible polytope of a valid observed distribution came out empty.
    #[error("internal error: feasible polytope is empty for a valid observed distribution")]
    InfeasiblePolytope,
    /// A linear-programming failure.
    #[error(transparent)]
    Lp(#[from] LpError),
    /// Oracle input outside what a naive grid can handle.
    #[error("oracle: {0}")]
    Oracle(String),
}

impl Error {
    /// Whether the error is caused by the input data rather than by the
    /// library itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::InfeasiblePolytope | Error::Lp(_) | Error::Oracle(_)
        )
    }
}

/// Failures of the simplex solver or of LP construction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum LpError {
    /// A constraint or objective term referencing an undeclared variable.
    #[error("constraint {constraint:?} references undeclared variable #{var}")]
    UnknownVariable {
        /// Constraint name.
        constraint: String,
        /// Variable index.
        var: usize,
    },
    /// Only finite lower bounds are supported.
    #[error("variable {name:?} has no finite lower bound")]
    UnboundedBelow {
        /// Variable name.
        name: String,
    },
    /// A coefficient or bound that is NaN.
    #[error("non-finite coefficient in {what:?}")]
    NotANumber {
        /// Where the value appeared.
        what: String,
    },
    /// The anti-cycling guard fired.
    #[error("simplex iteration limit {limit} exceeded")]
    IterationLimit {
        /// Number of iterations allowed.
        limit: usize,
    },
}
