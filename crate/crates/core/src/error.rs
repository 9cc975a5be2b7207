//! Error type shared by all library operations.

use thiserror::Error;

/// Errors produced by construction, fitting, solving, and certification.
#[derive(Debug, Error)]
pub enum Error {
    /// Geometric preconditions violated (radii, inclusions, resolutions).
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// A point left the closure of the domain under consideration.
    #[error("point ({re}, {im}) lies outside the domain closure")]
    OutOfDomain { re: f64, im: f64 },

    /// A non-geometric precondition violated (sizes, index ranges, flags).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A function required to be nonvanishing came too close to zero.
    #[error("function vanishes on the sampled set: min |f| = {min_abs:.3e}")]
    Vanishing { min_abs: f64 },

    /// A truncation degree was insufficient for the requested tolerance.
    #[error("degree {degree} insufficient: residual {achieved:.3e} exceeds tolerance {tol:.3e}")]
    DegreeExhausted {
        degree: usize,
        achieved: f64,
        tol: f64,
    },

    /// Fewer samples than unknowns in a fitting problem.
    #[error("not enough samples: {got} rows for {need} unknowns")]
    Undersampled { got: usize, need: usize },

    /// A linear system was numerically rank-deficient without regularization.
    #[error("ill-conditioned system: sigma_min/sigma_max = {ratio:.3e}")]
    IllConditioned { ratio: f64 },

    /// A multiplicative step failed to preserve the closed periods.
    #[error("periods not preserved: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    InexactPeriods { defect: f64, tol: f64 },

    /// A multiplier factor violated one of its required clauses.
    #[error("multiplier fails clause {clause}: {detail}")]
    FactorInvalid {
        clause: &'static str,
        detail: String,
    },

    /// No basis-point configuration reached the determinant margin.
    #[error("no basis points reached margin {margin_tol:.3e} (best {best:.3e})")]
    BasisPointsExhausted { best: f64, margin_tol: f64 },

    /// Newton iteration on spray parameters failed.
    #[error("Newton solve failed after {iterations} iterations: residual {residual:.3e} ({reason})")]
    NewtonFailed {
        iterations: usize,
        residual: f64,
        reason: &'static str,
    },

    /// The requested labyrinth does not fit the host annulus.
    #[error("labyrinth infeasible: {0}")]
    InfeasibleLabyrinth(String),

    /// The crossing-length property failed re-derivation or sampling.
    #[error("crossing-length property violated: {0}")]
    StarViolated(String),

    /// A certificate clause failed on the sampled data.
    #[error("certificate clause {clause} failed: {detail}")]
    CertificateFailed {
        clause: &'static str,
        detail: String,
    },

    /// No component pair was independent enough on the gated set.
    #[error("no independent component pair at margin {margin_tol:.3e} (best {best:.3e})")]
    PairExhausted { best: f64, margin_tol: f64 },

    /// Flux targeting did not reach the requested class.
    #[error("flux target unreachable: residual {residual:.3e} after {substeps} substeps")]
    FluxUnreachable { residual: f64, substeps: usize },

    /// Flux targets disagree with the data on rows that must stay fixed.
    #[error("flux target inconsistent on the fixed set: defect {defect:.3e}")]
    InconsistentTarget { defect: f64 },

    /// The fullness perturbation could not produce a full tuple.
    #[error("fullness perturbation failed: {0}")]
    PerturbationFailed(String),

    /// Adaptive quadrature failed to converge within the node budget.
    #[error("quadrature did not converge: estimate change {change:.3e} at {n_max} nodes")]
    QuadratureDiverged { change: f64, n_max: usize },
}

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;
