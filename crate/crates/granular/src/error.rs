//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, GranularError>;

/// Every failure mode the solver can report.
///
/// Construction errors (`InvalidDimension`, `OddResolution`, …) are raised
/// eagerly when a component is built; runtime errors (`NonFiniteState`,
/// `MissingEnergy`, …) abort an evaluation or a time march.
#[derive(Debug, Error)]
pub enum GranularError {
    /// Velocity dimension outside {2, 3}.
    #[error("invalid velocity dimension {dim}: only 2 and 3 are supported")]
    InvalidDimension { dim: usize },

    /// Modes per dimension must be even (the spectral index set is
    /// {-N/2, …, N/2-1}) and at least 8.
    #[error("invalid resolution N={n}: N must be even and at least 8")]
    OddResolution { n: usize },

    /// The periodic box is too small for the declared support radius, so
    /// periodic images of the support would interact.
    #[error(
        "aliasing bound violated: half-width L={half_width} is below the \
         required (3+sqrt(2))/2 * S = {required}"
    )]
    AliasingViolation { half_width: f64, required: f64 },

    /// Truncation ball larger than the representable relative velocities.
    #[error("truncation radius R={truncation} exceeds 2L={max}")]
    TruncationTooLarge { truncation: f64, max: f64 },

    /// A scalar parameter failed its domain constraint.
    #[error("invalid parameter {name}={value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Inverse transform of coefficients that are not Hermitian-symmetric:
    /// the imaginary residue exceeded the reporting threshold.
    #[error(
        "spectral coefficients violate Hermitian symmetry: max imaginary \
         residue {max_imag:.3e} exceeds {threshold:.3e}"
    )]
    SymmetryViolation { max_imag: f64, threshold: f64 },

    /// A field or coefficient vector was used with a grid it does not match.
    #[error("grid mismatch: {context}")]
    GridMismatch { context: &'static str },

    /// Initial condition dimensionality differs from the grid's.
    #[error("initial condition is {ic_dim}-dimensional but the grid is {grid_dim}-dimensional")]
    DimensionMismatch { ic_dim: usize, grid_dim: usize },

    /// Quadrature order outside its valid range.
    #[error("invalid quadrature order {order}: {constraint}")]
    InvalidOrder { order: usize, constraint: &'static str },

    /// Requested a spherical design size that is not shipped.
    #[error("no spherical design with {m} nodes is available (shipped sizes: 12, 32, 48)")]
    UnsupportedDesignSize { m: usize },

    /// A design file failed to parse as one unit vector per line.
    #[error("malformed design file at line {line}: {message}")]
    MalformedDesignFile { line: usize, message: String },

    /// Defensive error for the implicit restitution solve.
    #[error("restitution root not bracketed in (0, 1] for rho={rho}")]
    RootNotBracketed { rho: f64 },

    /// A precomputation would exceed the configured memory budget.
    #[error(
        "precomputation needs {required_bytes} bytes but the budget is \
         {budget_bytes} bytes; raise the budget or shrink the grid"
    )]
    MemoryBudgetExceeded {
        required_bytes: u64,
        budget_bytes: u64,
    },

    /// Energy-dependent kernel evaluated without the current kinetic energy.
    #[error("kernel has gamma != 0 but no kinetic energy was supplied")]
    MissingEnergy,

    /// A NaN or infinity appeared in the state during time integration.
    #[error("non-finite state detected at step {step}")]
    NonFiniteState { step: usize },

    /// Moments of a field whose mass is numerically zero.
    #[error("degenerate density rho={rho:.3e}: temperature is undefined")]
    DegenerateDensity { rho: f64 },

    /// The analytic temperature law is singular for e=1 with a heat bath.
    #[error("analytic temperature is undefined for e=1 with tau>0")]
    ElasticWithBath,

    /// Pairwise double sum refused on a grid too large for O(N^{2d}) work.
    #[error("grid with N={n} is too large for the pairwise sum (limit N<={limit} in {dim}D)")]
    TooLargeForPairwiseSum { n: usize, limit: usize, dim: usize },

    /// Regression asked for on too few samples.
    #[error("only {found} samples in the fit window; at least {required} required")]
    InsufficientSamples { found: usize, required: usize },

    /// Tail-fit window contains no usable grid values.
    #[error("tail fit window is empty: {context}")]
    EmptyWindow { context: &'static str },

    /// Configuration text failed structural validation (unknown key, wrong
    /// type, not valid TOML).
    #[error("config schema error: {message}")]
    SchemaError { message: String },

    /// Configuration parsed but violates a component invariant.
    #[error("config constraint violated: {message}")]
    ConstraintError { message: String },

    /// Snapshot file with bad magic, version, or payload length.
    #[error("corrupt snapshot: {message}")]
    CorruptSnapshot { message: String },

    /// Cache file with bad magic or truncated payload (a fingerprint
    /// mismatch is not an error; it just forces recomputation).
    #[error("corrupt precomputation cache: {message}")]
    CorruptCache { message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
