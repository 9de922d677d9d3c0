use thiserror::Error;

pub type Result<T> = std::result::Result<T, AlignError>;

/// Every failure the toolkit can report.
///
/// Variants carry enough context to be useful in a CLI error line; use
/// [`AlignError::code`] for the stable machine-readable name.
#[derive(Debug, Error)]
pub enum AlignError {
    #[error("sample counts differ: left has {left}, right has {right}")]
    MismatchedSampleCount { left: usize, right: usize },
    #[error("non-finite entry in {what} at row {row}, column {col}")]
    NonFiniteEntry {
        what: String,
        row: usize,
        col: usize,
    },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot normalize: row {row} has zero norm")]
    ZeroRowNormalization { row: usize },
    #[error("precomputed kernel is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NonPsdPrecomputed { min_eigenvalue: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel has zero Frobenius norm; alignment is undefined")]
    ZeroKernel,
    #[error("spectrum is empty or identically zero")]
    EmptySpectrum,
    #[error("regularized system is numerically singular: {0}")]
    SingularSystem(String),
    #[error("spectral radius {radius} of the scaled kernel product is not below 1")]
    SpectralRadiusExceeded { radius: f64 },
    #[error("covariance is singular: {0}")]
    SingularCovariance(String),
    #[error("target vector is zero")]
    ZeroTarget,
    #[error("targets must be +1/-1, found {value} at row {row}")]
    NonBinaryTargets { row: usize, value: f64 },
    #[error("total task power is zero")]
    ZeroPower,
    #[error(
        "head has rank {rank} < output dimension {output_dim}; stitch risk {stitch_risk} = R1 {r1} + residual {residual}"
    )]
    RankDeficientHead {
        rank: usize,
        output_dim: usize,
        stitch_risk: f64,
        r1: f64,
        residual: f64,
    },
    #[error("head has no certified Lipschitz constant")]
    UncertifiedLipschitz,
    #[error(
        "no certificate that the stitched head class is contained in the reference head class"
    )]
    ContainmentNotEstablished,
    #[error("overlap matrix has operator norm {norm} > 1")]
    UnrealizableOverlap { norm: f64 },
    #[error("ambient dimension {ambient} is too small, need at least {required}")]
    AmbientTooSmall { ambient: usize, required: usize },
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("{0} unexpected bytes after payload")]
    TrailingData(u64),
    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("serialization error: {0}")]
    Serialization(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl AlignError {
    /// Stable identifier used in machine-readable error output.
    pub fn code(&self) -> &'static str {
        use AlignError::*;
        match self {
            MismatchedSampleCount { .. } => "MismatchedSampleCount",
            NonFiniteEntry { .. } => "NonFiniteEntry",
            TooFewSamples { .. } => "TooFewSamples",
            DimensionMismatch(_) => "DimensionMismatch",
            ZeroRowNormalization { .. } => "ZeroRowNormalization",
            NonPsdPrecomputed { .. } => "NonPSDPrecomputed",
            NotSymmetric { .. } => "NotSymmetric",
            DegenerateData(_) => "DegenerateData",
            InvalidParameter(_) => "InvalidParameter",
            ZeroKernel => "ZeroKernel",
            EmptySpectrum => "EmptySpectrum",
            SingularSystem(_) => "SingularSystem",
            SpectralRadiusExceeded { .. } => "SpectralRadiusExceeded",
            SingularCovariance(_) => "SingularCovariance",
            ZeroTarget => "ZeroTarget",
            NonBinaryTargets { .. } => "NonBinaryTargets",
            ZeroPower => "ZeroPower",
            RankDeficientHead { .. } => "RankDeficientHead",
            UncertifiedLipschitz => "UncertifiedLipschitz",
            ContainmentNotEstablished => "ContainmentNotEstablished",
            UnrealizableOverlap { .. } => "UnrealizableOverlap",
            AmbientTooSmall { .. } => "AmbientTooSmall",
            InvalidDelta(_) => "InvalidDelta",
            BadMagic(_) => "BadMagic",
            UnsupportedVersion(_) => "UnsupportedVersion",
            UnsupportedDtype(_) => "UnsupportedDtype",
            TruncatedPayload { .. } => "TruncatedPayload",
            TrailingData(_) => "TrailingData",
            RaggedRows { .. } => "RaggedRows",
            ParseError(_) => "ParseError",
            Serialization(_) => "Serialization",
            Io(_) => "IoError",
        }
    }

    /// True for errors caused by the caller's input rather than a fault in the toolkit.
    pub fn is_validation(&self) -> bool {
        !matches!(self, AlignError::Serialization(_))
    }
}
