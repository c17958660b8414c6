use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in an input file a parse failure happened. Rows are 1-based and
/// count the header as row 1, so the first data row is row 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: PathBuf,
    pub row: usize,
    pub column: String,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} column `{}`", self.file.display(), self.row, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseReason {
    MissingColumn,
    InvalidNumber(String),
    NegativeIndex,
    NegativeUnits,
    DuplicateFabricInBlend(String),
    MalformedBlend(String),
    Malformed(String),
}

impl fmt::Display for ParseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseReason::MissingColumn => write!(f, "missing column"),
            ParseReason::InvalidNumber(raw) => write!(f, "invalid number `{raw}`"),
            ParseReason::NegativeIndex => write!(f, "negative Higg index"),
            ParseReason::NegativeUnits => write!(f, "negative units sold"),
            ParseReason::DuplicateFabricInBlend(name) => {
                write!(f, "fabric `{name}` appears twice in blend")
            }
            ParseReason::MalformedBlend(raw) => write!(f, "malformed blend `{raw}`"),
            ParseReason::Malformed(msg) => f.write_str(msg),
        }
    }
}

impl ParseReason {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseReason::MissingColumn => "MissingColumn",
            ParseReason::InvalidNumber(_) => "InvalidNumber",
            ParseReason::NegativeIndex => "NegativeIndex",
            ParseReason::NegativeUnits => "NegativeUnits",
            ParseReason::DuplicateFabricInBlend(_) => "DuplicateFabricInBlend",
            ParseReason::MalformedBlend(_) => "MalformedBlend",
            ParseReason::Malformed(_) => "Malformed",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {location}: {reason}")]
    Parse { location: Location, reason: ParseReason },

    #[error("unknown fabric `{fabric}` ({context})")]
    UnknownFabric { fabric: String, context: String },

    #[error("blend for `{context}` sums to {sum}, expected 1 (or 100 for percentages)")]
    BlendNotNormalized { context: String, sum: f64 },

    #[error("duplicate fabric `{0}` in fabric table")]
    DuplicateFabric(String),

    #[error("duplicate product id `{0}`")]
    DuplicateProduct(String),

    #[error("duplicate store id `{0}`")]
    DuplicateStore(String),

    #[error("unknown product id `{0}`")]
    UnknownProduct(String),

    #[error("unknown store id `{0}`")]
    UnknownStore(String),

    #[error("negative units sold for product `{product}` at store `{store}`")]
    NegativeUnits { product: String, store: String },

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("assortment is empty")]
    EmptyAssortment,

    #[error("sales matrix has no observations")]
    EmptyMatrix,

    #[error("invalid sales matrix: {0}")]
    InvalidMatrix(String),

    #[error("singular least-squares system for {side} {index}; use reg_lambda > 0")]
    SingularSystem { side: &'static str, index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("trend scalar must be positive, got {0}")]
    NonPositiveTrend(f64),

    #[error("store {0} has zero total demand")]
    ZeroDemandStore(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient candidates: need {needed} eligible products, have {available}")]
    InsufficientCandidates { needed: usize, available: usize },

    #[error("invalid locks: {0}")]
    InvalidLocks(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("instance too large for enumeration: C({n},{k}) exceeds {limit}")]
    InstanceTooLarge { n: usize, k: usize, limit: u64 },

    #[error("input is empty")]
    EmptyInput,

    #[error("malformed factor model: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::UnknownFabric { .. } => "UnknownFabric",
            Error::BlendNotNormalized { .. } => "BlendNotNormalized",
            Error::DuplicateFabric(_) => "DuplicateFabric",
            Error::DuplicateProduct(_) => "DuplicateProduct",
            Error::DuplicateStore(_) => "DuplicateStore",
            Error::UnknownProduct(_) => "UnknownProduct",
            Error::UnknownStore(_) => "UnknownStore",
            Error::NegativeUnits { .. } => "NegativeUnits",
            Error::InvalidCatalog(_) => "InvalidCatalog",
            Error::EmptyAssortment => "EmptyAssortment",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonPositiveTrend(_) => "NonPositiveTrend",
            Error::ZeroDemandStore(_) => "ZeroDemandStore",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InsufficientCandidates { .. } => "InsufficientCandidates",
            Error::InvalidLocks(_) => "InvalidLocks",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::InstanceTooLarge { .. } => "InstanceTooLarge",
            Error::EmptyInput => "EmptyInput",
            Error::ModelFormat(_) => "ModelFormat",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
