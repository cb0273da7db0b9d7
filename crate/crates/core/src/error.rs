use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("missing {}: run the `{stage}` stage first", .path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("non-finite count for word `{0}`")]
    NonFiniteCount(String),

    #[error("no rating row for {} candidate word(s): {}", .0.len(), .0.join(", "))]
    MissingRatings(Vec<String>),

    #[error("rating {value} for word `{word}` is outside {{0,1,2}}")]
    RatingOutOfRange { word: String, value: i64 },

    #[error("design matrix is rank deficient: column(s) {} collinear with earlier columns", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("model unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("insufficient pre-period coverage: {reason}; largest feasible bandwidth is {max_feasible:?}")]
    InsufficientCoverage {
        reason: String,
        max_feasible: Option<u32>,
    },

    #[error("pre-treatment baseline const + expos = {0} is not positive")]
    NonPositiveBaseline(f64),

    #[error("covariance matrix is singular; estimate it with a ridge term")]
    SingularCovariance,

    #[error("control pool has {pool} candidates for {treatments} treatment users")]
    PoolTooSmall { pool: usize, treatments: usize },

    #[error("control pool exhausted after matching {matched} of {treatments} treatment users")]
    PoolExhausted { matched: usize, treatments: usize },

    #[error("no lexicon hits in scope `{0}`")]
    NoLexiconHits(String),

    #[error("undefined rank correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("unknown scope `{0}`")]
    UnknownScope(String),

    #[error("planted rate {rate} on relative day {day} ({group}) is outside [0, 1]")]
    RateOutOfRange { group: String, day: i64, rate: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
