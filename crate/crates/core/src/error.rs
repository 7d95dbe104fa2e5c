//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A feature id points outside the model's parameter space.
    #[error("feature id {id} out of range for a model with {n} features")]
    IndexOutOfRange { id: u32, n: usize },

    /// Invariant or precondition violation on domain data.
    #[error("{0}")]
    Domain(String),

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    /// Bad or missing configuration value; `field` is the `section.key` path.
    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// Every user has interacted with every item: no negative item can be sampled.
    #[error("untrainable dataset: no user has an unobserved item to sample as a negative")]
    Untrainable,

    /// A parameter or utility value became NaN/Inf during training.
    /// `epoch`/`iter` are filled in by the training loop (0 when raised
    /// outside a loop, e.g. by a single manual step).
    #[error("numeric divergence in parameter group `{group}` (epoch {epoch}, iteration {iter})")]
    NumericDivergence {
        group: &'static str,
        epoch: usize,
        iter: usize,
    },

    /// Evaluation could not be carried out (empty test set, degenerate universe, ...).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// An error that occurred while processing one cross-validation fold.
    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::InFold {
            fold,
            source: Box::new(self),
        }
    }

    /// Exit-code category used by the command line frontend.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. } => 2,
            Error::Parse { .. } | Error::Domain(_) | Error::IndexOutOfRange { .. } => 3,
            Error::Untrainable | Error::NumericDivergence { .. } => 4,
            Error::Eval(_) => 5,
            Error::InFold { source, .. } => source.exit_code(),
            Error::Io(_) => 6,
        }
    }
}
