use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}parse error at `{token}`: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        token: String,
        reason: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A variable whose two literal weights sum to zero.
    #[error("variable {0} has W(x) + W(!x) = 0")]
    ZeroWeightSum(u32),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("exact counter refuses {size} projected variables (cap {cap}); use an external counter backend")]
    CapExceeded { size: usize, cap: usize },

    #[error("counter backend failed: {message}")]
    Backend {
        message: String,
        exit_code: Option<i32>,
        output: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
