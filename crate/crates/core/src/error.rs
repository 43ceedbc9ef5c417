use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty network")]
    EmptyNetwork,

    #[error("line {line}: malformed edge {content:?}, expected `user_id item_id`")]
    MalformedLine { line: usize, content: String },

    #[error("degenerate sample: every observation equals k_min")]
    DegenerateSample,

    #[error("insufficient tail: {found} observations >= k_min, need at least {required}")]
    InsufficientTail { found: usize, required: usize },

    #[error("non-normalizable degree distribution: exponent {0} <= 1 with unbounded k_max")]
    NonNormalizable(f64),

    #[error("unrealizable sequence: {0} duplicate edges left after repair budget")]
    UnrealizableSequence(usize),

    #[error("cannot select {requested} users from a network of {available}")]
    TooManyUsers { requested: usize, available: usize },

    #[error("user {0} listed more than once")]
    DuplicateUser(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
