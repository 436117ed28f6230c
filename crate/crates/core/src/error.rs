use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },

    #[error("unknown key `{0}` in job file")]
    UnknownKey(String),

    #[error("missing required field `{0}`")]
    MissingRequiredField(String),

    #[error("field `{field}`: {message}")]
    TypeMismatch { field: String, message: String },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("assumption error: {0}")]
    Assumption(String),

    #[error("expression is not linear in i after normalization: {0}")]
    NotLinearInI(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("radicand is a perfect square in a lower extension: {0}")]
    DegenerateRadical(String),

    #[error("no antiderivative in the supported class for {0}")]
    NotIntegrable(String),

    #[error("denominator needs factorization beyond degree two in `{var}`")]
    FactorizationOutOfScope { var: String, together: String },

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),

    #[error("unbound function `{0}`")]
    UnboundFunction(String),

    #[error("cannot determine the sign of Q^2: {0}")]
    SignUndeterminable(String),

    #[error("eigenvector denominator D vanishes identically")]
    ZeroDenominator,

    #[error("degenerate eigenproblem: {0}")]
    Degenerate(String),

    #[error("script error: {0}")]
    Script(String),

    #[error("undefined quantity `{0}`")]
    UndefinedQuantity(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
