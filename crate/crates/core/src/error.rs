use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precision p={0} outside 1..=15")]
    Precision(u32),
    #[error("raw value {raw} is off the p={p} grid")]
    OffGrid { raw: i64, p: u32 },
    #[error("division by zero")]
    DivByZero,
    #[error("attention row has every key masked")]
    AllMasked,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("position {0} is not masked")]
    NotMasked(usize),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mask-dominated planner selected unmasked cell {cell} at step {step}")]
    MaskDominated { step: usize, cell: usize },
    #[error("noise stream exhausted")]
    NoiseExhausted,
    #[error("stochastic PLT run without noise")]
    NoiseMissing,
    #[error("final cell `{0}` is neither accept nor reject")]
    Malformed(String),
    #[error("arithmetic width overflow: {0}")]
    Overflow(String),
    #[error("construction inapplicable: {0}")]
    Inapplicable(String),
    #[error("unsupported compiler pair {0}; supported: {1}")]
    Unsupported(String, String),
    #[error("{0}: {1}")]
    Context(String, Box<Error>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, what: impl Into<String>) -> Error {
        Error::Context(what.into(), Box::new(self))
    }
}
