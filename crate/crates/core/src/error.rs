use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("predicate `{name}` used with arity {found} but previously declared with arity {expected}")]
    ArityConflict {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("predicate arity {0} is unsupported (only unary and binary predicates)")]
    UnsupportedArity(usize),

    #[error("atom {0} is both a positive and a negative example")]
    ContradictoryExample(String),

    #[error("unknown constant `{0}`")]
    UnknownConstant(String),

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("fixpoint iteration exceeded the cap of {0} rounds")]
    IterationCap(usize),

    #[error("recall is undefined: the test positive set is empty")]
    EmptyTestPositives,

    #[error("precision is undefined: no substitution satisfies any rule body")]
    UnsatisfiedBodies,

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cannot pick {k} centroids from {n} embeddings")]
    TooFewEmbeddings { k: usize, n: usize },

    #[error("no embedding for constant `{0}`")]
    MissingEmbedding(String),

    #[error("no positive examples for the target predicate")]
    NoPositives,

    #[error("variable count {d} is smaller than the target arity {arity}")]
    TooFewVariables { d: usize, arity: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("constrained variable {0} is bound to an empty cluster")]
    EmptyCluster(usize),

    #[error("no semantics known for predicate `{0}`")]
    UnknownSemantics(String),

    #[error("translator failure: {0}")]
    Translator(String),

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
