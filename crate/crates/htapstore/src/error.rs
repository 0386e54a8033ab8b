//! Engine-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("table already exists: {0}")]
    DuplicateTable(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown table: {0}")]
    UnknownTable(String),
    #[error("unknown column: {0}")]
    UnknownColumn(String),
    #[error("key already exists: {0}")]
    DuplicateKey(i64),
    #[error("key not found: {0}")]
    KeyNotFound(i64),
    #[error("column is not updatable: {0}")]
    NonUpdatableColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("transaction {0} is not active")]
    TxnNotActive(u64),
    #[error("transaction {txn_id} aborted: write-write conflict on {table}#{key}")]
    SecondWriterAborted { txn_id: u64, table: String, key: i64 },
    #[error("split log incomplete for txn {txn_id}: {detail}")]
    SplitIncomplete { txn_id: u64, detail: String },
    #[error("log compression requires a quiesced engine: {0} transaction(s) active")]
    ActiveTxns(usize),
    #[error("corrupt log header: {0}")]
    CorruptLogHeader(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("recovery failed: {0}")]
    RecoveryFailed(String),
    #[error("integrity violation: {0}")]
    Integrity(String),
    #[error("corrupt {what}: {detail}")]
    Corrupt { what: &'static str, detail: String },

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("non-finite reward")]
    NonFiniteReward,
    #[error("commodity catalog is empty")]
    EmptyCatalog,
    #[error("requested {requested} recommendations but catalog holds {available}")]
    CatalogTooSmall { requested: usize, available: usize },
    #[error("unknown commodity: {0}")]
    UnknownCommodity(i64),
    #[error("invalid trigger threshold: {0}")]
    InvalidThreshold(u64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("script error at step {step}: {source}")]
    ScriptStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("script parse error (line {line}): {msg}")]
    ScriptParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Unwraps a `ScriptStep` wrapper, if any, to the underlying cause.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::ScriptStep { source, .. } => source.root_cause(),
            other => other,
        }
    }
}
