use bws_core::TupleId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid judgment: {0}")]
    Validation(String),
    #[error("annotator {annotator_id} holds no live assignment for tuple {tuple_id}")]
    NoAssignment {
        annotator_id: String,
        tuple_id: TupleId,
    },
    #[error("annotator {annotator_id} already judged tuple {tuple_id}")]
    Duplicate {
        annotator_id: String,
        tuple_id: TupleId,
    },
    #[error("annotator {0} was rejected by gold screening")]
    RejectedAnnotator(String),
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("unknown tuple {0}")]
    UnknownTuple(TupleId),
    #[error("invalid service setup: {0}")]
    Config(String),
    #[error("journal line {line}: {message}")]
    CorruptJournal { line: usize, message: String },
    #[error("journal does not replay: {0}")]
    Replay(String),
    #[error("journal io: {0}")]
    Io(#[from] std::io::Error),
}
