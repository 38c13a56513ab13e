use alloc::string::String;

use crate::tags::EntityType;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("span {start}..={end} ({kind}) is outside a sequence of length {len}")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        kind: EntityType,
        len: usize,
    },
    #[error("span {start}..={end} ({kind}) overlaps span {other_start}..={other_end}")]
    SpanOverlap {
        start: usize,
        end: usize,
        kind: EntityType,
        other_start: usize,
        other_end: usize,
    },
    #[error("span {start}..={end} crosses a clause boundary at character {boundary}")]
    SpanCrossesClause {
        start: usize,
        end: usize,
        boundary: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("id {id} is outside a vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("gold has {gold} records but prediction has {pred}")]
    RecordCountMismatch { gold: usize, pred: usize },
    #[error("lexicon entry with empty surface")]
    EmptySurface,
    #[error("lexicon surface {surface:?} is listed as both {first} and {second}")]
    ConflictingSurface {
        surface: String,
        first: String,
        second: String,
    },
    #[error("unknown entity type {0:?}")]
    UnknownEntityType(String),
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("clause {index} has {len} characters, above the cap of {cap}")]
    ClauseTooLong { index: usize, len: usize, cap: usize },
    #[error("no admissible tag path under the transition constraints")]
    Unsatisfiable,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("empty corpus")]
    EmptyCorpus,
}
