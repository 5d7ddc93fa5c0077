use std::path::PathBuf;

use crate::summa::BlockId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}: file contains no FASTA records")]
    EmptyInput(PathBuf),

    #[error("{path}: record '{header}' has an empty sequence")]
    EmptyRecord { path: PathBuf, header: String },

    #[error("{path}:{line}: sequence data before the first '>' header")]
    MissingHeader { path: PathBuf, line: usize },

    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid residue byte {0:#04x} for k-mer encoding")]
    InvalidResidue(u8),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("worker count {0} is not a perfect square")]
    NotPerfectSquare(usize),

    #[error("collective on rank {rank} timed out waiting for rank {from}")]
    CollectiveTimeout { rank: usize, from: usize },

    #[error("collective mismatch on rank {rank}: expected tag {expected:?}, got {got:?}")]
    CollectiveMismatch {
        rank: usize,
        expected: (u8, u64),
        got: (u8, u64),
    },

    #[error("grid deadlock: {0} worker(s) blocked with no pending messages")]
    Deadlock(usize),

    #[error("transport closed: {0}")]
    TransportClosed(String),

    #[error("wire encoding failed: {0}")]
    Wire(String),

    #[error("empty sequence passed to the aligner")]
    EmptySequence,

    #[error("block ({},{}) failed during {stage}: {source}", block.r, block.c)]
    Stage {
        block: BlockId,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("worker thread panicked")]
    WorkerPanic,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, block: BlockId, stage: &'static str) -> Self {
        Error::Stage {
            block,
            stage,
            source: Box::new(self),
        }
    }
}

impl From<bincode::Error> for Error {
    fn from(e: bincode::Error) -> Self {
        Error::Wire(e.to_string())
    }
}
