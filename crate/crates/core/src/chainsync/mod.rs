//! Chain storage, bootstrap verification of redacted chains, the simulated
//! redeem check, and a small block-serving protocol.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::redactor::RedactError;

mod redeem;
mod store;
mod sync;
mod verify;

pub use redeem::{legacy_sighash_all, sighash_redacted, verify_redeem_redacted, SimulationKey};
pub use store::{ChainStore, CommitStep};
pub use sync::{
    fetch_and_verify, read_frame, serve, write_frame, Frame, ServerHandle, Snapshot, MAX_FRAME_LEN,
};
pub use verify::{
    recompute_inner_digest, verify_block, verify_chain, BlockReport, Failure, FailureKind, Verdict,
    VerificationReport, Verifier, VerifyOptions,
};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("height {0} is missing from the store")]
    MissingHeight(u64),
    #[error("block at height {0} is shorter than a header")]
    ShortBlock(u64),
    #[error("bundle at height {height}: {source}")]
    MalformedBundle { height: u64, source: RedactError },
}

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("connection failed: {0}")]
    ConnectionFailed(#[source] io::Error),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("verification failed at height {height}: {failure}")]
    VerificationFailed { height: u64, failure: Failure },
    #[error(transparent)]
    Store(#[from] ChainError),
}
