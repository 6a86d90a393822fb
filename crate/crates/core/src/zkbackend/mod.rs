//! Proof backends for the per-chunk preimage relation.
//!
//! Two backends share one interface. [`dev::DevBackend`] reveals the witness
//! and is only useful for protocol plumbing. [`ligero::LigeroBackend`] is a
//! transparent argument made non-interactive with a hash transcript.

pub mod circuit;
pub mod dev;
pub mod field;
pub mod ligero;
pub mod r1cs;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

pub use circuit::{compile_chunk_circuit, public_inputs, ChunkCircuit, ChunkLayout};
pub use field::Fe;
pub use r1cs::{Assignment, ConstraintSystem};

use crate::redactor::{ChunkStatement, ChunkWitness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZkError {
    #[error("bad layout: {0}")]
    BadLayout(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("witness violates constraint {constraint}")]
    UnsatisfiedWitness { constraint: usize },
    #[error("malformed constraint system: {0}")]
    MalformedConstraintSystem(String),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendId {
    Dev,
    Sound,
}

impl BackendId {
    pub fn name(self) -> &'static str {
        match self {
            BackendId::Dev => "dev",
            BackendId::Sound => "sound",
        }
    }

    /// Leading bytes of every proof from this backend.
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            BackendId::Dev => dev::MAGIC,
            BackendId::Sound => ligero::MAGIC,
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendId {
    type Err = ZkError;

    fn from_str(s: &str) -> Result<BackendId, ZkError> {
        match s {
            "dev" => Ok(BackendId::Dev),
            "sound" => Ok(BackendId::Sound),
            other => Err(ZkError::UnknownBackend(other.to_string())),
        }
    }
}

/// Opaque proof bytes tagged with the backend that produced them.
#[derive(Clone, PartialEq, Eq)]
pub struct Proof {
    pub bytes: Vec<u8>,
    pub backend_id: BackendId,
}

impl Proof {
    /// Recovers the backend from the leading magic bytes.
    pub fn from_bytes(bytes: Vec<u8>) -> Option<Proof> {
        let backend_id = [BackendId::Dev, BackendId::Sound]
            .into_iter()
            .find(|id| bytes.starts_with(id.magic()))?;
        Some(Proof { bytes, backend_id })
    }
}

impl fmt::Debug for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Proof({}, {} bytes)", self.backend_id, self.bytes.len())
    }
}

/// Why a proof was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct Rejection(pub String);

impl Rejection {
    pub(crate) fn new(reason: impl Into<String>) -> Rejection {
        Rejection(reason.into())
    }
}

pub trait ProofBackend: Send + Sync {
    fn id(&self) -> BackendId;

    /// Proves that `witness` completes `statement`. The result depends only on
    /// the inputs and `seed`.
    fn prove(
        &self,
        circuit: &ChunkCircuit,
        statement: &ChunkStatement,
        witness: &ChunkWitness,
        seed: [u8; 32],
    ) -> Result<Proof, ZkError>;

    fn verify(
        &self,
        circuit: &ChunkCircuit,
        statement: &ChunkStatement,
        proof: &Proof,
    ) -> Result<(), Rejection>;
}

static DEV: dev::DevBackend = dev::DevBackend;
static SOUND: ligero::LigeroBackend = ligero::LigeroBackend;

pub fn backend(id: BackendId) -> &'static dyn ProofBackend {
    match id {
        BackendId::Dev => &DEV,
        BackendId::Sound => &SOUND,
    }
}

const CIRCUIT_CACHE_LIMIT: usize = 128;

/// Compiled circuit for `layout`, shared through a small process-wide cache.
pub fn circuit_for(layout: &ChunkLayout) -> Arc<ChunkCircuit> {
    static CACHE: OnceLock<Mutex<HashMap<ChunkLayout, Arc<ChunkCircuit>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache.lock().unwrap().get(layout) {
        return c.clone();
    }
    let compiled = Arc::new(compile_chunk_circuit(layout));
    let mut map = cache.lock().unwrap();
    if map.len() >= CIRCUIT_CACHE_LIMIT {
        map.clear();
    }
    map.entry(layout.clone()).or_insert(compiled).clone()
}

/// Checks `proof` against `statement` with whichever backend produced it.
pub fn verify_statement(statement: &ChunkStatement, proof: &Proof) -> Result<(), Rejection> {
    let layout = statement
        .layout()
        .map_err(|e| Rejection::new(format!("statement: {e}")))?;
    let circuit = circuit_for(&layout);
    backend(proof.backend_id).verify(&circuit, statement, proof)
}
