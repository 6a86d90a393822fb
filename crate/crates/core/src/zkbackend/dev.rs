//! Development backend. The "proof" carries the witness in the clear plus a
//! hash tag, and verification re-runs the circuit. It is sound but neither
//! zero-knowledge nor succinct; use it for tests and protocol plumbing only.
//!
//! Layout: `"DEV1" || nonce[16] || len u16 LE || witness || tag[32]`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::circuit::{public_inputs, ChunkCircuit};
use super::{BackendId, Proof, ProofBackend, Rejection, ZkError};
use crate::redactor::{ChunkStatement, ChunkWitness};

pub const MAGIC: &[u8; 4] = b"DEV1";
const DOMAIN: &[u8] = b"zkredact/dev-proof/v1";

pub struct DevBackend;

fn tag(
    circuit: &ChunkCircuit,
    statement: &ChunkStatement,
    nonce: &[u8],
    witness: &[u8],
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(circuit.digest());
    for v in public_inputs(statement) {
        h.update(v.to_le_bytes());
    }
    h.update(nonce);
    h.update(witness);
    h.finalize().into()
}

impl ProofBackend for DevBackend {
    fn id(&self) -> BackendId {
        BackendId::Dev
    }

    fn prove(
        &self,
        circuit: &ChunkCircuit,
        statement: &ChunkStatement,
        witness: &ChunkWitness,
        seed: [u8; 32],
    ) -> Result<Proof, ZkError> {
        let assignment = circuit.assign(statement, witness)?;
        if let Some(constraint) = circuit.constraint_system().first_unsatisfied(&assignment) {
            return Err(ZkError::UnsatisfiedWitness { constraint });
        }
        let mut nonce = [0u8; 16];
        ChaCha20Rng::from_seed(seed).fill_bytes(&mut nonce);
        let data = &witness.deleted_data;
        let mut bytes = Vec::with_capacity(4 + 16 + 2 + data.len() + 32);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&nonce);
        bytes.extend_from_slice(&(data.len() as u16).to_le_bytes());
        bytes.extend_from_slice(data);
        bytes.extend_from_slice(&tag(circuit, statement, &nonce, data));
        Ok(Proof {
            bytes,
            backend_id: BackendId::Dev,
        })
    }

    fn verify(
        &self,
        circuit: &ChunkCircuit,
        statement: &ChunkStatement,
        proof: &Proof,
    ) -> Result<(), Rejection> {
        let b = &proof.bytes;
        if b.len() < 4 + 16 + 2 + 32 || &b[..4] != MAGIC {
            return Err(Rejection::new("dev proof: bad header"));
        }
        let nonce = &b[4..20];
        let len = u16::from_le_bytes([b[20], b[21]]) as usize;
        if b.len() != 22 + len + 32 {
            return Err(Rejection::new("dev proof: length"));
        }
        let data = &b[22..22 + len];
        if b[22 + len..] != tag(circuit, statement, nonce, data) {
            return Err(Rejection::new("dev proof: tag mismatch"));
        }
        let witness = ChunkWitness {
            deleted_data: data.to_vec(),
        };
        let assignment = circuit
            .assign(statement, &witness)
            .map_err(|e| Rejection::new(format!("dev proof: {e}")))?;
        match circuit.constraint_system().first_unsatisfied(&assignment) {
            None => Ok(()),
            Some(k) => Err(Rejection::new(format!("dev proof: constraint {k} fails"))),
        }
    }
}
