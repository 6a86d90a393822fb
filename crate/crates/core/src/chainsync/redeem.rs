//! Spending a redacted output under a modified signature check.
//!
//! SIMULATION ONLY. The message signed here is not the one that Bitcoin
//! consensus checks, and mainnet signatures will never verify against it.
//! Keys come from [`SimulationKey`] on secp256k1.

use k256::ecdsa::signature::hazmat::{PrehashSigner, PrehashVerifier};
use k256::ecdsa::{Signature, SigningKey, VerifyingKey};

use super::verify::{recompute_inner_digest, Failure, FailureKind};
use crate::redactor::RedactionRecord;
use crate::txcodec::script::dead_branch_op_return_payloads;
use crate::txcodec::{double_sha256, serialize_transaction, sha256, ParsedTransaction};

const SIGHASH_ALL: u32 = 1;

/// `SHA256(SHA256(out_script) || SHA256(inp_script))`.
pub fn sighash_redacted(out_script: &[u8], inp_script: &[u8]) -> [u8; 32] {
    digest_from_hashes(&sha256(out_script), &sha256(inp_script))
}

fn digest_from_hashes(out_hash: &[u8; 32], inp_hash: &[u8; 32]) -> [u8; 32] {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(out_hash);
    buf[32..].copy_from_slice(inp_hash);
    sha256(&buf)
}

/// The standard pre-segwit `SIGHASH_ALL` digest of input `input_index`
/// signing against `script_code`.
pub fn legacy_sighash_all(
    tx: &ParsedTransaction,
    input_index: usize,
    script_code: &[u8],
) -> Option<[u8; 32]> {
    if input_index >= tx.inputs.len() {
        return None;
    }
    let mut copy = tx.clone();
    for (i, input) in copy.inputs.iter_mut().enumerate() {
        input.script_sig.bytes = if i == input_index {
            script_code.to_vec()
        } else {
            Vec::new()
        };
    }
    let mut bytes = serialize_transaction(&copy);
    bytes.extend_from_slice(&SIGHASH_ALL.to_le_bytes());
    Some(double_sha256(&bytes))
}

/// A secp256k1 key pair for the simulated redeem check.
pub struct SimulationKey(SigningKey);

impl SimulationKey {
    /// Derives a key from `seed`; fails only for the negligible set of seeds
    /// outside the scalar range.
    pub fn from_seed(seed: [u8; 32]) -> Option<SimulationKey> {
        SigningKey::from_bytes(&seed.into()).ok().map(SimulationKey)
    }

    /// Compressed SEC1 public key.
    pub fn public_key(&self) -> Vec<u8> {
        self.0
            .verifying_key()
            .to_encoded_point(true)
            .as_bytes()
            .to_vec()
    }

    /// DER-encoded ECDSA signature over a 32-byte digest.
    pub fn sign_digest(&self, digest: &[u8; 32]) -> Vec<u8> {
        let sig: Signature = self.0.sign_prehash(digest).expect("32-byte digest");
        sig.to_der().as_bytes().to_vec()
    }
}

/// Accepts iff the record proves `redacted_out` consistent with an original
/// script hashing to `d`, every deleted interval is payload of an `OP_RETURN`
/// push inside a branch that never executes, the deleted bytes are zero, and
/// `signature` (DER) verifies under `pubkey` (SEC1) over
/// `SHA256(d || SHA256(inp_script))`.
pub fn verify_redeem_redacted(
    redacted_out: &[u8],
    out_record: &RedactionRecord,
    inp_script: &[u8],
    signature: &[u8],
    pubkey: &[u8],
) -> Result<(), Failure> {
    let allowed = dead_branch_op_return_payloads(redacted_out)
        .map_err(|e| Failure::new(FailureKind::NotAllowedRegion, e.to_string()))?;
    for iv in &out_record.intervals {
        if !allowed.iter().any(|a| a.contains(iv)) {
            return Err(Failure::new(
                FailureKind::NotAllowedRegion,
                format!("interval {iv} is not dead-branch OP_RETURN data"),
            ));
        }
        if redacted_out[iv.start..iv.end].iter().any(|&b| b != 0) {
            return Err(Failure::new(
                FailureKind::NonZeroRedactedByte,
                format!("interval {iv}"),
            ));
        }
    }
    let d = recompute_inner_digest(redacted_out, out_record)?;
    let message = digest_from_hashes(&d, &sha256(inp_script));
    let key = VerifyingKey::from_sec1_bytes(pubkey)
        .map_err(|_| Failure::new(FailureKind::SignatureRejected, "malformed public key"))?;
    let sig = Signature::from_der(signature)
        .map_err(|_| Failure::new(FailureKind::SignatureRejected, "malformed signature"))?;
    key.verify_prehash(&message, &sig)
        .map_err(|_| Failure::new(FailureKind::SignatureRejected, "signature does not verify"))
}
