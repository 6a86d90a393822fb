//! Deletion requests, zero-filling, per-chunk statements, and the proof
//! bundles that travel next to a redacted block.

mod bundle;

use std::collections::BTreeMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hashchain::{padded_bytes, sha_round, Chunk, ShaState, CHUNK_LEN};
use crate::txcodec::{
    locate_allowed_regions, write_varint, ByteInterval, CodecError, ParsedBlock, ParsedTransaction,
};
use crate::zkbackend::{circuit_for, ChunkLayout, Proof, ProofBackend, ZkError};

/// Most bytes one chunk statement can hide: a whole chunk.
pub const DEL_DATA_LENGTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RedactError {
    #[error("no intervals requested")]
    EmptyRequest,
    #[error("interval {0} is outside every allowed region")]
    NotAllowedRegion(ByteInterval),
    #[error("intervals {0} and {1} overlap")]
    OverlappingIntervals(ByteInterval, ByteInterval),
    #[error("chunk {0} would hide more than {DEL_DATA_LENGTH} bytes")]
    ChunkCapacityExceeded(usize),
    #[error("interval {0} exceeds the data")]
    OutOfBounds(ByteInterval),
    #[error("expected {expected} deleted bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("block has no transaction {0}")]
    TxIndexOutOfRange(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("proving chunk {chunk}: {source}")]
    Prover { chunk: usize, source: ZkError },
    #[error("bundles belong to different blocks")]
    BlockHashMismatch,
    #[error("transaction {tx_index} chunk {chunk_index} redacted twice")]
    SameChunkTwice { tx_index: usize, chunk_index: usize },
    #[error("records for transaction {0} disagree")]
    InconsistentRecords(usize),
    #[error("bundle: {0}")]
    Bundle(String),
}

/// Byte intervals to delete from one transaction of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedactionRequest {
    pub block_hash: [u8; 32],
    pub tx_index: usize,
    pub intervals: Vec<ByteInterval>,
}

/// Public half of one chunk instance. `starts`/`ends` are chunk-local and
/// zero-padded past the used pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkStatement {
    pub chunk_index: usize,
    pub prev_state: ShaState,
    pub redacted_chunk: Chunk,
    pub starts: [u8; 64],
    pub ends: [u8; 64],
    pub next_state: ShaState,
}

impl ChunkStatement {
    pub fn layout(&self) -> Result<ChunkLayout, ZkError> {
        ChunkLayout::from_arrays(&self.starts, &self.ends)
    }
}

/// Private half: the original bytes at the deleted positions, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkWitness {
    pub deleted_data: Vec<u8>,
}

/// The states around one modified chunk and the proof linking them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealedChunk {
    pub prev_state: ShaState,
    pub next_state: ShaState,
    pub proof: Proof,
}

/// Everything a verifier needs about one redacted transaction. Revealed
/// states and proofs are stored together per chunk index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedactionRecord {
    pub tx_index: usize,
    pub intervals: Vec<ByteInterval>,
    pub chunks: BTreeMap<usize, RevealedChunk>,
    /// Final state of the inner SHA-256 of the original transaction.
    pub inner_digest: [u8; 32],
}

impl RedactionRecord {
    pub fn modified_chunk_indices(&self) -> Vec<usize> {
        self.chunks.keys().copied().collect()
    }

    pub fn revealed_states(&self) -> BTreeMap<usize, (ShaState, ShaState)> {
        self.chunks
            .iter()
            .map(|(&i, c)| (i, (c.prev_state, c.next_state)))
            .collect()
    }

    pub fn proofs(&self) -> BTreeMap<usize, &Proof> {
        self.chunks.iter().map(|(&i, c)| (i, &c.proof)).collect()
    }
}

/// Redaction records attached to one block, sorted by transaction index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofBundle {
    pub block_hash: [u8; 32],
    pub records: Vec<RedactionRecord>,
}

impl ProofBundle {
    pub fn new(block_hash: [u8; 32]) -> ProofBundle {
        ProofBundle {
            block_hash,
            records: Vec::new(),
        }
    }

    pub fn record(&self, tx_index: usize) -> Option<&RedactionRecord> {
        self.records.iter().find(|r| r.tx_index == tx_index)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_json()).into()
    }
}

/// Sorts `intervals` and checks them against the allowed regions of `tx`.
pub fn validate_request(
    tx: &ParsedTransaction,
    intervals: &[ByteInterval],
) -> Result<Vec<ByteInterval>, RedactError> {
    let regions = locate_allowed_regions(tx)?;
    let sorted = sort_disjoint(intervals)?;
    for iv in &sorted {
        if !regions.iter().any(|r| r.contains(iv)) {
            return Err(RedactError::NotAllowedRegion(*iv));
        }
    }
    for (chunk, local) in split_by_chunk(&sorted) {
        if local.iter().map(|(s, e)| (e - s) as usize).sum::<usize>() > DEL_DATA_LENGTH {
            return Err(RedactError::ChunkCapacityExceeded(chunk));
        }
    }
    Ok(sorted)
}

pub(crate) fn sort_disjoint(intervals: &[ByteInterval]) -> Result<Vec<ByteInterval>, RedactError> {
    let mut sorted = intervals.to_vec();
    sorted.sort();
    for iv in &sorted {
        if iv.is_empty() {
            return Err(RedactError::OutOfBounds(*iv));
        }
    }
    for w in sorted.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(RedactError::OverlappingIntervals(w[0], w[1]));
        }
    }
    Ok(sorted)
}

/// Splits sorted absolute intervals into chunk-local `(start, end)` pairs,
/// cutting at chunk boundaries.
pub fn split_by_chunk(intervals: &[ByteInterval]) -> BTreeMap<usize, Vec<(u8, u8)>> {
    let mut out: BTreeMap<usize, Vec<(u8, u8)>> = BTreeMap::new();
    for iv in intervals {
        let mut pos = iv.start;
        while pos < iv.end {
            let chunk = pos / CHUNK_LEN;
            let stop = iv.end.min((chunk + 1) * CHUNK_LEN);
            let base = chunk * CHUNK_LEN;
            out.entry(chunk)
                .or_default()
                .push(((pos - base) as u8, (stop - base) as u8));
            pos = stop;
        }
    }
    out
}

pub fn zero_fill(bytes: &[u8], intervals: &[ByteInterval]) -> Result<Vec<u8>, RedactError> {
    let mut out = bytes.to_vec();
    for iv in intervals {
        let dst = out
            .get_mut(iv.start..iv.end)
            .ok_or(RedactError::OutOfBounds(*iv))?;
        dst.fill(0);
    }
    Ok(out)
}

/// Writes `deleted` back into the layout positions of `redacted`.
pub fn splice(
    redacted: &Chunk,
    layout: &ChunkLayout,
    deleted: &[u8],
) -> Result<Chunk, RedactError> {
    if deleted.len() != layout.deleted_len() {
        return Err(RedactError::LengthMismatch {
            expected: layout.deleted_len(),
            actual: deleted.len(),
        });
    }
    let mut out = *redacted;
    for (pos, &b) in layout.positions().zip(deleted) {
        out.0[pos] = b;
    }
    Ok(out)
}

/// States of the inner hash of the original message. Chunks covered by
/// `prior` are already zeroed in `message`, so their revealed states are used
/// instead of recomputation.
fn original_chain(
    message: &[u8],
    prior: Option<&RedactionRecord>,
    tx_index: usize,
) -> Result<Vec<ShaState>, RedactError> {
    let padded = padded_bytes(message);
    let mut states = vec![ShaState::IV];
    let mut state = ShaState::IV;
    for (i, chunk) in padded.chunks_exact(CHUNK_LEN).enumerate() {
        state = match prior.and_then(|r| r.chunks.get(&i)) {
            Some(c) if c.prev_state == state => c.next_state,
            Some(_) => return Err(RedactError::InconsistentRecords(tx_index)),
            None => sha_round(&state, &Chunk(chunk.try_into().unwrap())),
        };
        states.push(state);
    }
    if let Some(r) = prior {
        if state.to_bytes() != r.inner_digest || r.chunks.keys().any(|&c| c >= states.len() - 1) {
            return Err(RedactError::InconsistentRecords(tx_index));
        }
    }
    Ok(states)
}

fn chunk_seed(seed: &[u8; 32], tx_index: usize, chunk: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed);
    h.update((tx_index as u64).to_le_bytes());
    h.update((chunk as u64).to_le_bytes());
    h.finalize().into()
}

/// Zero-fills `intervals` of `message` and proves every touched chunk of its
/// inner SHA-256. `intervals` must be sorted, disjoint, and within bounds.
/// Chunks already covered by `prior` may not be touched again.
pub fn prove_redaction(
    message: &[u8],
    intervals: &[ByteInterval],
    tx_index: usize,
    prior: Option<&RedactionRecord>,
    backend: &dyn ProofBackend,
    seed: [u8; 32],
) -> Result<(Vec<u8>, RedactionRecord), RedactError> {
    if intervals.is_empty() {
        return Err(RedactError::EmptyRequest);
    }
    let intervals = sort_disjoint(intervals)?;
    let redacted = zero_fill(message, &intervals)?;
    let states = original_chain(message, prior, tx_index)?;
    let original = padded_bytes(message);
    let reduced = padded_bytes(&redacted);

    let mut jobs = Vec::new();
    for (chunk, local) in split_by_chunk(&intervals) {
        if prior.is_some_and(|r| r.chunks.contains_key(&chunk)) {
            return Err(RedactError::SameChunkTwice {
                tx_index,
                chunk_index: chunk,
            });
        }
        let layout =
            ChunkLayout::new(local).map_err(|source| RedactError::Prover { chunk, source })?;
        let range = chunk * CHUNK_LEN..(chunk + 1) * CHUNK_LEN;
        let deleted_data = layout
            .positions()
            .map(|p| original[range.start + p])
            .collect();
        let (starts, ends) = layout.to_arrays();
        let statement = ChunkStatement {
            chunk_index: chunk,
            prev_state: states[chunk],
            redacted_chunk: Chunk(reduced[range].try_into().unwrap()),
            starts,
            ends,
            next_state: states[chunk + 1],
        };
        jobs.push((layout, statement, ChunkWitness { deleted_data }));
    }

    let proved: Vec<(usize, RevealedChunk)> = jobs
        .par_iter()
        .map(|(layout, statement, witness)| {
            let chunk = statement.chunk_index;
            let circuit = circuit_for(layout);
            let proof = backend
                .prove(
                    &circuit,
                    statement,
                    witness,
                    chunk_seed(&seed, tx_index, chunk),
                )
                .map_err(|source| RedactError::Prover { chunk, source })?;
            Ok((
                chunk,
                RevealedChunk {
                    prev_state: statement.prev_state,
                    next_state: statement.next_state,
                    proof,
                },
            ))
        })
        .collect::<Result<_, RedactError>>()?;

    let record = RedactionRecord {
        tx_index,
        intervals,
        chunks: proved.into_iter().collect(),
        inner_digest: states.last().unwrap().to_bytes(),
    };
    Ok((redacted, record))
}

/// Redacts transaction `tx_index` of `block`. Returns the new block bytes
/// (header untouched) and the record for the new intervals only. The input
/// block is never modified, so a prover failure leaves nothing behind.
pub fn build_redaction(
    block: &ParsedBlock,
    tx_index: usize,
    intervals: &[ByteInterval],
    backend: &dyn ProofBackend,
    seed: [u8; 32],
) -> Result<(Vec<u8>, RedactionRecord), RedactError> {
    build_redaction_with_prior(block, tx_index, intervals, backend, None, seed)
}

/// Like [`build_redaction`] for a transaction that already carries the
/// redactions in `prior`.
pub fn build_redaction_with_prior(
    block: &ParsedBlock,
    tx_index: usize,
    intervals: &[ByteInterval],
    backend: &dyn ProofBackend,
    prior: Option<&ProofBundle>,
    seed: [u8; 32],
) -> Result<(Vec<u8>, RedactionRecord), RedactError> {
    let tx = block
        .transactions
        .get(tx_index)
        .ok_or(RedactError::TxIndexOutOfRange(tx_index))?;
    if intervals.is_empty() {
        return Err(RedactError::EmptyRequest);
    }
    if prior.is_some_and(|b| b.block_hash != block.hash()) {
        return Err(RedactError::BlockHashMismatch);
    }
    let intervals = validate_request(tx, intervals)?;
    let prior_record = prior.and_then(|b| b.record(tx_index));
    let (redacted_tx, record) =
        prove_redaction(&tx.raw, &intervals, tx_index, prior_record, backend, seed)?;

    let mut out = block.header.to_bytes().to_vec();
    write_varint(&mut out, block.transactions.len() as u64);
    for (i, t) in block.transactions.iter().enumerate() {
        out.extend_from_slice(if i == tx_index { &redacted_tx } else { &t.raw });
    }
    Ok((out, record))
}

fn merge_records(a: &RedactionRecord, b: &RedactionRecord) -> Result<RedactionRecord, RedactError> {
    if a.inner_digest != b.inner_digest {
        return Err(RedactError::InconsistentRecords(a.tx_index));
    }
    if let Some(&chunk_index) = b.chunks.keys().find(|k| a.chunks.contains_key(k)) {
        return Err(RedactError::SameChunkTwice {
            tx_index: a.tx_index,
            chunk_index,
        });
    }
    let mut intervals = a.intervals.clone();
    intervals.extend_from_slice(&b.intervals);
    let intervals =
        sort_disjoint(&intervals).map_err(|_| RedactError::InconsistentRecords(a.tx_index))?;
    let mut chunks = a.chunks.clone();
    chunks.extend(b.chunks.iter().map(|(k, v)| (*k, v.clone())));
    Ok(RedactionRecord {
        tx_index: a.tx_index,
        intervals,
        chunks,
        inner_digest: a.inner_digest,
    })
}

/// Combines two bundles for the same block. Records for the same
/// transaction are merged when their chunk sets are disjoint.
pub fn merge_bundles(
    existing: &ProofBundle,
    new: &ProofBundle,
) -> Result<ProofBundle, RedactError> {
    if existing.block_hash != new.block_hash {
        return Err(RedactError::BlockHashMismatch);
    }
    let mut by_tx: BTreeMap<usize, RedactionRecord> = existing
        .records
        .iter()
        .map(|r| (r.tx_index, r.clone()))
        .collect();
    for r in &new.records {
        let merged = match by_tx.get(&r.tx_index) {
            Some(old) => merge_records(old, r)?,
            None => r.clone(),
        };
        by_tx.insert(r.tx_index, merged);
    }
    Ok(ProofBundle {
        block_hash: existing.block_hash,
        records: by_tx.into_values().collect(),
    })
}
