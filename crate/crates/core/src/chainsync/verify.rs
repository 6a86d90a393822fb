use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use rayon::prelude::*;

use super::store::ChainStore;
use super::ChainError;
use crate::hashchain::{merkle_root, padded_bytes, sha_round, Chunk, ShaState, CHUNK_LEN};
use crate::redactor::{
    sort_disjoint, split_by_chunk, ChunkStatement, ProofBundle, RedactionRecord,
};
use crate::txcodec::{
    locate_allowed_regions, parse_block, sha256, txid, BlockHeader, ParsedTransaction, HEADER_LEN,
};
use crate::zkbackend::{verify_statement, ChunkLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureKind {
    MalformedBlock,
    MalformedBundle,
    BundleBlockMismatch,
    TxIndexOutOfRange,
    NotAllowedRegion,
    NonZeroRedactedByte,
    MissingChunkProof,
    UnexpectedChunkProof,
    StateLinkBroken,
    ProofRejected,
    DigestMismatch,
    MerkleRootMismatch,
    BrokenHeaderLink,
    InsufficientWork,
    SignatureRejected,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// What failed, and where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub kind: FailureKind,
    pub tx_index: Option<usize>,
    pub chunk: Option<usize>,
    pub detail: String,
}

impl Failure {
    pub fn new(kind: FailureKind, detail: impl Into<String>) -> Failure {
        Failure {
            kind,
            tx_index: None,
            chunk: None,
            detail: detail.into(),
        }
    }

    fn at_chunk(mut self, chunk: usize) -> Failure {
        self.chunk = Some(chunk);
        self
    }

    fn at_tx(mut self, tx_index: usize) -> Failure {
        self.tx_index = Some(tx_index);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(t) = self.tx_index {
            write!(f, ", tx {t}")?;
        }
        if let Some(c) = self.chunk {
            write!(f, ", chunk {c}")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// Valid, with this many redacted transactions.
    ValidWithRedactions(usize),
    Invalid(Failure),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        !matches!(self, Verdict::Invalid(_))
    }

    pub fn failure(&self) -> Option<&Failure> {
        match self {
            Verdict::Invalid(f) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => f.write_str("Valid"),
            Verdict::ValidWithRedactions(n) => write!(f, "ValidWithRedactions({n})"),
            Verdict::Invalid(fail) => write!(f, "Invalid({})", fail.kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockReport {
    pub height: u64,
    pub verdict: Verdict,
}

impl fmt::Display for BlockReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "height={} verdict={}", self.height, self.verdict)?;
        if let Verdict::Invalid(fail) = &self.verdict {
            write!(f, " reason=\"{fail}\"")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerificationReport {
    pub blocks: Vec<BlockReport>,
}

impl VerificationReport {
    pub fn all_valid(&self) -> bool {
        self.blocks.iter().all(|b| b.verdict.is_valid())
    }

    pub fn first_invalid(&self) -> Option<&BlockReport> {
        self.blocks.iter().find(|b| !b.verdict.is_valid())
    }

    pub fn verdict(&self, height: u64) -> Option<&Verdict> {
        self.blocks
            .iter()
            .find(|b| b.height == height)
            .map(|b| &b.verdict)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Recomputes the inner digest of `redacted` from unmodified chunks and the
/// proved transitions in `record`, checking the linkage of every state.
pub fn recompute_inner_digest(
    redacted: &[u8],
    record: &RedactionRecord,
) -> Result<[u8; 32], Failure> {
    let intervals = sort_disjoint(&record.intervals)
        .map_err(|e| Failure::new(FailureKind::MalformedBundle, e.to_string()))?;
    if intervals.is_empty() || intervals != record.intervals {
        return Err(Failure::new(
            FailureKind::MalformedBundle,
            "intervals empty or unsorted",
        ));
    }
    let touched = split_by_chunk(&intervals);
    if let Some(&c) = touched.keys().find(|c| !record.chunks.contains_key(c)) {
        return Err(Failure::new(
            FailureKind::MissingChunkProof,
            "no proof for a touched chunk",
        )
        .at_chunk(c));
    }
    if let Some(&c) = record.chunks.keys().find(|c| !touched.contains_key(c)) {
        return Err(Failure::new(
            FailureKind::UnexpectedChunkProof,
            "proof for an untouched chunk",
        )
        .at_chunk(c));
    }
    let padded = padded_bytes(redacted);
    if touched
        .keys()
        .next_back()
        .is_some_and(|&c| (c + 1) * CHUNK_LEN > padded.len())
    {
        return Err(Failure::new(
            FailureKind::NotAllowedRegion,
            "interval beyond the data",
        ));
    }
    let mut state = ShaState::IV;
    for (i, bytes) in padded.chunks_exact(CHUNK_LEN).enumerate() {
        let chunk = Chunk(bytes.try_into().unwrap());
        let Some(revealed) = record.chunks.get(&i) else {
            state = sha_round(&state, &chunk);
            continue;
        };
        if revealed.prev_state != state {
            return Err(
                Failure::new(FailureKind::StateLinkBroken, "revealed state does not link")
                    .at_chunk(i),
            );
        }
        let layout = ChunkLayout::new(touched[&i].clone())
            .map_err(|e| Failure::new(FailureKind::MalformedBundle, e.to_string()).at_chunk(i))?;
        let (starts, ends) = layout.to_arrays();
        let statement = ChunkStatement {
            chunk_index: i,
            prev_state: revealed.prev_state,
            redacted_chunk: chunk,
            starts,
            ends,
            next_state: revealed.next_state,
        };
        verify_statement(&statement, &revealed.proof)
            .map_err(|r| Failure::new(FailureKind::ProofRejected, r.0).at_chunk(i))?;
        state = revealed.next_state;
    }
    if state.to_bytes() != record.inner_digest {
        return Err(Failure::new(
            FailureKind::DigestMismatch,
            "chain does not end at the recorded digest",
        ));
    }
    Ok(record.inner_digest)
}

/// Checks one redacted transaction and returns its Merkle leaf.
fn verify_record(tx: &ParsedTransaction, record: &RedactionRecord) -> Result<[u8; 32], Failure> {
    let regions = locate_allowed_regions(tx)
        .map_err(|e| Failure::new(FailureKind::MalformedBlock, e.to_string()))?;
    for iv in &record.intervals {
        if !regions.iter().any(|r| r.contains(iv)) {
            return Err(Failure::new(
                FailureKind::NotAllowedRegion,
                format!("interval {iv}"),
            ));
        }
        if tx.raw[iv.start..iv.end].iter().any(|&b| b != 0) {
            return Err(Failure::new(
                FailureKind::NonZeroRedactedByte,
                format!("interval {iv}"),
            ));
        }
    }
    let inner = recompute_inner_digest(&tx.raw, record)?;
    Ok(sha256(&inner))
}

/// Checks one block against its optional bundle: redaction records,
/// recomputed leaves, and the header's Merkle root.
pub fn verify_block(block: &[u8], bundle: Option<&ProofBundle>) -> Verdict {
    match check_block(block, bundle) {
        Ok(0) => Verdict::Valid,
        Ok(n) => Verdict::ValidWithRedactions(n),
        Err(f) => Verdict::Invalid(f),
    }
}

fn check_block(block: &[u8], bundle: Option<&ProofBundle>) -> Result<usize, Failure> {
    let parsed =
        parse_block(block).map_err(|e| Failure::new(FailureKind::MalformedBlock, e.to_string()))?;
    let empty = Vec::new();
    let records = match bundle {
        Some(b) => {
            if b.block_hash != parsed.hash() {
                return Err(Failure::new(
                    FailureKind::BundleBlockMismatch,
                    "bundle names another block",
                ));
            }
            &b.records
        }
        None => &empty,
    };
    if records.windows(2).any(|w| w[0].tx_index >= w[1].tx_index) {
        return Err(Failure::new(
            FailureKind::MalformedBundle,
            "records not sorted by tx_index",
        ));
    }
    let mut leaves: Vec<[u8; 32]> = parsed.transactions.iter().map(|t| txid(&t.raw)).collect();
    for r in records {
        let tx = parsed.transactions.get(r.tx_index).ok_or_else(|| {
            Failure::new(
                FailureKind::TxIndexOutOfRange,
                "record for a missing transaction",
            )
            .at_tx(r.tx_index)
        })?;
        leaves[r.tx_index] = verify_record(tx, r).map_err(|f| f.at_tx(r.tx_index))?;
    }
    let root = merkle_root(&leaves)
        .map_err(|e| Failure::new(FailureKind::MalformedBlock, e.to_string()))?;
    if root != parsed.header.merkle_root {
        return Err(Failure::new(
            FailureKind::MerkleRootMismatch,
            "recomputed root differs from header",
        ));
    }
    Ok(records.len())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Also require each header hash to meet its own `bits` target.
    pub check_pow: bool,
}

type CacheKey = ([u8; 32], [u8; 32], Option<[u8; 32]>);

/// Block verifier with a verdict cache keyed by block hash, block content
/// digest, and bundle digest.
#[derive(Default)]
pub struct Verifier {
    options: VerifyOptions,
    cache: Mutex<HashMap<CacheKey, Verdict>>,
}

impl Verifier {
    pub fn new(options: VerifyOptions) -> Verifier {
        Verifier {
            options,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn verify_block(&self, block: &[u8], bundle: Option<&ProofBundle>) -> Verdict {
        let Some(header) = block.get(..HEADER_LEN) else {
            return Verdict::Invalid(Failure::new(FailureKind::MalformedBlock, "short header"));
        };
        let header = BlockHeader::parse(header.try_into().unwrap());
        if self.options.check_pow && !header.meets_target() {
            return Verdict::Invalid(Failure::new(
                FailureKind::InsufficientWork,
                "hash above target",
            ));
        }
        let key = (
            header.hash(),
            sha256(block),
            bundle.map(ProofBundle::digest),
        );
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return v.clone();
        }
        let verdict = verify_block(block, bundle);
        self.cache.lock().unwrap().insert(key, verdict.clone());
        verdict
    }

    /// Header linkage first, in height order, then every block on its own.
    pub fn verify_chain(&self, store: &ChainStore) -> Result<VerificationReport, ChainError> {
        let heights = store.heights();
        if let Some(missing) =
            (0..heights.len() as u64).find(|h| heights.get(*h as usize) != Some(h))
        {
            return Err(ChainError::MissingHeight(missing));
        }
        let mut items = Vec::with_capacity(heights.len());
        for &h in &heights {
            let block = store.read_block(h)?;
            let bundle = store
                .read_bundle_text(h)?
                .map(|t| ProofBundle::from_json(&t));
            items.push((h, block, bundle));
        }

        let mut link_failures = HashMap::new();
        let mut prev_hash: Option<[u8; 32]> = None;
        for (h, block, _) in &items {
            let header = block
                .get(..HEADER_LEN)
                .map(|b| BlockHeader::parse(b.try_into().unwrap()));
            match (header, prev_hash) {
                (Some(hd), Some(prev)) if hd.prev_block_hash != prev => {
                    link_failures.insert(*h, "prev_block_hash does not match the previous block");
                }
                _ => {}
            }
            prev_hash = header.map(|hd| hd.hash());
        }

        let blocks = items
            .par_iter()
            .map(|(h, block, bundle)| {
                let verdict = if let Some(why) = link_failures.get(h) {
                    Verdict::Invalid(Failure::new(FailureKind::BrokenHeaderLink, *why))
                } else {
                    match bundle {
                        Some(Err(e)) => Verdict::Invalid(Failure::new(
                            FailureKind::MalformedBundle,
                            e.to_string(),
                        )),
                        Some(Ok(b)) => self.verify_block(block, Some(b)),
                        None => self.verify_block(block, None),
                    }
                };
                BlockReport {
                    height: *h,
                    verdict,
                }
            })
            .collect();
        Ok(VerificationReport { blocks })
    }
}

/// [`Verifier::verify_chain`] with default options and a fresh cache.
pub fn verify_chain(store: &ChainStore) -> Result<VerificationReport, ChainError> {
    Verifier::default().verify_chain(store)
}
