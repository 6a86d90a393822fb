//! Legacy Bitcoin wire format: transactions, blocks, and the byte regions of a
//! transaction where data may be deleted.

mod block;
pub mod script;

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use block::{parse_block, serialize_block, BlockHeader, ParsedBlock, HEADER_LEN};

/// Upper bound on any length or count prefix (Bitcoin's `MAX_SIZE`).
pub const MAX_SIZE: u64 = 0x0200_0000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input truncated at offset {offset}")]
    TruncatedInput { offset: usize },
    #[error("varint at offset {offset} exceeds the size limit")]
    VarintOverflow { offset: usize },
    #[error("non-canonical varint at offset {offset}")]
    NonCanonicalVarint { offset: usize },
    #[error("{count} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
    #[error("segregated-witness serialization at offset {offset} is not supported")]
    WitnessUnsupported { offset: usize },
    #[error("transaction {index} failed to parse: {source}")]
    TxParseError {
        index: usize,
        #[source]
        source: Box<CodecError>,
    },
    #[error("malformed script push at script offset {offset}")]
    MalformedScript { offset: usize },
}

/// A half-open byte range `[start, end)` over a serialized transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ByteInterval {
    pub start: usize,
    pub end: usize,
}

impl ByteInterval {
    /// Returns `None` unless `start < end`.
    pub fn new(start: usize, end: usize) -> Option<ByteInterval> {
        (start < end).then_some(ByteInterval { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, other: &ByteInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &ByteInterval) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn shifted(&self, by: usize) -> ByteInterval {
        ByteInterval {
            start: self.start + by,
            end: self.end + by,
        }
    }
}

impl fmt::Display for ByteInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// A script together with where it sits in the enclosing serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptSpan {
    pub bytes: Vec<u8>,
    /// Absolute offset of the first script byte (after the length varint).
    pub offset: usize,
}

impl ScriptSpan {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn interval(&self) -> Option<ByteInterval> {
        ByteInterval::new(self.offset, self.offset + self.bytes.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxIn {
    pub prev_txid: [u8; 32],
    pub prev_vout: u32,
    pub script_sig: ScriptSpan,
    pub sequence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOut {
    pub value: u64,
    pub script_pubkey: ScriptSpan,
}

/// A decoded legacy transaction. `raw` holds the bytes it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTransaction {
    pub version: i32,
    pub inputs: Vec<TxIn>,
    pub outputs: Vec<TxOut>,
    pub locktime: u32,
    pub raw: Vec<u8>,
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::TruncatedInput { offset: self.pos });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64_le(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn peek(&self, ahead: usize) -> Option<u8> {
        self.buf.get(self.pos + ahead).copied()
    }

    /// Reads a CompactSize integer, rejecting non-minimal encodings and values
    /// above [`MAX_SIZE`].
    pub(crate) fn varint(&mut self) -> Result<u64, CodecError> {
        let start = self.pos;
        let tag = self.take(1)?[0];
        let (value, min) = match tag {
            0xfd => (u16::from_le_bytes(self.array()?) as u64, 0xfd),
            0xfe => (u32::from_le_bytes(self.array()?) as u64, 0x1_0000),
            0xff => (self.u64_le()?, 0x1_0000_0000),
            v => return Ok(v as u64),
        };
        if value < min {
            return Err(CodecError::NonCanonicalVarint { offset: start });
        }
        if value > MAX_SIZE {
            return Err(CodecError::VarintOverflow { offset: start });
        }
        Ok(value)
    }

    fn script(&mut self) -> Result<ScriptSpan, CodecError> {
        let len = self.varint()? as usize;
        let offset = self.pos;
        let bytes = self.take(len)?.to_vec();
        Ok(ScriptSpan { bytes, offset })
    }
}

pub(crate) fn write_varint(out: &mut Vec<u8>, v: u64) {
    match v {
        0..=0xfc => out.push(v as u8),
        0xfd..=0xffff => {
            out.push(0xfd);
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        0x1_0000..=0xffff_ffff => {
            out.push(0xfe);
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        _ => {
            out.push(0xff);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Parses one transaction starting at the reader's position. Script offsets
/// are relative to the start of the transaction.
pub(crate) fn read_transaction(r: &mut Reader<'_>) -> Result<ParsedTransaction, CodecError> {
    let base = r.pos();
    let version = r.u32_le()? as i32;
    if r.peek(0) == Some(0x00) && r.peek(1) == Some(0x01) {
        return Err(CodecError::WitnessUnsupported { offset: r.pos() });
    }
    let n_in = r.varint()?;
    let mut inputs = Vec::with_capacity(n_in.min(1024) as usize);
    for _ in 0..n_in {
        let prev_txid = r.array()?;
        let prev_vout = r.u32_le()?;
        let mut script_sig = r.script()?;
        script_sig.offset -= base;
        let sequence = r.u32_le()?;
        inputs.push(TxIn {
            prev_txid,
            prev_vout,
            script_sig,
            sequence,
        });
    }
    let n_out = r.varint()?;
    let mut outputs = Vec::with_capacity(n_out.min(1024) as usize);
    for _ in 0..n_out {
        let value = r.u64_le()?;
        let mut script_pubkey = r.script()?;
        script_pubkey.offset -= base;
        outputs.push(TxOut {
            value,
            script_pubkey,
        });
    }
    let locktime = r.u32_le()?;
    let raw = r.buf[base..r.pos()].to_vec();
    Ok(ParsedTransaction {
        version,
        inputs,
        outputs,
        locktime,
        raw,
    })
}

/// Decodes a complete legacy transaction; every byte must be consumed.
pub fn parse_transaction(bytes: &[u8]) -> Result<ParsedTransaction, CodecError> {
    let mut r = Reader::new(bytes);
    let tx = read_transaction(&mut r)?;
    if r.remaining() > 0 {
        return Err(CodecError::TrailingBytes {
            offset: r.pos(),
            count: r.remaining(),
        });
    }
    Ok(tx)
}

/// Re-encodes a transaction from its fields (not from `raw`).
pub fn serialize_transaction(tx: &ParsedTransaction) -> Vec<u8> {
    let mut out = Vec::with_capacity(tx.raw.len());
    out.extend_from_slice(&tx.version.to_le_bytes());
    write_varint(&mut out, tx.inputs.len() as u64);
    for input in &tx.inputs {
        out.extend_from_slice(&input.prev_txid);
        out.extend_from_slice(&input.prev_vout.to_le_bytes());
        write_varint(&mut out, input.script_sig.len() as u64);
        out.extend_from_slice(&input.script_sig.bytes);
        out.extend_from_slice(&input.sequence.to_le_bytes());
    }
    write_varint(&mut out, tx.outputs.len() as u64);
    for output in &tx.outputs {
        out.extend_from_slice(&output.value.to_le_bytes());
        write_varint(&mut out, output.script_pubkey.len() as u64);
        out.extend_from_slice(&output.script_pubkey.bytes);
    }
    out.extend_from_slice(&tx.locktime.to_le_bytes());
    out
}

/// True iff the transaction has exactly one input spending the null outpoint.
pub fn is_coinbase(tx: &ParsedTransaction) -> bool {
    match tx.inputs.as_slice() {
        [only] => only.prev_txid == [0u8; 32] && only.prev_vout == u32::MAX,
        _ => false,
    }
}

/// Byte ranges of `tx` where deletion is permitted: the whole scriptSig of a
/// coinbase input, and every data payload pushed right after an `OP_RETURN`
/// in an output script. Sorted and disjoint.
pub fn locate_allowed_regions(tx: &ParsedTransaction) -> Result<Vec<ByteInterval>, CodecError> {
    let mut regions = Vec::new();
    if is_coinbase(tx) {
        regions.extend(tx.inputs[0].script_sig.interval());
    }
    for output in &tx.outputs {
        let spk = &output.script_pubkey;
        for payload in script::op_return_payloads(&spk.bytes)? {
            regions.push(payload.shifted(spk.offset));
        }
    }
    regions.sort();
    Ok(regions)
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn double_sha256(bytes: &[u8]) -> [u8; 32] {
    sha256(&sha256(bytes))
}

/// Transaction identifier in internal byte order.
pub fn txid(bytes: &[u8]) -> [u8; 32] {
    double_sha256(bytes)
}

/// The conventional byte-reversed hex rendering of a hash.
pub fn display_hex(hash: &[u8; 32]) -> String {
    let mut rev = *hash;
    rev.reverse();
    hex::encode(rev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn genesis_coinbase_fields() {
        let tx = parse_transaction(&fixtures::genesis_coinbase()).unwrap();
        assert_eq!(tx.raw.len(), 204);
        assert_eq!(tx.inputs.len(), 1);
        assert_eq!(tx.outputs.len(), 1);
        assert_eq!(tx.inputs[0].prev_txid, [0u8; 32]);
        assert_eq!(tx.inputs[0].prev_vout, 0xffff_ffff);
        assert_eq!(tx.outputs[0].value, 50 * 100_000_000);
        assert!(is_coinbase(&tx));
        let text = b"The Times 03/Jan/2009 Chancellor on brink of second bailout for banks";
        let sig = &tx.inputs[0].script_sig;
        assert_eq!(sig.offset, 42);
        assert_eq!(&sig.bytes[8..], &text[..]);
        assert_eq!(&tx.raw[sig.offset..sig.offset + sig.len()], &sig.bytes[..]);
    }

    #[test]
    fn genesis_txid() {
        let id = txid(&fixtures::genesis_coinbase());
        assert_eq!(
            display_hex(&id),
            "4a5e1e4baab89f3a32518a88c31bc87f618f76673e2cc77ab2127b7afdeda33b"
        );
    }

    #[test]
    fn empty_input_truncated_at_zero() {
        assert_eq!(
            parse_transaction(&[]),
            Err(CodecError::TruncatedInput { offset: 0 })
        );
    }

    #[test]
    fn empty_txid_is_double_sha() {
        assert_eq!(
            hex::encode(txid(&[])),
            "5df6e0e2761359d30a8275058e299fcc0381534545f55cf43e41983f5d4c9456"
        );
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut raw = fixtures::genesis_coinbase();
        raw.push(0);
        assert_eq!(
            parse_transaction(&raw),
            Err(CodecError::TrailingBytes {
                offset: 204,
                count: 1
            })
        );
    }

    #[test]
    fn witness_marker_rejected() {
        let mut raw = vec![2, 0, 0, 0, 0x00, 0x01];
        raw.extend_from_slice(&[0; 60]);
        assert_eq!(
            parse_transaction(&raw),
            Err(CodecError::WitnessUnsupported { offset: 4 })
        );
    }

    #[test]
    fn varint_limits() {
        let mut r = Reader::new(&[0xfd, 0x10, 0x00]);
        assert_eq!(
            r.varint(),
            Err(CodecError::NonCanonicalVarint { offset: 0 })
        );
        let mut r = Reader::new(&[0xfe, 0x00, 0x00, 0x00, 0x10]);
        assert_eq!(r.varint(), Err(CodecError::VarintOverflow { offset: 0 }));
        let mut r = Reader::new(&[0xfd, 0x00]);
        assert_eq!(r.varint(), Err(CodecError::TruncatedInput { offset: 1 }));
        for v in [0u64, 0xfc, 0xfd, 0xffff, 0x1_0000, MAX_SIZE] {
            let mut buf = Vec::new();
            write_varint(&mut buf, v);
            assert_eq!(Reader::new(&buf).varint(), Ok(v));
        }
    }

    #[test]
    fn zero_outputs_serialize_count_byte() {
        let tx = ParsedTransaction {
            version: 1,
            inputs: vec![TxIn {
                prev_txid: [7; 32],
                prev_vout: 0,
                script_sig: ScriptSpan {
                    bytes: vec![],
                    offset: 0,
                },
                sequence: u32::MAX,
            }],
            outputs: vec![],
            locktime: 0,
            raw: vec![],
        };
        let bytes = serialize_transaction(&tx);
        // version(4) + count(1) + outpoint(36) + script len(1) + sequence(4)
        assert_eq!(bytes[46], 0x00);
        assert_eq!(bytes.len(), 51);
        assert_eq!(parse_transaction(&bytes).unwrap().outputs.len(), 0);
    }

    #[test]
    fn zeroed_script_sig_differs_only_there() {
        let mut tx = parse_transaction(&fixtures::genesis_coinbase()).unwrap();
        let span = tx.inputs[0].script_sig.clone();
        tx.inputs[0].script_sig.bytes = vec![0; span.len()];
        let out = serialize_transaction(&tx);
        assert_eq!(out.len(), tx.raw.len());
        for (i, (a, b)) in out.iter().zip(&tx.raw).enumerate() {
            let inside = i >= span.offset && i < span.offset + span.len();
            if !inside {
                assert_eq!(a, b, "offset {i}");
            } else {
                assert_eq!(*a, 0);
            }
        }
    }

    #[test]
    fn coinbase_rules() {
        let spend = parse_transaction(&fixtures::p2pkh_spend(&[[3; 32]], 1)).unwrap();
        assert!(!is_coinbase(&spend));
        let two = parse_transaction(&fixtures::p2pkh_spend(&[[0; 32], [3; 32]], 1)).unwrap();
        assert!(!is_coinbase(&two));
        let mut null_first = two.clone();
        null_first.inputs[0].prev_vout = u32::MAX;
        assert!(!is_coinbase(&null_first));
    }

    #[test]
    fn genesis_region_is_whole_script_sig() {
        let tx = parse_transaction(&fixtures::genesis_coinbase()).unwrap();
        let regions = locate_allowed_regions(&tx).unwrap();
        assert_eq!(
            regions,
            vec![ByteInterval {
                start: 42,
                end: 42 + 77
            }]
        );
        assert!(regions[0].contains(&fixtures::chancellor_interval()));
    }

    #[test]
    fn op_return_payload_region() {
        let raw = fixtures::op_return_tx(&[[0x6a, 0x04, 0xde, 0xad, 0xbe, 0xef].to_vec()]);
        let tx = parse_transaction(&raw).unwrap();
        let regions = locate_allowed_regions(&tx).unwrap();
        let spk = &tx.outputs[0].script_pubkey;
        assert_eq!(
            regions,
            vec![ByteInterval::new(spk.offset + 2, spk.offset + 6).unwrap()]
        );
        assert_eq!(
            &raw[regions[0].start..regions[0].end],
            &[0xde, 0xad, 0xbe, 0xef]
        );
    }

    #[test]
    fn max_standard_payload() {
        let mut script = vec![0x6a, 0x4c, 83];
        script.extend_from_slice(&[0x55; 83]);
        let tx = parse_transaction(&fixtures::op_return_tx(&[script])).unwrap();
        let regions = locate_allowed_regions(&tx).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].len(), 83);
    }

    #[test]
    fn no_regions_on_plain_spend() {
        let tx = parse_transaction(&fixtures::p2pkh_spend(&[[3; 32]], 2)).unwrap();
        assert!(locate_allowed_regions(&tx).unwrap().is_empty());
    }

    #[test]
    fn malformed_op_return_push() {
        let tx = parse_transaction(&fixtures::op_return_tx(&[vec![0x6a, 0x05, 1, 2]])).unwrap();
        assert!(matches!(
            locate_allowed_regions(&tx),
            Err(CodecError::MalformedScript { .. })
        ));
    }
}
