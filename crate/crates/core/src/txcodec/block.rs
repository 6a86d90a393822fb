use super::{
    double_sha256, read_transaction, serialize_transaction, write_varint, CodecError,
    ParsedTransaction, Reader,
};

pub const HEADER_LEN: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub version: i32,
    pub prev_block_hash: [u8; 32],
    pub merkle_root: [u8; 32],
    pub time: u32,
    pub bits: u32,
    pub nonce: u32,
}

impl BlockHeader {
    pub fn parse(bytes: &[u8; HEADER_LEN]) -> BlockHeader {
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        BlockHeader {
            version: word(0) as i32,
            prev_block_hash: bytes[4..36].try_into().unwrap(),
            merkle_root: bytes[36..68].try_into().unwrap(),
            time: word(68),
            bits: word(72),
            nonce: word(76),
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&self.version.to_le_bytes());
        out[4..36].copy_from_slice(&self.prev_block_hash);
        out[36..68].copy_from_slice(&self.merkle_root);
        out[68..72].copy_from_slice(&self.time.to_le_bytes());
        out[72..76].copy_from_slice(&self.bits.to_le_bytes());
        out[76..80].copy_from_slice(&self.nonce.to_le_bytes());
        out
    }

    /// Double SHA-256 of the header, internal byte order.
    pub fn hash(&self) -> [u8; 32] {
        double_sha256(&self.to_bytes())
    }

    /// Expands the compact `bits` field to a 256-bit big-endian target.
    /// Returns `None` for negative or overflowing encodings.
    pub fn target(&self) -> Option<[u8; 32]> {
        let exponent = (self.bits >> 24) as usize;
        let mantissa = self.bits & 0x007f_ffff;
        if self.bits & 0x0080_0000 != 0 && mantissa != 0 {
            return None;
        }
        let mut target = [0u8; 32];
        let m = mantissa.to_be_bytes(); // m[1..4] are the three mantissa bytes
        for (i, &byte) in m[1..].iter().enumerate() {
            // byte i has weight 256^(exponent - 1 - i)
            let power = exponent as isize - 1 - i as isize;
            if power < 0 {
                continue;
            }
            if power >= 32 {
                if byte != 0 {
                    return None;
                }
                continue;
            }
            target[31 - power as usize] = byte;
        }
        Some(target)
    }

    /// Whether the header hash, read as a little-endian number, is at most the
    /// target encoded in `bits`.
    pub fn meets_target(&self) -> bool {
        let Some(target) = self.target() else {
            return false;
        };
        let mut hash = self.hash();
        hash.reverse();
        hash <= target
    }
}

/// A decoded block. `tx_offsets[i]` is where transaction `i` starts in the
/// block serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBlock {
    pub header: BlockHeader,
    pub transactions: Vec<ParsedTransaction>,
    pub tx_offsets: Vec<usize>,
}

impl ParsedBlock {
    pub fn hash(&self) -> [u8; 32] {
        self.header.hash()
    }
}

pub fn parse_block(bytes: &[u8]) -> Result<ParsedBlock, CodecError> {
    let mut r = Reader::new(bytes);
    let header = BlockHeader::parse(&r.array::<HEADER_LEN>()?);
    let count = r.varint()?;
    let mut transactions = Vec::with_capacity(count.min(4096) as usize);
    let mut tx_offsets = Vec::with_capacity(transactions.capacity());
    for index in 0..count as usize {
        tx_offsets.push(r.pos());
        let tx = read_transaction(&mut r).map_err(|e| CodecError::TxParseError {
            index,
            source: Box::new(e),
        })?;
        transactions.push(tx);
    }
    if r.remaining() > 0 {
        return Err(CodecError::TrailingBytes {
            offset: r.pos(),
            count: r.remaining(),
        });
    }
    Ok(ParsedBlock {
        header,
        transactions,
        tx_offsets,
    })
}

pub fn serialize_block(block: &ParsedBlock) -> Vec<u8> {
    let mut out = block.header.to_bytes().to_vec();
    write_varint(&mut out, block.transactions.len() as u64);
    for tx in &block.transactions {
        out.extend_from_slice(&serialize_transaction(tx));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::txcodec::{display_hex, txid};

    #[test]
    fn genesis_block_parses() {
        let raw = fixtures::genesis_block();
        let block = parse_block(&raw).unwrap();
        assert_eq!(block.transactions.len(), 1);
        assert_eq!(block.tx_offsets, vec![81]);
        assert_eq!(block.header.merkle_root, txid(&block.transactions[0].raw));
        assert_eq!(
            display_hex(&block.hash()),
            "000000000019d6689c085ae165831e934ff763ae46a2a6c172b3f1b60a8ce26f"
        );
        assert_eq!(serialize_block(&block), raw);
        assert!(block.header.meets_target());
    }

    #[test]
    fn target_expansion() {
        let header = BlockHeader {
            version: 1,
            prev_block_hash: [0; 32],
            merkle_root: [0; 32],
            time: 0,
            bits: 0x1d00ffff,
            nonce: 0,
        };
        let mut expected = [0u8; 32];
        expected[4] = 0xff;
        expected[5] = 0xff;
        assert_eq!(header.target(), Some(expected));
        let easy = BlockHeader {
            bits: 0x207fffff,
            ..header
        };
        assert_eq!(easy.target().unwrap()[0], 0x7f);
        let negative = BlockHeader {
            bits: 0x04923456,
            ..header
        };
        assert_eq!(negative.target(), None);
    }

    #[test]
    fn zero_tx_block_with_trailing_bytes() {
        let mut raw = fixtures::genesis_block()[..80].to_vec();
        raw.push(0x00);
        raw.extend_from_slice(&[1, 2, 3]);
        assert_eq!(
            parse_block(&raw),
            Err(CodecError::TrailingBytes {
                offset: 81,
                count: 3
            })
        );
    }

    #[test]
    fn truncated_header() {
        assert_eq!(
            parse_block(&[0u8; 79]),
            Err(CodecError::TruncatedInput { offset: 0 })
        );
    }

    #[test]
    fn bad_transaction_reports_index() {
        let mut raw = fixtures::genesis_block();
        raw[80] = 2; // claims a second transaction
        match parse_block(&raw) {
            Err(CodecError::TxParseError { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn three_tx_block_round_trip() {
        let txs = vec![
            fixtures::coinbase_tx(5, b"hello"),
            fixtures::op_return_tx(&[vec![0x6a, 3, 1, 2, 3]]),
            fixtures::p2pkh_spend(&[[9; 32]], 2),
        ];
        let raw = fixtures::build_block([1; 32], &txs, 7);
        let block = parse_block(&raw).unwrap();
        assert_eq!(block.transactions.len(), 3);
        assert_eq!(serialize_block(&block), raw);
        for (tx, off) in block.transactions.iter().zip(&block.tx_offsets) {
            assert_eq!(&raw[*off..*off + tx.raw.len()], &tx.raw[..]);
        }
    }
}
