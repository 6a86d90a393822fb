//! SHA-256 taken apart: padding, 64-byte chunks, the compression function,
//! and the chain of intermediate states. Also Bitcoin Merkle roots.

use std::fmt;

use thiserror::Error;

use crate::txcodec::double_sha256;

pub const CHUNK_LEN: usize = 64;

pub(crate) const ROUND_CONSTANTS: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

const IV: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

/// The eight-word SHA-256 chaining state.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShaState(pub [u32; 8]);

impl ShaState {
    pub const IV: ShaState = ShaState(IV);

    /// Big-endian serialization; for the final state this is the digest.
    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (dst, w) in out.chunks_exact_mut(4).zip(self.0) {
            dst.copy_from_slice(&w.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> ShaState {
        let mut words = [0u32; 8];
        for (w, src) in words.iter_mut().zip(bytes.chunks_exact(4)) {
            *w = u32::from_be_bytes(src.try_into().unwrap());
        }
        ShaState(words)
    }
}

impl fmt::Debug for ShaState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShaState({})", hex::encode(self.to_bytes()))
    }
}

/// One 64-byte block of padded SHA-256 input.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chunk(pub [u8; CHUNK_LEN]);

impl Chunk {
    pub fn from_slice(bytes: &[u8]) -> Option<Chunk> {
        Some(Chunk(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Chunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chunk({})", hex::encode(self.0))
    }
}

/// Applies FIPS 180-4 padding and splits into chunks.
pub fn pad(message: &[u8]) -> Vec<Chunk> {
    padded_bytes(message)
        .chunks_exact(CHUNK_LEN)
        .map(|c| Chunk(c.try_into().unwrap()))
        .collect()
}

/// The padded message as one contiguous buffer.
pub fn padded_bytes(message: &[u8]) -> Vec<u8> {
    let bit_len = (message.len() as u64).wrapping_mul(8);
    let mut out = Vec::with_capacity(padded_len(message.len()));
    out.extend_from_slice(message);
    out.push(0x80);
    while out.len() % CHUNK_LEN != 56 {
        out.push(0);
    }
    out.extend_from_slice(&bit_len.to_be_bytes());
    out
}

/// Length in bytes after padding a message of `len` bytes.
pub fn padded_len(len: usize) -> usize {
    (len + 9).div_ceil(CHUNK_LEN) * CHUNK_LEN
}

/// Number of chunks after padding a message of `len` bytes.
pub fn chunk_count(len: usize) -> usize {
    padded_len(len) / CHUNK_LEN
}

#[inline]
fn big_sigma0(x: u32) -> u32 {
    x.rotate_right(2) ^ x.rotate_right(13) ^ x.rotate_right(22)
}

#[inline]
fn big_sigma1(x: u32) -> u32 {
    x.rotate_right(6) ^ x.rotate_right(11) ^ x.rotate_right(25)
}

#[inline]
fn small_sigma0(x: u32) -> u32 {
    x.rotate_right(7) ^ x.rotate_right(18) ^ (x >> 3)
}

#[inline]
fn small_sigma1(x: u32) -> u32 {
    x.rotate_right(17) ^ x.rotate_right(19) ^ (x >> 10)
}

/// The message schedule for one chunk.
pub(crate) fn schedule(chunk: &Chunk) -> [u32; 64] {
    let mut w = [0u32; 64];
    for (t, word) in chunk.0.chunks_exact(4).enumerate() {
        w[t] = u32::from_be_bytes(word.try_into().unwrap());
    }
    for t in 16..64 {
        w[t] = small_sigma1(w[t - 2])
            .wrapping_add(w[t - 7])
            .wrapping_add(small_sigma0(w[t - 15]))
            .wrapping_add(w[t - 16]);
    }
    w
}

/// The SHA-256 compression function: one chunk folded into the state.
pub fn sha_round(state: &ShaState, chunk: &Chunk) -> ShaState {
    let w = schedule(chunk);
    let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut h] = state.0;
    for t in 0..64 {
        let ch = (e & f) ^ (!e & g);
        let maj = (a & b) ^ (a & c) ^ (b & c);
        let t1 = h
            .wrapping_add(big_sigma1(e))
            .wrapping_add(ch)
            .wrapping_add(ROUND_CONSTANTS[t])
            .wrapping_add(w[t]);
        let t2 = big_sigma0(a).wrapping_add(maj);
        h = g;
        g = f;
        f = e;
        e = d.wrapping_add(t1);
        d = c;
        c = b;
        b = a;
        a = t1.wrapping_add(t2);
    }
    let mut out = state.0;
    for (o, v) in out.iter_mut().zip([a, b, c, d, e, f, g, h]) {
        *o = o.wrapping_add(v);
    }
    ShaState(out)
}

/// States `h_0 = IV, h_1, ..., h_m` of hashing a message chunk by chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestChain {
    pub states: Vec<ShaState>,
}

impl DigestChain {
    pub fn chunk_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn digest(&self) -> [u8; 32] {
        self.states.last().expect("chain holds the IV").to_bytes()
    }
}

pub fn digest_chain(message: &[u8]) -> DigestChain {
    let mut states = Vec::with_capacity(chunk_count(message.len()) + 1);
    let mut state = ShaState::IV;
    states.push(state);
    for chunk in pad(message) {
        state = sha_round(&state, &chunk);
        states.push(state);
    }
    DigestChain { states }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("merkle root of an empty leaf set")]
    EmptyLeafSet,
}

/// Bitcoin's Merkle root: pairwise double SHA-256, duplicating the last node
/// of odd-sized levels.
pub fn merkle_root(leaves: &[[u8; 32]]) -> Result<[u8; 32], MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyLeafSet);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        level = level
            .chunks_exact(2)
            .map(|pair| {
                let mut buf = [0u8; 64];
                buf[..32].copy_from_slice(&pair[0]);
                buf[32..].copy_from_slice(&pair[1]);
                double_sha256(&buf)
            })
            .collect();
    }
    Ok(level[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::txcodec::{parse_block, sha256, txid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn padding_chunk_counts() {
        assert_eq!(pad(&[0u8; 55]).len(), 1);
        assert_eq!(pad(&[0u8; 56]).len(), 2);
        assert_eq!(pad(&[0u8; 204]).len(), 4);
        assert_eq!(pad(&[]).len(), 1);
        let p = padded_bytes(b"abc");
        assert_eq!(p.len(), 64);
        assert_eq!(p[3], 0x80);
        assert_eq!(&p[56..], &24u64.to_be_bytes());
    }

    #[test]
    fn chancellor_touches_two_chunks() {
        let iv = fixtures::chancellor_interval();
        let first = iv.start / CHUNK_LEN;
        let last = (iv.end - 1) / CHUNK_LEN;
        assert_eq!(last - first + 1, 2);
    }

    #[test]
    fn abc_and_empty() {
        let chain = digest_chain(b"abc");
        assert_eq!(
            hex::encode(chain.digest()),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let empty = sha_round(&ShaState::IV, &pad(b"")[0]);
        assert_eq!(
            hex::encode(empty.to_bytes()),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn chain_length_and_linkage() {
        let msg = vec![0xabu8; 150];
        let chain = digest_chain(&msg);
        assert_eq!(chain.states.len(), 4);
        for (i, chunk) in pad(&msg).iter().enumerate() {
            assert_eq!(chain.states[i + 1], sha_round(&chain.states[i], chunk));
        }
    }

    #[test]
    fn shared_prefix_shares_states() {
        let mut a = vec![1u8; 100];
        let mut b = a.clone();
        a[90] = 2;
        b[95] = 3;
        assert_eq!(digest_chain(&a).states[1], digest_chain(&b).states[1]);
        assert_ne!(digest_chain(&a).states[2], digest_chain(&b).states[2]);
    }

    #[test]
    fn tx_digest_matches_reference() {
        let tx = fixtures::genesis_coinbase();
        assert_eq!(digest_chain(&tx).digest(), sha256(&tx));
    }

    #[test]
    fn state_bytes_round_trip() {
        let s = digest_chain(b"xyz").states[1];
        assert_eq!(ShaState::from_bytes(&s.to_bytes()), s);
    }

    #[test]
    fn merkle_single_and_genesis() {
        let leaf = [5u8; 32];
        assert_eq!(merkle_root(&[leaf]), Ok(leaf));
        assert_eq!(merkle_root(&[]), Err(MerkleError::EmptyLeafSet));
        let block = parse_block(&fixtures::genesis_block()).unwrap();
        let leaves = [txid(&block.transactions[0].raw)];
        assert_eq!(merkle_root(&leaves).unwrap(), block.header.merkle_root);
    }

    #[test]
    fn merkle_odd_duplicates_last() {
        let l: Vec<[u8; 32]> = (0..3u8).map(|i| [i; 32]).collect();
        let node = |a: &[u8; 32], b: &[u8; 32]| {
            let mut buf = a.to_vec();
            buf.extend_from_slice(b);
            double_sha256(&buf)
        };
        let expected = node(&node(&l[0], &l[1]), &node(&l[2], &l[2]));
        assert_eq!(merkle_root(&l).unwrap(), expected);
        let four = [l[0], l[1], l[2], l[2]];
        assert_eq!(merkle_root(&four).unwrap(), expected);
    }

    #[test]
    fn merkle_sensitive_to_every_leaf_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..9);
            let leaves: Vec<[u8; 32]> = (0..n).map(|_| rng.gen()).collect();
            let root = merkle_root(&leaves).unwrap();
            let mut tampered = leaves.clone();
            let (i, byte, bit) = (
                rng.gen_range(0..n),
                rng.gen_range(0..32),
                rng.gen_range(0..8),
            );
            tampered[i][byte] ^= 1 << bit;
            assert_ne!(merkle_root(&tampered).unwrap(), root);
        }
    }

    proptest! {
        #[test]
        fn digest_chain_matches_sha2(msg in proptest::collection::vec(any::<u8>(), 0..600)) {
            let chain = digest_chain(&msg);
            prop_assert_eq!(chain.states.len(), chunk_count(msg.len()) + 1);
            prop_assert_eq!(chain.digest(), sha256(&msg));
        }
    }
}
