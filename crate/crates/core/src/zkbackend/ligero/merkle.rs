//! Binary Merkle tree over column hashes with batched openings.

use sha2::{Digest, Sha256};

pub type Hash = [u8; 32];

fn node(left: &Hash, right: &Hash) -> Hash {
    let mut h = Sha256::new();
    h.update([1u8]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

pub fn leaf(salt: &[u8], data: &[u8]) -> Hash {
    let mut h = Sha256::new();
    h.update([0u8]);
    h.update(salt);
    h.update(data);
    h.finalize().into()
}

pub struct MerkleTree {
    // layers[0] holds the leaves, the last layer the root
    layers: Vec<Vec<Hash>>,
}

impl MerkleTree {
    /// Builds a tree; the leaf count must be a power of two.
    pub fn new(leaves: Vec<Hash>) -> MerkleTree {
        assert!(leaves.len().is_power_of_two());
        let mut layers = vec![leaves];
        while layers.last().unwrap().len() > 1 {
            let next = layers
                .last()
                .unwrap()
                .chunks_exact(2)
                .map(|p| node(&p[0], &p[1]))
                .collect();
            layers.push(next);
        }
        MerkleTree { layers }
    }

    pub fn root(&self) -> Hash {
        self.layers.last().unwrap()[0]
    }

    /// Sibling hashes needed to authenticate the sorted, distinct `indices`,
    /// in the order [`verify_batch`] consumes them.
    pub fn open(&self, indices: &[usize]) -> Vec<Hash> {
        let mut out = Vec::new();
        let mut known: Vec<usize> = indices.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            let mut next = Vec::with_capacity(known.len());
            let mut i = 0;
            while i < known.len() {
                let idx = known[i];
                if idx.is_multiple_of(2) && known.get(i + 1) == Some(&(idx + 1)) {
                    i += 2;
                } else {
                    out.push(layer[idx ^ 1]);
                    i += 1;
                }
                next.push(idx / 2);
            }
            known = next;
        }
        out
    }
}

/// Recomputes the root from leaf hashes at sorted, distinct `indices` of a
/// tree with `num_leaves` leaves. Fails on any malformed input.
pub fn verify_batch(
    root: &Hash,
    num_leaves: usize,
    indices: &[usize],
    leaves: &[Hash],
    proof: &[Hash],
) -> bool {
    if !num_leaves.is_power_of_two()
        || indices.len() != leaves.len()
        || indices.is_empty()
        || indices.windows(2).any(|w| w[0] >= w[1])
        || indices.last().is_some_and(|&i| i >= num_leaves)
    {
        return false;
    }
    let mut level: Vec<(usize, Hash)> = indices
        .iter()
        .copied()
        .zip(leaves.iter().copied())
        .collect();
    let mut siblings = proof.iter();
    let mut width = num_leaves;
    while width > 1 {
        let mut next = Vec::with_capacity(level.len());
        let mut i = 0;
        while i < level.len() {
            let (idx, h) = level[i];
            let parent = if idx % 2 == 0 && level.get(i + 1).map(|p| p.0) == Some(idx + 1) {
                i += 2;
                node(&h, &level[i - 1].1)
            } else {
                let Some(s) = siblings.next() else {
                    return false;
                };
                i += 1;
                if idx % 2 == 0 {
                    node(&h, s)
                } else {
                    node(s, &h)
                }
            };
            next.push((idx / 2, parent));
        }
        level = next;
        width /= 2;
    }
    siblings.next().is_none() && level.len() == 1 && level[0].1 == *root
}
