//! Fiat-Shamir transcript: a running SHA-256 chain, with challenges expanded
//! through ChaCha20.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::zkbackend::field::Fe;

pub struct Transcript {
    state: [u8; 32],
}

impl Transcript {
    pub fn new(domain: &[u8]) -> Transcript {
        let mut t = Transcript { state: [0; 32] };
        t.absorb(b"domain", domain);
        t
    }

    pub fn absorb(&mut self, label: &[u8], data: &[u8]) {
        let mut h = Sha256::new();
        h.update(self.state);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label);
        h.update((data.len() as u64).to_le_bytes());
        h.update(data);
        self.state = h.finalize().into();
    }

    pub fn absorb_field(&mut self, label: &[u8], values: &[Fe]) {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.absorb(label, &bytes);
    }

    /// A generator for the next challenge. The seed is folded back into the
    /// state so later challenges differ.
    pub fn challenge(&mut self, label: &[u8]) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(self.state);
        h.update(b"challenge");
        h.update(label);
        let seed: [u8; 32] = h.finalize().into();
        self.absorb(b"seed", &seed);
        ChaCha20Rng::from_seed(seed)
    }
}
