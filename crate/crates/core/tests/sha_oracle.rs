use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use zkredact_core::hashchain::{chunk_count, digest_chain, merkle_root};
use zkredact_core::txcodec::double_sha256;

#[test]
fn digest_chain_matches_reference_sha256() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(0..=4096);
        let mut msg = vec![0u8; len];
        rng.fill(&mut msg[..]);
        let chain = digest_chain(&msg);
        assert_eq!(chain.chunk_count(), chunk_count(len));
        if chain.digest()[..] != Sha256::digest(&msg)[..] {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn padding_boundaries() {
    for len in [0, 1, 55, 56, 63, 64, 65, 119, 120] {
        let msg = vec![0xa5; len];
        assert_eq!(
            digest_chain(&msg).digest()[..],
            Sha256::digest(&msg)[..],
            "{len}"
        );
    }
    assert_eq!(chunk_count(55), 1);
    assert_eq!(chunk_count(56), 2);
}

fn reference_root(leaves: &[[u8; 32]]) -> [u8; 32] {
    let mut level: Vec<[u8; 32]> = leaves.to_vec();
    while level.len() > 1 {
        let mut next = Vec::new();
        let mut i = 0;
        while i < level.len() {
            let right = if i + 1 < level.len() {
                level[i + 1]
            } else {
                level[i]
            };
            let mut buf = Vec::with_capacity(64);
            buf.extend_from_slice(&level[i]);
            buf.extend_from_slice(&right);
            let once = Sha256::digest(&buf);
            next.push(Sha256::digest(once).into());
            i += 2;
        }
        level = next;
    }
    level[0]
}

#[test]
fn merkle_root_matches_reference() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for n in 1..=17 {
        let leaves: Vec<[u8; 32]> = (0..n).map(|_| rng.gen()).collect();
        assert_eq!(merkle_root(&leaves).unwrap(), reference_root(&leaves));
    }
    let leaf = double_sha256(b"x");
    assert_eq!(merkle_root(&[leaf]).unwrap(), leaf);
    assert!(merkle_root(&[]).is_err());
}
