//! Canonical JSON form of [`ProofBundle`]: compact, keys sorted, byte strings
//! as lowercase hex in raw byte order, states as eight big-endian hex words.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{sort_disjoint, ProofBundle, RedactError, RedactionRecord, RevealedChunk};
use crate::hashchain::ShaState;
use crate::txcodec::ByteInterval;
use crate::zkbackend::field::MODULUS;
use crate::zkbackend::Proof;

// Field order is alphabetical so derived serialization is already sorted.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleJson {
    block_hash: String,
    field_modulus: String,
    records: Vec<RecordJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordJson {
    chunks: Vec<ChunkJson>,
    inner_digest: String,
    intervals: Vec<IntervalJson>,
    tx_index: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChunkJson {
    index: usize,
    next_state: Vec<String>,
    prev_state: Vec<String>,
    proof_hex: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalJson {
    end: usize,
    start: usize,
}

fn bad(msg: impl Into<String>) -> RedactError {
    RedactError::Bundle(msg.into())
}

fn state_words(s: &ShaState) -> Vec<String> {
    s.0.iter().map(|w| format!("{w:08x}")).collect()
}

fn is_lower_hex(s: &str) -> bool {
    s.bytes()
        .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn parse_hex(s: &str, what: &str) -> Result<Vec<u8>, RedactError> {
    if !is_lower_hex(s) {
        return Err(bad(format!("{what}: not lowercase hex")));
    }
    hex::decode(s).map_err(|e| bad(format!("{what}: {e}")))
}

fn parse_hash(s: &str, what: &str) -> Result<[u8; 32], RedactError> {
    parse_hex(s, what)?
        .try_into()
        .map_err(|_| bad(format!("{what}: expected 32 bytes")))
}

fn parse_state(words: &[String], what: &str) -> Result<ShaState, RedactError> {
    if words.len() != 8 {
        return Err(bad(format!("{what}: expected 8 words")));
    }
    let mut out = [0u32; 8];
    for (slot, w) in out.iter_mut().zip(words) {
        if w.len() != 8 || !is_lower_hex(w) {
            return Err(bad(format!("{what}: bad word {w:?}")));
        }
        *slot = u32::from_str_radix(w, 16).map_err(|e| bad(format!("{what}: {e}")))?;
    }
    Ok(ShaState(out))
}

impl ProofBundle {
    pub fn to_json(&self) -> String {
        let doc = BundleJson {
            block_hash: hex::encode(self.block_hash),
            field_modulus: format!("{MODULUS:032x}"),
            records: self
                .records
                .iter()
                .map(|r| RecordJson {
                    chunks: r
                        .chunks
                        .iter()
                        .map(|(&index, c)| ChunkJson {
                            index,
                            next_state: state_words(&c.next_state),
                            prev_state: state_words(&c.prev_state),
                            proof_hex: hex::encode(&c.proof.bytes),
                        })
                        .collect(),
                    inner_digest: hex::encode(r.inner_digest),
                    intervals: r
                        .intervals
                        .iter()
                        .map(|iv| IntervalJson {
                            end: iv.end,
                            start: iv.start,
                        })
                        .collect(),
                    tx_index: r.tx_index,
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("plain data serializes")
    }

    /// Parses and checks the structure of a bundle. Proofs are not checked.
    pub fn from_json(text: &str) -> Result<ProofBundle, RedactError> {
        let doc: BundleJson = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if doc.field_modulus != format!("{MODULUS:032x}") {
            return Err(bad("unsupported field modulus"));
        }
        let block_hash = parse_hash(&doc.block_hash, "block_hash")?;
        let mut records: Vec<RedactionRecord> = Vec::with_capacity(doc.records.len());
        for r in doc.records {
            if records.last().is_some_and(|p| p.tx_index >= r.tx_index) {
                return Err(bad("records not sorted by tx_index"));
            }
            let intervals: Vec<ByteInterval> = r
                .intervals
                .iter()
                .map(|iv| ByteInterval::new(iv.start, iv.end).ok_or_else(|| bad("empty interval")))
                .collect::<Result<_, _>>()?;
            if sort_disjoint(&intervals)? != intervals {
                return Err(bad("intervals not sorted"));
            }
            let mut chunks = BTreeMap::new();
            for c in r.chunks {
                if chunks
                    .keys()
                    .next_back()
                    .is_some_and(|&last| last >= c.index)
                {
                    return Err(bad("chunks not sorted by index"));
                }
                let bytes = parse_hex(&c.proof_hex, "proof_hex")?;
                let proof = Proof::from_bytes(bytes).ok_or_else(|| bad("unknown proof format"))?;
                chunks.insert(
                    c.index,
                    RevealedChunk {
                        prev_state: parse_state(&c.prev_state, "prev_state")?,
                        next_state: parse_state(&c.next_state, "next_state")?,
                        proof,
                    },
                );
            }
            records.push(RedactionRecord {
                tx_index: r.tx_index,
                intervals,
                chunks,
                inner_digest: parse_hash(&r.inner_digest, "inner_digest")?,
            });
        }
        Ok(ProofBundle {
            block_hash,
            records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::redactor::build_redaction;
    use crate::txcodec::parse_block;
    use crate::zkbackend::{backend, BackendId};

    fn chancellor_bundle() -> ProofBundle {
        let block = parse_block(&fixtures::genesis_block()).unwrap();
        let (_, record) = build_redaction(
            &block,
            0,
            &[fixtures::chancellor_interval()],
            backend(BackendId::Dev),
            [5; 32],
        )
        .unwrap();
        ProofBundle {
            block_hash: block.hash(),
            records: vec![record],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = chancellor_bundle();
        let text = b.to_json();
        let back = ProofBundle::from_json(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_json(), text);
        assert!(text.starts_with("{\"block_hash\":\"6fe28c0ab6f1b372"));
        assert!(text.contains("\"prev_state\":[\"6a09e667\",\"bb67ae85\""));
        assert!(!text.contains(' '));
    }

    #[test]
    fn keys_are_sorted() {
        let text = chancellor_bundle().to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&v).unwrap(), text);
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["block_hash", "field_modulus", "records"]);
    }

    #[test]
    fn malformed_inputs_rejected() {
        let text = chancellor_bundle().to_json();
        for broken in [
            text.replace("6a09e667", "6A09E667"),
            text.replace("\"tx_index\":0", "\"tx_index\":0,\"extra\":1"),
            text.replace("\"proof_hex\":\"44455631", "\"proof_hex\":\"00455631"),
            text.replace(
                "7ffffffffffffffe0000000000000001",
                "7fffffffffffffff0000000000000001",
            ),
            text[..text.len() - 1].to_string(),
        ] {
            assert!(
                ProofBundle::from_json(&broken).is_err(),
                "{}",
                &broken[..80]
            );
        }
    }

    #[test]
    fn empty_bundle() {
        let b = ProofBundle::new([0xab; 32]);
        assert_eq!(ProofBundle::from_json(&b.to_json()).unwrap(), b);
    }
}
