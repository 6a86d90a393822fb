//! Deterministic blocks and transactions for tests, examples, and demos.
//!
//! Everything here except the genesis data is synthetic: headers carry the
//! regtest difficulty and are not mined.

use crate::hashchain::merkle_root;
use crate::redactor::{build_redaction, prove_redaction, ProofBundle, RedactionRecord};
use crate::txcodec::{
    locate_allowed_regions, parse_block, script, txid, write_varint, BlockHeader, ByteInterval,
    ParsedTransaction,
};
use crate::zkbackend::ProofBackend;

const GENESIS_BLOCK_HEX: &str = concat!(
    "0100000000000000000000000000000000000000000000000000000000000000",
    "000000003ba3edfd7a7b12b27ac72c3e67768f617fc81bc3888a51323a9fb8aa",
    "4b1e5e4a29ab5f49ffff001d1dac2b7c01010000000100000000000000000000",
    "00000000000000000000000000000000000000000000ffffffff4d04ffff001d",
    "0104455468652054696d65732030332f4a616e2f32303039204368616e63656c",
    "6c6f72206f6e206272696e6b206f66207365636f6e64206261696c6f75742066",
    "6f722062616e6b73ffffffff0100f2052a01000000434104678afdb0fe554827",
    "1967f1a67130b7105cd6a828e03909a67962e0ea1f61deb649f6bc3f4cef38c4",
    "f35504e51ec112de5c384df7ba0b8d578a4c702b6bf11d5fac00000000",
);

/// Compact target used by synthetic headers (regtest minimum difficulty).
pub const REGTEST_BITS: u32 = 0x207f_ffff;

/// The mainnet genesis block, 285 bytes.
pub fn genesis_block() -> Vec<u8> {
    hex::decode(GENESIS_BLOCK_HEX).expect("static hex")
}

/// The genesis coinbase transaction, 204 bytes.
pub fn genesis_coinbase() -> Vec<u8> {
    genesis_block()[81..].to_vec()
}

/// Where the 69-byte newspaper headline sits inside the genesis coinbase.
pub fn chancellor_interval() -> ByteInterval {
    ByteInterval {
        start: 50,
        end: 119,
    }
}

/// Minimal push of `data` (direct push, PUSHDATA1, or PUSHDATA2).
pub fn push(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 3);
    match data.len() {
        0 => out.push(script::OP_0),
        n @ 1..=0x4b => out.push(n as u8),
        n @ 0x4c..=0xff => out.extend_from_slice(&[script::OP_PUSHDATA1, n as u8]),
        n => {
            out.push(script::OP_PUSHDATA2);
            out.extend_from_slice(&(n as u16).to_le_bytes());
        }
    }
    out.extend_from_slice(data);
    out
}

/// `OP_RETURN <payload>`.
pub fn op_return_script(payload: &[u8]) -> Vec<u8> {
    let mut s = vec![script::OP_RETURN];
    s.extend_from_slice(&push(payload));
    s
}

pub fn p2pkh_script(pubkey_hash: &[u8; 20]) -> Vec<u8> {
    let mut s = vec![script::OP_DUP, script::OP_HASH160, 20];
    s.extend_from_slice(pubkey_hash);
    s.extend_from_slice(&[script::OP_EQUALVERIFY, script::OP_CHECKSIG]);
    s
}

/// A spendable output script that stores `data` in a branch that can never
/// run: `OP_TRUE OP_NOTIF OP_RETURN <data> OP_ENDIF` followed by P2PKH.
pub fn dead_branch_script(data: &[u8], pubkey_hash: &[u8; 20]) -> Vec<u8> {
    let mut s = vec![script::OP_1, script::OP_NOTIF, script::OP_RETURN];
    s.extend_from_slice(&push(data));
    s.push(script::OP_ENDIF);
    s.extend_from_slice(&p2pkh_script(pubkey_hash));
    s
}

pub struct TxBuilder {
    version: i32,
    inputs: Vec<([u8; 32], u32, Vec<u8>, u32)>,
    outputs: Vec<(u64, Vec<u8>)>,
    locktime: u32,
}

impl TxBuilder {
    pub fn new() -> Self {
        TxBuilder {
            version: 1,
            inputs: Vec::new(),
            outputs: Vec::new(),
            locktime: 0,
        }
    }

    pub fn input(mut self, prev_txid: [u8; 32], vout: u32, script_sig: Vec<u8>) -> Self {
        self.inputs.push((prev_txid, vout, script_sig, u32::MAX));
        self
    }

    pub fn output(mut self, value: u64, script_pubkey: Vec<u8>) -> Self {
        self.outputs.push((value, script_pubkey));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut out = self.version.to_le_bytes().to_vec();
        write_varint(&mut out, self.inputs.len() as u64);
        for (txid, vout, sig, seq) in &self.inputs {
            out.extend_from_slice(txid);
            out.extend_from_slice(&vout.to_le_bytes());
            write_varint(&mut out, sig.len() as u64);
            out.extend_from_slice(sig);
            out.extend_from_slice(&seq.to_le_bytes());
        }
        write_varint(&mut out, self.outputs.len() as u64);
        for (value, spk) in &self.outputs {
            out.extend_from_slice(&value.to_le_bytes());
            write_varint(&mut out, spk.len() as u64);
            out.extend_from_slice(spk);
        }
        out.extend_from_slice(&self.locktime.to_le_bytes());
        out
    }
}

impl Default for TxBuilder {
    fn default() -> Self {
        Self::new()
    }
}

fn dummy_script_sig(seed: u8) -> Vec<u8> {
    let mut s = push(&[seed; 71]);
    s.extend_from_slice(&push(&[seed ^ 0x5a; 33]));
    s
}

/// Coinbase with a BIP34 height push followed by a push of `extra`.
pub fn coinbase_tx(height: u32, extra: &[u8]) -> Vec<u8> {
    let mut sig = push(&height.to_le_bytes()[..3]);
    sig.extend_from_slice(&push(extra));
    TxBuilder::new()
        .input([0; 32], u32::MAX, sig)
        .output(50 * 100_000_000, p2pkh_script(&[height as u8; 20]))
        .build()
}

/// One ordinary input, each of `scripts` as a zero-value output, then change.
pub fn op_return_tx(scripts: &[Vec<u8>]) -> Vec<u8> {
    let mut b = TxBuilder::new().input([0x42; 32], 1, dummy_script_sig(7));
    for s in scripts {
        b = b.output(0, s.clone());
    }
    b.output(12_345, p2pkh_script(&[0x24; 20])).build()
}

/// Spends the given outpoints (vout 0) into `n_outputs` P2PKH outputs.
pub fn p2pkh_spend(prevouts: &[[u8; 32]], n_outputs: usize) -> Vec<u8> {
    let mut b = TxBuilder::new();
    for (i, p) in prevouts.iter().enumerate() {
        b = b.input(*p, 0, dummy_script_sig(i as u8));
    }
    for i in 0..n_outputs {
        b = b.output(1000 * (i as u64 + 1), p2pkh_script(&[i as u8; 20]));
    }
    b.build()
}

/// Serializes a block over `txs`, with the correct Merkle root.
pub fn build_block(prev_block_hash: [u8; 32], txs: &[Vec<u8>], nonce: u32) -> Vec<u8> {
    let leaves: Vec<[u8; 32]> = txs.iter().map(|t| txid(t)).collect();
    let header = BlockHeader {
        version: 1,
        prev_block_hash,
        merkle_root: merkle_root(&leaves).expect("at least one transaction"),
        time: 1_600_000_000 + nonce,
        bits: REGTEST_BITS,
        nonce,
    };
    let mut out = header.to_bytes().to_vec();
    write_varint(&mut out, txs.len() as u64);
    for t in txs {
        out.extend_from_slice(t);
    }
    out
}

/// A linked chain of blocks where block `h` holds a coinbase plus the
/// transactions returned by `body(h)`.
pub fn chain_with(n: usize, mut body: impl FnMut(usize) -> Vec<Vec<u8>>) -> Vec<Vec<u8>> {
    let mut prev = [0u8; 32];
    let mut blocks = Vec::with_capacity(n);
    for h in 0..n {
        let mut txs = vec![coinbase_tx(h as u32, format!("block {h}").as_bytes())];
        txs.extend(body(h));
        let raw = build_block(prev, &txs, h as u32);
        prev = crate::txcodec::double_sha256(&raw[..80]);
        blocks.push(raw);
    }
    blocks
}

/// Three linked blocks; block 1 carries an `OP_RETURN` transaction.
pub fn three_block_chain() -> Vec<Vec<u8>> {
    chain_with(3, |h| {
        if h == 1 {
            vec![op_return_tx(&[op_return_script(
                b"a note that will be deleted later",
            )])]
        } else {
            vec![p2pkh_spend(&[[h as u8; 32]], 1)]
        }
    })
}

/// [`three_block_chain`] with the `OP_RETURN` payload of block 1,
/// transaction 1 deleted. `bundles[h]` is the sidecar for height `h`.
pub struct RedactedChain {
    pub original: Vec<Vec<u8>>,
    pub blocks: Vec<Vec<u8>>,
    pub bundles: Vec<Option<ProofBundle>>,
}

pub fn redacted_three_block_chain(backend: &dyn ProofBackend, seed: [u8; 32]) -> RedactedChain {
    let original = three_block_chain();
    let block = parse_block(&original[1]).expect("fixture parses");
    let region = locate_allowed_regions(&block.transactions[1]).expect("fixture parses")[0];
    let (redacted, record) =
        build_redaction(&block, 1, &[region], backend, seed).expect("fixture redacts");
    let mut blocks = original.clone();
    blocks[1] = redacted;
    let bundle = ProofBundle {
        block_hash: block.hash(),
        records: vec![record],
    };
    RedactedChain {
        original,
        blocks,
        bundles: vec![None, Some(bundle), None],
    }
}

/// A redacted dead-branch output and a spend of it under the simulated
/// redeem check.
pub struct RedeemFixture {
    pub original_script: Vec<u8>,
    pub redacted_script: Vec<u8>,
    pub record: RedactionRecord,
    /// Spending transaction with an empty scriptSig.
    pub spend: ParsedTransaction,
    /// The spending data hashed into the redeem message.
    pub inp_script: Vec<u8>,
}

pub fn redeem_fixture(data: &[u8], backend: &dyn ProofBackend, seed: [u8; 32]) -> RedeemFixture {
    let original_script = dead_branch_script(data, &[0x11; 20]);
    let intervals =
        script::dead_branch_op_return_payloads(&original_script).expect("fixture parses");
    let (redacted_script, record) =
        prove_redaction(&original_script, &intervals, 0, None, backend, seed)
            .expect("fixture redacts");
    let spend_raw = TxBuilder::new()
        .input([0x33; 32], 0, Vec::new())
        .output(40_000, p2pkh_script(&[0x22; 20]))
        .build();
    let spend = crate::txcodec::parse_transaction(&spend_raw).expect("fixture parses");
    RedeemFixture {
        original_script,
        redacted_script,
        record,
        inp_script: spend_raw,
        spend,
    }
}
