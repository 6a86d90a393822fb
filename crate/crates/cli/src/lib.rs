//! Command-line front end: inspect allowed regions, redact stored blocks,
//! verify a store, serve and fetch blocks, and evaluate chain-quality bounds.
//!
//! Exit codes: 0 on success or a valid chain, 1 when verification fails,
//! 2 on usage or I/O errors.

pub mod quality;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::RngCore;
use zkredact_core::chainsync::{
    fetch_and_verify, serve, ChainStore, Snapshot, SyncError, Verdict, Verifier, VerifyOptions,
};
use zkredact_core::redactor::{build_redaction_with_prior, merge_bundles, ProofBundle};
use zkredact_core::txcodec::{
    is_coinbase, locate_allowed_regions, parse_block, parse_transaction, ByteInterval,
};
use zkredact_core::zkbackend::{backend, BackendId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "zkredact",
    version,
    about = "Redact Bitcoin block data with zero-knowledge consistency proofs"
)]
pub struct Cli {
    /// Directory holding `<height>.blk` and `<height>.bundle.json` files.
    #[arg(long, global = true, default_value = "chain")]
    pub store: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the byte intervals of a transaction that may be redacted.
    Regions {
        tx_file: PathBuf,
        /// The file holds hex text instead of raw bytes.
        #[arg(long)]
        hex: bool,
    },
    /// Copy a block file into the store at `height`.
    Import {
        height: u64,
        block_file: PathBuf,
        #[arg(long)]
        hex: bool,
    },
    /// Zero-fill intervals of one transaction and store the proofs.
    Redact {
        height: u64,
        tx_index: usize,
        /// Comma-separated `start..end` offsets into the transaction, end exclusive.
        intervals: String,
        #[arg(long, default_value = "sound")]
        backend: BackendId,
        /// 32-byte prover seed as hex; random when omitted.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Verify the whole store, or one height.
    Verify {
        #[arg(long)]
        height: Option<u64>,
        /// Also require every header hash to meet its target.
        #[arg(long)]
        check_pow: bool,
    },
    /// Serve the store to peers.
    Serve {
        #[arg(long)]
        listen: String,
    },
    /// Fetch and verify an inclusive height range `a..b` from a peer.
    Fetch {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        range: String,
    },
    /// Minimum adversarial hash power for a chain-quality threshold.
    Quality {
        /// Threshold `f` in (1/2, 1), as `a/b` or a decimal.
        #[arg(long)]
        threshold: String,
        /// Also evaluate an adversary with this hash power.
        #[arg(long)]
        hash_power: Option<String>,
    },
}

struct Failed(i32, String);

impl<E: std::fmt::Display> From<E> for Failed {
    fn from(e: E) -> Failed {
        Failed(EXIT_USAGE, e.to_string())
    }
}

type CmdResult = Result<i32, Failed>;

/// Parses a comma-separated list of `start..end` intervals.
pub fn parse_intervals(s: &str) -> Result<Vec<ByteInterval>, String> {
    s.split(',')
        .map(|part| {
            let (a, b) = part
                .trim()
                .split_once("..")
                .ok_or_else(|| format!("{part:?}: expected start..end"))?;
            let a: usize = a.parse().map_err(|_| format!("{part:?}: bad start"))?;
            let b: usize = b.parse().map_err(|_| format!("{part:?}: bad end"))?;
            ByteInterval::new(a, b).ok_or_else(|| format!("{part:?}: empty interval"))
        })
        .collect()
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or("range must be a..b")?;
    let a = a.parse().map_err(|_| "bad range start")?;
    let b = b.parse().map_err(|_| "bad range end")?;
    if a > b {
        return Err("range start exceeds end".into());
    }
    Ok((a, b))
}

fn read_input(path: &PathBuf, hex_text: bool) -> Result<Vec<u8>, Failed> {
    let bytes =
        fs::read(path).map_err(|e| Failed(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    if !hex_text {
        return Ok(bytes);
    }
    let text = String::from_utf8(bytes)?;
    Ok(hex::decode(text.split_whitespace().collect::<String>())?)
}

/// Runs the CLI on `argv` (including the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(code) => code,
        Err(Failed(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cli.command {
        Command::Regions { tx_file, hex } => {
            let tx = parse_transaction(&read_input(&tx_file, hex)?)?;
            for r in locate_allowed_regions(&tx)? {
                writeln!(out, "{r}")?;
            }
            Ok(EXIT_OK)
        }
        Command::Import {
            height,
            block_file,
            hex,
        } => {
            let bytes = read_input(&block_file, hex)?;
            let block = parse_block(&bytes)?;
            ChainStore::open(&cli.store)?.commit(height, &bytes, None)?;
            writeln!(out, "height={height} hash={}", hex::encode(block.hash()))?;
            Ok(EXIT_OK)
        }
        Command::Redact {
            height,
            tx_index,
            intervals,
            backend: id,
            seed,
        } => redact(
            &cli.store,
            height,
            tx_index,
            &intervals,
            id,
            seed.as_deref(),
            out,
            err,
        ),
        Command::Verify { height, check_pow } => {
            let store = ChainStore::open(&cli.store)?;
            let verifier = Verifier::new(VerifyOptions { check_pow });
            let valid = match height {
                Some(h) => {
                    let block = store.read_block(h)?;
                    let verdict = match store.read_bundle(h) {
                        Ok(bundle) => verifier.verify_block(&block, bundle.as_ref()),
                        Err(e) => Verdict::Invalid(zkredact_core::chainsync::Failure::new(
                            zkredact_core::chainsync::FailureKind::MalformedBundle,
                            e.to_string(),
                        )),
                    };
                    let report = zkredact_core::chainsync::BlockReport { height: h, verdict };
                    writeln!(out, "{report}")?;
                    report.verdict.is_valid()
                }
                None => {
                    let report = verifier.verify_chain(&store)?;
                    write!(out, "{report}")?;
                    report.all_valid()
                }
            };
            Ok(if valid { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Serve { listen } => {
            let store = ChainStore::open(&cli.store)?;
            let server = serve(Snapshot::from_store(&store)?, listen.as_str())?;
            writeln!(out, "listening on {}", server.addr())?;
            out.flush()?;
            server.join();
            Ok(EXIT_OK)
        }
        Command::Fetch { connect, range } => {
            let (a, b) = parse_range(&range)?;
            let mut store = ChainStore::open(&cli.store)?;
            match fetch_and_verify(connect.as_str(), a, b, &mut store, &Verifier::default()) {
                Ok(report) => {
                    write!(out, "{report}")?;
                    Ok(if report.all_valid() {
                        EXIT_OK
                    } else {
                        EXIT_INVALID
                    })
                }
                Err(
                    e @ (SyncError::VerificationFailed { .. } | SyncError::ProtocolViolation(_)),
                ) => Err(Failed(EXIT_INVALID, e.to_string())),
                Err(e) => Err(e.into()),
            }
        }
        Command::Quality {
            threshold,
            hash_power,
        } => {
            let f = quality::parse_rational(&threshold)?;
            let t = quality::quality_bound(&f)?;
            writeln!(out, "threshold={f} min_hash_power={t}")?;
            if let Some(tp) = hash_power {
                let tp = quality::parse_rational(&tp)?;
                let frac = quality::chain_fraction(&tp)?;
                let outcome = if frac >= f { "succeeds" } else { "fails" };
                writeln!(
                    out,
                    "hash_power={tp} chain_fraction={frac} attack={outcome}"
                )?;
            }
            Ok(EXIT_OK)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn redact(
    dir: &PathBuf,
    height: u64,
    tx_index: usize,
    intervals: &str,
    id: BackendId,
    seed: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let intervals = parse_intervals(intervals)?;
    let seed: [u8; 32] = match seed {
        Some(s) => hex::decode(s)?
            .try_into()
            .map_err(|_| Failed(EXIT_USAGE, "seed must be 32 bytes of hex".into()))?,
        None => {
            let mut s = [0u8; 32];
            rand::thread_rng().fill_bytes(&mut s);
            s
        }
    };
    let mut store = ChainStore::open(dir)?;
    let raw = store.read_block(height)?;
    let block = parse_block(&raw)?;
    let prior = store.read_bundle(height)?;
    if let Some(tx) = block.transactions.get(tx_index).filter(|t| is_coinbase(t)) {
        if let Some(first) = first_push(
            &tx.raw[tx.inputs[0].script_sig.offset..],
            tx.inputs[0].script_sig.len(),
        ) {
            let first = first.shifted(tx.inputs[0].script_sig.offset);
            if intervals.iter().any(|iv| iv.overlaps(&first)) {
                writeln!(err, "warning: interval touches the first coinbase push, which may encode the block height")?;
            }
        }
    }
    let (redacted, record) = build_redaction_with_prior(
        &block,
        tx_index,
        &intervals,
        backend(id),
        prior.as_ref(),
        seed,
    )?;
    let chunks = record.modified_chunk_indices();
    let fresh = ProofBundle {
        block_hash: block.hash(),
        records: vec![record],
    };
    let bundle = match &prior {
        Some(p) => merge_bundles(p, &fresh)?,
        None => fresh,
    };
    store.commit(height, &redacted, Some(&bundle))?;
    let listed: Vec<String> = chunks.iter().map(usize::to_string).collect();
    writeln!(
        out,
        "height={height} tx={tx_index} backend={id} chunks={} proofs={}",
        listed.join(","),
        chunks.len()
    )?;
    Ok(EXIT_OK)
}

/// Interval of the first push's payload within a script of `len` bytes.
fn first_push(script: &[u8], len: usize) -> Option<ByteInterval> {
    let script = &script[..len.min(script.len())];
    let (&op, rest) = script.split_first()?;
    let (skip, n) = match op {
        1..=0x4b => (1, op as usize),
        0x4c => (2, *rest.first()? as usize),
        0x4d => (
            3,
            u16::from_le_bytes([*rest.first()?, *rest.get(1)?]) as usize,
        ),
        _ => return None,
    };
    ByteInterval::new(skip, (skip + n).min(script.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_syntax() {
        assert_eq!(
            parse_intervals("50..119, 3..4").unwrap(),
            vec![
                ByteInterval::new(50, 119).unwrap(),
                ByteInterval::new(3, 4).unwrap()
            ]
        );
        for bad in ["", "5", "5..5", "a..b", "3..1"] {
            assert!(parse_intervals(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_range("0..2").unwrap(), (0, 2));
        assert!(parse_range("2..0").is_err());
    }

    #[test]
    fn first_push_forms() {
        assert_eq!(first_push(&[3, 1, 2, 3, 9], 5), ByteInterval::new(1, 4));
        assert_eq!(first_push(&[0x4c, 2, 7, 7], 4), ByteInterval::new(2, 4));
        assert_eq!(first_push(&[0x51], 1), None);
        assert_eq!(first_push(&[], 0), None);
    }
}
