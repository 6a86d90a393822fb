//! Block transfer over a byte stream.
//!
//! Each frame is `[u32 BE payload length][type][payload]`; the length does
//! not count the type byte. A client sends `GetRange` and receives, for each
//! height in the inclusive range, a `Block` frame and a `Bundle` frame (empty
//! payload when the block has no sidecar), then `End`.

use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::store::ChainStore;
use super::verify::{Failure, FailureKind, Verdict, VerificationReport, Verifier};
use super::{ChainError, SyncError};
use crate::redactor::ProofBundle;
use crate::txcodec::{BlockHeader, HEADER_LEN};

pub const MAX_FRAME_LEN: usize = 8 << 20;

const T_GET_RANGE: u8 = 0x01;
const T_BLOCK: u8 = 0x02;
const T_BUNDLE: u8 = 0x03;
const T_END: u8 = 0x04;
const T_ERROR: u8 = 0x7f;

const IO_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    GetRange { start: u32, end: u32 },
    Block { height: u32, bytes: Vec<u8> },
    Bundle { height: u32, json: Vec<u8> },
    End,
    Error(String),
}

fn violation(msg: impl Into<String>) -> SyncError {
    SyncError::ProtocolViolation(msg.into())
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    let (ty, payload) = match frame {
        Frame::GetRange { start, end } => (
            T_GET_RANGE,
            [start.to_be_bytes(), end.to_be_bytes()].concat(),
        ),
        Frame::Block { height, bytes } => (T_BLOCK, [&height.to_be_bytes()[..], bytes].concat()),
        Frame::Bundle { height, json } => (T_BUNDLE, [&height.to_be_bytes()[..], json].concat()),
        Frame::End => (T_END, Vec::new()),
        Frame::Error(reason) => (T_ERROR, reason.as_bytes().to_vec()),
    };
    if payload.len() > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "frame exceeds the size limit",
        ));
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(&[ty])?;
    w.write_all(&payload)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, SyncError> {
    let mut head = [0u8; 5];
    let mut got = 0;
    while got < head.len() {
        match r.read(&mut head[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(violation("stream ended inside a frame header")),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(SyncError::ConnectionFailed(e)),
        }
    }
    let len = u32::from_be_bytes(head[..4].try_into().unwrap()) as usize;
    if len > MAX_FRAME_LEN {
        return Err(violation(format!("frame of {len} bytes exceeds the limit")));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => violation("stream ended inside a frame"),
        _ => SyncError::ConnectionFailed(e),
    })?;
    let height = |p: &[u8]| -> Result<u32, SyncError> {
        p.get(..4)
            .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
            .ok_or_else(|| violation("frame too short for a height"))
    };
    let frame = match head[4] {
        T_GET_RANGE if len == 8 => Frame::GetRange {
            start: height(&payload)?,
            end: height(&payload[4..])?,
        },
        T_GET_RANGE => return Err(violation("GetRange payload must be 8 bytes")),
        T_BLOCK => Frame::Block {
            height: height(&payload)?,
            bytes: payload[4..].to_vec(),
        },
        T_BUNDLE => Frame::Bundle {
            height: height(&payload)?,
            json: payload[4..].to_vec(),
        },
        T_END if len == 0 => Frame::End,
        T_END => return Err(violation("End carries a payload")),
        T_ERROR => Frame::Error(String::from_utf8_lossy(&payload).into_owned()),
        other => return Err(violation(format!("unknown frame type {other:#04x}"))),
    };
    Ok(Some(frame))
}

/// Read-only copy of the blocks and sidecars a server hands out.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    entries: BTreeMap<u64, (Vec<u8>, Option<String>)>,
}

impl Snapshot {
    pub fn from_store(store: &ChainStore) -> Result<Snapshot, ChainError> {
        let mut snap = Snapshot::default();
        for h in store.heights() {
            snap.insert(h, store.read_block(h)?, store.read_bundle_text(h)?);
        }
        Ok(snap)
    }

    pub fn insert(&mut self, height: u64, block: Vec<u8>, bundle_json: Option<String>) {
        self.entries.insert(height, (block, bundle_json));
    }

    pub fn heights(&self) -> Vec<u64> {
        self.entries.keys().copied().collect()
    }
}

/// A running server. Dropping it stops the listener.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the listener exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.shutdown();
        }
    }
}

/// Binds `addr` and serves `snapshot`, one thread per connection.
pub fn serve(snapshot: Snapshot, addr: impl ToSocketAddrs) -> Result<ServerHandle, SyncError> {
    let listener = TcpListener::bind(addr).map_err(SyncError::ConnectionFailed)?;
    let local = listener.local_addr().map_err(SyncError::ConnectionFailed)?;
    let stop = Arc::new(AtomicBool::new(false));
    let snapshot = Arc::new(snapshot);
    let flag = stop.clone();
    let thread = thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(conn) = conn else { continue };
            let snap = snapshot.clone();
            thread::spawn(move || {
                let _ = handle_connection(conn, &snap);
            });
        }
    });
    Ok(ServerHandle {
        addr: local,
        stop,
        thread: Some(thread),
    })
}

fn handle_connection(conn: TcpStream, snap: &Snapshot) -> io::Result<()> {
    conn.set_read_timeout(Some(IO_TIMEOUT))?;
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut writer = BufWriter::new(conn);
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(e) => return write_frame(&mut writer, &Frame::Error(e.to_string())),
        };
        let Frame::GetRange { start, end } = frame else {
            return write_frame(&mut writer, &Frame::Error("expected GetRange".into()));
        };
        if start > end {
            write_frame(
                &mut writer,
                &Frame::Error(format!("empty range {start}..{end}")),
            )?;
            continue;
        }
        send_range(&mut writer, snap, start, end)?;
    }
}

fn send_range(w: &mut impl Write, snap: &Snapshot, start: u32, end: u32) -> io::Result<()> {
    for height in start..=end {
        let Some((block, bundle)) = snap.entries.get(&(height as u64)) else {
            return write_frame(w, &Frame::Error(format!("height {height} not available")));
        };
        let json = bundle.clone().unwrap_or_default().into_bytes();
        if block.len() + 4 > MAX_FRAME_LEN || json.len() + 4 > MAX_FRAME_LEN {
            return write_frame(
                w,
                &Frame::Error(format!("height {height} does not fit in a frame")),
            );
        }
        write_frame(
            w,
            &Frame::Block {
                height,
                bytes: block.clone(),
            },
        )?;
        write_frame(w, &Frame::Bundle { height, json })?;
    }
    write_frame(w, &Frame::End)
}

fn expect_frame(r: &mut impl Read) -> Result<Frame, SyncError> {
    match read_frame(r)? {
        Some(Frame::Error(reason)) => Err(violation(format!("peer error: {reason}"))),
        Some(f) => Ok(f),
        None => Err(violation("peer closed the stream early")),
    }
}

/// Fetches heights `start..=end` from `addr`, verifying each block (and its
/// link to the block below) before committing it to `store`, then verifies
/// the whole local chain.
pub fn fetch_and_verify(
    addr: impl ToSocketAddrs,
    start: u64,
    end: u64,
    store: &mut ChainStore,
    verifier: &Verifier,
) -> Result<VerificationReport, SyncError> {
    let (Ok(s), Ok(e)) = (u32::try_from(start), u32::try_from(end)) else {
        return Err(violation("heights must fit in 32 bits"));
    };
    if s > e {
        return Err(violation(format!("empty range {start}..{end}")));
    }
    let conn = TcpStream::connect(addr).map_err(SyncError::ConnectionFailed)?;
    conn.set_read_timeout(Some(IO_TIMEOUT))
        .map_err(SyncError::ConnectionFailed)?;
    let mut reader = BufReader::new(conn.try_clone().map_err(SyncError::ConnectionFailed)?);
    let mut writer = BufWriter::new(&conn);
    write_frame(&mut writer, &Frame::GetRange { start: s, end: e })
        .map_err(SyncError::ConnectionFailed)?;
    drop(writer);

    for height in s..=e {
        let block = match expect_frame(&mut reader)? {
            Frame::Block { height: h, bytes } if h == height => bytes,
            other => {
                return Err(violation(format!(
                    "expected Block {height}, got {}",
                    frame_name(&other)
                )))
            }
        };
        let json = match expect_frame(&mut reader)? {
            Frame::Bundle { height: h, json } if h == height => json,
            other => {
                return Err(violation(format!(
                    "expected Bundle {height}, got {}",
                    frame_name(&other)
                )))
            }
        };
        let header: &[u8; HEADER_LEN] = block
            .get(..HEADER_LEN)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| violation(format!("block {height} is shorter than a header")))?;
        let header = BlockHeader::parse(header);
        let bundle = if json.is_empty() {
            None
        } else {
            let text = std::str::from_utf8(&json)
                .map_err(|_| violation(format!("bundle {height} is not UTF-8")))?;
            let b = ProofBundle::from_json(text)
                .map_err(|e| violation(format!("bundle {height}: {e}")))?;
            if b.block_hash != header.hash() {
                return Err(violation(format!(
                    "bundle {height} names a different block"
                )));
            }
            Some(b)
        };
        let height = height as u64;
        if let Some(prev) = height.checked_sub(1).and_then(|p| store.block_hash(p)) {
            if header.prev_block_hash != prev {
                return Err(SyncError::VerificationFailed {
                    height,
                    failure: Failure::new(
                        FailureKind::BrokenHeaderLink,
                        "does not extend the local chain",
                    ),
                });
            }
        }
        if let Verdict::Invalid(failure) = verifier.verify_block(&block, bundle.as_ref()) {
            return Err(SyncError::VerificationFailed { height, failure });
        }
        store.commit(height, &block, bundle.as_ref())?;
    }
    match expect_frame(&mut reader)? {
        Frame::End => {}
        other => {
            return Err(violation(format!(
                "expected End, got {}",
                frame_name(&other)
            )))
        }
    }
    let _ = conn.shutdown(Shutdown::Both);
    Ok(verifier.verify_chain(store)?)
}

fn frame_name(f: &Frame) -> String {
    match f {
        Frame::GetRange { .. } => "GetRange".into(),
        Frame::Block { height, .. } => format!("Block {height}"),
        Frame::Bundle { height, .. } => format!("Bundle {height}"),
        Frame::End => "End".into(),
        Frame::Error(r) => format!("Error({r})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        for f in [
            Frame::GetRange { start: 0, end: 7 },
            Frame::Block {
                height: 3,
                bytes: vec![1, 2, 3],
            },
            Frame::Bundle {
                height: 3,
                json: Vec::new(),
            },
            Frame::End,
            Frame::Error("nope".into()),
        ] {
            let mut buf = Vec::new();
            write_frame(&mut buf, &f).unwrap();
            assert_eq!(
                u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize,
                buf.len() - 5
            );
            let mut r = &buf[..];
            assert_eq!(read_frame(&mut r).unwrap(), Some(f));
            assert_eq!(read_frame(&mut r).unwrap(), None);
        }
    }

    #[test]
    fn get_range_wire_format() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &Frame::GetRange { start: 1, end: 258 }).unwrap();
        assert_eq!(buf, [0, 0, 0, 8, 1, 0, 0, 0, 1, 0, 0, 1, 2]);
    }

    #[test]
    fn bad_frames_rejected() {
        let oversized = [&((MAX_FRAME_LEN as u32 + 1).to_be_bytes())[..], &[T_BLOCK]].concat();
        let cases: [&[u8]; 5] = [
            &oversized,
            &[0, 0, 0, 0, 0x55],
            &[0, 0, 0, 3, T_GET_RANGE, 0, 0, 0],
            &[0, 0, 0, 9, T_BLOCK, 0],
            &[0, 0],
        ];
        for c in cases {
            let mut r = c;
            assert!(
                matches!(read_frame(&mut r), Err(SyncError::ProtocolViolation(_))),
                "{c:?}"
            );
        }
    }
}
