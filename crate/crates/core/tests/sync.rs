use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::thread;

use zkredact_core::chainsync::{
    fetch_and_verify, serve, write_frame, ChainStore, FailureKind, Frame, Snapshot, SyncError,
    Verdict, Verifier,
};
use zkredact_core::fixtures::{redacted_three_block_chain, RedactedChain};
use zkredact_core::redactor::ProofBundle;
use zkredact_core::zkbackend::{backend, BackendId};

fn chain() -> RedactedChain {
    redacted_three_block_chain(backend(BackendId::Dev), [8; 32])
}

fn snapshot(blocks: &[Vec<u8>], bundles: &[Option<ProofBundle>]) -> Snapshot {
    let mut s = Snapshot::default();
    for (h, b) in blocks.iter().enumerate() {
        s.insert(
            h as u64,
            b.clone(),
            bundles[h].as_ref().map(ProofBundle::to_json),
        );
    }
    s
}

fn fetch(
    snap: Snapshot,
    start: u64,
    end: u64,
) -> (
    tempfile::TempDir,
    Result<zkredact_core::chainsync::VerificationReport, SyncError>,
) {
    let server = serve(snap, "127.0.0.1:0").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = ChainStore::open(dir.path().join("client")).unwrap();
    let result = fetch_and_verify(server.addr(), start, end, &mut store, &Verifier::default());
    server.stop();
    (dir, result)
}

#[test]
fn loopback_round_trip_is_byte_identical() {
    let c = chain();
    let src_dir = tempfile::tempdir().unwrap();
    let mut src = ChainStore::open(src_dir.path()).unwrap();
    for h in 0..3 {
        src.commit(h, &c.blocks[h as usize], c.bundles[h as usize].as_ref())
            .unwrap();
    }
    let (dir, result) = fetch(Snapshot::from_store(&src).unwrap(), 0, 2);
    let report = result.unwrap();
    assert_eq!(report.verdict(1), Some(&Verdict::ValidWithRedactions(1)));
    assert!(report.all_valid());
    let mut names: Vec<_> = fs::read_dir(dir.path().join("client"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for name in names {
        let a = fs::read(src_dir.path().join(&name)).unwrap();
        let b = fs::read(dir.path().join("client").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn missing_bundle_fails_at_redacted_height() {
    let c = chain();
    let (dir, result) = fetch(snapshot(&c.blocks, &[None, None, None]), 0, 2);
    match result {
        Err(SyncError::VerificationFailed { height: 1, failure }) => {
            assert_eq!(failure.kind, FailureKind::MerkleRootMismatch)
        }
        other => panic!("{other:?}"),
    }
    let store = ChainStore::open(dir.path().join("client")).unwrap();
    assert_eq!(store.heights(), vec![0]);
}

#[test]
fn mismatched_bundle_is_protocol_violation() {
    let c = chain();
    let mut wrong = c.bundles[1].clone().unwrap();
    wrong.block_hash = [0xee; 32];
    let (_dir, result) = fetch(snapshot(&c.blocks, &[None, Some(wrong), None]), 0, 2);
    assert!(
        matches!(result, Err(SyncError::ProtocolViolation(_))),
        "{result:?}"
    );
}

#[test]
fn unavailable_height_and_partial_range() {
    let c = chain();
    let (_dir, result) = fetch(snapshot(&c.blocks, &c.bundles), 0, 5);
    assert!(
        matches!(result, Err(SyncError::ProtocolViolation(ref m)) if m.contains("not available")),
        "{result:?}"
    );
    let (_dir, result) = fetch(snapshot(&c.blocks, &c.bundles), 0, 1);
    assert_eq!(result.unwrap().blocks.len(), 2);
}

#[test]
fn misbehaving_peer() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let peer = thread::spawn(move || {
        let (mut conn, _) = listener.accept().unwrap();
        write_frame(&mut conn, &Frame::End).unwrap();
        conn.flush().unwrap();
    });
    let dir = tempfile::tempdir().unwrap();
    let mut store = ChainStore::open(dir.path()).unwrap();
    let result = fetch_and_verify(addr, 0, 0, &mut store, &Verifier::default());
    assert!(
        matches!(result, Err(SyncError::ProtocolViolation(_))),
        "{result:?}"
    );
    peer.join().unwrap();

    let closed = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let result = fetch_and_verify(closed, 0, 0, &mut store, &Verifier::default());
    assert!(
        matches!(result, Err(SyncError::ConnectionFailed(_))),
        "{result:?}"
    );
}

#[test]
fn concurrent_clients() {
    let c = chain();
    let server = serve(snapshot(&c.blocks, &c.bundles), "127.0.0.1:0").unwrap();
    let addr = server.addr();
    let clients: Vec<_> = (0..4)
        .map(|_| {
            thread::spawn(move || {
                let dir = tempfile::tempdir().unwrap();
                let mut store = ChainStore::open(dir.path()).unwrap();
                fetch_and_verify(addr, 0, 2, &mut store, &Verifier::default())
                    .unwrap()
                    .all_valid()
            })
        })
        .collect();
    assert!(clients.into_iter().all(|c| c.join().unwrap()));
}
