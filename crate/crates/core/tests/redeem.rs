use zkredact_core::chainsync::{
    legacy_sighash_all, sighash_redacted, verify_redeem_redacted, FailureKind, SimulationKey,
};
use zkredact_core::fixtures::redeem_fixture;
use zkredact_core::redactor::prove_redaction;
use zkredact_core::txcodec::{script, ByteInterval};
use zkredact_core::zkbackend::{backend, BackendId};

#[test]
fn redacted_dead_branch_redeems_with_tweaked_signature() {
    let dev = backend(BackendId::Dev);
    let fx = redeem_fixture(b"personal data that must go", dev, [1; 32]);
    let key = SimulationKey::from_seed([0x42; 32]).unwrap();
    let msg = sighash_redacted(&fx.original_script, &fx.inp_script);
    let sig = key.sign_digest(&msg);
    assert!(fx.redacted_script != fx.original_script);
    verify_redeem_redacted(
        &fx.redacted_script,
        &fx.record,
        &fx.inp_script,
        &sig,
        &key.public_key(),
    )
    .unwrap();

    let legacy = legacy_sighash_all(&fx.spend, 0, &fx.original_script).unwrap();
    let legacy_sig = key.sign_digest(&legacy);
    let err = verify_redeem_redacted(
        &fx.redacted_script,
        &fx.record,
        &fx.inp_script,
        &legacy_sig,
        &key.public_key(),
    )
    .unwrap_err();
    assert_eq!(err.kind, FailureKind::SignatureRejected);

    let other = SimulationKey::from_seed([0x43; 32]).unwrap();
    assert!(verify_redeem_redacted(
        &fx.redacted_script,
        &fx.record,
        &fx.inp_script,
        &sig,
        &other.public_key()
    )
    .is_err());
    assert!(verify_redeem_redacted(
        &fx.redacted_script,
        &fx.record,
        b"other input",
        &sig,
        &key.public_key()
    )
    .is_err());
}

#[test]
fn interval_over_endif_is_rejected() {
    let dev = backend(BackendId::Dev);
    let fx = redeem_fixture(b"abc", dev, [2; 32]);
    let payload = script::dead_branch_op_return_payloads(&fx.original_script).unwrap()[0];
    let endif = ByteInterval::new(payload.start, payload.end + 1).unwrap();
    assert_eq!(fx.original_script[payload.end], script::OP_ENDIF);
    let (redacted, record) =
        prove_redaction(&fx.original_script, &[endif], 0, None, dev, [3; 32]).unwrap();
    let key = SimulationKey::from_seed([0x42; 32]).unwrap();
    let sig = key.sign_digest(&sighash_redacted(&fx.original_script, &fx.inp_script));
    let err = verify_redeem_redacted(&redacted, &record, &fx.inp_script, &sig, &key.public_key())
        .unwrap_err();
    assert_eq!(err.kind, FailureKind::NotAllowedRegion);
}

#[test]
fn tampered_record_is_rejected() {
    let dev = backend(BackendId::Dev);
    let fx = redeem_fixture(b"abc", dev, [4; 32]);
    let key = SimulationKey::from_seed([0x42; 32]).unwrap();
    let sig = key.sign_digest(&sighash_redacted(&fx.original_script, &fx.inp_script));
    let mut record = fx.record.clone();
    record.inner_digest[5] ^= 1;
    assert!(verify_redeem_redacted(
        &fx.redacted_script,
        &record,
        &fx.inp_script,
        &sig,
        &key.public_key()
    )
    .is_err());
    let mut script = fx.redacted_script.clone();
    script[0] = script::OP_0;
    assert!(
        verify_redeem_redacted(&script, &fx.record, &fx.inp_script, &sig, &key.public_key())
            .is_err()
    );
}

#[test]
fn legacy_sighash_vector() {
    // Spend of one input into one output; digest computed independently
    // from the serialized preimage.
    let fx = redeem_fixture(b"abc", backend(BackendId::Dev), [5; 32]);
    let script_code = vec![0x51];
    let mut pre = Vec::new();
    pre.extend_from_slice(&1i32.to_le_bytes());
    pre.push(1);
    pre.extend_from_slice(&[0x33; 32]);
    pre.extend_from_slice(&0u32.to_le_bytes());
    pre.push(1);
    pre.push(0x51);
    pre.extend_from_slice(&u32::MAX.to_le_bytes());
    pre.push(1);
    pre.extend_from_slice(&40_000u64.to_le_bytes());
    pre.push(25);
    pre.extend_from_slice(&fx.inp_script[fx.inp_script.len() - 4 - 25..fx.inp_script.len() - 4]);
    pre.extend_from_slice(&0u32.to_le_bytes());
    pre.extend_from_slice(&1u32.to_le_bytes());
    let expect = zkredact_core::txcodec::double_sha256(&pre);
    assert_eq!(legacy_sighash_all(&fx.spend, 0, &script_code), Some(expect));
    assert_eq!(legacy_sighash_all(&fx.spend, 1, &script_code), None);
}
