//! Local deletion of data from Bitcoin-format transactions, with transparent
//! proofs that the redacted chain still matches its Merkle roots.

pub mod chainsync;
pub mod fixtures;
pub mod hashchain;
pub mod redactor;
pub mod txcodec;
pub mod zkbackend;
