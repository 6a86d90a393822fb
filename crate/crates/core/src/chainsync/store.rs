//! A directory of `<height>.blk` files with optional `<height>.bundle.json`
//! sidecars.
//!
//! A block and its sidecar are replaced together: both go to temporary files,
//! a `<height>.commit` marker is written, the files are renamed into place,
//! and the marker is removed. Opening a store rolls a marked commit forward
//! and discards unmarked temporaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::ChainError;
use crate::redactor::ProofBundle;
use crate::txcodec::{BlockHeader, HEADER_LEN};

const MARK_WITH_BUNDLE: &str = "bundle";
const MARK_WITHOUT_BUNDLE: &str = "none";

/// Where [`ChainStore::commit_interrupted`] stops, simulating a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitStep {
    TempFilesWritten,
    MarkerWritten,
    BundleRenamed,
    BlockRenamed,
}

#[derive(Debug)]
pub struct ChainStore {
    dir: PathBuf,
    index: BTreeMap<u64, [u8; 32]>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ChainError + '_ {
    move |source| ChainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), ChainError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

fn remove_if_present(path: &Path) -> Result<(), ChainError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

fn rename(from: &Path, to: &Path) -> Result<(), ChainError> {
    fs::rename(from, to).map_err(io_err(from))
}

fn tmp(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tmp");
    PathBuf::from(s)
}

impl ChainStore {
    /// Opens (creating if needed) the store at `dir` and finishes any
    /// interrupted commit.
    pub fn open(dir: impl AsRef<Path>) -> Result<ChainStore, ChainError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut store = ChainStore {
            dir,
            index: BTreeMap::new(),
        };
        store.recover()?;
        store.reindex()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn block_path(&self, height: u64) -> PathBuf {
        self.dir.join(format!("{height}.blk"))
    }

    pub fn bundle_path(&self, height: u64) -> PathBuf {
        self.dir.join(format!("{height}.bundle.json"))
    }

    fn marker_path(&self, height: u64) -> PathBuf {
        self.dir.join(format!("{height}.commit"))
    }

    pub fn heights(&self) -> Vec<u64> {
        self.index.keys().copied().collect()
    }

    pub fn tip(&self) -> Option<u64> {
        self.index.keys().next_back().copied()
    }

    pub fn block_hash(&self, height: u64) -> Option<[u8; 32]> {
        self.index.get(&height).copied()
    }

    pub fn read_block(&self, height: u64) -> Result<Vec<u8>, ChainError> {
        if !self.index.contains_key(&height) {
            return Err(ChainError::MissingHeight(height));
        }
        let path = self.block_path(height);
        fs::read(&path).map_err(io_err(&path))
    }

    pub fn read_bundle_text(&self, height: u64) -> Result<Option<String>, ChainError> {
        let path = self.bundle_path(height);
        match fs::read_to_string(&path) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn read_bundle(&self, height: u64) -> Result<Option<ProofBundle>, ChainError> {
        self.read_bundle_text(height)?
            .map(|t| {
                ProofBundle::from_json(&t)
                    .map_err(|e| ChainError::MalformedBundle { height, source: e })
            })
            .transpose()
    }

    /// Atomically replaces block `height` and its sidecar. `None` removes any
    /// existing sidecar.
    pub fn commit(
        &mut self,
        height: u64,
        block: &[u8],
        bundle: Option<&ProofBundle>,
    ) -> Result<(), ChainError> {
        self.commit_until(height, block, bundle, None)
    }

    /// Runs a commit only up to `stop`, leaving the store as a crash at that
    /// point would. For fault-injection tests.
    #[doc(hidden)]
    pub fn commit_interrupted(
        &mut self,
        height: u64,
        block: &[u8],
        bundle: Option<&ProofBundle>,
        stop: CommitStep,
    ) -> Result<(), ChainError> {
        self.commit_until(height, block, bundle, Some(stop))
    }

    fn commit_until(
        &mut self,
        height: u64,
        block: &[u8],
        bundle: Option<&ProofBundle>,
        stop: Option<CommitStep>,
    ) -> Result<(), ChainError> {
        let header: &[u8; HEADER_LEN] = block
            .get(..HEADER_LEN)
            .and_then(|h| h.try_into().ok())
            .ok_or(ChainError::ShortBlock(height))?;
        let (blk, bnd, marker) = (
            self.block_path(height),
            self.bundle_path(height),
            self.marker_path(height),
        );

        write_synced(&tmp(&blk), block)?;
        if let Some(b) = bundle {
            write_synced(&tmp(&bnd), b.to_json().as_bytes())?;
        }
        if stop == Some(CommitStep::TempFilesWritten) {
            return Ok(());
        }
        let mark = if bundle.is_some() {
            MARK_WITH_BUNDLE
        } else {
            MARK_WITHOUT_BUNDLE
        };
        write_synced(&tmp(&marker), mark.as_bytes())?;
        rename(&tmp(&marker), &marker)?;
        if stop == Some(CommitStep::MarkerWritten) {
            return Ok(());
        }
        self.roll_forward(height, bundle.is_some(), stop)?;
        self.index.insert(height, BlockHeader::parse(header).hash());
        Ok(())
    }

    fn roll_forward(
        &self,
        height: u64,
        with_bundle: bool,
        stop: Option<CommitStep>,
    ) -> Result<(), ChainError> {
        let (blk, bnd, marker) = (
            self.block_path(height),
            self.bundle_path(height),
            self.marker_path(height),
        );
        if with_bundle {
            if tmp(&bnd).exists() {
                rename(&tmp(&bnd), &bnd)?;
            }
        } else {
            remove_if_present(&bnd)?;
        }
        if stop == Some(CommitStep::BundleRenamed) {
            return Ok(());
        }
        if tmp(&blk).exists() {
            rename(&tmp(&blk), &blk)?;
        }
        if stop == Some(CommitStep::BlockRenamed) {
            return Ok(());
        }
        remove_if_present(&marker)
    }

    fn recover(&mut self) -> Result<(), ChainError> {
        let mut markers = Vec::new();
        let mut temporaries = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let path = entry.map_err(io_err(&self.dir))?.path();
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            if let Some(h) = name
                .strip_suffix(".commit")
                .and_then(|h| h.parse::<u64>().ok())
            {
                markers.push((h, path.clone()));
            } else if name.ends_with(".tmp") {
                temporaries.push(path.clone());
            }
        }
        for (h, marker) in markers {
            let mark = fs::read_to_string(&marker).map_err(io_err(&marker))?;
            self.roll_forward(h, mark.trim() == MARK_WITH_BUNDLE, None)?;
        }
        for t in temporaries {
            remove_if_present(&t)?;
        }
        Ok(())
    }

    fn reindex(&mut self) -> Result<(), ChainError> {
        self.index.clear();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let path = entry.map_err(io_err(&self.dir))?.path();
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            let Some(h) = name
                .strip_suffix(".blk")
                .and_then(|h| h.parse::<u64>().ok())
            else {
                continue;
            };
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let header: &[u8; HEADER_LEN] = bytes
                .get(..HEADER_LEN)
                .and_then(|b| b.try_into().ok())
                .ok_or(ChainError::ShortBlock(h))?;
            self.index.insert(h, BlockHeader::parse(header).hash());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn commit_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let blocks = fixtures::three_block_chain();
        let mut store = ChainStore::open(dir.path()).unwrap();
        for (h, b) in blocks.iter().enumerate() {
            store.commit(h as u64, b, None).unwrap();
        }
        let bundle = ProofBundle::new(store.block_hash(1).unwrap());
        store.commit(1, &blocks[1], Some(&bundle)).unwrap();
        let reopened = ChainStore::open(dir.path()).unwrap();
        assert_eq!(reopened.heights(), vec![0, 1, 2]);
        assert_eq!(reopened.read_block(2).unwrap(), blocks[2]);
        assert_eq!(reopened.read_bundle(1).unwrap(), Some(bundle));
        assert_eq!(reopened.read_bundle(0).unwrap(), None);
        assert!(matches!(
            reopened.read_block(3),
            Err(ChainError::MissingHeight(3))
        ));
        assert!(fs::read_dir(dir.path()).unwrap().count() == 4);
    }

    #[test]
    fn interrupted_commits_recover_consistently() {
        let blocks = fixtures::three_block_chain();
        let old = blocks[1].clone();
        let mut new = old.clone();
        *new.last_mut().unwrap() ^= 1;
        let bundle = ProofBundle::new([7; 32]);
        for stop in [
            CommitStep::TempFilesWritten,
            CommitStep::MarkerWritten,
            CommitStep::BundleRenamed,
            CommitStep::BlockRenamed,
        ] {
            let dir = tempfile::tempdir().unwrap();
            let mut store = ChainStore::open(dir.path()).unwrap();
            store.commit(1, &old, None).unwrap();
            store
                .commit_interrupted(1, &new, Some(&bundle), stop)
                .unwrap();
            let store = ChainStore::open(dir.path()).unwrap();
            let block = store.read_block(1).unwrap();
            let sidecar = store.read_bundle(1).unwrap();
            if stop == CommitStep::TempFilesWritten {
                assert_eq!((block, sidecar), (old.clone(), None));
            } else {
                assert_eq!((block, sidecar), (new.clone(), Some(bundle.clone())));
            }
            let leftovers: Vec<_> = fs::read_dir(dir.path())
                .unwrap()
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .filter(|n| n.ends_with(".tmp") || n.ends_with(".commit"))
                .collect();
            assert!(leftovers.is_empty(), "{stop:?}: {leftovers:?}");
        }
    }
}
