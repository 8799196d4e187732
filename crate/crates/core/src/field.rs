//! The file field: a flat, deduplicated list of stored files, each
//! identified by a unique number that is never reused.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::exec::Strategy;

pub const BLOB_DIR: &str = "blobs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FileId(pub u64);

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for FileId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(FileId)
    }
}

/// SHA-256 of a blob's content.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest([u8; 32]);

impl Digest {
    pub fn of(content: &[u8]) -> Self {
        Digest(Sha256::digest(content).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses exactly 64 lowercase hex characters.
    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return None;
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom("digest must be 64 lowercase hex chars"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub id: FileId,
    pub digest: Digest,
    pub size: u64,
    pub ingest_name: String,
    pub blob_ref: String,
}

/// Relative location of a blob: `blobs/<first two hex chars>/<digest>`.
pub fn blob_ref(digest: &Digest) -> String {
    let hex = digest.to_hex();
    format!("{BLOB_DIR}/{}/{hex}", &hex[..2])
}

/// Checks a short file name: non-empty, no path separators.
pub fn validate_short_name(name: &str) -> Result<()> {
    let reason = if name.is_empty() {
        "must not be empty"
    } else if name.contains(['/', '\\']) {
        "must not contain path separators"
    } else if name == "." || name == ".." {
        "must not be a relative path component"
    } else if name.contains('\0') {
        "must not contain NUL"
    } else {
        return Ok(());
    };
    Err(Error::InvalidName {
        kind: "file name",
        value: name.to_owned(),
        reason,
    })
}

/// Digests of every item's content, in input order.
pub fn digest_all<B, N>(items: &[(B, N)], strategy: Strategy) -> Vec<Digest>
where
    B: AsRef<[u8]> + Sync,
    N: Sync,
{
    strategy.map(items, |(content, _)| Digest::of(content.as_ref()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub missing: Vec<FileId>,
    /// Entries whose blob no longer hashes to the recorded digest.
    pub mismatched: Vec<(FileId, Digest)>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.mismatched.is_empty()
    }
}

/// Content-addressed blob directory under a catalog root.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, digest: &Digest) -> PathBuf {
        self.root.join(blob_ref(digest))
    }

    /// Writes through a temp file and renames into place. Stored blobs are
    /// marked read-only so that hard links handed out by export cannot be
    /// edited in place.
    fn write(&self, digest: &Digest, content: &[u8]) -> io::Result<()> {
        let path = self.path_of(digest);
        let dir = path.parent().expect("blob path has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(content)?;
        tmp.as_file().sync_all()?;
        let mut perms = tmp.as_file().metadata()?.permissions();
        perms.set_readonly(true);
        tmp.as_file().set_permissions(perms)?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    fn remove(&self, digest: &Digest) -> io::Result<()> {
        let path = self.path_of(digest);
        match fs::metadata(&path) {
            Ok(meta) => {
                let mut perms = meta.permissions();
                #[allow(clippy::permissions_set_readonly_false)]
                perms.set_readonly(false);
                fs::set_permissions(&path, perms)?;
                fs::remove_file(&path)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FileField {
    store: BlobStore,
    next_id: FileId,
    entries: BTreeMap<FileId, FileEntry>,
    by_digest: HashMap<Digest, FileId>,
}

impl FileField {
    pub fn new(store: BlobStore) -> Self {
        Self {
            store,
            next_id: FileId(1),
            entries: BTreeMap::new(),
            by_digest: HashMap::new(),
        }
    }

    /// Rebuilds a field from persisted parts. The caller has already
    /// validated id and digest uniqueness.
    pub(crate) fn from_parts(store: BlobStore, next_id: FileId, entries: Vec<FileEntry>) -> Self {
        let by_digest = entries.iter().map(|e| (e.digest, e.id)).collect();
        let entries = entries.into_iter().map(|e| (e.id, e)).collect();
        Self {
            store,
            next_id,
            entries,
            by_digest,
        }
    }

    pub fn store(&self) -> &BlobStore {
        &self.store
    }

    pub fn next_id(&self) -> FileId {
        self.next_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: FileId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn lookup(&self, digest: &Digest) -> Option<FileId> {
        self.by_digest.get(digest).copied()
    }

    /// Stores `content` unless an entry with the same digest exists, in which
    /// case the existing id comes back with `was_duplicate = true`.
    pub fn add_file(&mut self, content: &[u8], ingest_name: &str) -> Result<(FileId, bool)> {
        validate_short_name(ingest_name)?;
        self.insert_hashed(Digest::of(content), content, ingest_name)
    }

    /// Batch form of [`add_file`](Self::add_file): digests are computed with
    /// `strategy`, insertion is sequential in input order. Either every item
    /// is applied or none is.
    pub fn add_files<B, N>(&mut self, items: &[(B, N)], strategy: Strategy) -> Result<Vec<(FileId, bool)>>
    where
        B: AsRef<[u8]> + Sync,
        N: AsRef<str> + Sync,
    {
        for (_, name) in items {
            validate_short_name(name.as_ref())?;
        }
        let digests = digest_all(items, strategy);

        let saved_next = self.next_id;
        let mut out = Vec::with_capacity(items.len());
        for ((content, name), digest) in items.iter().zip(digests) {
            match self.insert_hashed(digest, content.as_ref(), name.as_ref()) {
                Ok(r) => out.push(r),
                Err(e) => {
                    for (id, dup) in out {
                        if !dup {
                            // best effort; the original error is what matters
                            let _ = self.remove_unchecked(id);
                        }
                    }
                    self.next_id = saved_next;
                    return Err(e);
                }
            }
        }
        Ok(out)
    }

    fn insert_hashed(&mut self, digest: Digest, content: &[u8], ingest_name: &str) -> Result<(FileId, bool)> {
        if let Some(id) = self.lookup(&digest) {
            return Ok((id, true));
        }
        self.store.write(&digest, content)?;
        let id = self.next_id;
        self.next_id = FileId(id.0 + 1);
        self.by_digest.insert(digest, id);
        self.entries.insert(
            id,
            FileEntry {
                id,
                digest,
                size: content.len() as u64,
                ingest_name: ingest_name.to_owned(),
                blob_ref: blob_ref(&digest),
            },
        );
        Ok((id, false))
    }

    pub fn get_file(&self, id: FileId) -> Result<&FileEntry> {
        self.entries.get(&id).ok_or(Error::FileNotFound(id))
    }

    /// Returns the stored bytes, checking them against the recorded digest.
    pub fn read_content(&self, id: FileId) -> Result<Vec<u8>> {
        let entry = self.get_file(id)?;
        let bytes = match fs::read(self.store.path_of(&entry.digest)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(Error::Corrupt {
                    id,
                    reason: "blob missing".into(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        if Digest::of(&bytes) != entry.digest {
            return Err(Error::Corrupt {
                id,
                reason: "digest mismatch".into(),
            });
        }
        Ok(bytes)
    }

    /// Removes an entry and its blob. Section membership is checked by the
    /// catalog before this is reached.
    pub(crate) fn remove_unchecked(&mut self, id: FileId) -> Result<FileEntry> {
        let entry = self.entries.get(&id).ok_or(Error::FileNotFound(id))?;
        self.store.remove(&entry.digest)?;
        let entry = self.entries.remove(&id).expect("present");
        self.by_digest.remove(&entry.digest);
        Ok(entry)
    }

    /// Entries in ascending id order.
    pub fn list_files(&self) -> impl ExactSizeIterator<Item = &FileEntry> {
        self.entries.values()
    }

    /// Re-hashes every blob. Read-only; problems are reported, not raised.
    pub fn verify_field(&self, strategy: Strategy) -> VerifyReport {
        enum Row {
            Ok,
            Missing(FileId),
            Mismatch(FileId, Digest),
        }
        let entries: Vec<&FileEntry> = self.entries.values().collect();
        let rows = strategy.map(&entries, |e| match fs::read(self.store.path_of(&e.digest)) {
            Ok(bytes) => {
                let actual = Digest::of(&bytes);
                if actual == e.digest {
                    Row::Ok
                } else {
                    Row::Mismatch(e.id, actual)
                }
            }
            Err(_) => Row::Missing(e.id),
        });
        let mut report = VerifyReport::default();
        for row in rows {
            match row {
                Row::Ok => {}
                Row::Missing(id) => report.missing.push(id),
                Row::Mismatch(id, d) => report.mismatched.push((id, d)),
            }
        }
        report
    }
}
