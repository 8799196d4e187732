//! A catalog ties one file field to its sections and lives in a directory:
//!
//! ```text
//! <root>/catalog.json
//! <root>/catalog.lock
//! <root>/blobs/<xx>/<digest>
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions, TryLockError};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::field::{BlobStore, FileEntry, FileField, FileId, VerifyReport, BLOB_DIR};
use crate::persist;
use crate::section::Section;

pub const CATALOG_FILE: &str = "catalog.json";
pub const LOCK_FILE: &str = "catalog.lock";

#[derive(Debug, Clone)]
pub struct Catalog {
    root: PathBuf,
    pub(crate) field: FileField,
    pub(crate) sections: BTreeMap<String, Section>,
    owners: HashMap<FileId, String>,
}

impl PartialEq for Catalog {
    /// Model equality; the root directory is not part of the model.
    fn eq(&self, other: &Self) -> bool {
        self.field.next_id() == other.field.next_id()
            && self.field.list_files().eq(other.field.list_files())
            && self.sections == other.sections
    }
}

impl Catalog {
    /// In-memory catalog rooted at `root`; nothing is written until a blob is
    /// added or [`save`](Self::save) is called.
    pub fn new(root: impl Into<PathBuf>) -> Self {
        let root = root.into();
        Catalog {
            field: FileField::new(BlobStore::new(&root)),
            root,
            sections: BTreeMap::new(),
            owners: HashMap::new(),
        }
    }

    pub(crate) fn from_parts(root: PathBuf, field: FileField, sections: BTreeMap<String, Section>) -> Self {
        let owners = sections
            .values()
            .flat_map(|s| s.file_ids().iter().map(|id| (*id, s.name().to_owned())))
            .collect();
        Catalog {
            root,
            field,
            sections,
            owners,
        }
    }

    /// Creates the catalog directory layout and an empty `catalog.json`.
    pub fn init(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(BLOB_DIR))?;
        if root.join(CATALOG_FILE).exists() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} already exists", root.join(CATALOG_FILE).display()),
            )
            .into());
        }
        let catalog = Catalog::new(root);
        catalog.save()?;
        Ok(catalog)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        persist::load(&root.join(CATALOG_FILE), &root)
    }

    pub fn save(&self) -> Result<()> {
        persist::save(self, &self.root.join(CATALOG_FILE))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn field(&self) -> &FileField {
        &self.field
    }

    // --- file field ---

    pub fn add_file(&mut self, content: &[u8], ingest_name: &str) -> Result<(FileId, bool)> {
        self.field.add_file(content, ingest_name)
    }

    pub fn add_files<B, N>(&mut self, items: &[(B, N)]) -> Result<Vec<(FileId, bool)>>
    where
        B: AsRef<[u8]> + Sync,
        N: AsRef<str> + Sync,
    {
        self.field.add_files(items, Strategy::default())
    }

    pub fn get_file(&self, id: FileId) -> Result<&FileEntry> {
        self.field.get_file(id)
    }

    pub fn read_content(&self, id: FileId) -> Result<Vec<u8>> {
        self.field.read_content(id)
    }

    pub fn list_files(&self) -> impl ExactSizeIterator<Item = &FileEntry> {
        self.field.list_files()
    }

    pub fn verify_field(&self) -> VerifyReport {
        self.field.verify_field(Strategy::default())
    }

    /// Refused while any section holds the id.
    pub fn remove_file(&mut self, id: FileId) -> Result<FileEntry> {
        self.field.get_file(id)?;
        if let Some(section) = self.owners.get(&id) {
            return Err(Error::InUse {
                id,
                section: section.clone(),
            });
        }
        self.field.remove_unchecked(id)
    }

    // --- sections ---

    pub fn create_section(&mut self, name: &str) -> Result<&mut Section> {
        if self.sections.contains_key(name) {
            return Err(Error::DuplicateSection(name.to_owned()));
        }
        let section = Section::new(name)?;
        Ok(self.sections.entry(name.to_owned()).or_insert(section))
    }

    pub fn sections(&self) -> impl Iterator<Item = &Section> {
        self.sections.values()
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .get(name)
            .ok_or_else(|| Error::SectionNotFound(name.to_owned()))
    }

    pub fn section_mut(&mut self, name: &str) -> Result<&mut Section> {
        self.sections
            .get_mut(name)
            .ok_or_else(|| Error::SectionNotFound(name.to_owned()))
    }

    pub fn owner_of(&self, id: FileId) -> Option<&str> {
        self.owners.get(&id).map(String::as_str)
    }

    /// Adds a file to a section. A file belongs to at most one section.
    pub fn assign_file(&mut self, section: &str, id: FileId) -> Result<()> {
        self.field.get_file(id)?;
        if let Some(owner) = self.owners.get(&id) {
            return Err(Error::AlreadyAssigned {
                id,
                owner: owner.clone(),
            });
        }
        let s = self
            .sections
            .get_mut(section)
            .ok_or_else(|| Error::SectionNotFound(section.to_owned()))?;
        s.push_member(id);
        self.owners.insert(id, section.to_owned());
        Ok(())
    }
}

/// Exclusive advisory lock on `catalog.lock`, released on drop.
#[derive(Debug)]
pub struct CatalogLock {
    _file: File,
}

impl CatalogLock {
    /// Fails fast if another process holds the lock.
    pub fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)?;
        match file.try_lock() {
            Ok(()) => Ok(CatalogLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(Error::Locked(root.to_path_buf())),
            Err(TryLockError::Error(e)) => Err(e.into()),
        }
    }
}
