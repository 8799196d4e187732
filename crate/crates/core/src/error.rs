use std::path::PathBuf;

use crate::field::FileId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {kind} {value:?}: {reason}")]
    InvalidName {
        kind: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("file {0} not found")]
    FileNotFound(FileId),

    #[error("blob for file {id} is corrupt: {reason}")]
    Corrupt { id: FileId, reason: String },

    #[error("file {id} is in use by section {section:?}")]
    InUse { id: FileId, section: String },

    #[error("section {0:?} already exists")]
    DuplicateSection(String),

    #[error("section {0:?} not found")]
    SectionNotFound(String),

    #[error("file {id} already belongs to section {owner:?}")]
    AlreadyAssigned { id: FileId, owner: String },

    #[error("file {id} is not a member of section {section:?}")]
    NotInSection { id: FileId, section: String },

    #[error("attribute {0:?} is already defined")]
    DuplicateAttribute(String),

    #[error("attribute {0:?} is not defined")]
    UnknownAttribute(String),

    #[error("projection needs at least one attribute")]
    EmptyProjection,

    #[error("file {0} listed twice in projection")]
    DuplicateProjectionFile(FileId),

    #[error("tree {0:?} already exists")]
    DuplicateTree(String),

    #[error("tree {0:?} not found")]
    TreeNotFound(String),

    #[error("tree {0:?} was not built automatically")]
    NotAutoTree(String),

    #[error("directory {0:?} not found")]
    DirNotFound(String),

    #[error("directory {name:?} already exists under {parent:?}")]
    DirExists { parent: String, name: String },

    #[error("directory {0:?} is not empty")]
    DirNotEmpty(String),

    #[error("cannot move {from:?} under {to:?}")]
    InvalidMove { from: String, to: String },

    #[error("file {id} is already placed in this tree at {path:?}")]
    AlreadyPlaced { id: FileId, path: String },

    #[error("file {id} is not linked in {path:?}")]
    NotLinked { id: FileId, path: String },

    #[error("unsupported catalog format version {0}")]
    UnsupportedVersion(u64),

    #[error("malformed catalog document: {0}")]
    Malformed(#[from] serde_json::Error),

    #[error("catalog violates {invariant}: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("catalog at {0} is locked by another process")]
    Locked(PathBuf),

    #[error("export target {0} is not empty")]
    TargetNotEmpty(PathBuf),

    #[error("export name clash at {0}")]
    ExportClash(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }
}
