//! A deduplicated flat file field with any number of virtual directory
//! trees built over it.
//!
//! Every distinct content is stored once and gets a permanent [`FileId`].
//! Files are grouped into disjoint [`Section`]s, each with its own attribute
//! schema and matrix. Virtual trees reference files by id only, so the same
//! file can appear in many independent hierarchies at once. Trees are made
//! by hand or built automatically from an ordered list of attributes.

pub mod catalog;
pub mod error;
pub mod exec;
pub mod export;
pub mod field;
pub mod persist;
pub mod render;
pub mod section;
pub mod vtree;

pub use catalog::{Catalog, CatalogLock, CATALOG_FILE, LOCK_FILE};
pub use error::{Error, Result};
pub use exec::Strategy;
pub use export::{export_tree, ExportReport, LinkMode};
pub use field::{Digest, FileEntry, FileField, FileId, VerifyReport};
pub use render::render_tree;
pub use section::{AttributeMatrix, AttributeName, AttributeRow, AttributeValue, Projection, Section};
pub use vtree::{BuildReport, DirView, MissingPolicy, Origin, VDir, VPath, VTree, WalkEntry, DEFAULT_BUCKET_LABEL};
