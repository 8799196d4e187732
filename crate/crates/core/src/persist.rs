//! On-disk catalog document.
//!
//! The document is canonical JSON: object keys sorted, arrays in model
//! order, two-space indent, trailing newline. Saving is a pure function of
//! the model, so `save ∘ load ∘ save` is byte-identical. Loading re-checks
//! every model invariant and names the first one that fails.
//!
//! A `checksum` key holds the SHA-256 of the canonical document without that
//! key, so edits that still parse are caught as well.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::field::{blob_ref, Digest, validate_short_name, BlobStore, FileEntry, FileField, FileId};
use crate::section::{AttributeName, AttributeRow, Section};
use crate::vtree::{Origin, VTree};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDocument {
    format_version: u64,
    next_id: FileId,
    files: Vec<FileEntry>,
    sections: Vec<SectionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionRecord {
    name: String,
    file_ids: Vec<FileId>,
    schema: Vec<AttributeName>,
    rows: Vec<RowRecord>,
    trees: Vec<VTree>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowRecord {
    id: FileId,
    cells: AttributeRow,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

/// Serializes the catalog model to canonical JSON.
pub fn to_canonical_json(catalog: &Catalog) -> String {
    let doc = CatalogDocument {
        format_version: FORMAT_VERSION,
        next_id: catalog.field.next_id(),
        files: catalog.field.list_files().cloned().collect(),
        sections: catalog
            .sections
            .values()
            .map(|s| SectionRecord {
                name: s.name().to_owned(),
                file_ids: s.file_ids().to_vec(),
                schema: s.schema().to_vec(),
                rows: s
                    .file_ids()
                    .iter()
                    .map(|id| RowRecord {
                        id: *id,
                        cells: s.row(*id).expect("member row").clone(),
                    })
                    .collect(),
                trees: s.trees().cloned().collect(),
            })
            .collect(),
    };
    // serde_json's default map is a BTreeMap, which sorts keys.
    let mut value = serde_json::to_value(&doc).expect("catalog model serializes");
    let checksum = body_checksum(&value);
    value
        .as_object_mut()
        .expect("document is an object")
        .insert(CHECKSUM_KEY.to_owned(), checksum.into());
    render(&value)
}

const CHECKSUM_KEY: &str = "checksum";

fn render(value: &serde_json::Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("value serializes");
    out.push('\n');
    out
}

fn body_checksum(value: &serde_json::Value) -> String {
    Digest::of(render(value).as_bytes()).to_hex()
}

/// Parses and validates a document. `root` is the catalog directory the
/// blob references resolve against.
pub fn from_json(text: &str, root: impl Into<PathBuf>) -> Result<Catalog> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(probe.format_version));
    }
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    let stored = match value.as_object_mut().and_then(|o| o.remove(CHECKSUM_KEY)) {
        Some(serde_json::Value::String(s)) => s,
        _ => return Err(Error::invariant("document checksum", "missing checksum")),
    };
    if stored != body_checksum(&value) {
        return Err(Error::invariant("document checksum", "content does not match checksum"));
    }
    let doc: CatalogDocument = serde_json::from_value(value)?;
    let root = root.into();

    // file field
    let mut ids = HashSet::new();
    let mut digests = HashSet::new();
    for f in &doc.files {
        if f.id.0 == 0 {
            return Err(Error::invariant("id positivity", "file id 0"));
        }
        if !ids.insert(f.id) {
            return Err(Error::invariant("id uniqueness", format!("file {}", f.id)));
        }
        if f.id >= doc.next_id {
            return Err(Error::invariant(
                "next id",
                format!("file {} is not below next_id {}", f.id, doc.next_id),
            ));
        }
        if !digests.insert(f.digest) {
            return Err(Error::invariant("digest uniqueness", format!("file {} digest {}", f.id, f.digest)));
        }
        if f.blob_ref != blob_ref(&f.digest) {
            return Err(Error::invariant("blob reference", format!("file {} blob_ref {:?}", f.id, f.blob_ref)));
        }
        if validate_short_name(&f.ingest_name).is_err() {
            return Err(Error::invariant("ingest name", format!("file {} name {:?}", f.id, f.ingest_name)));
        }
    }
    if doc.next_id.0 == 0 {
        return Err(Error::invariant("next id", "next_id must be at least 1"));
    }
    if doc.files.windows(2).any(|w| w[0].id >= w[1].id) {
        return Err(Error::invariant("file order", "files must be in ascending id order"));
    }

    // sections
    let mut owners: HashMap<FileId, &str> = HashMap::new();
    let mut sections = BTreeMap::new();
    let mut prev_name: Option<&str> = None;
    for rec in &doc.sections {
        if rec.name.is_empty() {
            return Err(Error::invariant("section name", "empty section name"));
        }
        if let Some(prev) = prev_name {
            if prev == rec.name {
                return Err(Error::invariant("section name uniqueness", rec.name.clone()));
            }
            if prev > rec.name.as_str() {
                return Err(Error::invariant("section order", rec.name.clone()));
            }
        }
        prev_name = Some(&rec.name);

        for &id in &rec.file_ids {
            if !ids.contains(&id) {
                return Err(Error::invariant("section membership", format!("section {:?} file {id}", rec.name)));
            }
            if let Some(other) = owners.insert(id, &rec.name) {
                return Err(Error::invariant(
                    "section disjointness",
                    format!("file {id} in {other:?} and {:?}", rec.name),
                ));
            }
        }

        let mut attrs = HashSet::new();
        for a in &rec.schema {
            if !attrs.insert(a) {
                return Err(Error::invariant("schema uniqueness", format!("section {:?} attribute {a:?}", rec.name)));
            }
        }

        if rec.rows.len() != rec.file_ids.len()
            || rec.rows.iter().zip(&rec.file_ids).any(|(r, id)| r.id != *id)
        {
            return Err(Error::invariant(
                "row rectangularity",
                format!("section {:?} rows do not match members", rec.name),
            ));
        }
        let mut rows = BTreeMap::new();
        for r in &rec.rows {
            if r.cells.0.len() != rec.schema.len() {
                return Err(Error::invariant(
                    "row rectangularity",
                    format!("section {:?} file {} has {} cells for {} attributes", rec.name, r.id, r.cells.0.len(), rec.schema.len()),
                ));
            }
            rows.insert(r.id, r.cells.clone());
        }

        let members: HashSet<FileId> = rec.file_ids.iter().copied().collect();
        let mut trees = BTreeMap::new();
        let mut prev_tree: Option<&str> = None;
        for t in &rec.trees {
            if let Some(prev) = prev_tree {
                if prev >= t.name() {
                    return Err(Error::invariant(
                        "tree name uniqueness",
                        format!("section {:?} tree {:?}", rec.name, t.name()),
                    ));
                }
            }
            prev_tree = Some(t.name());
            t.check(|id| members.contains(&id))?;
            if let Origin::Auto { projection, missing } = t.origin() {
                let known = projection.attributes.iter().all(|a| rec.schema.contains(a));
                let mut seen = HashSet::new();
                let distinct = projection.attributes.iter().all(|a| seen.insert(a));
                let mut seen = HashSet::new();
                let files_ok = projection.file_ids.iter().all(|id| members.contains(id) && seen.insert(*id));
                if projection.attributes.is_empty() || !known || !distinct || !files_ok || missing.validate().is_err() {
                    return Err(Error::invariant(
                        "origin projection",
                        format!("section {:?} tree {:?}", rec.name, t.name()),
                    ));
                }
            }
            trees.insert(t.name().to_owned(), t.clone());
        }

        sections.insert(
            rec.name.clone(),
            Section::from_parts(rec.name.clone(), rec.file_ids.clone(), rec.schema.clone(), rows, trees),
        );
    }

    let field = FileField::from_parts(BlobStore::new(&root), doc.next_id, doc.files);
    Ok(Catalog::from_parts(root, field, sections))
}

/// Atomically replaces `path` with the canonical document.
pub fn save(catalog: &Catalog, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(to_canonical_json(catalog).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn load(path: &Path, root: &Path) -> Result<Catalog> {
    let text = fs::read_to_string(path)?;
    from_json(&text, root)
}
