//! Materializes a virtual tree as a real directory hierarchy. Files are hard
//! links to their blobs where the platform allows it, byte copies otherwise.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{FileField, FileId};
use crate::vtree::VTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    HardLink,
    Copy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedFile {
    pub id: FileId,
    pub path: PathBuf,
    pub mode: LinkMode,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportReport {
    /// Directories created below the target, the target itself excluded.
    pub dirs: usize,
    pub files: Vec<ExportedFile>,
}

impl ExportReport {
    pub fn count(&self, mode: LinkMode) -> usize {
        self.files.iter().filter(|f| f.mode == mode).count()
    }
}

/// `report.txt` with id 7 becomes `report~7.txt`; names without an
/// extension (or dotfiles) get the suffix at the end.
pub fn disambiguate(name: &str, id: FileId) -> String {
    match name.rfind('.') {
        Some(dot) if dot > 0 => format!("{}~{id}{}", &name[..dot], &name[dot..]),
        _ => format!("{name}~{id}"),
    }
}

/// Exports `tree` into `target`, which must be absent or an empty directory.
pub fn export_tree(tree: &VTree, field: &FileField, target: &Path) -> Result<ExportReport> {
    match fs::read_dir(target) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(Error::TargetNotEmpty(target.to_path_buf()));
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => fs::create_dir_all(target)?,
        Err(e) => return Err(e.into()),
    }

    let mut report = ExportReport::default();
    for entry in tree.walk() {
        let dir_path = entry
            .path
            .components()
            .iter()
            .fold(target.to_path_buf(), |p, c| p.join(c));
        if !entry.path.is_root() {
            fs::create_dir(&dir_path)?;
            report.dirs += 1;
        }

        let node = tree.dir(&entry.path)?;
        let mut taken: HashSet<String> = node.children.iter().map(|c| c.name.clone()).collect();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let entries = entry
            .file_refs
            .iter()
            .map(|id| field.get_file(*id).map(|e| (*id, e)))
            .collect::<Result<Vec<_>>>()?;
        for (_, e) in &entries {
            *counts.entry(e.ingest_name.as_str()).or_default() += 1;
        }
        for (id, e) in entries {
            let name = if counts[e.ingest_name.as_str()] > 1 {
                disambiguate(&e.ingest_name, id)
            } else {
                e.ingest_name.clone()
            };
            let dest = dir_path.join(&name);
            if !taken.insert(name) {
                return Err(Error::ExportClash(dest));
            }
            let blob = field.store().path_of(&e.digest);
            let mode = match fs::hard_link(&blob, &dest) {
                Ok(()) => LinkMode::HardLink,
                Err(_) => {
                    fs::copy(&blob, &dest)?;
                    let mut perms = fs::metadata(&dest)?.permissions();
                    #[allow(clippy::permissions_set_readonly_false)]
                    perms.set_readonly(false);
                    fs::set_permissions(&dest, perms)?;
                    LinkMode::Copy
                }
            };
            report.files.push(ExportedFile { id, path: dest, mode });
        }
    }
    Ok(report)
}
