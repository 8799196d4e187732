//! Sections partition the file field. Each carries its own attribute schema,
//! the attribute matrix over its members, and its virtual trees.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::field::FileId;
use crate::vtree::{self, BuildReport, DirView, MissingPolicy, Origin, VPath, VTree, WalkEntry};

/// Labels become path components, so they must be usable as one.
pub(crate) fn validate_label(kind: &'static str, value: &str) -> Result<()> {
    let reason = if value.is_empty() {
        "must not be empty"
    } else if value.contains('/') {
        "must not contain '/'"
    } else if value == "." || value == ".." {
        "must not be a relative path component"
    } else if value.contains('\0') {
        "must not contain NUL"
    } else {
        return Ok(());
    };
    Err(Error::InvalidName {
        kind,
        value: value.to_owned(),
        reason,
    })
}

macro_rules! label_type {
    ($(#[$m:meta])* $name:ident, $kind:literal) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self> {
                let value = value.into();
                validate_label($kind, &value)?;
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $name::new(s).map_err(serde::de::Error::custom)
            }
        }
    };
}

label_type!(
    /// Name of a classification facet within a section's schema.
    AttributeName,
    "attribute name"
);
label_type!(
    /// A cell value. Compared byte-for-byte; no numeric interpretation.
    AttributeValue,
    "attribute value"
);

pub type Cell = Option<AttributeValue>;

/// One row of the matrix: one cell per schema entry, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeRow(pub Vec<Cell>);

/// Rectangular snapshot of attribute values: rows are files, columns are
/// attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeMatrix {
    pub file_ids: Vec<FileId>,
    pub attributes: Vec<AttributeName>,
    pub cells: Vec<Vec<Cell>>,
}

impl AttributeMatrix {
    pub fn dims(&self) -> (usize, usize) {
        (self.file_ids.len(), self.attributes.len())
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&AttributeValue> {
        self.cells[row][col].as_ref()
    }
}

/// An ordered choice of attributes and files drawn from a section's matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Projection {
    pub attributes: Vec<AttributeName>,
    pub file_ids: Vec<FileId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    name: String,
    file_ids: Vec<FileId>,
    schema: Vec<AttributeName>,
    rows: BTreeMap<FileId, AttributeRow>,
    trees: BTreeMap<String, VTree>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidName {
                kind: "section name",
                value: name,
                reason: "must not be empty",
            });
        }
        Ok(Self {
            name,
            file_ids: Vec::new(),
            schema: Vec::new(),
            rows: BTreeMap::new(),
            trees: BTreeMap::new(),
        })
    }

    /// Reassembles a section from persisted parts without checking them;
    /// persistence validates before calling this.
    pub(crate) fn from_parts(
        name: String,
        file_ids: Vec<FileId>,
        schema: Vec<AttributeName>,
        rows: BTreeMap<FileId, AttributeRow>,
        trees: BTreeMap<String, VTree>,
    ) -> Self {
        Self {
            name,
            file_ids,
            schema,
            rows,
            trees,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Members in assignment order.
    pub fn file_ids(&self) -> &[FileId] {
        &self.file_ids
    }

    pub fn schema(&self) -> &[AttributeName] {
        &self.schema
    }

    pub fn contains(&self, id: FileId) -> bool {
        self.rows.contains_key(&id)
    }

    pub fn row(&self, id: FileId) -> Option<&AttributeRow> {
        self.rows.get(&id)
    }

    pub fn trees(&self) -> impl Iterator<Item = &VTree> {
        self.trees.values()
    }

    pub fn tree(&self, name: &str) -> Result<&VTree> {
        self.trees
            .get(name)
            .ok_or_else(|| Error::TreeNotFound(name.to_owned()))
    }

    fn tree_mut(&mut self, name: &str) -> Result<&mut VTree> {
        self.trees
            .get_mut(name)
            .ok_or_else(|| Error::TreeNotFound(name.to_owned()))
    }

    /// Appends a member with an all-unset row. Cross-section exclusivity is
    /// the catalog's job.
    pub(crate) fn push_member(&mut self, id: FileId) {
        debug_assert!(!self.contains(id));
        self.file_ids.push(id);
        self.rows
            .insert(id, AttributeRow(vec![None; self.schema.len()]));
    }

    fn require_member(&self, id: FileId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::NotInSection {
                id,
                section: self.name.clone(),
            })
        }
    }

    fn column(&self, attr: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|a| a.as_str() == attr)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_owned()))
    }

    pub fn define_attribute(&mut self, attr: AttributeName) -> Result<()> {
        if self.schema.contains(&attr) {
            return Err(Error::DuplicateAttribute(attr.0));
        }
        self.schema.push(attr);
        for row in self.rows.values_mut() {
            row.0.push(None);
        }
        Ok(())
    }

    /// Overwrites one cell; `None` clears it.
    pub fn set_value(&mut self, id: FileId, attr: &str, value: Option<AttributeValue>) -> Result<()> {
        self.require_member(id)?;
        let col = self.column(attr)?;
        self.rows.get_mut(&id).expect("member has a row").0[col] = value;
        Ok(())
    }

    pub fn value(&self, id: FileId, attr: &str) -> Result<Option<&AttributeValue>> {
        self.require_member(id)?;
        let col = self.column(attr)?;
        Ok(self.rows[&id].0[col].as_ref())
    }

    /// Full matrix in assignment order × schema order.
    pub fn matrix(&self) -> AttributeMatrix {
        AttributeMatrix {
            file_ids: self.file_ids.clone(),
            attributes: self.schema.clone(),
            cells: self.file_ids.iter().map(|id| self.rows[id].0.clone()).collect(),
        }
    }

    /// Resolves attribute names and file selection into a checked projection.
    /// `files = None` selects every member in assignment order.
    pub fn projection<S: AsRef<str>>(&self, attrs: &[S], files: Option<&[FileId]>) -> Result<Projection> {
        if attrs.is_empty() {
            return Err(Error::EmptyProjection);
        }
        let mut attributes = Vec::with_capacity(attrs.len());
        for a in attrs {
            let col = self.column(a.as_ref())?;
            let name = self.schema[col].clone();
            if attributes.contains(&name) {
                return Err(Error::DuplicateAttribute(name.0));
            }
            attributes.push(name);
        }
        let file_ids = match files {
            None => self.file_ids.clone(),
            Some(files) => {
                let mut seen = std::collections::HashSet::new();
                for &id in files {
                    self.require_member(id)?;
                    if !seen.insert(id) {
                        return Err(Error::DuplicateProjectionFile(id));
                    }
                }
                files.to_vec()
            }
        };
        Ok(Projection {
            attributes,
            file_ids,
        })
    }

    /// The b×h matrix for a projection, columns in the projection's order.
    pub fn project_matrix(&self, p: &Projection) -> Result<AttributeMatrix> {
        let cols = p
            .attributes
            .iter()
            .map(|a| self.column(a.as_str()))
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(p.file_ids.len());
        for &id in &p.file_ids {
            self.require_member(id)?;
            let row = &self.rows[&id].0;
            cells.push(cols.iter().map(|&c| row[c].clone()).collect());
        }
        Ok(AttributeMatrix {
            file_ids: p.file_ids.clone(),
            attributes: p.attributes.clone(),
            cells,
        })
    }

    pub fn project<S: AsRef<str>>(&self, attrs: &[S], files: Option<&[FileId]>) -> Result<AttributeMatrix> {
        let p = self.projection(attrs, files)?;
        self.project_matrix(&p)
    }

    /// Applies a batch of cell writes atomically: if any write fails the
    /// section is left as it was.
    pub fn set_values<I>(&mut self, writes: I) -> Result<()>
    where
        I: IntoIterator<Item = (FileId, String, Option<AttributeValue>)>,
    {
        let mut staged = self.rows.clone();
        for (id, attr, value) in writes {
            self.require_member(id)?;
            let col = self.column(&attr)?;
            staged.get_mut(&id).expect("member has a row").0[col] = value;
        }
        self.rows = staged;
        Ok(())
    }

    // --- virtual trees ---

    pub fn create_tree(&mut self, name: &str) -> Result<&VTree> {
        self.insert_tree(VTree::new(name)?)
    }

    fn insert_tree(&mut self, tree: VTree) -> Result<&VTree> {
        use std::collections::btree_map::Entry;
        match self.trees.entry(tree.name().to_owned()) {
            Entry::Occupied(e) => Err(Error::DuplicateTree(e.key().clone())),
            Entry::Vacant(v) => Ok(v.insert(tree)),
        }
    }

    pub fn remove_tree(&mut self, name: &str) -> Result<VTree> {
        self.trees
            .remove(name)
            .ok_or_else(|| Error::TreeNotFound(name.to_owned()))
    }

    pub fn mkdir(&mut self, tree: &str, parent: &VPath, name: &str) -> Result<VPath> {
        self.tree_mut(tree)?.mkdir(parent, name)
    }

    /// Places a member file in a directory. A file may sit in many trees but
    /// at most once within one tree.
    pub fn link(&mut self, tree: &str, dir: &VPath, id: FileId) -> Result<()> {
        self.require_member(id)?;
        self.tree_mut(tree)?.link(dir, id)
    }

    pub fn unlink(&mut self, tree: &str, dir: &VPath, id: FileId) -> Result<()> {
        self.tree_mut(tree)?.unlink(dir, id)
    }

    pub fn rmdir(&mut self, tree: &str, path: &VPath) -> Result<()> {
        self.tree_mut(tree)?.rmdir(path)
    }

    pub fn move_dir(&mut self, tree: &str, from: &VPath, to_parent: &VPath) -> Result<()> {
        self.tree_mut(tree)?.move_dir(from, to_parent)
    }

    pub fn resolve(&self, tree: &str, path: &VPath) -> Result<DirView> {
        self.tree(tree)?.resolve(path)
    }

    pub fn walk(&self, tree: &str) -> Result<Vec<WalkEntry>> {
        Ok(self.tree(tree)?.walk())
    }

    /// Builds a tree automatically from the projection of `attrs` over
    /// `files` (all members when `None`).
    pub fn build_auto<S: AsRef<str>>(
        &mut self,
        tree_name: &str,
        attrs: &[S],
        files: Option<&[FileId]>,
        missing: MissingPolicy,
    ) -> Result<(&VTree, BuildReport)> {
        self.build_auto_with(tree_name, attrs, files, missing, Strategy::default())
    }

    pub fn build_auto_with<S: AsRef<str>>(
        &mut self,
        tree_name: &str,
        attrs: &[S],
        files: Option<&[FileId]>,
        missing: MissingPolicy,
        strategy: Strategy,
    ) -> Result<(&VTree, BuildReport)> {
        if self.trees.contains_key(tree_name) {
            return Err(Error::DuplicateTree(tree_name.to_owned()));
        }
        let projection = self.projection(attrs, files)?;
        let (tree, report) = self.build_from(tree_name, projection, missing, strategy)?;
        Ok((self.insert_tree(tree)?, report))
    }

    /// Replaces an auto-built tree with a fresh build from its recorded
    /// origin, picking up attribute edits made since.
    pub fn rebuild(&mut self, tree_name: &str) -> Result<(&VTree, BuildReport)> {
        let origin = self.tree(tree_name)?.origin().clone();
        let Origin::Auto { projection, missing } = origin else {
            return Err(Error::NotAutoTree(tree_name.to_owned()));
        };
        let (tree, report) = self.build_from(tree_name, projection, missing, Strategy::default())?;
        self.trees.insert(tree_name.to_owned(), tree);
        Ok((&self.trees[tree_name], report))
    }

    fn build_from(
        &self,
        tree_name: &str,
        projection: Projection,
        missing: MissingPolicy,
        strategy: Strategy,
    ) -> Result<(VTree, BuildReport)> {
        missing.validate()?;
        let m = self.project_matrix(&projection)?;
        vtree::build_auto(tree_name, &m, projection, missing, strategy)
    }
}
