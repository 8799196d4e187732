//! Virtual trees: directory hierarchies whose entries reference files by id.
//!
//! Trees are built either by hand (`mkdir`/`link`) or automatically from a
//! projection of a section's attribute matrix. The automatic build works
//! level by level: level `j` under a directory holds one child per distinct
//! value of column `j` among the rows that reached that directory, and once
//! all `h` columns are consumed every row's file is attached to the leaf
//! whose path spells out the row's values.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::field::FileId;
use crate::section::{validate_label, AttributeMatrix, AttributeName, Projection};

/// Label used for unset cells under [`MissingPolicy::Bucket`] when none is
/// given.
pub const DEFAULT_BUCKET_LABEL: &str = "<нет значения>";

/// Directory path inside one virtual tree; empty means the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VPath(Vec<String>);

impl VPath {
    pub fn root() -> Self {
        VPath(Vec::new())
    }

    pub fn new<I, S>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let components: Vec<String> = components.into_iter().map(Into::into).collect();
        for c in &components {
            validate_label("directory name", c)?;
        }
        Ok(VPath(components))
    }

    /// Parses `a/b/c`. Leading and trailing slashes are ignored, so `""` and
    /// `"/"` both name the root.
    pub fn parse(s: &str) -> Result<Self> {
        let trimmed = s.trim_matches('/');
        if trimmed.is_empty() {
            return Ok(VPath::root());
        }
        VPath::new(trimmed.split('/'))
    }

    pub fn components(&self) -> &[String] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self, name: &str) -> VPath {
        let mut c = self.0.clone();
        c.push(name.to_owned());
        VPath(c)
    }

    pub fn parent(&self) -> Option<VPath> {
        let (_, init) = self.0.split_last()?;
        Some(VPath(init.to_vec()))
    }

    pub fn starts_with(&self, prefix: &VPath) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for VPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("/")
        } else {
            f.write_str(&self.0.join("/"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VDir {
    pub name: String,
    pub children: Vec<VDir>,
    /// Kept in ascending id order.
    pub file_refs: Vec<FileId>,
}

impl VDir {
    fn new(name: impl Into<String>) -> Self {
        VDir {
            name: name.into(),
            children: Vec::new(),
            file_refs: Vec::new(),
        }
    }

    fn child(&self, name: &str) -> Option<&VDir> {
        self.children.iter().find(|d| d.name == name)
    }

    fn child_mut(&mut self, name: &str) -> Option<&mut VDir> {
        self.children.iter_mut().find(|d| d.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty() && self.file_refs.is_empty()
    }

    fn visit<'a>(&'a self, path: &mut Vec<String>, f: &mut impl FnMut(&[String], &'a VDir)) {
        f(path, self);
        for c in &self.children {
            path.push(c.name.clone());
            c.visit(path, f);
            path.pop();
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum MissingPolicy {
    /// Rows with an unset cell in a used column are left out of the tree.
    #[default]
    Skip,
    /// Unset cells are treated as the given label.
    Bucket { label: String },
}

impl MissingPolicy {
    pub fn bucket() -> Self {
        MissingPolicy::Bucket {
            label: DEFAULT_BUCKET_LABEL.to_owned(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            MissingPolicy::Skip => Ok(()),
            MissingPolicy::Bucket { label } => validate_label("bucket label", label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Origin {
    Manual,
    Auto {
        projection: Projection,
        missing: MissingPolicy,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VTree {
    name: String,
    root: VDir,
    origin: Origin,
}

/// Read-only view of one directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirView {
    pub path: VPath,
    pub children: Vec<String>,
    pub file_refs: Vec<FileId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkEntry {
    pub path: VPath,
    pub file_refs: Vec<FileId>,
}

/// Outcome of an automatic build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    /// `levels[j]` holds, for every directory at depth `j` (root = 0), the
    /// number of children it received, in creation order. `levels[0][0]`
    /// is therefore the number of first-level directories.
    pub levels: Vec<Vec<usize>>,
    pub attached: usize,
    /// Files left out under the skip policy, with the first unset attribute.
    pub skipped: Vec<(FileId, AttributeName)>,
}

impl BuildReport {
    /// Directory count per level, root excluded.
    pub fn level_totals(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.iter().sum()).collect()
    }

    /// Levels including the root that actually hold directories.
    pub fn depth(&self) -> usize {
        1 + self.level_totals().iter().take_while(|&&n| n > 0).count()
    }
}

impl VTree {
    pub fn new(name: &str) -> Result<Self> {
        validate_label("tree name", name)?;
        Ok(VTree {
            name: name.to_owned(),
            root: VDir::new(name),
            origin: Origin::Manual,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &VDir {
        &self.root
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn dir(&self, path: &VPath) -> Result<&VDir> {
        let mut d = &self.root;
        for c in path.components() {
            d = d
                .child(c)
                .ok_or_else(|| Error::DirNotFound(path.to_string()))?;
        }
        Ok(d)
    }

    fn dir_mut(&mut self, path: &VPath) -> Result<&mut VDir> {
        let mut d = &mut self.root;
        for c in path.components() {
            d = d
                .child_mut(c)
                .ok_or_else(|| Error::DirNotFound(path.to_string()))?;
        }
        Ok(d)
    }

    pub fn mkdir(&mut self, parent: &VPath, name: &str) -> Result<VPath> {
        validate_label("directory name", name)?;
        let dir = self.dir_mut(parent)?;
        if dir.child(name).is_some() {
            return Err(Error::DirExists {
                parent: parent.to_string(),
                name: name.to_owned(),
            });
        }
        dir.children.push(VDir::new(name));
        Ok(parent.join(name))
    }

    /// Where `id` sits in this tree, if anywhere.
    pub fn locate(&self, id: FileId) -> Option<VPath> {
        let mut found = None;
        self.root.visit(&mut Vec::new(), &mut |path, d| {
            if found.is_none() && d.file_refs.binary_search(&id).is_ok() {
                found = Some(VPath(path.to_vec()));
            }
        });
        found
    }

    /// Caller checks section membership.
    pub(crate) fn link(&mut self, dir: &VPath, id: FileId) -> Result<()> {
        self.dir(dir)?;
        if let Some(at) = self.locate(id) {
            return Err(Error::AlreadyPlaced {
                id,
                path: at.to_string(),
            });
        }
        let refs = &mut self.dir_mut(dir)?.file_refs;
        let pos = refs.binary_search(&id).unwrap_err();
        refs.insert(pos, id);
        Ok(())
    }

    pub fn unlink(&mut self, dir: &VPath, id: FileId) -> Result<()> {
        let refs = &mut self.dir_mut(dir)?.file_refs;
        match refs.binary_search(&id) {
            Ok(pos) => {
                refs.remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::NotLinked {
                id,
                path: dir.to_string(),
            }),
        }
    }

    pub fn rmdir(&mut self, path: &VPath) -> Result<()> {
        let Some(parent) = path.parent() else {
            return Err(Error::DirNotEmpty("/".into()));
        };
        if !self.dir(path)?.is_empty() {
            return Err(Error::DirNotEmpty(path.to_string()));
        }
        let name = path.components().last().expect("non-root");
        self.dir_mut(&parent)?.children.retain(|d| &d.name != name);
        Ok(())
    }

    /// Moves the directory at `from` (with its contents) under `to_parent`.
    pub fn move_dir(&mut self, from: &VPath, to_parent: &VPath) -> Result<()> {
        let invalid = || Error::InvalidMove {
            from: from.to_string(),
            to: to_parent.to_string(),
        };
        let Some(old_parent) = from.parent() else {
            return Err(invalid());
        };
        self.dir(from)?;
        self.dir(to_parent)?;
        if to_parent.starts_with(from) {
            return Err(invalid());
        }
        if &old_parent == to_parent {
            return Ok(());
        }
        let name = from.components().last().expect("non-root").clone();
        if self.dir(to_parent)?.child(&name).is_some() {
            return Err(Error::DirExists {
                parent: to_parent.to_string(),
                name,
            });
        }
        let src = self.dir_mut(&old_parent)?;
        let idx = src.children.iter().position(|d| d.name == name).expect("resolved");
        let moved = src.children.remove(idx);
        self.dir_mut(to_parent)?.children.push(moved);
        Ok(())
    }

    pub fn resolve(&self, path: &VPath) -> Result<DirView> {
        let d = self.dir(path)?;
        Ok(DirView {
            path: path.clone(),
            children: d.children.iter().map(|c| c.name.clone()).collect(),
            file_refs: d.file_refs.clone(),
        })
    }

    /// Preorder walk, children in stored order.
    pub fn walk(&self) -> Vec<WalkEntry> {
        let mut out = Vec::new();
        self.root.visit(&mut Vec::new(), &mut |path, d| {
            out.push(WalkEntry {
                path: VPath(path.to_vec()),
                file_refs: d.file_refs.clone(),
            })
        });
        out
    }

    /// Every referenced id in walk order.
    pub fn files(&self) -> Vec<FileId> {
        let mut out = Vec::new();
        self.root
            .visit(&mut Vec::new(), &mut |_, d| out.extend_from_slice(&d.file_refs));
        out
    }

    pub fn dir_count(&self) -> usize {
        let mut n = 0;
        self.root.visit(&mut Vec::new(), &mut |_, _| n += 1);
        n - 1
    }

    /// Number of levels including the root.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        self.root.visit(&mut Vec::new(), &mut |path, _| max = max.max(path.len()));
        max + 1
    }

    /// Structural checks used when loading a catalog. Returns the name of the
    /// first violated invariant.
    pub(crate) fn check(&self, is_member: impl Fn(FileId) -> bool) -> Result<()> {
        if validate_label("tree name", &self.name).is_err() || self.root.name != self.name {
            return Err(Error::invariant("tree name", self.name.clone()));
        }
        let mut problem: Option<Error> = None;
        let mut seen = HashSet::new();
        self.root.visit(&mut Vec::new(), &mut |path, d| {
            if problem.is_some() {
                return;
            }
            let at = || format!("tree {:?} at {}", self.name, VPath(path.to_vec()));
            let mut names = HashSet::new();
            for c in &d.children {
                if validate_label("directory name", &c.name).is_err() {
                    problem = Some(Error::invariant("directory name", format!("{} child {:?}", at(), c.name)));
                    return;
                }
                if !names.insert(c.name.as_str()) {
                    problem = Some(Error::invariant("sibling distinctness", format!("{} child {:?}", at(), c.name)));
                    return;
                }
            }
            if d.file_refs.windows(2).any(|w| w[0] >= w[1]) {
                problem = Some(Error::invariant("file reference order", at()));
                return;
            }
            for &id in &d.file_refs {
                if !is_member(id) {
                    problem = Some(Error::invariant("tree membership", format!("{} file {id}", at())));
                    return;
                }
                if !seen.insert(id) {
                    problem = Some(Error::invariant("tree at-most-once", format!("{} file {id}", at())));
                    return;
                }
            }
        });
        match problem {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Builds a tree over every row and column of `m`, in column order.
pub fn build_from_matrix(
    tree_name: &str,
    m: &AttributeMatrix,
    missing: MissingPolicy,
    strategy: Strategy,
) -> Result<(VTree, BuildReport)> {
    let projection = Projection {
        attributes: m.attributes.clone(),
        file_ids: m.file_ids.clone(),
    };
    build_auto(tree_name, m, projection, missing, strategy)
}

/// Builds a tree from an already-projected matrix. `projection` is recorded
/// as the tree's origin.
pub(crate) fn build_auto(
    tree_name: &str,
    m: &AttributeMatrix,
    projection: Projection,
    missing: MissingPolicy,
    strategy: Strategy,
) -> Result<(VTree, BuildReport)> {
    let mut tree = VTree::new(tree_name)?;
    missing.validate()?;
    let h = m.attributes.len();
    if h == 0 {
        return Err(Error::EmptyProjection);
    }

    // Resolve every row to its full label tuple or skip it.
    let mut skipped = Vec::new();
    let mut rows: Vec<(FileId, Vec<&str>)> = Vec::with_capacity(m.file_ids.len());
    'rows: for (id, cells) in m.file_ids.iter().zip(&m.cells) {
        let mut labels = Vec::with_capacity(h);
        for (col, cell) in cells.iter().enumerate() {
            match (cell, &missing) {
                (Some(v), _) => labels.push(v.as_str()),
                (None, MissingPolicy::Bucket { label }) => labels.push(label.as_str()),
                (None, MissingPolicy::Skip) => {
                    skipped.push((*id, m.attributes[col].clone()));
                    continue 'rows;
                }
            }
        }
        rows.push((*id, labels));
    }

    struct Node<'a> {
        name: &'a str,
        children: Vec<usize>,
        files: Vec<FileId>,
    }
    let mut arena = vec![Node {
        name: tree_name,
        children: Vec::new(),
        files: Vec::new(),
    }];

    // Each frontier entry is a directory and the rows that reached it.
    let mut frontier: Vec<(usize, Vec<usize>)> = vec![(0, (0..rows.len()).collect())];
    let mut levels = Vec::with_capacity(h);
    for col in 0..h {
        // Distinct values under each parent, byte-lexicographic.
        let splits = strategy.map(&frontier, |(_, members)| {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for &r in members {
                groups.entry(rows[r].1[col]).or_default().push(r);
            }
            groups.into_iter().collect::<Vec<_>>()
        });
        let mut counts = Vec::with_capacity(frontier.len());
        let mut next = Vec::new();
        for ((parent, _), groups) in frontier.iter().zip(splits) {
            counts.push(groups.len());
            for (value, members) in groups {
                let idx = arena.len();
                arena.push(Node {
                    name: value,
                    children: Vec::new(),
                    files: Vec::new(),
                });
                arena[*parent].children.push(idx);
                next.push((idx, members));
            }
        }
        levels.push(counts);
        frontier = next;
    }

    let mut attached = 0;
    for (leaf, members) in frontier {
        let mut files: Vec<FileId> = members.iter().map(|&r| rows[r].0).collect();
        files.sort_unstable();
        attached += files.len();
        arena[leaf].files = files;
    }

    fn assemble(arena: &[Node<'_>], idx: usize) -> VDir {
        let n = &arena[idx];
        VDir {
            name: n.name.to_owned(),
            children: n.children.iter().map(|&c| assemble(arena, c)).collect(),
            file_refs: n.files.clone(),
        }
    }
    tree.root = assemble(&arena, 0);
    tree.origin = Origin::Auto { projection, missing };

    Ok((
        tree,
        BuildReport {
            levels,
            attached,
            skipped,
        },
    ))
}
