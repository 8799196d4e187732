#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use vfield::{AttributeName, AttributeValue, Catalog, FileId, MissingPolicy, VDir, VPath};

/// Nested grouping built straight from value tuples, independent of the
/// level-wise builder.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Grouping {
    pub children: BTreeMap<String, Grouping>,
    pub files: BTreeSet<FileId>,
}

impl Grouping {
    pub fn insert(&mut self, path: &[String], id: FileId) {
        match path.split_first() {
            None => {
                self.files.insert(id);
            }
            Some((head, rest)) => self.children.entry(head.clone()).or_default().insert(rest, id),
        }
    }

    pub fn from_dir(dir: &VDir) -> Self {
        Grouping {
            children: dir
                .children
                .iter()
                .map(|c| (c.name.clone(), Grouping::from_dir(c)))
                .collect(),
            files: dir.file_refs.iter().copied().collect(),
        }
    }
}

/// Groups rows by their full value tuple, then nests the tuples.
pub fn oracle(rows: &[(FileId, Vec<Option<String>>)], policy: &MissingPolicy) -> Grouping {
    let mut by_tuple: BTreeMap<Vec<String>, Vec<FileId>> = BTreeMap::new();
    for (id, cells) in rows {
        let tuple: Option<Vec<String>> = cells
            .iter()
            .map(|c| match (c, policy) {
                (Some(v), _) => Some(v.clone()),
                (None, MissingPolicy::Bucket { label }) => Some(label.clone()),
                (None, MissingPolicy::Skip) => None,
            })
            .collect();
        if let Some(t) = tuple {
            by_tuple.entry(t).or_default().push(*id);
        }
    }
    let mut root = Grouping::default();
    for (tuple, ids) in by_tuple {
        for id in ids {
            root.insert(&tuple, id);
        }
    }
    root
}

pub const ALPHABET: &[&str] = &["a", "b", "c", "Пушкин"];

pub fn random_cell(rng: &mut StdRng) -> Option<String> {
    if rng.gen_bool(0.1) {
        None
    } else {
        Some(ALPHABET[rng.gen_range(0..ALPHABET.len())].to_string())
    }
}

pub fn random_policy(rng: &mut StdRng) -> MissingPolicy {
    if rng.gen_bool(0.5) {
        MissingPolicy::Skip
    } else if rng.gen_bool(0.5) {
        MissingPolicy::bucket()
    } else {
        MissingPolicy::Bucket { label: "none".into() }
    }
}

/// A section named `pool` with `files` members and `attrs` attributes
/// `c0..`, every cell unset.
pub fn pool_catalog(root: &std::path::Path, files: usize, attrs: usize) -> Catalog {
    let mut c = Catalog::new(root);
    c.create_section("pool").unwrap();
    for i in 0..files {
        let (id, _) = c.add_file(format!("content {i}").as_bytes(), &format!("f{i}.txt")).unwrap();
        c.assign_file("pool", id).unwrap();
    }
    let s = c.section_mut("pool").unwrap();
    for j in 0..attrs {
        s.define_attribute(AttributeName::new(format!("c{j}")).unwrap()).unwrap();
    }
    c
}

/// Random projection instance over the pool: random fill of every cell, a
/// random ordered choice of `h` attributes and a random subset of files.
pub struct Instance {
    pub attrs: Vec<String>,
    pub files: Vec<FileId>,
    pub policy: MissingPolicy,
}

pub fn random_instance(c: &mut Catalog, rng: &mut StdRng, max_h: usize) -> Instance {
    let s = c.section_mut("pool").unwrap();
    let members = s.file_ids().to_vec();
    let schema: Vec<String> = s.schema().iter().map(|a| a.to_string()).collect();
    let mut writes = Vec::new();
    for &id in &members {
        for a in &schema {
            let v = random_cell(rng).map(|v| AttributeValue::new(v).unwrap());
            writes.push((id, a.clone(), v));
        }
    }
    s.set_values(writes).unwrap();

    let h = rng.gen_range(1..=max_h.min(schema.len()));
    let mut attrs = schema;
    attrs.shuffle(rng);
    attrs.truncate(h);
    let b = rng.gen_range(0..=members.len());
    let mut files = members;
    files.shuffle(rng);
    files.truncate(b);
    Instance {
        attrs,
        files,
        policy: random_policy(rng),
    }
}

/// Rows of the projection read cell-by-cell through the public accessors.
pub fn projected_rows(c: &Catalog, inst: &Instance) -> Vec<(FileId, Vec<Option<String>>)> {
    let s = c.section("pool").unwrap();
    inst.files
        .iter()
        .map(|&id| {
            let cells = inst
                .attrs
                .iter()
                .map(|a| s.value(id, a).unwrap().map(|v| v.to_string()))
                .collect();
            (id, cells)
        })
        .collect()
}

pub fn path_of(components: &[String]) -> VPath {
    VPath::new(components.iter().cloned()).unwrap()
}

/// Builds a random catalog: up to 20 files, up to 3 sections, up to 4 trees
/// per section mixing manual and automatic ones.
pub fn random_catalog(root: &std::path::Path, rng: &mut StdRng) -> Catalog {
    let mut c = Catalog::new(root);
    let n_files = rng.gen_range(0..=20);
    let mut ids = Vec::new();
    for i in 0..n_files {
        // some duplicate content on purpose
        let content = format!("blob {}", rng.gen_range(0..25));
        let (id, dup) = c.add_file(content.as_bytes(), &format!("n{i}.dat")).unwrap();
        if !dup {
            ids.push(id);
        }
    }
    if !ids.is_empty() && rng.gen_bool(0.3) {
        let victim = ids.remove(rng.gen_range(0..ids.len()));
        c.remove_file(victim).unwrap();
    }
    ids.shuffle(rng);

    let n_sections = rng.gen_range(0..=3);
    for s in 0..n_sections {
        let name = format!("раздел{s}");
        c.create_section(&name).unwrap();
        let take = rng.gen_range(0..=ids.len());
        for id in ids.drain(..take) {
            c.assign_file(&name, id).unwrap();
        }
        let n_attrs = rng.gen_range(0..=3);
        let sec = c.section_mut(&name).unwrap();
        for a in 0..n_attrs {
            sec.define_attribute(AttributeName::new(format!("attr{a}")).unwrap()).unwrap();
        }
        let members = sec.file_ids().to_vec();
        for &id in &members {
            for a in 0..n_attrs {
                let v = random_cell(rng).map(|v| AttributeValue::new(v).unwrap());
                sec.set_value(id, &format!("attr{a}"), v).unwrap();
            }
        }
        let n_trees = rng.gen_range(0..=4);
        for t in 0..n_trees {
            let tname = format!("tree{t}");
            if n_attrs > 0 && rng.gen_bool(0.5) {
                let mut attrs: Vec<String> = (0..n_attrs).map(|a| format!("attr{a}")).collect();
                attrs.shuffle(rng);
                attrs.truncate(rng.gen_range(1..=n_attrs));
                sec.build_auto(&tname, &attrs, None, random_policy(rng)).unwrap();
            } else {
                sec.create_tree(&tname).unwrap();
                let mut dirs = vec![VPath::root()];
                for _ in 0..rng.gen_range(0..6) {
                    let parent = dirs[rng.gen_range(0..dirs.len())].clone();
                    let name = ALPHABET[rng.gen_range(0..ALPHABET.len())];
                    if let Ok(p) = sec.mkdir(&tname, &parent, name) {
                        dirs.push(p);
                    }
                }
                for &id in &members {
                    if rng.gen_bool(0.6) {
                        let d = dirs[rng.gen_range(0..dirs.len())].clone();
                        sec.link(&tname, &d, id).unwrap();
                    }
                }
            }
        }
    }
    c
}

/// True when the list has no repeated id.
pub fn all_distinct(ids: &[FileId]) -> bool {
    let set: BTreeSet<_> = ids.iter().collect();
    set.len() == ids.len()
}
