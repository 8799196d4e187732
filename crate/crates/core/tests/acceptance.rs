//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use vfield::{
    export_tree, AttributeName, AttributeValue, Catalog, Digest, FileId, MissingPolicy, VPath, CATALOG_FILE,
};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn tree_json(catalog_file: &Path, section: &str, tree: &str) -> String {
    let v: serde_json::Value = serde_json::from_slice(&fs::read(catalog_file).unwrap()).unwrap();
    let s = v["sections"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == section)
        .unwrap();
    let t = s["trees"].as_array().unwrap().iter().find(|t| t["name"] == tree).unwrap();
    serde_json::to_string_pretty(t).unwrap()
}

fn c1_dedup_law() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut c = Catalog::new(dir.path());
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    let contents: Vec<Vec<u8>> = (0..300).map(|i| format!("distinct content #{i}").into_bytes()).collect();
    let mut picks: Vec<usize> = (0..300).collect();
    picks.extend((0..700).map(|_| rng.gen_range(0..300)));
    picks.shuffle(&mut rng);

    let mut original: HashMap<usize, FileId> = HashMap::new();
    let mut dups = 0;
    for (n, &k) in picks.iter().enumerate() {
        let (id, dup) = c.add_file(&contents[k], &format!("call{n}")).map_err(|e| e.to_string())?;
        match original.get(&k) {
            Some(&orig) => {
                ensure!(dup && id == orig, "call {n}: duplicate content got ({id}, {dup}), expected ({orig}, true)");
                dups += 1;
            }
            None => {
                ensure!(!dup, "call {n}: first occurrence reported as duplicate");
                original.insert(k, id);
            }
        }
    }
    ensure!(picks.len() == 1000, "made {} calls", picks.len());
    ensure!(c.list_files().len() == 300, "entry count {}", c.list_files().len());
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("1000 calls, 300 entries, {dups} duplicates resolved, {elapsed:.2?}"))
}

fn c2_two_trees() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Catalog::new(dir.path());
    let mut ids = Vec::new();
    for i in 1..=7 {
        ids.push(c.add_file(format!("Ф{i}").as_bytes(), &format!("f{i}.txt")).unwrap().0);
    }
    ensure!(ids == (1..=7).map(FileId).collect::<Vec<_>>(), "ids {ids:?}");
    c.create_section("поле").unwrap();
    for &id in &ids {
        c.assign_file("поле", id).unwrap();
    }
    let s = c.section_mut("поле").unwrap();
    s.define_attribute(AttributeName::new("вид").unwrap()).unwrap();
    for &id in &ids {
        let v = if id.0 % 2 == 0 { "чёт" } else { "нечет" };
        s.set_value(id, "вид", Some(AttributeValue::new(v).unwrap())).unwrap();
    }

    s.create_tree("К-ручное").unwrap();
    let k1 = s.mkdir("К-ручное", &VPath::root(), "К1").unwrap();
    let k2 = s.mkdir("К-ручное", &VPath::root(), "К2").unwrap();
    let k3 = s.mkdir("К-ручное", &k1, "К3").unwrap();
    for (dir, id) in [(&k1, 1), (&k3, 2), (&k3, 3), (&k2, 5), (&VPath::root(), 7)] {
        s.link("К-ручное", dir, FileId(id)).unwrap();
    }
    s.build_auto("К-авто", &["вид"], None, MissingPolicy::Skip).unwrap();

    for t in ["К-ручное", "К-авто"] {
        let files = s.tree(t).unwrap().files();
        ensure!(all_distinct(&files) && files.len() <= 7, "tree {t} flattens to {files:?}");
    }
    let shared: BTreeSet<FileId> = s
        .tree("К-ручное")
        .unwrap()
        .files()
        .into_iter()
        .filter(|id| s.tree("К-авто").unwrap().files().contains(id))
        .collect();
    ensure!(!shared.is_empty(), "trees share no file");

    c.save().unwrap();
    let cat = dir.path().join(CATALOG_FILE);
    let auto_before = tree_json(&cat, "поле", "К-авто");
    let files_before = persisted_files(&cat);

    let s = c.section_mut("поле").unwrap();
    s.mkdir("К-ручное", &k2, "К4").unwrap();
    s.unlink("К-ручное", &k3, FileId(3)).unwrap();
    s.link("К-ручное", &VPath::parse("К2/К4").unwrap(), FileId(3)).unwrap();
    s.link("К-ручное", &k2, FileId(6)).unwrap();
    s.move_dir("К-ручное", &k3, &k2).unwrap();
    c.save().unwrap();

    ensure!(tree_json(&cat, "поле", "К-авто") == auto_before, "auto tree changed after manual edits");
    ensure!(persisted_files(&cat) == files_before, "file field changed after tree edits");
    ensure!(
        tree_json(&cat, "поле", "К-ручное") != tree_json(&cat, "поле", "К-авто"),
        "trees unexpectedly identical"
    );
    Ok(format!("7 files, 2 trees, {} ids shared, untouched tree byte-identical", shared.len()))
}

fn persisted_files(cat: &Path) -> String {
    let v: serde_json::Value = serde_json::from_slice(&fs::read(cat).unwrap()).unwrap();
    v["files"].to_string()
}

const BOOKS: &[(&str, &str, &str)] = &[
    ("onegin.txt", "1833", "Пушкин"),
    ("godunov.txt", "1831", "Пушкин"),
    ("gore.txt", "1825", "Грибоедов"),
    ("geroy.txt", "1840", "Лермонтов"),
    ("mtsyri.txt", "1840", "Лермонтов"),
    ("demon.txt", "1842", "Лермонтов"),
    ("dubrovsky.txt", "1841", "Пушкин"),
    ("revizor.txt", "1836", "Гоголь"),
    ("nos.txt", "1836", "Гоголь"),
];

fn c3_books() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Catalog::new(dir.path());
    c.create_section("книги").unwrap();
    let mut ids = Vec::new();
    for (name, _, _) in BOOKS {
        let (id, _) = c.add_file(format!("text of {name}").as_bytes(), name).unwrap();
        c.assign_file("книги", id).unwrap();
        ids.push(id);
    }
    let s = c.section_mut("книги").unwrap();
    s.define_attribute(AttributeName::new("год").unwrap()).unwrap();
    s.define_attribute(AttributeName::new("автор").unwrap()).unwrap();
    for (id, (_, year, author)) in ids.iter().zip(BOOKS) {
        s.set_value(*id, "год", Some(AttributeValue::new(*year).unwrap())).unwrap();
        s.set_value(*id, "автор", Some(AttributeValue::new(*author).unwrap())).unwrap();
    }
    let (by_year, _) = s.build_auto("по годам", &["год", "автор"], None, MissingPolicy::Skip).unwrap();
    let by_year = by_year.clone();
    let (by_author, _) = s.build_auto("по авторам", &["автор", "год"], None, MissingPolicy::Skip).unwrap();
    let by_author = by_author.clone();

    let years: Vec<String> = BOOKS.iter().map(|b| b.1.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    let authors: Vec<String> = BOOKS.iter().map(|b| b.2.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    let l1 = |t: &vfield::VTree| t.root().children.iter().map(|d| d.name.clone()).collect::<Vec<_>>();
    ensure!(l1(&by_year) == years, "level 1 of year tree {:?}", l1(&by_year));
    ensure!(l1(&by_author) == authors, "level 1 of author tree {:?}", l1(&by_author));

    let leaves = |t: &vfield::VTree| -> BTreeSet<FileId> { t.files().into_iter().collect() };
    ensure!(leaves(&by_year) == leaves(&by_author), "leaf file sets differ");
    ensure!(leaves(&by_year).len() == BOOKS.len(), "not every book attached");
    for id in &ids {
        let a = by_year.locate(*id).unwrap();
        let b = by_author.locate(*id).unwrap();
        let mut rev = b.components().to_vec();
        rev.reverse();
        ensure!(a.components() == rev.as_slice(), "file {id}: {a} vs {b}");
    }
    ensure!(by_year.depth() == 3 && by_author.depth() == 3, "depths differ from 3");
    Ok(format!("{} years vs {} authors at level 1, {} books in both", years.len(), authors.len(), ids.len()))
}

fn c4_depth_law() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = pool_catalog(dir.path(), 30, 6);
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    let mut checked = 0;
    let mut by_h = [0usize; 5];
    for round in 0..200 {
        let inst = random_instance(&mut c, &mut rng, 4);
        let h = inst.attrs.len();
        let name = format!("d{round}");
        let s = c.section_mut("pool").unwrap();
        let (tree, report) = s.build_auto(&name, &inst.attrs, Some(&inst.files), inst.policy.clone()).unwrap();
        if report.attached >= 1 {
            ensure!(tree.depth() == h + 1, "round {round}: h={h} depth {}", tree.depth());
            ensure!(report.depth() == h + 1, "round {round}: report depth {}", report.depth());
            checked += 1;
            by_h[h] += 1;
        } else {
            ensure!(tree.depth() == 1, "round {round}: empty build has depth {}", tree.depth());
        }
        s.remove_tree(&name).unwrap();
    }
    ensure!(by_h[1..].iter().all(|&n| n > 0), "not every h in 1..4 exercised: {by_h:?}");
    Ok(format!("{checked}/200 non-empty builds at depth h+1 (per h: {:?})", &by_h[1..]))
}

fn c5_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut c = pool_catalog(dir.path(), 30, 4);
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let mut per_policy = BTreeMap::new();
    for round in 0..500 {
        let mut inst = random_instance(&mut c, &mut rng, 4);
        inst.policy = if round % 2 == 0 { MissingPolicy::Skip } else { MissingPolicy::bucket() };
        let expected = oracle(&projected_rows(&c, &inst), &inst.policy);
        let s = c.section_mut("pool").unwrap();
        let (tree, _) = s.build_auto("o", &inst.attrs, Some(&inst.files), inst.policy.clone()).unwrap();
        ensure!(Grouping::from_dir(tree.root()) == expected, "round {round}: tree differs from oracle");
        for w in tree.walk() {
            let names = tree.resolve(&w.path).unwrap().children;
            ensure!(names.windows(2).all(|p| p[0].as_bytes() < p[1].as_bytes()), "round {round}: siblings unsorted at {}", w.path);
        }
        s.remove_tree("o").unwrap();
        *per_policy.entry(round % 2).or_insert(0) += 1;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("500/500 equal to nested-grouping oracle (skip {}, bucket {}), {elapsed:.2?}", per_policy[&0], per_policy[&1]))
}

fn c6_persistence() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    for round in 0..100 {
        let dir = tempfile::tempdir().unwrap();
        let c = random_catalog(dir.path(), &mut rng);
        c.save().map_err(|e| e.to_string())?;
        let path = dir.path().join(CATALOG_FILE);
        let first = fs::read(&path).unwrap();
        let loaded = Catalog::open(dir.path()).map_err(|e| format!("round {round}: {e}"))?;
        ensure!(loaded == c, "round {round}: loaded model differs");
        loaded.save().unwrap();
        ensure!(fs::read(&path).unwrap() == first, "round {round}: save∘load∘save not byte-identical");
    }
    Ok("100/100 catalogs round-trip, byte-idempotent".into())
}

fn collect_files(root: &Path, rel: &Path, dirs: &mut BTreeSet<PathBuf>, files: &mut Vec<PathBuf>) {
    for e in fs::read_dir(root.join(rel)).unwrap() {
        let e = e.unwrap();
        let r = rel.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            dirs.insert(r.clone());
            collect_files(root, &r, dirs, files);
        } else {
            files.push(r);
        }
    }
}

fn c7_export_fidelity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Catalog::new(dir.path());
    c.create_section("pool").unwrap();
    let names = ["a.txt", "b.txt", "a.txt", "notes", "c.md"];
    for i in 0..24 {
        let (id, _) = c.add_file(format!("payload {i}").as_bytes(), names[i % names.len()]).unwrap();
        c.assign_file("pool", id).unwrap();
    }
    let s = c.section_mut("pool").unwrap();
    for j in 0..3 {
        s.define_attribute(AttributeName::new(format!("c{j}")).unwrap()).unwrap();
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let out = tempfile::tempdir().unwrap();
    let (mut exported, mut reingested, mut hardlinked) = (0, 0, 0);
    for round in 0..20 {
        let inst = random_instance(&mut c, &mut rng, 3);
        let tname = format!("e{round}");
        let s = c.section_mut("pool").unwrap();
        s.build_auto(&tname, &inst.attrs, None, inst.policy.clone()).unwrap();
        let tree = c.section("pool").unwrap().tree(&tname).unwrap().clone();
        let target = out.path().join(&tname);
        let report = export_tree(&tree, c.field(), &target).map_err(|e| e.to_string())?;
        hardlinked += report.count(vfield::LinkMode::HardLink);

        let mut dirs = BTreeSet::new();
        let mut files = Vec::new();
        collect_files(&target, Path::new(""), &mut dirs, &mut files);
        let walk_dirs: BTreeSet<PathBuf> = tree
            .walk()
            .into_iter()
            .filter(|w| !w.path.is_root())
            .map(|w| w.path.components().iter().collect())
            .collect();
        ensure!(dirs == walk_dirs, "round {round}: exported dirs differ from walk");
        ensure!(files.len() == tree.files().len(), "round {round}: {} files for {} refs", files.len(), tree.files().len());

        for f in &report.files {
            let bytes = fs::read(&f.path).unwrap();
            let entry = c.get_file(f.id).unwrap();
            ensure!(Digest::of(&bytes) == entry.digest, "round {round}: {} digest mismatch", f.path.display());
            let parent: VPath = VPath::new(
                f.path
                    .strip_prefix(&target)
                    .unwrap()
                    .parent()
                    .unwrap()
                    .iter()
                    .map(|c| c.to_str().unwrap().to_string()),
            )
            .unwrap();
            ensure!(tree.locate(f.id) == Some(parent), "round {round}: file {} exported to wrong dir", f.id);
            exported += 1;
        }
        for f in &files {
            let bytes = fs::read(target.join(f)).unwrap();
            let name = f.file_name().unwrap().to_str().unwrap();
            let (_, dup) = c.add_file(&bytes, name).unwrap();
            ensure!(dup, "round {round}: re-ingesting {} created a new entry", f.display());
            reingested += 1;
        }
    }
    ensure!(c.list_files().len() == 24, "field grew to {}", c.list_files().len());
    Ok(format!("{exported} files exported ({hardlinked} hard links), {reingested}/{reingested} re-ingested as duplicates"))
}

fn c8_at_most_once() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = pool_catalog(dir.path(), 10, 0);
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let members = c.section("pool").unwrap().file_ids().to_vec();
    let mut applied = 0;
    let mut rejected_links = 0;
    for seq in 0..100 {
        let tname = format!("m{seq}");
        let s = c.section_mut("pool").unwrap();
        s.create_tree(&tname).unwrap();
        for op in 0..200 {
            let dirs: Vec<VPath> = s.walk(&tname).unwrap().into_iter().map(|w| w.path).collect();
            let d = dirs.choose(&mut rng).unwrap().clone();
            let d2 = dirs.choose(&mut rng).unwrap().clone();
            let id = *members.choose(&mut rng).unwrap();
            let before = s.tree(&tname).unwrap().files();
            let r = match rng.gen_range(0..6) {
                0 => s.mkdir(&tname, &d, ALPHABET[rng.gen_range(0..ALPHABET.len())]).map(|_| ()),
                1 | 2 => {
                    let r = s.link(&tname, &d, id);
                    if before.contains(&id) {
                        ensure!(r.is_err(), "seq {seq} op {op}: second placement of {id} accepted");
                        rejected_links += 1;
                    }
                    r
                }
                3 => s.unlink(&tname, &d, id),
                4 => s.rmdir(&tname, &d),
                _ => {
                    let r = s.move_dir(&tname, &d, &d2);
                    let mut a = before.clone();
                    let mut b = s.tree(&tname).unwrap().files();
                    a.sort();
                    b.sort();
                    ensure!(a == b, "seq {seq} op {op}: move changed the file multiset");
                    r
                }
            };
            if r.is_ok() {
                applied += 1;
            }
            let files = s.tree(&tname).unwrap().files();
            ensure!(all_distinct(&files), "seq {seq} op {op}: duplicate in {files:?}");
        }
    }
    Ok(format!("100 sequences × 200 ops ({applied} applied, {rejected_links} duplicate placements refused)"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 dedup law", c1_dedup_law),
        ("2 two trees over seven files", c2_two_trees),
        ("3 books by year/author vs author/year", c3_books),
        ("4 depth law h+1", c4_depth_law),
        ("5 oracle equivalence", c5_oracle_equivalence),
        ("6 persistence round-trip", c6_persistence),
        ("7 export fidelity", c7_export_fidelity),
        ("8 at-most-once under manual ops", c8_at_most_once),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}
