use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use vfield::{
    export_tree, render_tree, AttributeName, AttributeValue, BuildReport, Catalog, CatalogLock, CATALOG_FILE, FileId, LinkMode,
    MissingPolicy, Origin, VPath, VTree,
};
use walkdir::WalkDir;

use crate::{csv_io, AttrCmd, Cli, Command, SectionCmd, TreeCmd, TreeRef};

pub fn run(cli: Cli) -> Result<()> {
    let root = cli.catalog.unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Init { dir } => {
            let dir = dir.unwrap_or(root);
            Catalog::init(&dir).with_context(|| format!("initializing {}", dir.display()))?;
            println!("initialized empty catalog in {}", dir.display());
            Ok(())
        }
        Command::Add { paths } => mutate(&root, |c| add(c, &paths)),
        Command::Ls => read(&root, |c| {
            let mut out = io::stdout().lock();
            for e in c.list_files() {
                let owner = c.owner_of(e.id).unwrap_or("-");
                writeln!(out, "{}\t{}\t{}\t{}\t{}", e.id, &e.digest.to_hex()[..12], e.size, e.ingest_name, owner)?;
            }
            Ok(())
        }),
        Command::Rm { id } => mutate(&root, |c| {
            let e = c.remove_file(FileId(id))?;
            println!("removed {}\t{}", e.id, e.ingest_name);
            Ok(())
        }),
        Command::Verify => read(&root, |c| {
            let report = c.verify_field();
            for id in &report.missing {
                println!("missing\t{id}");
            }
            for (id, actual) in &report.mismatched {
                println!("mismatch\t{id}\t{actual}");
            }
            let problems = report.missing.len() + report.mismatched.len();
            if problems > 0 {
                bail!("{problems} problem(s) in {} file(s)", c.list_files().len());
            }
            println!("ok: {} file(s) verified", c.list_files().len());
            Ok(())
        }),
        Command::Section(cmd) => section(&root, cmd),
        Command::Attr(cmd) => attr(&root, cmd),
        Command::Tree(cmd) => tree(&root, cmd),
    }
}

fn lock(root: &Path) -> Result<CatalogLock> {
    if !root.join(CATALOG_FILE).is_file() {
        bail!("no catalog in {} (run `vfield init` first)", root.display());
    }
    CatalogLock::acquire(root).with_context(|| format!("opening catalog {}", root.display()))
}

/// Runs `f` under the catalog lock without saving.
fn read(root: &Path, f: impl FnOnce(&Catalog) -> Result<()>) -> Result<()> {
    let _lock = lock(root)?;
    let catalog = Catalog::open(root).with_context(|| format!("loading catalog {}", root.display()))?;
    f(&catalog)
}

/// Runs `f` under the catalog lock and saves only if it succeeded.
fn mutate(root: &Path, f: impl FnOnce(&mut Catalog) -> Result<()>) -> Result<()> {
    let _lock = lock(root)?;
    let mut catalog = Catalog::open(root).with_context(|| format!("loading catalog {}", root.display()))?;
    f(&mut catalog)?;
    catalog.save().context("saving catalog")
}

fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).with_context(|| format!("reading {}", p.display()))?;
        if meta.is_dir() {
            for entry in WalkDir::new(p).sort_by_file_name() {
                let entry = entry?;
                if entry.file_type().is_file() {
                    files.push(entry.into_path());
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn add(c: &mut Catalog, paths: &[PathBuf]) -> Result<()> {
    let files = collect_inputs(paths)?;
    let mut items = Vec::with_capacity(files.len());
    for path in &files {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| anyhow!("{} has no UTF-8 file name", path.display()))?
            .to_owned();
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        items.push((bytes, name));
    }
    let results = c.add_files(&items)?;
    let mut out = io::stdout().lock();
    for ((_, name), (id, dup)) in items.iter().zip(results) {
        let digest = c.get_file(id)?.digest.to_hex();
        writeln!(out, "{id}\t{}\t{}\t{name}", &digest[..12], if dup { "dup" } else { "new" })?;
    }
    Ok(())
}

fn section(root: &Path, cmd: SectionCmd) -> Result<()> {
    match cmd {
        SectionCmd::Create { name } => mutate(root, |c| {
            c.create_section(&name)?;
            println!("created section {name}");
            Ok(())
        }),
        SectionCmd::Assign { section, ids } => mutate(root, |c| {
            for id in ids {
                c.assign_file(&section, FileId(id))?;
            }
            Ok(())
        }),
        SectionCmd::Show { section, csv } => read(root, |c| {
            let s = c.section(&section)?;
            if csv {
                return csv_io::export(s, io::stdout().lock());
            }
            let mut out = io::stdout().lock();
            writeln!(
                out,
                "section {}: {} file(s), {} attribute(s), {} tree(s)",
                s.name(),
                s.file_ids().len(),
                s.schema().len(),
                s.trees().count()
            )?;
            let m = s.matrix();
            let mut header = vec!["id".to_owned()];
            header.extend(m.attributes.iter().map(|a| a.to_string()));
            writeln!(out, "{}", header.join("\t"))?;
            for (id, cells) in m.file_ids.iter().zip(&m.cells) {
                let mut row = vec![id.to_string()];
                row.extend(cells.iter().map(|v| v.as_ref().map_or("-".to_owned(), |v| v.to_string())));
                writeln!(out, "{}", row.join("\t"))?;
            }
            Ok(())
        }),
        SectionCmd::List => read(root, |c| {
            for s in c.sections() {
                println!("{}\t{} file(s)\t{} tree(s)", s.name(), s.file_ids().len(), s.trees().count());
            }
            Ok(())
        }),
    }
}

fn attr(root: &Path, cmd: AttrCmd) -> Result<()> {
    match cmd {
        AttrCmd::Define { section, names } => mutate(root, |c| {
            let s = c.section_mut(&section)?;
            for n in names {
                s.define_attribute(AttributeName::new(n)?)?;
            }
            Ok(())
        }),
        AttrCmd::Set { section, id, attr, value } => mutate(root, |c| {
            let value = value.map(AttributeValue::new).transpose()?;
            c.section_mut(&section)?.set_value(FileId(id), &attr, value)?;
            Ok(())
        }),
        AttrCmd::ImportCsv { section, file } => mutate(root, |c| {
            let input = fs::File::open(&file).with_context(|| format!("opening {}", file.display()))?;
            let rows = csv_io::import(c.section_mut(&section)?, input)?;
            println!("imported {rows} row(s) into {section}");
            Ok(())
        }),
    }
}

fn parse_missing(s: &str) -> Result<MissingPolicy> {
    match s {
        "skip" => Ok(MissingPolicy::Skip),
        "bucket" => Ok(MissingPolicy::bucket()),
        _ => match s.strip_prefix("bucket=") {
            Some(label) => Ok(MissingPolicy::Bucket { label: label.to_owned() }),
            None => bail!("--missing must be `skip`, `bucket` or `bucket=<label>`"),
        },
    }
}

fn print_build(tree: &VTree, report: &BuildReport) {
    let mut out = String::new();
    out.push_str(&format!("built tree {}\n", tree.name()));
    out.push_str(&format!("levels: {}\n", report.depth()));
    for (j, counts) in report.levels.iter().enumerate() {
        let per_parent: Vec<String> = counts.iter().map(ToString::to_string).collect();
        let total: usize = counts.iter().sum();
        out.push_str(&format!("level {}: {total} dir(s) ({})\n", j + 1, per_parent.join(", ")));
    }
    out.push_str(&format!("attached: {}\n", report.attached));
    out.push_str(&format!("skipped: {}\n", report.skipped.len()));
    for (id, attr) in &report.skipped {
        out.push_str(&format!("  {id}\tmissing {attr}\n"));
    }
    print!("{out}");
}

fn origin_label(t: &VTree) -> String {
    match t.origin() {
        Origin::Manual => "manual".to_owned(),
        Origin::Auto { projection, .. } => {
            let attrs: Vec<&str> = projection.attributes.iter().map(|a| a.as_str()).collect();
            format!("auto by {}", attrs.join(","))
        }
    }
}

fn tree(root: &Path, cmd: TreeCmd) -> Result<()> {
    match cmd {
        TreeCmd::New { at } => mutate(root, |c| {
            c.section_mut(&at.section)?.create_tree(&at.tree)?;
            Ok(())
        }),
        TreeCmd::Mkdir { at, path } => mutate(root, |c| {
            let path = VPath::parse(&path)?;
            let parent = path.parent().ok_or_else(|| anyhow!("cannot create the root"))?;
            let name = path.components().last().expect("non-root");
            c.section_mut(&at.section)?.mkdir(&at.tree, &parent, name)?;
            Ok(())
        }),
        TreeCmd::Rmdir { at, path } => mutate(root, |c| {
            c.section_mut(&at.section)?.rmdir(&at.tree, &VPath::parse(&path)?)?;
            Ok(())
        }),
        TreeCmd::Mv { at, from, to_parent } => mutate(root, |c| {
            let (from, to) = (VPath::parse(&from)?, VPath::parse(&to_parent)?);
            c.section_mut(&at.section)?.move_dir(&at.tree, &from, &to)?;
            Ok(())
        }),
        TreeCmd::Link { at, dir, ids } => mutate(root, |c| {
            let dir = VPath::parse(&dir)?;
            let s = c.section_mut(&at.section)?;
            for id in ids {
                s.link(&at.tree, &dir, FileId(id))?;
            }
            Ok(())
        }),
        TreeCmd::Unlink { at, dir, ids } => mutate(root, |c| {
            let dir = VPath::parse(&dir)?;
            let s = c.section_mut(&at.section)?;
            for id in ids {
                s.unlink(&at.tree, &dir, FileId(id))?;
            }
            Ok(())
        }),
        TreeCmd::Build { at, by, files, missing } => mutate(root, |c| {
            let missing = parse_missing(&missing)?;
            let files: Option<Vec<FileId>> = files.map(|f| f.into_iter().map(FileId).collect());
            let s = c.section_mut(&at.section)?;
            let (tree, report) = s.build_auto(&at.tree, &by, files.as_deref(), missing)?;
            print_build(tree, &report);
            Ok(())
        }),
        TreeCmd::Rebuild { at } => mutate(root, |c| {
            let (tree, report) = c.section_mut(&at.section)?.rebuild(&at.tree)?;
            print_build(tree, &report);
            Ok(())
        }),
        TreeCmd::Ls { section, tree, path } => read(root, |c| {
            let s = c.section(&section)?;
            let mut out = io::stdout().lock();
            let Some(tree) = tree else {
                for t in s.trees() {
                    writeln!(out, "{}\t{}\t{} dir(s)\t{} file(s)", t.name(), origin_label(t), t.dir_count(), t.files().len())?;
                }
                return Ok(());
            };
            let path = VPath::parse(path.as_deref().unwrap_or(""))?;
            let view = s.resolve(&tree, &path)?;
            for d in &view.children {
                writeln!(out, "{d}/")?;
            }
            for id in &view.file_refs {
                writeln!(out, "[{id}] {}", c.get_file(*id)?.ingest_name)?;
            }
            Ok(())
        }),
        TreeCmd::Render { at } => read(root, |c| {
            let t = c.section(&at.section)?.tree(&at.tree)?;
            print!("{}", render_tree(t, c.field()));
            Ok(())
        }),
        TreeCmd::Export { at, target } => read(root, |c| export(c, &at, &target)),
    }
}

fn export(c: &Catalog, at: &TreeRef, target: &Path) -> Result<()> {
    let t = c.section(&at.section)?.tree(&at.tree)?;
    let report = export_tree(t, c.field(), target)?;
    let mut out = io::stdout().lock();
    for f in &report.files {
        let mode = match f.mode {
            LinkMode::HardLink => "link",
            LinkMode::Copy => "copy",
        };
        let rel = f.path.strip_prefix(target).unwrap_or(&f.path);
        writeln!(out, "{mode}\t{}\t{}", f.id, rel.display())?;
    }
    writeln!(
        out,
        "exported {} file(s) in {} dir(s) to {} ({} hard link(s), {} copy(ies))",
        report.files.len(),
        report.dirs,
        target.display(),
        report.count(LinkMode::HardLink),
        report.count(LinkMode::Copy)
    )?;
    Ok(())
}
