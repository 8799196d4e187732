use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod csv_io;

/// Deduplicated file field with virtual directory trees
#[derive(Debug, Parser)]
#[command(name = "vfield", version, about, long_about = None)]
pub struct Cli {
    /// Catalog directory (defaults to the current directory)
    #[arg(long, global = true, env = "VFIELD_DIR", value_name = "DIR")]
    catalog: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty catalog
    Init {
        /// Directory to initialize (defaults to the catalog directory)
        dir: Option<PathBuf>,
    },

    /// Add files or directories (recursively, in sorted order)
    #[command(arg_required_else_help = true)]
    Add {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },

    /// List the file field
    Ls,

    /// Remove a file that no section references
    Rm { id: u64 },

    /// Re-hash every blob and report problems
    Verify,

    /// Create sections and assign files to them
    #[command(subcommand)]
    Section(SectionCmd),

    /// Define attributes and set their values
    #[command(subcommand)]
    Attr(AttrCmd),

    /// Build, edit, render and export virtual trees
    #[command(subcommand)]
    Tree(TreeCmd),
}

#[derive(Debug, Subcommand)]
pub enum SectionCmd {
    /// Create an empty section
    Create { name: String },
    /// Assign files to a section
    Assign {
        section: String,
        #[arg(required = true)]
        ids: Vec<u64>,
    },
    /// Show a section's attribute matrix
    Show {
        section: String,
        /// Print the matrix as CSV in the import format
        #[arg(long)]
        csv: bool,
    },
    /// List sections
    List,
}

#[derive(Debug, Subcommand)]
pub enum AttrCmd {
    /// Append attributes to a section's schema
    Define {
        section: String,
        #[arg(required = true)]
        names: Vec<String>,
    },
    /// Set one cell; omit the value to unset it
    Set {
        section: String,
        id: u64,
        attr: String,
        value: Option<String>,
    },
    /// Import values from a CSV file with header `id,<attr>,...`
    ImportCsv { section: String, file: PathBuf },
}

#[derive(Debug, Args)]
pub struct TreeRef {
    pub section: String,
    pub tree: String,
}

#[derive(Debug, Subcommand)]
pub enum TreeCmd {
    /// Create an empty manual tree
    New {
        #[command(flatten)]
        at: TreeRef,
    },
    /// Create a directory, e.g. `2024/Пушкин`
    Mkdir {
        #[command(flatten)]
        at: TreeRef,
        path: String,
    },
    /// Remove an empty directory
    Rmdir {
        #[command(flatten)]
        at: TreeRef,
        path: String,
    },
    /// Move a directory under a new parent (`/` for the root)
    Mv {
        #[command(flatten)]
        at: TreeRef,
        from: String,
        to_parent: String,
    },
    /// Place files in a directory
    Link {
        #[command(flatten)]
        at: TreeRef,
        dir: String,
        #[arg(required = true)]
        ids: Vec<u64>,
    },
    /// Remove files from a directory
    Unlink {
        #[command(flatten)]
        at: TreeRef,
        dir: String,
        #[arg(required = true)]
        ids: Vec<u64>,
    },
    /// Build a tree automatically from attribute values
    Build {
        #[command(flatten)]
        at: TreeRef,
        /// Attributes in level order, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        by: Vec<String>,
        /// Restrict to these file ids, comma separated
        #[arg(long, value_delimiter = ',')]
        files: Option<Vec<u64>>,
        /// `skip`, `bucket` or `bucket=<label>`
        #[arg(long, default_value = "skip")]
        missing: String,
    },
    /// Rebuild an automatic tree from its recorded attributes
    Rebuild {
        #[command(flatten)]
        at: TreeRef,
    },
    /// List trees of a section, or the contents of one directory
    Ls {
        section: String,
        tree: Option<String>,
        path: Option<String>,
    },
    /// Draw a tree
    Render {
        #[command(flatten)]
        at: TreeRef,
    },
    /// Materialize a tree as real directories
    Export {
        #[command(flatten)]
        at: TreeRef,
        target: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
