//! ASCII rendering of a virtual tree.
//!
//! ```text
//! books/
//! ├── 1825/
//! │   └── Пушкин/
//! │       └── [1] onegin.txt
//! └── [4] notes.txt
//! ```

use crate::field::FileField;
use crate::vtree::{VDir, VTree};

/// Subdirectories come first in stored order, then files by ascending id.
/// Files missing from the field render as `[<id>] ?`.
pub fn render_tree(tree: &VTree, field: &FileField) -> String {
    let mut out = format!("{}/\n", tree.name());
    render_children(tree.root(), field, "", &mut out);
    out
}

fn render_children(dir: &VDir, field: &FileField, prefix: &str, out: &mut String) {
    let total = dir.children.len() + dir.file_refs.len();
    let mut i = 0;
    for child in &dir.children {
        i += 1;
        let last = i == total;
        out.push_str(prefix);
        out.push_str(if last { "└── " } else { "├── " });
        out.push_str(&child.name);
        out.push_str("/\n");
        let next = format!("{prefix}{}", if last { "    " } else { "│   " });
        render_children(child, field, &next, out);
    }
    for id in &dir.file_refs {
        i += 1;
        out.push_str(prefix);
        out.push_str(if i == total { "└── " } else { "├── " });
        let name = field.get_file(*id).map(|e| e.ingest_name.as_str()).unwrap_or("?");
        out.push_str(&format!("[{id}] {name}\n"));
    }
}
