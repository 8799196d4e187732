//! CSV attribute import and the canonical CSV form of a section's matrix.
//!
//! Format: UTF-8, header `id,<attr1>,<attr2>,...`, one row per file; an
//! empty cell means unset.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use vfield::{AttributeValue, FileId, Section};

/// Reads every row first and applies them in one step, so a bad row leaves
/// the section untouched.
pub fn import(section: &mut Section, input: impl Read) -> Result<usize> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().context("reading CSV header")?.clone();
    let mut cols = headers.iter();
    if cols.next() != Some("id") {
        bail!("CSV header must start with `id`");
    }
    let attrs: Vec<String> = cols.map(str::to_owned).collect();
    for (i, a) in attrs.iter().enumerate() {
        if !section.schema().iter().any(|s| s.as_str() == a) {
            bail!("attribute {a:?} is not defined in section {:?}", section.name());
        }
        if attrs[..i].contains(a) {
            bail!("attribute {a:?} appears twice in the header");
        }
    }

    let mut writes = Vec::new();
    let mut rows = 0;
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = record.with_context(|| format!("CSV line {line}"))?;
        let id: FileId = record[0]
            .parse()
            .with_context(|| format!("CSV line {line}: bad id {:?}", &record[0]))?;
        for (attr, cell) in attrs.iter().zip(record.iter().skip(1)) {
            let value = if cell.is_empty() {
                None
            } else {
                Some(AttributeValue::new(cell).with_context(|| format!("CSV line {line}"))?)
            };
            writes.push((id, attr.clone(), value));
        }
        rows += 1;
    }
    section.set_values(writes)?;
    Ok(rows)
}

/// Writes the full matrix in assignment order × schema order.
pub fn export(section: &Section, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let m = section.matrix();
    let mut header = vec!["id".to_owned()];
    header.extend(m.attributes.iter().map(|a| a.to_string()));
    w.write_record(&header)?;
    for (id, cells) in m.file_ids.iter().zip(&m.cells) {
        let mut row = vec![id.to_string()];
        row.extend(cells.iter().map(|c| c.as_ref().map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
