//! Delimited-text ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use xai_core::data::{Dataset, Matrix};

use crate::error::{Result, XaiError};

/// Reads a CSV file with a header row. Every column except `label_column`
/// must be numeric; labels are encoded in order of first appearance.
pub fn load_csv(path: &Path, label_column: &str, delimiter: u8) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| XaiError::Io { path: path.to_path_buf(), source })?;
    read_csv(file, label_column, delimiter)
}

/// [`load_csv`] over any reader. Row numbers in errors are file lines, so
/// the first data row is row 2.
pub fn read_csv<R: Read>(reader: R, label_column: &str, delimiter: u8) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(XaiError::EmptyFile),
    };
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = BTreeSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(XaiError::DuplicateHeader(n.clone()));
        }
    }
    let label_idx = names
        .iter()
        .position(|n| n == label_column)
        .ok_or_else(|| XaiError::MissingColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = names.iter().enumerate().filter(|&(i, _)| i != label_idx).map(|(_, n)| n.clone()).collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut class_index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != names.len() {
            return Err(XaiError::RaggedRow { row, expected: names.len(), got: rec.len() });
        }
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if j == label_idx {
                let next = classes.len();
                let c = *class_index.entry(cell.to_string()).or_insert(next);
                if c == next {
                    classes.push(cell.to_string());
                }
                labels.push(c);
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => values.push(v),
                    _ => return Err(XaiError::NonNumericCell(row, names[j].clone())),
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(XaiError::EmptyFile);
    }
    let n = labels.len();
    let features = Matrix::new(n, feature_names.len(), values)?;
    Ok(Dataset::new(features, labels, feature_names, classes)?)
}

/// Writes a dataset in the format [`load_csv`] reads, label column last.
pub fn write_csv<W: Write>(d: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header)?;
    for (row, &label) in d.features.iter_rows().zip(&d.labels) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(d.class_names[label].clone());
        w.write_record(&cells)?;
    }
    w.flush().map_err(|source| XaiError::Io { path: "<csv>".into(), source })?;
    Ok(())
}
