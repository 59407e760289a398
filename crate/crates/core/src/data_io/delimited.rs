use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{EmbedError, Result};
use crate::types::{Dataset, Embedding};

fn read_rows(path: &Path, delimiter: u8) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => EmbedError::io(path, io),
            other => EmbedError::Parse {
                path: path.to_path_buf(),
                row: 0,
                reason: format!("{other:?}"),
            },
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EmbedError::Parse {
            path: path.to_path_buf(),
            row: e.position().map_or(i + 1, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

fn parse_matrix(path: &Path, rows: &[Vec<String>], cols: usize) -> Result<Array2<f64>> {
    let mut values = Vec::with_capacity(rows.len() * cols);
    for (r, row) in rows.iter().enumerate() {
        for field in &row[..cols] {
            let v: f64 = field.parse().map_err(|_| EmbedError::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                reason: format!("{field:?} is not a number"),
            })?;
            values.push(v);
        }
    }
    Array2::from_shape_vec((rows.len(), cols), values)
        .map_err(|e| EmbedError::Validation(e.to_string()))
}

/// Reads a delimited numeric table; with `has_labels` the last column is an
/// integer label.
pub fn load_delimited(path: impl AsRef<Path>, delimiter: u8, has_labels: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let rows = read_rows(path, delimiter)?;
    let width = rows.first().map_or(0, Vec::len);
    let cols = if has_labels {
        width.saturating_sub(1)
    } else {
        width
    };
    if cols == 0 {
        return Err(EmbedError::Parse {
            path: path.to_path_buf(),
            row: 1,
            reason: "no coordinate columns".into(),
        });
    }
    let points = parse_matrix(path, &rows, cols)?;
    let labels = if has_labels {
        let labels = rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[cols].parse::<i64>().map_err(|_| EmbedError::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    reason: format!("label {:?} is not an integer", row[cols]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(labels)
    } else {
        None
    };
    Dataset::new(points, labels)
}

pub fn load_embedding(path: impl AsRef<Path>, delimiter: u8) -> Result<Embedding> {
    let path = path.as_ref();
    let rows = read_rows(path, delimiter)?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 {
        return Err(EmbedError::Parse {
            path: path.to_path_buf(),
            row: 1,
            reason: "empty embedding file".into(),
        });
    }
    Embedding::new(parse_matrix(path, &rows, cols)?)
}

fn write_rows(
    path: &Path,
    delimiter: u8,
    points: &Array2<f64>,
    labels: Option<&[i64]>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| EmbedError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let sep = delimiter as char;
    for (i, row) in points.rows().into_iter().enumerate() {
        let mut line = row
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(&sep.to_string());
        if let Some(labels) = labels {
            line.push(sep);
            line.push_str(&labels[i].to_string());
        }
        writeln!(out, "{line}").map_err(|e| EmbedError::io(path, e))?;
    }
    out.flush().map_err(|e| EmbedError::io(path, e))
}

pub fn save_embedding(path: impl AsRef<Path>, embedding: &Embedding) -> Result<()> {
    write_rows(path.as_ref(), b',', embedding.coords(), None)
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset, delimiter: u8) -> Result<()> {
    write_rows(
        path.as_ref(),
        delimiter,
        &data.points,
        data.labels.as_deref(),
    )
}
