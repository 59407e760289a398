use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EmbedError, Result};
use crate::objectives::MethodTag;
use crate::types::{PressureReport, PressureWarning, TraceRecord};

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    index: usize,
    pressure: f64,
    pressured: bool,
    method: MethodTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning: Option<PressureWarning>,
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| EmbedError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line =
            serde_json::to_string(&item).map_err(|e| EmbedError::Validation(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| EmbedError::io(path, e))?;
    }
    out.flush().map_err(|e| EmbedError::io(path, e))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| EmbedError::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EmbedError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| EmbedError::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            reason: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// One JSON object per point.
pub fn save_report(path: impl AsRef<Path>, report: &PressureReport) -> Result<()> {
    let warning = |k: usize| {
        report
            .warnings
            .iter()
            .find(|(i, _)| *i == k)
            .map(|(_, w)| *w)
    };
    write_lines(
        path.as_ref(),
        report
            .pressure
            .iter()
            .enumerate()
            .map(|(k, &p)| PointRecord {
                index: k,
                pressure: p,
                pressured: report.is_pressured(k),
                method: report.method,
                warning: warning(k),
            }),
    )
}

pub fn load_report(path: impl AsRef<Path>) -> Result<PressureReport> {
    let path = path.as_ref();
    let mut records: Vec<PointRecord> = read_lines(path)?;
    records.sort_by_key(|r| r.index);
    let method = records.first().map_or(MethodTag::Ee, |r| r.method);
    for (k, r) in records.iter().enumerate() {
        if r.index != k || r.method != method || r.pressured != (r.pressure > 0.0) {
            return Err(EmbedError::Parse {
                path: path.to_path_buf(),
                row: k + 1,
                reason: "inconsistent pressure record".into(),
            });
        }
    }
    let warnings = records
        .iter()
        .filter_map(|r| r.warning.map(|w| (r.index, w)))
        .collect();
    Ok(PressureReport::from_values(
        method,
        records.iter().map(|r| r.pressure).collect(),
        warnings,
    ))
}

/// One JSON object per iteration; an empty trace gives an empty file.
pub fn save_trace(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    write_lines(path.as_ref(), trace.iter())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    read_lines(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip() {
        let report = PressureReport::from_values(
            MethodTag::Sne,
            vec![0.0, 0.25, 1.0 / 3.0, 0.0],
            vec![(3, PressureWarning::IsolatedPoint)],
        );
        let f = tempfile::NamedTempFile::new().unwrap();
        save_report(f.path(), &report).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = load_report(f.path()).unwrap();
        assert_eq!(back.pressured_set, report.pressured_set);
        assert_eq!(back, report);
    }

    #[test]
    fn empty_trace_is_empty_file() {
        let f = tempfile::NamedTempFile::new().unwrap();
        save_trace(f.path(), &[]).unwrap();
        assert_eq!(std::fs::read_to_string(f.path()).unwrap(), "");
        assert!(load_trace(f.path()).unwrap().is_empty());
    }

    #[test]
    fn trace_has_one_line_per_iteration() {
        let trace: Vec<TraceRecord> = (0..7)
            .map(|i| TraceRecord {
                iter: i,
                objective: 1.0 / (i + 1) as f64,
                start_objective: 1.0,
                base_objective: 0.5,
                step: 0.8,
                pressured_fraction: 0.1,
                mu: 0.0,
            })
            .collect();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_trace(f.path(), &trace).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert_eq!(load_trace(f.path()).unwrap(), trace);
    }

    #[test]
    fn malformed_line_reports_row() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "{\"iter\":0}\n").unwrap();
        assert!(matches!(
            load_trace(f.path()),
            Err(EmbedError::Parse { row: 1, .. })
        ));
    }
}
