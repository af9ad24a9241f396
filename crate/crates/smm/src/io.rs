//! Atomic file output and the CSV formats for datasets and training traces.
//!
//! CSV files written here start with a single `#` comment line carrying the
//! tool version, config hash and seed; readers skip `#` lines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use smm_core::data::Provenance;
use smm_core::train::TrainTrace;
use smm_core::{Dataset, MonotonicityMask};

use crate::{Error, Result, TOOL_VERSION};

/// Identifies the run that produced an artifact.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ArtifactMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactMeta {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        ArtifactMeta {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            seed,
        }
    }

    fn comment_line(&self) -> String {
        format!(
            "# tool_version={} config_hash={} seed={}\n",
            self.tool_version, self.config_hash, self.seed
        )
    }
}

/// Write `contents` to a sibling temp file, then rename it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Bit pattern of `v` as 16 lowercase hex digits.
pub fn f64_to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn f64_from_hex(s: &str) -> Option<f64> {
    if s.len() != 16 {
        return None;
    }
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::config(format!("{}: {e}", path.display()))
}

/// A dataset read from CSV together with its column names.
#[derive(Clone, Debug)]
pub struct CsvDataset {
    pub data: Dataset,
    /// Feature names followed by the target name.
    pub columns: Vec<String>,
    /// Present when a mask sidecar was found.
    pub mask: Option<MonotonicityMask>,
}

/// Default sidecar for `data.csv`: `data.mask.json`.
pub fn default_mask_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("mask.json")
}

/// Read a header-first CSV whose last column is the target.
///
/// `mask_path` names a JSON list of constrained column names. When it is
/// `None` the default sidecar is used if it exists.
pub fn read_dataset_csv(path: &Path, mask_path: Option<&Path>) -> Result<CsvDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::config(format!("{}: {other:?}", path.display())),
        })?;
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.len() < 2 {
        return Err(Error::config(format!(
            "{}: need at least one feature column and a target column",
            path.display()
        )));
    }
    let dim = columns.len() - 1;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::config(format!(
                    "{}: row {}, column `{}`: `{field}` is not a number",
                    path.display(),
                    row + 1,
                    columns[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::config(format!(
                    "{}: row {}, column `{}` is not finite",
                    path.display(),
                    row + 1,
                    columns[col]
                )));
            }
            if col < dim {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::config(format!("{}: no data rows", path.display())));
    }
    let data = Dataset::new(
        dim,
        inputs,
        targets,
        Provenance::File {
            path: path.display().to_string(),
        },
    )?;

    let sidecar = match mask_path {
        Some(p) => Some(p.to_path_buf()),
        None => Some(default_mask_path(path)).filter(|p| p.exists()),
    };
    let mask = match sidecar {
        Some(p) => Some(read_mask(&p, &columns[..dim])?),
        None => None,
    };
    Ok(CsvDataset { data, columns, mask })
}

/// Parse a mask sidecar: a JSON list of constrained feature names.
pub fn read_mask(path: &Path, features: &[String]) -> Result<MonotonicityMask> {
    let names: Vec<String> = serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| Error::config(format!("{}: expected a JSON list of column names: {e}", path.display())))?;
    let mut flags = vec![false; features.len()];
    for name in &names {
        match features.iter().position(|f| f == name) {
            Some(i) => flags[i] = true,
            None => {
                return Err(Error::config(format!(
                    "{}: `{name}` is not a feature column",
                    path.display()
                )))
            }
        }
    }
    Ok(MonotonicityMask::new(flags)?)
}

/// Mask sidecar contents for `mask` over `features`.
pub fn mask_json(mask: &MonotonicityMask, features: &[String]) -> String {
    let names: Vec<&str> = mask.constrained_indices().map(|i| features[i].as_str()).collect();
    let mut s = serde_json::to_string_pretty(&names).expect("string list serializes");
    s.push('\n');
    s
}

/// Dataset as CSV. `columns` holds the feature names then the target name.
pub fn dataset_csv(data: &Dataset, columns: &[String], meta: &ArtifactMeta) -> String {
    let mut out = meta.comment_line();
    out.push_str(&columns.join(","));
    out.push('\n');
    for (x, y) in data.rows() {
        for v in x {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&fmt_f64(y));
        out.push('\n');
    }
    out
}

/// `x1..xd, y` column names.
pub fn default_columns(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).chain(["y".to_string()]).collect()
}

/// Trace as CSV with columns `epoch,train_mse,val_mse,beta,stopped_reason`.
/// Absent values are empty; the stop reason appears on the last row only.
pub fn trace_csv(trace: &TrainTrace, meta: &ArtifactMeta) -> String {
    let mut out = meta.comment_line();
    out.push_str("epoch,train_mse,val_mse,beta,stopped_reason\n");
    let last = trace.rows.len().saturating_sub(1);
    for (i, row) in trace.rows.iter().enumerate() {
        let reason = match trace.stopped {
            Some(r) if i == last => r.name(),
            _ => "",
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.epoch,
            fmt_f64(row.train_mse),
            row.val_mse.map(fmt_f64).unwrap_or_default(),
            row.beta.map(fmt_f64).unwrap_or_default(),
            reason
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use smm_core::train::{StopReason, TraceRow};

    fn meta() -> ArtifactMeta {
        ArtifactMeta::new("abc", 7)
    }

    #[test]
    fn hex_roundtrip_is_exact() {
        for v in [0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, -2.5e300] {
            let back = f64_from_hex(&f64_to_hex(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
        assert_eq!(f64_to_hex(1.0), "3ff0000000000000");
        assert!(f64_from_hex("3ff").is_none());
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data = Dataset::new(
            2,
            vec![0.1, 1.0 / 3.0, 0.7, 2e-17],
            vec![0.30000000000000004, -1.5],
            Provenance::Derived { from: "t".into() },
        )
        .unwrap();
        let cols: Vec<String> = ["a", "b", "target"].iter().map(|s| s.to_string()).collect();
        let path = dir.path().join("d.csv");
        write_atomic(&path, dataset_csv(&data, &cols, &meta()).as_bytes()).unwrap();
        let mask = MonotonicityMask::new(vec![false, true]).unwrap();
        write_atomic(&default_mask_path(&path), mask_json(&mask, &cols[..2]).as_bytes()).unwrap();

        let back = read_dataset_csv(&path, None).unwrap();
        assert_eq!(back.columns, cols);
        assert_eq!(back.data.inputs(), data.inputs());
        assert_eq!(back.data.targets(), data.targets());
        assert_eq!(back.mask, Some(mask));
    }

    #[test]
    fn bad_cells_and_mask_names_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "x,y\n1,2\nfoo,3\n").unwrap();
        let err = read_dataset_csv(&path, None).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("`x`"), "{err}");

        fs::write(&path, "x,y\n1,2\n").unwrap();
        let mask = dir.path().join("m.json");
        fs::write(&mask, "[\"z\"]").unwrap();
        let err = read_dataset_csv(&path, Some(&mask)).unwrap_err().to_string();
        assert!(err.contains("`z`"), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = read_dataset_csv(Path::new("/nonexistent/d.csv"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn trace_csv_layout() {
        let trace = TrainTrace {
            rows: vec![
                TraceRow {
                    epoch: 1,
                    train_mse: 0.5,
                    val_mse: None,
                    beta: Some(0.25),
                },
                TraceRow {
                    epoch: 2,
                    train_mse: 0.25,
                    val_mse: None,
                    beta: Some(0.5),
                },
            ],
            stopped: Some(StopReason::Progress),
            selected_epoch: 2,
        };
        let csv = trace_csv(&trace, &meta());
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# tool_version="));
        assert_eq!(lines[1], "epoch,train_mse,val_mse,beta,stopped_reason");
        assert_eq!(lines[2], "1,0.5,,0.25,");
        assert_eq!(lines[3], "2,0.25,,0.5,progress");
    }
}
