use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{Format, ResolvedConfig};
use crate::CliError;

/// Result of one experiment: a flat table for CSV and a full JSON document.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: serde_json::Value,
}

impl Artifact {
    pub fn new(header: &[&str], json: impl Serialize) -> Result<Self, CliError> {
        Ok(Artifact {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            json: serde_json::to_value(json).map_err(|e| CliError::Io(format!("serialize: {e}")))?,
        })
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Seventeen significant digits.
pub fn num17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ints(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn render(config: &ResolvedConfig, artifact: &Artifact, format: Format) -> Result<Vec<u8>, CliError> {
    let ser = |e: &dyn std::fmt::Display| CliError::Io(format!("render: {e}"));
    match format {
        Format::Json => {
            let doc = serde_json::json!({ "config": config, "result": artifact.json });
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| ser(&e))?;
            text.push('\n');
            Ok(text.into_bytes())
        }
        Format::Csv => {
            let mut out = Vec::new();
            for line in serde_json::to_string_pretty(config).map_err(|e| ser(&e))?.lines() {
                writeln!(out, "# {line}").map_err(|e| ser(&e))?;
            }
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&artifact.header).map_err(|e| ser(&e))?;
            for r in &artifact.rows {
                w.write_record(r).map_err(|e| ser(&e))?;
            }
            w.into_inner().map_err(|e| ser(&e))
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| io(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io(&e))?;
    tmp.write_all(bytes).map_err(|e| io(&e))?;
    tmp.as_file().sync_all().map_err(|e| io(&e))?;
    tmp.persist(path).map_err(|e| io(&e.error))?;
    Ok(())
}

/// Parses the `#` header echo of a CSV artifact back into its config.
pub fn read_csv_config(text: &str) -> Result<ResolvedConfig, CliError> {
    let json: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).map(|l| l.strip_prefix("# ").unwrap_or(&l[1..])).collect();
    serde_json::from_str(&json.join("\n")).map_err(|e| CliError::Validation(format!("header echo: {e}")))
}

/// Header and rows of a CSV artifact.
pub fn read_csv_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let bad = |e: csv::Error| CliError::Validation(format!("csv: {e}"));
    let header = r.headers().map_err(bad)?.iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.map(|x| x.iter().map(str::to_owned).collect())).collect::<Result<_, _>>().map_err(bad)?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-150, 6.02e23, -0.0, f64::MIN_POSITIVE, 123456789.123456789] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
            assert_eq!(num17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::NEG_INFINITY).parse::<f64>().unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
