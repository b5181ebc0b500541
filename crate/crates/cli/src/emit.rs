//! CSV, JSON and SVG writers.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{Format, Output};
use crate::error::{CliError, Result};
use crate::svg::Plot;

/// 17 significant digits: enough to parse back to the same f64.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// Numbered column names: prefix_1 … prefix_n.
pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Everything one command produces.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub json: String,
    pub tables: Vec<(String, Table)>,
    pub plots: Vec<(String, Plot)>,
    pub passed: bool,
    pub summary: Vec<String>,
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| CliError::io(path, e))
}

/// Writes the requested formats under `out.dir`, or the JSON report to
/// stdout without a directory.
pub fn emit(a: &Artifacts, out: &Output) -> Result<Vec<std::path::PathBuf>> {
    let Some(dir) = &out.dir else {
        print!("{}", a.json);
        return Ok(vec![]);
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for f in &out.formats {
        match f {
            Format::Json => {
                let p = dir.join("report.json");
                write(&p, &a.json)?;
                written.push(p);
            }
            Format::Csv => {
                for (name, t) in &a.tables {
                    let p = dir.join(format!("{name}.csv"));
                    write(&p, &t.to_csv())?;
                    written.push(p);
                }
            }
            Format::Svg => {
                for (name, plot) in &a.plots {
                    let p = dir.join(format!("{name}.svg"));
                    write(&p, &plot.render())?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rfc4180_quoting() {
        let mut t = Table::new(vec!["a".into(), "b,c".into()]);
        t.push(vec!["1".into(), "x\"y".into()]);
        assert_eq!(t.to_csv(), "a,\"b,c\"\r\n1,\"x\"\"y\"\r\n");
    }

    #[test]
    fn unwritable_dir_is_io() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let out = Output {
            dir: Some(blocker.join("sub")),
            formats: vec![Format::Json],
        };
        let err = emit(&Artifacts::default(), &out).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    proptest! {
        #[test]
        fn numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
