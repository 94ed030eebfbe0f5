//! CSV and JSON artifacts with a metadata header.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::CliError;

/// Full-precision float formatting (17 significant digits).
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Meta {
    pub experiment: String,
    pub source: String,
    pub config_hash: String,
}

pub struct Sink {
    dir: PathBuf,
    meta: Meta,
    started: Instant,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, meta: Meta) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), meta, started: Instant::now(), written: Vec::new() })
    }

    fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# scarlab {}", env!("CARGO_PKG_VERSION")),
            format!("# experiment = {}", self.meta.experiment),
            format!("# source = {}", self.meta.source),
            format!("# config_sha256 = {}", self.meta.config_hash),
        ]
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    /// Writes `rows` under `header`; metadata goes into `#` lines, wall time last.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{name}: {e}"));
        let mut out = self.open(name)?;
        for line in self.header_lines() {
            writeln!(out, "{line}").map_err(io)?;
        }
        writeln!(out, "# wall_time_s = {:.3}", self.started.elapsed().as_secs_f64()).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| CliError::Io(format!("{name}: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }

    pub fn meta_json(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": self.meta.experiment,
            "source": self.meta.source,
            "config_sha256": self.meta.config_hash,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        })
    }

    pub fn json(&mut self, name: &str, report: &Value) -> Result<(), CliError> {
        let doc = json!({ "meta": self.meta_json(), "report": report });
        let mut out = self.open(name)?;
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out, "{text}").map_err(|e| CliError::Io(format!("{name}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        for v in [std::f64::consts::PI, -1.0 / 3.0, 6.02214076e23, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
