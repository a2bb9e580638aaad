//! Run directories: CSV tables with 17 significant digits, a manifest that
//! is written first (marked incomplete) and finalized last, and a summary
//! of acceptance-relevant scalars.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mfgl_core::{Density, StateGrid};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Fixed-width scientific notation; round-trips every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Independent seed for a labelled stage of a run.
pub fn substream(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub struct RunDir {
    path: PathBuf,
    manifest: serde_json::Map<String, Value>,
    files: Vec<String>,
    started: Instant,
}

impl RunDir {
    pub fn create(path: &Path, command: &str, config: &RunConfig, threads: usize) -> Result<Self, CliError> {
        std::fs::create_dir_all(path)?;
        let mut manifest = serde_json::Map::new();
        manifest.insert("command".into(), json!(command));
        manifest.insert("config_hash".into(), json!(config.hash()));
        manifest.insert("seed".into(), json!(config.seed));
        manifest.insert("threads".into(), json!(threads));
        manifest.insert(
            "versions".into(),
            json!({
                "mfgl-cli": env!("CARGO_PKG_VERSION"),
                "mfgl-core": env!("CARGO_PKG_VERSION"),
                "mfgl-discrete": env!("CARGO_PKG_VERSION"),
            }),
        );
        manifest.insert("status".into(), json!("incomplete"));
        let mut dir = RunDir {
            path: path.to_path_buf(),
            manifest,
            files: Vec::new(),
            started: Instant::now(),
        };
        std::fs::write(path.join("config.toml"), config.normalized())?;
        dir.write_manifest()?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_manifest(&mut self) -> Result<(), CliError> {
        let mut m = self.manifest.clone();
        m.insert("files".into(), json!(self.files));
        let text = serde_json::to_string_pretty(&Value::Object(m))?;
        std::fs::write(self.path.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_path(self.path.join(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        std::fs::write(self.path.join(name), serde_json::to_string_pretty(value)? + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// `density_####.csv` with per-node density and probability.
    pub fn density(&mut self, index: usize, m: &Density, grid: &StateGrid) -> Result<(), CliError> {
        let q = m.probabilities(grid);
        let rows = (0..grid.len()).map(|k| {
            let (i, j) = grid.split(k);
            vec![num(grid.wealth()[i]), num(grid.income()[j]), num(m.values()[k]), num(q[k])]
        });
        self.csv(&format!("density_{index:04}.csv"), &["wealth", "income", "density", "probability"], rows)
    }

    /// Writes the summary and marks the run complete.
    pub fn finish(mut self, summary: Value) -> Result<Value, CliError> {
        self.json("summary.json", &summary)?;
        self.manifest.insert("status".into(), json!("complete"));
        self.manifest
            .insert("wall_time_s".into(), json!(self.started.elapsed().as_secs_f64()));
        self.write_manifest()?;
        Ok(summary)
    }

    /// Keeps partial outputs and records the failure.
    pub fn fail(mut self, err: &CliError) -> Result<(), CliError> {
        self.manifest.insert("status".into(), json!("incomplete"));
        self.manifest.insert("error".into(), json!(err.to_string()));
        self.manifest
            .insert("wall_time_s".into(), json!(self.started.elapsed().as_secs_f64()));
        self.write_manifest()
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn substreams_differ_by_label() {
        assert_eq!(substream(3, "a"), substream(3, "a"));
        assert_ne!(substream(3, "a"), substream(3, "b"));
        assert_ne!(substream(3, "a"), substream(4, "a"));
    }
}
