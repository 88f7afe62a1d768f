use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Files produced by one command, written under the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    /// Names of violated bounds.
    pub violated: Vec<String>,
    /// Text echoed to stdout.
    pub summary: String,
}

impl Artifacts {
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.files.push((name.into(), bytes));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.files.push((name.into(), s.into_bytes()));
        Ok(())
    }

    pub fn text(&mut self, name: &str, s: String) {
        self.files.push((name.into(), s.into_bytes()));
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(
        command: &str,
        cfg: &ExperimentConfig,
        workers: Option<usize>,
        wall: f64,
        out: &Artifacts,
    ) -> Self {
        Manifest {
            tool: "lrising",
            version: lrising::VERSION,
            command: command.into(),
            seed: cfg.run.seed,
            workers,
            wall_time_seconds: wall,
            files: out.files.iter().map(|(n, _)| n.clone()).collect(),
            config: cfg.clone(),
        }
    }
}

pub fn emit(dir: &Path, out: &Artifacts, manifest: &Manifest) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in &out.files {
        fs::write(dir.join(name), bytes).map_err(io)?;
    }
    let mut m = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
    m.push('\n');
    fs::write(dir.join("manifest.json"), m).map_err(io)?;
    Ok(())
}
