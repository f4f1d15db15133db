//! Manifests, versioned CSV files and parameter sidecars.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use qmetro::optimize::OptRecord;
use qmetro::Nonlinearity;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

const HEADER_PREFIX: &str = "# qmetro schema=";

/// Fully resolved run description; its hash tags every file the run writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub command: String,
    pub arguments: serde_json::Value,
    pub config: RunConfig,
    #[serde(default)]
    pub hash: String,
}

impl Manifest {
    pub fn new(command: &str, arguments: serde_json::Value, config: RunConfig) -> Self {
        let mut m = Manifest { schema: SCHEMA_VERSION, command: command.to_string(), arguments, config, hash: String::new() };
        let body = serde_json::to_vec(&m).expect("manifest serializes");
        m.hash = format!("{:x}", Sha256::digest(&body));
        m
    }

    pub fn check_schema(&self) -> Result<(), CliError> {
        check_version(self.schema)
    }
}

fn check_version(found: u32) -> Result<(), CliError> {
    if found != SCHEMA_VERSION {
        return Err(CliError::Input(format!("unsupported schema version {found}, expected {SCHEMA_VERSION}")));
    }
    Ok(())
}

/// Output directory of one run.
pub struct RunDir {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunDir {
    pub fn create(manifest: Manifest) -> Result<Self, CliError> {
        let dir = manifest.config.output.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let run = RunDir { dir, manifest };
        let path = run.path("manifest.json");
        let text = serde_json::to_string_pretty(&run.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV writer whose first line records the schema version and manifest hash.
    pub fn csv(&self, name: &str) -> Result<CsvOut, CliError> {
        let path = self.path(name);
        let mut file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        writeln!(file, "{HEADER_PREFIX}{SCHEMA_VERSION} manifest={}", self.manifest.hash).map_err(|e| CliError::io(&path, e))?;
        Ok(CsvOut { writer: csv::Writer::from_writer(file), path })
    }

    pub fn write_params(&self, name: &str, stage: &str, records: &[OptRecord]) -> Result<PathBuf, CliError> {
        let cfg = &self.manifest.config;
        let sidecar = ParamsFile {
            schema: SCHEMA_VERSION,
            manifest: self.manifest.hash.clone(),
            stage: stage.to_string(),
            kind: cfg.kind,
            n_mean: cfg.n,
            cutoff: cfg.cutoff(),
            records: records.to_vec(),
        };
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub struct CsvOut {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl CsvOut {
    pub fn row<I, T>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Optimized circuits saved next to the record CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema: u32,
    pub manifest: String,
    pub stage: String,
    pub kind: Nonlinearity,
    pub n_mean: f64,
    pub cutoff: usize,
    pub records: Vec<OptRecord>,
}

impl ParamsFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let schema = value.get("schema").and_then(|v| v.as_u64()).unwrap_or(0);
        check_version(schema as u32)?;
        serde_json::from_value(value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Fails unless the sidecar was produced for the same register, photon number and cutoff.
    pub fn check_matches(&self, config: &RunConfig) -> Result<(), CliError> {
        if self.kind != config.kind || self.n_mean != config.n || self.cutoff != config.cutoff() {
            return Err(CliError::Input(format!(
                "parameter file is for {} N={} cutoff={}, run is {} N={} cutoff={}",
                self.kind,
                self.n_mean,
                self.cutoff,
                config.kind,
                config.n,
                config.cutoff()
            )));
        }
        Ok(())
    }

    /// Lowest objective at depth `d`, or over all depths.
    pub fn best(&self, d: Option<usize>) -> Option<&OptRecord> {
        self.records
            .iter()
            .filter(|r| d.is_none_or(|d| r.d == d))
            .min_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
    }
}

pub fn float(v: f64) -> String {
    format!("{v}")
}

pub fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}
