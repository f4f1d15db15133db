//! Run configuration: defaults, file loading and flag overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qmetro::analysis::default_time_grid;
use qmetro::hilbert::default_cutoff;
use qmetro::metrology::HomodyneGrid;
use qmetro::optimize::{default_step, OptimizerConfig};
use qmetro::{Nonlinearity, ProtocolSettings};
use serde::{Deserialize, Serialize};

use crate::output::Manifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Measurement {
    Counting,
    Homodyne,
}

/// Uniform grid `start..=stop` with spacing `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn default_for(kind: Nonlinearity) -> Self {
        let grid = default_time_grid(kind);
        GridSpec { start: grid[0], stop: grid[grid.len() - 1], step: grid[1] - grid[0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Nonlinearity,
    pub n: f64,
    pub cutoff: Option<usize>,
    pub phi: f64,
    pub delta: f64,
    pub measurement: Measurement,
    pub theta: f64,
    pub homodyne_points: Option<usize>,
    pub optimizer: OptimizerConfig,
    pub sweep: Option<GridSpec>,
    pub output: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: Nonlinearity::Kerr,
            n: 20.0,
            cutoff: None,
            phi: PI / 3.0,
            delta: 1e-2,
            measurement: Measurement::Counting,
            theta: 0.0,
            homodyne_points: None,
            optimizer: OptimizerConfig::default(),
            sweep: None,
            output: PathBuf::from("out"),
            threads: None,
        }
    }
}

/// Flag values that win over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<Nonlinearity>,
    pub n: Option<f64>,
    pub cutoff: Option<usize>,
    pub phi: Option<f64>,
    pub delta: Option<f64>,
    pub measurement: Option<Measurement>,
    pub theta: Option<f64>,
    pub homodyne_points: Option<usize>,
    pub seeds: Option<usize>,
    pub d_max: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub init_scale: Option<f64>,
    pub initial_step: Option<f64>,
    pub master_seed: Option<u64>,
    pub sweep: Option<GridSpec>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Read a TOML configuration, or the configuration echoed by a previous run's `manifest.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            manifest.check_schema()?;
            return Ok(manifest.config);
        }
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value.clone() {
                    self.$($field).+ = v;
                }
            };
        }
        set!(kind = o.kind);
        set!(n = o.n);
        set!(phi = o.phi);
        set!(delta = o.delta);
        set!(measurement = o.measurement);
        set!(theta = o.theta);
        set!(optimizer.seeds = o.seeds);
        set!(optimizer.d_max = o.d_max);
        set!(optimizer.max_iters = o.max_iters);
        set!(optimizer.tol = o.tol);
        set!(optimizer.init_scale = o.init_scale);
        set!(optimizer.master_seed = o.master_seed);
        set!(output = o.output);
        if o.cutoff.is_some() {
            self.cutoff = o.cutoff;
        }
        if o.homodyne_points.is_some() {
            self.homodyne_points = o.homodyne_points;
        }
        if o.initial_step.is_some() {
            self.optimizer.initial_step = o.initial_step;
        }
        if o.sweep.is_some() {
            self.sweep = o.sweep;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        self
    }

    /// Fill every optional field with the value the run will actually use.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if !(self.n > 0.0) || !self.n.is_finite() {
            return Err(CliError::Input(format!("mean photon number must be positive, got {}", self.n)));
        }
        let cutoff = *self.cutoff.get_or_insert(default_cutoff(self.n));
        self.homodyne_points.get_or_insert(HomodyneGrid::default_for(cutoff).points);
        self.optimizer.initial_step.get_or_insert(default_step(self.kind));
        self.sweep.get_or_insert(GridSpec::default_for(self.kind));
        self.optimizer.validate()?;
        self.homodyne_grid().validate(cutoff)?;
        Ok(self)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff.unwrap_or_else(|| default_cutoff(self.n))
    }

    pub fn settings(&self) -> ProtocolSettings {
        ProtocolSettings { kind: self.kind, n_mean: self.n, cutoff: self.cutoff(), phi: self.phi, delta: self.delta }
    }

    pub fn homodyne_grid(&self) -> HomodyneGrid {
        let cutoff = self.cutoff();
        match self.homodyne_points {
            Some(p) => HomodyneGrid::with_points(cutoff, p),
            None => HomodyneGrid::default_for(cutoff),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: RunConfig = toml::from_str("kind = \"jc\"\nn = 8\n[optimizer]\nseeds = 3\n").unwrap();
        assert_eq!(file.kind, Nonlinearity::Jc);
        assert_eq!(file.optimizer.seeds, 3);
        assert_eq!(file.optimizer.max_iters, 1000);
        let o = Overrides { n: Some(12.0), seeds: Some(5), ..Default::default() };
        let c = file.apply(&o).resolve().unwrap();
        assert_eq!(c.n, 12.0);
        assert_eq!(c.optimizer.seeds, 5);
        assert_eq!(c.cutoff, Some(24));
        assert_eq!(c.optimizer.initial_step, Some(default_step(Nonlinearity::Jc)));
        assert_eq!(c.sweep, Some(GridSpec::default_for(Nonlinearity::Jc)));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("nonsense = 1\n").is_err());
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default().resolve().unwrap();
        assert_eq!(c.cutoff, Some(40));
        assert!((c.phi - PI / 3.0).abs() < 1e-15);
        assert_eq!(c.delta, 1e-2);
        assert_eq!(c.theta, 0.0);
        assert_eq!(c.homodyne_points, Some(801));
    }
}
