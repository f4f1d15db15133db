//! Derivative-free optimization of preparation and pre-measurement circuits.
//!
//! Every seed grows its circuit one layer at a time: the optimum at depth
//! `d - 1` plus an all-zero layer seeds the search at depth `d`, so the best
//! objective of a seed never increases with depth.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_circuit, interaction_budget, layer_width, AnsatzParams, CircuitRole};
use crate::error::{Error, Result};
use crate::hilbert::{CompositeState, Nonlinearity};
use crate::metrology::{cfi, MeasurementKind, MeasurementModel};
use crate::protocol::Protocol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Nelder-Mead with dimension-adaptive coefficients.
    #[default]
    NelderMead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Objective evaluations allowed per depth.
    pub max_iters: usize,
    pub tol: f64,
    pub method: Method,
    pub init_scale: f64,
    /// Edge length of the starting simplex; `None` picks [`default_step`] for circuit searches
    /// and [`GENERIC_STEP`] elsewhere.
    pub initial_step: Option<f64>,
    pub seeds: usize,
    pub d_max: usize,
    pub master_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 1000,
            tol: 1e-10,
            method: Method::NelderMead,
            init_scale: 1e-2,
            initial_step: None,
            seeds: 10,
            d_max: 10,
            master_seed: 0,
        }
    }
}

/// Starting simplex edge when nothing else is known about the objective.
pub const GENERIC_STEP: f64 = 0.5;

/// Starting simplex edge for circuit parameters of `kind`.
///
/// JC circuits start on a plateau at `g = 0` whose nearest basin lies near the
/// first continuous minimum, so they need a wider first simplex.
pub fn default_step(kind: Nonlinearity) -> f64 {
    match kind {
        Nonlinearity::Jc => 2.0,
        Nonlinearity::Kerr => 0.5,
    }
}

impl OptimizerConfig {
    /// This configuration with the starting simplex edge resolved for `kind`.
    pub fn resolved_for(&self, kind: Nonlinearity) -> OptimizerConfig {
        OptimizerConfig { initial_step: Some(self.initial_step.unwrap_or(default_step(kind))), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.init_scale >= 0.0) || self.initial_step.is_some_and(|h| !(h > 0.0)) {
            return Err(Error::InvalidArgument("init_scale must be non-negative and initial_step positive".into()));
        }
        if self.seeds == 0 || self.d_max == 0 {
            return Err(Error::InvalidArgument("seeds and d_max must be positive".into()));
        }
        Ok(())
    }

    /// Depths `1..=d_max`.
    pub fn schedule(&self) -> Vec<usize> {
        (1..=self.d_max).collect()
    }

    /// Generator for one seed: the master stream advanced to a per-seed counter.
    pub fn rng_for(&self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(seed);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective evaluations spent.
    pub iters: usize,
}

/// Minimize `objective` from `x0`.
pub fn minimize<F>(mut objective: F, x0: &[f64], config: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    try_minimize(|x| Ok(objective(x)), x0, config)
}

/// As [`minimize`], for objectives that can fail; the first error aborts the search.
pub fn try_minimize<F>(objective: F, x0: &[f64], config: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    config.validate()?;
    match config.method {
        Method::NelderMead => nelder_mead(objective, x0, config),
    }
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { evaluations: self.evals });
        }
        Ok(v)
    }
}

fn nelder_mead<F>(objective: F, x0: &[f64], config: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut obj = Counted { f: objective, evals: 0 };
    let f0 = obj.eval(x0)?;
    let mut best = (x0.to_vec(), f0);
    if x0.is_empty() {
        return Ok(Minimum { x: best.0, f: best.1, iters: obj.evals });
    }
    // restart from the incumbent until a fresh simplex stops improving it
    while obj.evals < config.max_iters {
        let next = nelder_mead_pass(&mut obj, best.clone(), config)?;
        let improved = best.1 - next.1 > config.tol;
        best = next;
        if !improved {
            break;
        }
    }
    Ok(Minimum { x: best.0, f: best.1, iters: obj.evals })
}

fn nelder_mead_pass<F>(obj: &mut Counted<F>, start: (Vec<f64>, f64), config: &OptimizerConfig) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = start.0.len();
    let nf = n.max(2) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let step = config.initial_step.unwrap_or(GENERIC_STEP);
    let x0 = start.0.clone();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![start];
    for i in 0..n {
        if obj.evals >= config.max_iters {
            break;
        }
        let mut x = x0.clone();
        x[i] += step;
        let f = obj.eval(&x)?;
        simplex.push((x, f));
    }
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(c, w)| c + t * (w - c)).collect() };

    while simplex.len() == n + 1 && obj.evals < config.max_iters {
        // stable sort keeps the incumbent first among ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= config.tol || size <= config.tol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let xr = point(&centroid, &worst, -alpha);
        let fr = obj.eval(&xr)?;

        if fr < simplex[0].1 {
            if obj.evals >= config.max_iters {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = point(&centroid, &worst, -alpha * gamma);
            let fe = obj.eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if obj.evals >= config.max_iters {
            break;
        }
        let (xc, fc, accept) = if fr < simplex[n].1 {
            let xc = point(&centroid, &worst, -alpha * rho);
            let fc = obj.eval(&xc)?;
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = point(&centroid, &worst, rho);
            let fc = obj.eval(&xc)?;
            let ok = fc < simplex[n].1;
            (xc, fc, ok)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if obj.evals >= config.max_iters {
                break;
            }
            let x = point(&best, &vertex.0, sigma);
            let f = obj.eval(&x)?;
            *vertex = (x, f);
        }
    }

    Ok(simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty simplex"))
}

/// One optimized depth of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptRecord {
    pub kind: Nonlinearity,
    pub n_mean: f64,
    pub stage: CircuitRole,
    pub seed: u64,
    pub d: usize,
    pub best_params: Vec<f64>,
    /// `-F_Q` or `-F_C`.
    pub best_objective: f64,
    pub inv_fisher: f64,
    pub iters_used: usize,
    pub budget: f64,
    pub wall_time: f64,
}

impl OptRecord {
    pub fn params(&self) -> Result<AnsatzParams> {
        AnsatzParams::from_flat(self.kind, self.best_params.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub seed: u64,
    pub d: usize,
    pub error: Error,
}

/// Records of every seed that ran, plus the seeds that aborted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptBatch {
    pub records: Vec<OptRecord>,
    pub failures: Vec<SeedFailure>,
}

impl OptBatch {
    /// Lowest objective over seeds at depth `d`.
    pub fn best_at(&self, d: usize) -> Option<&OptRecord> {
        self.records.iter().filter(|r| r.d == d).min_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
    }

    pub fn best(&self) -> Option<&OptRecord> {
        self.records.iter().min_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut ds: Vec<usize> = self.records.iter().map(|r| r.d).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    pub fn seed_records(&self, seed: u64) -> Vec<&OptRecord> {
        self.records.iter().filter(|r| r.seed == seed).collect()
    }

    fn merge(outcomes: Vec<(Vec<OptRecord>, Option<SeedFailure>)>) -> Self {
        let mut batch = OptBatch::default();
        for (records, failure) in outcomes {
            batch.records.extend(records);
            batch.failures.extend(failure);
        }
        batch.records.sort_by_key(|r| (r.seed, r.d));
        batch
    }
}

/// `-F_Q` of the probe prepared by `params`.
pub fn preparation_objective(protocol: &Protocol, params: &AnsatzParams) -> Result<f64> {
    let probe = protocol.programmable_probe(params)?;
    Ok(-protocol.qfi(&probe)?.value)
}

/// The encoded state and its derivative for a fixed probe, reused across pre-measurement candidates.
#[derive(Debug, Clone)]
pub struct EncodedProbe {
    pub state: CompositeState,
    pub derivative: CompositeState,
    pub phi: f64,
}

impl EncodedProbe {
    pub fn new(protocol: &Protocol, probe: &CompositeState) -> Result<Self> {
        let (state, derivative) = protocol.encoded(probe)?;
        Ok(EncodedProbe { state, derivative, phi: protocol.settings().phi })
    }

    /// `-F_C` after the pre-measurement circuit `params` (none for the bare measurement).
    pub fn objective(&self, params: Option<&AnsatzParams>, model: &MeasurementModel) -> Result<f64> {
        let fisher = match params {
            Some(p) => {
                let circuit = build_circuit(p, self.state.layout(), CircuitRole::Premeasure)?;
                let state = circuit.run(&self.state)?;
                let derivative = circuit.run(&self.derivative)?;
                cfi(&state, &derivative, model, self.phi)?
            }
            None => cfi(&self.state, &self.derivative, model, self.phi)?,
        };
        Ok(-fisher.value)
    }
}

/// Wrap Kerr phases into `(-pi, pi]`; they enter only as `exp(-i K n^2)`.
pub fn canonicalize(params: &AnsatzParams) -> AnsatzParams {
    let kind = params.kind();
    let mut values = params.as_flat().to_vec();
    if kind == Nonlinearity::Kerr {
        for chunk in values.chunks_mut(layer_width(kind)) {
            let k = chunk[1].rem_euclid(2.0 * PI);
            chunk[1] = if k > PI { k - 2.0 * PI } else { k };
        }
    }
    AnsatzParams::from_flat(kind, values).expect("same shape")
}

struct SeedRun<'a> {
    kind: Nonlinearity,
    n_mean: f64,
    stage: CircuitRole,
    seed: u64,
    config: &'a OptimizerConfig,
}

impl SeedRun<'_> {
    /// Grow the circuit over `schedule`, evaluating depth `d` with `objective(d, params)`.
    fn run<F>(&self, schedule: &[usize], mut objective: F) -> (Vec<OptRecord>, Option<SeedFailure>)
    where
        F: FnMut(usize, &AnsatzParams) -> Result<f64>,
    {
        let width = layer_width(self.kind);
        let mut rng = self.config.rng_for(self.seed);
        let s = self.config.init_scale;
        let mut current: Vec<f64> = (0..width).map(|_| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 }).collect();
        let mut depth = 1;
        let mut records = Vec::with_capacity(schedule.len());
        for &d in schedule {
            while depth < d {
                current.extend(std::iter::repeat_n(0.0, width));
                depth += 1;
            }
            let start = Instant::now();
            let outcome = self.optimize_depth(d, &current, &mut objective);
            match outcome {
                Ok((params, f, iters)) => {
                    current = params.as_flat().to_vec();
                    records.push(OptRecord {
                        kind: self.kind,
                        n_mean: self.n_mean,
                        stage: self.stage,
                        seed: self.seed,
                        d,
                        budget: interaction_budget(&params).total,
                        best_params: current.clone(),
                        best_objective: f,
                        inv_fisher: if f < 0.0 { -1.0 / f } else { f64::INFINITY },
                        iters_used: iters,
                        wall_time: start.elapsed().as_secs_f64(),
                    });
                }
                Err(error) => return (records, Some(SeedFailure { seed: self.seed, d, error })),
            }
        }
        (records, None)
    }

    fn optimize_depth<F>(&self, d: usize, start: &[f64], objective: &mut F) -> Result<(AnsatzParams, f64, usize)>
    where
        F: FnMut(usize, &AnsatzParams) -> Result<f64>,
    {
        let kind = self.kind;
        let min = try_minimize(|x| objective(d, &AnsatzParams::from_flat(kind, x.to_vec())?), start, &self.config.resolved_for(kind))?;
        let raw = AnsatzParams::from_flat(kind, min.x)?;
        let canonical = canonicalize(&raw);
        if canonical != raw {
            let f = objective(d, &canonical)?;
            if f <= min.f {
                return Ok((canonical, f, min.iters + 1));
            }
            return Ok((raw, min.f, min.iters + 1));
        }
        Ok((raw, min.f, min.iters))
    }
}

fn seed_ids(config: &OptimizerConfig) -> Vec<u64> {
    (0..config.seeds as u64).collect()
}

/// Maximize the QFI over preparation circuits of depth `1..=d_max` for every seed.
pub fn optimize_preparation(protocol: &Protocol, config: &OptimizerConfig) -> Result<OptBatch> {
    optimize_preparation_schedule(protocol, &config.schedule(), config)
}

pub fn optimize_preparation_schedule(protocol: &Protocol, schedule: &[usize], config: &OptimizerConfig) -> Result<OptBatch> {
    config.validate()?;
    check_schedule(schedule)?;
    let settings = protocol.settings();
    let outcomes = seed_ids(config)
        .into_par_iter()
        .map(|seed| {
            let run = SeedRun { kind: settings.kind, n_mean: settings.n_mean, stage: CircuitRole::Prepare, seed, config };
            run.run(schedule, |_, p| preparation_objective(protocol, p))
        })
        .collect();
    Ok(OptBatch::merge(outcomes))
}

/// Probe seen by the pre-measurement search at each depth.
#[derive(Debug, Clone)]
pub enum ProbeSchedule {
    /// One probe for every depth.
    Fixed(CompositeState),
    /// The probe at depth `d` is entry `d - 1`, paired depth by depth with the preparation circuit.
    PerDepth(Vec<CompositeState>),
}

impl ProbeSchedule {
    fn at(&self, d: usize) -> Result<&CompositeState> {
        match self {
            ProbeSchedule::Fixed(p) => Ok(p),
            ProbeSchedule::PerDepth(v) => v.get(d - 1).ok_or(Error::IndexOutOfRange { index: d - 1, len: v.len() }),
        }
    }
}

/// Maximize the CFI over pre-measurement circuits for every seed.
///
/// With a fixed probe the per-seed objective is monotone in depth; with
/// per-depth probes each depth warm-starts from the previous circuit but
/// faces a new state.
pub fn optimize_measurement(
    protocol: &Protocol,
    probes: &ProbeSchedule,
    model: &MeasurementModel,
    config: &OptimizerConfig,
) -> Result<OptBatch> {
    config.validate()?;
    let schedule = config.schedule();
    let encoded = schedule
        .iter()
        .map(|&d| EncodedProbe::new(protocol, probes.at(d)?))
        .collect::<Result<Vec<_>>>()?;
    let settings = protocol.settings();
    let outcomes = seed_ids(config)
        .into_par_iter()
        .map(|seed| {
            let run = SeedRun { kind: settings.kind, n_mean: settings.n_mean, stage: CircuitRole::Premeasure, seed, config };
            run.run(&schedule, |d, p| encoded[d - 1].objective(Some(p), model))
        })
        .collect();
    Ok(OptBatch::merge(outcomes))
}

fn check_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() || schedule[0] == 0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("depth schedule must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Best quadrature angle for the bare homodyne measurement of an encoded probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptimum {
    pub theta: f64,
    pub inv_cfi: f64,
    pub evaluations: usize,
}

/// Scan `theta` over `[0, pi)` then refine the best point; one variational parameter.
pub fn optimize_theta(encoded: &EncodedProbe, model: &MeasurementModel, scan_points: usize, config: &OptimizerConfig) -> Result<ThetaOptimum> {
    if !matches!(model.kind, MeasurementKind::Homodyne { .. }) {
        return Err(Error::InvalidArgument("theta optimization needs a homodyne model".into()));
    }
    let eval = |theta: f64| encoded.objective(None, &model.with_theta(theta));
    let mut best = (0.0, f64::INFINITY);
    for i in 0..scan_points.max(1) {
        let theta = PI * i as f64 / scan_points.max(1) as f64;
        let f = eval(theta)?;
        if f < best.1 {
            best = (theta, f);
        }
    }
    let refine = OptimizerConfig { initial_step: Some(PI / scan_points.max(1) as f64), ..*config };
    let min = try_minimize(|x| eval(x[0]), &[best.0], &refine)?;
    let (theta, f) = if min.f < best.1 { (min.x[0], min.f) } else { best };
    Ok(ThetaOptimum {
        theta: theta.rem_euclid(PI),
        inv_cfi: -1.0 / f,
        evaluations: scan_points.max(1) + min.iters,
    })
}

/// Inverse CFI of the three homodyne strategies at one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaAblation {
    pub d: usize,
    /// (a) free angle, no pre-measurement circuit.
    pub theta_only: f64,
    pub theta_only_angle: f64,
    pub theta_only_params: usize,
    /// (b) angle fixed at zero, pre-measurement circuit optimized.
    pub fixed_theta_pqc: f64,
    /// (c) angle optimized together with the circuit.
    pub free_theta_pqc: f64,
    pub free_theta_angle: f64,
    pub inv_qfi: f64,
}

/// Compare the three homodyne strategies on one probe with a depth-`d` pre-measurement circuit.
///
/// (b) and (c) report the best over `config.seeds` seeds grown to depth `d`.
pub fn ablation_theta(protocol: &Protocol, probe: &CompositeState, grid_model: &MeasurementModel, d: usize, config: &OptimizerConfig) -> Result<ThetaAblation> {
    let kind = protocol.kind();
    let encoded = EncodedProbe::new(protocol, probe)?;
    let inv_qfi = protocol.qfi(probe)?.inverse();

    let a = optimize_theta(&encoded, grid_model, 32, config)?;

    let cfg = OptimizerConfig { d_max: d, ..*config };
    let fixed = grid_model.with_theta(0.0);
    let b = optimize_measurement(protocol, &ProbeSchedule::Fixed(probe.clone()), &fixed, &cfg)?;
    let b_best = b.best_at(d).ok_or_else(|| first_failure(&b))?;

    let width = layer_width(kind);
    let search = cfg.resolved_for(kind);
    let outcomes: Vec<Result<(f64, f64)>> = seed_ids(&cfg)
        .into_par_iter()
        .map(|seed| {
            let mut rng = cfg.rng_for(seed);
            let s = cfg.init_scale;
            let mut x: Vec<f64> = (0..width + 1).map(|_| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 }).collect();
            let mut best = f64::INFINITY;
            for depth in 1..=d {
                if depth > 1 {
                    let theta = x.pop().expect("angle");
                    x.extend(std::iter::repeat_n(0.0, width));
                    x.push(theta);
                }
                let min = try_minimize(
                    |v| {
                        let (theta, mu) = v.split_last().expect("angle");
                        let params = AnsatzParams::from_flat(kind, mu.to_vec())?;
                        encoded.objective(Some(&params), &grid_model.with_theta(*theta))
                    },
                    &x,
                    &search,
                )?;
                x = min.x;
                best = min.f;
            }
            Ok((best, x[x.len() - 1]))
        })
        .collect();
    let mut c_best = (f64::INFINITY, 0.0);
    let mut c_error = None;
    for o in outcomes {
        match o {
            Ok((f, theta)) if f < c_best.0 => c_best = (f, theta),
            Ok(_) => {}
            Err(e) => c_error = Some(e),
        }
    }
    if !c_best.0.is_finite() {
        return Err(c_error.unwrap_or(Error::NonFiniteObjective { evaluations: 0 }));
    }

    Ok(ThetaAblation {
        d,
        theta_only: a.inv_cfi,
        theta_only_angle: a.theta,
        theta_only_params: 1,
        fixed_theta_pqc: b_best.inv_fisher,
        free_theta_pqc: -1.0 / c_best.0,
        free_theta_angle: c_best.1.rem_euclid(PI),
        inv_qfi,
    })
}

fn first_failure(batch: &OptBatch) -> Error {
    batch.failures.first().map(|f| f.error.clone()).unwrap_or(Error::InvalidArgument("no optimization records".into()))
}

/// Inverse CFI with and without the pre-measurement circuit at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremeasureAblation {
    pub d: usize,
    /// Measurement applied directly after the interferometer.
    pub without_pqc: f64,
    /// Best over seeds with a depth-`d` pre-measurement circuit.
    pub with_pqc: f64,
    pub inv_qfi: f64,
}

/// Compare the bare measurement with the optimized pre-measurement circuit at depths `1..=d_max`.
pub fn ablation_premeasure(protocol: &Protocol, probes: &ProbeSchedule, model: &MeasurementModel, config: &OptimizerConfig) -> Result<Vec<PremeasureAblation>> {
    let batch = optimize_measurement(protocol, probes, model, config)?;
    config
        .schedule()
        .into_iter()
        .map(|d| {
            let probe = probes.at(d)?;
            let encoded = EncodedProbe::new(protocol, probe)?;
            let best = batch.best_at(d).ok_or_else(|| first_failure(&batch))?;
            Ok(PremeasureAblation {
                d,
                without_pqc: -1.0 / encoded.objective(None, model)?,
                with_pqc: best.inv_fisher,
                inv_qfi: protocol.qfi(probe)?.inverse(),
            })
        })
        .collect()
}
