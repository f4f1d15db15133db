//! Continuous-evolution sweeps, extremum detection, TFS crossing times, fits and quadrature-angle sweeps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CompositeState, Nonlinearity};
use crate::metrology::{cfi, HomodyneGrid, MeasurementKind, MeasurementModel};
use crate::protocol::Protocol;

/// One point of a continuous-evolution sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kind: Nonlinearity,
    pub n_mean: f64,
    /// `g~` or `K~`.
    pub time: f64,
    pub inv_qfi: f64,
    pub inv_cfi_counting: Option<f64>,
    pub inv_cfi_homodyne: Option<f64>,
}

/// Optional CFI columns of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepColumns {
    pub counting: bool,
    /// Homodyne model, including its quadrature angle.
    pub homodyne: Option<MeasurementModel>,
}

/// Uniform grid `start, start + step, ...` up to `stop` (inclusive within rounding).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidArgument(format!("bad grid [{start}, {stop}] step {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// `g~` in `[0, 30]` with step 0.1, or `K~` in `[0, 2 pi]` with step `pi/200`.
pub fn default_time_grid(kind: Nonlinearity) -> Vec<f64> {
    match kind {
        Nonlinearity::Jc => (0..=300).map(|i| 0.1 * i as f64).collect(),
        Nonlinearity::Kerr => (0..=400).map(|i| PI * i as f64 / 200.0).collect(),
    }
}

fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Sweep the continuous evolution over `times`; points are evaluated in parallel.
pub fn sweep_continuous(protocol: &Protocol, times: &[f64], columns: &SweepColumns) -> Result<Vec<SweepRecord>> {
    check_increasing(times)?;
    let settings = protocol.settings();
    let counting = MeasurementModel::counting(protocol.include_emitters());
    times
        .par_iter()
        .map(|&t| {
            let probe = protocol.continuous_probe(t)?;
            let inv_qfi = protocol.qfi(&probe)?.inverse();
            let (inv_cfi_counting, inv_cfi_homodyne) = if columns.counting || columns.homodyne.is_some() {
                let (state, derivative) = protocol.encoded(&probe)?;
                let c = match columns.counting {
                    true => Some(cfi(&state, &derivative, &counting, settings.phi)?.inverse()),
                    false => None,
                };
                let h = match &columns.homodyne {
                    Some(model) => Some(cfi(&state, &derivative, model, settings.phi)?.inverse()),
                    None => None,
                };
                (c, h)
            } else {
                (None, None)
            };
            Ok(SweepRecord { kind: settings.kind, n_mean: settings.n_mean, time: t, inv_qfi, inv_cfi_counting, inv_cfi_homodyne })
        })
        .collect()
}

/// A grid extremum refined by the parabola through it and its two neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub time: f64,
    pub value: f64,
    /// Grid index of the bracketing centre point.
    pub index: usize,
}

fn parabola_vertex(t: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let (d0, d1) = (t[1] - t[0], t[2] - t[1]);
    let (s0, s1) = ((y[1] - y[0]) / d0, (y[2] - y[1]) / d1);
    let curvature = (s1 - s0) / (t[2] - t[0]);
    if curvature == 0.0 || !curvature.is_finite() {
        return None;
    }
    // y = y1 + b (x - t1) + curvature (x - t1)^2 with b the central slope
    let b = (s0 * d1 + s1 * d0) / (d0 + d1);
    let dx = -b / (2.0 * curvature);
    Some((t[1] + dx, y[1] + b * dx + curvature * dx * dx))
}

/// Relative prominence below which [`find_minima`] and [`find_maxima`] treat an extremum as ripple.
pub const DEFAULT_PROMINENCE: f64 = 0.10;

fn extrema(times: &[f64], values: &[f64], minima: bool) -> Vec<Extremum> {
    let sign = if minima { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for i in 1..times.len().saturating_sub(1) {
        let (a, b, c) = (sign * values[i - 1], sign * values[i], sign * values[i + 1]);
        if b < a && b < c {
            let t3 = [times[i - 1], times[i], times[i + 1]];
            let (time, value) = parabola_vertex(t3, [values[i - 1], values[i], values[i + 1]]).unwrap_or((times[i], values[i]));
            let time = time.clamp(t3[0], t3[2]);
            out.push(Extremum { time, value, index: i });
        }
    }
    out
}

/// Height of the lower of the two ridges separating grid point `i` from deeper points (or the ends).
fn prominence(values: &[f64], i: usize, sign: f64) -> f64 {
    let v = sign * values[i];
    let ridge = |range: &mut dyn Iterator<Item = usize>| {
        let mut top = v;
        for j in range {
            let w = sign * values[j];
            if w < v {
                break;
            }
            top = top.max(w);
        }
        top
    };
    let left = ridge(&mut (0..i).rev());
    let right = ridge(&mut (i + 1..values.len()));
    left.min(right) - v
}

fn prominent(times: &[f64], values: &[f64], minima: bool, relative: f64) -> Vec<Extremum> {
    let sign = if minima { 1.0 } else { -1.0 };
    extrema(times, values, minima)
        .into_iter()
        .filter(|e| prominence(values, e.index, sign) >= relative * values[e.index].abs())
        .collect()
}

/// Interior strict local minima of `values`.
pub fn local_minima(times: &[f64], values: &[f64]) -> Vec<Extremum> {
    extrema(times, values, true)
}

/// Interior strict local maxima of `values`.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<Extremum> {
    extrema(times, values, false)
}

/// Local minima whose prominence is at least `relative` times their value.
pub fn prominent_minima(times: &[f64], values: &[f64], relative: f64) -> Vec<Extremum> {
    prominent(times, values, true, relative)
}

/// Local maxima whose prominence is at least `relative` times their value.
pub fn prominent_maxima(times: &[f64], values: &[f64], relative: f64) -> Vec<Extremum> {
    prominent(times, values, false, relative)
}

fn columns(records: &[SweepRecord]) -> (Vec<f64>, Vec<f64>) {
    records.iter().map(|r| (r.time, r.inv_qfi)).unzip()
}

/// Minima of `1/F_Q` along a sweep, ignoring ripples below [`DEFAULT_PROMINENCE`].
pub fn find_minima(records: &[SweepRecord]) -> Vec<Extremum> {
    let (t, y) = columns(records);
    prominent_minima(&t, &y, DEFAULT_PROMINENCE)
}

/// Maxima of `1/F_Q` along a sweep (Kerr revivals), ignoring ripples below [`DEFAULT_PROMINENCE`].
pub fn find_maxima(records: &[SweepRecord]) -> Vec<Extremum> {
    let (t, y) = columns(records);
    prominent_maxima(&t, &y, DEFAULT_PROMINENCE)
}

/// Default relative slack of [`time_to_tfs`].
pub const TFS_TOLERANCE: f64 = 1e-2;

/// First time at which `1/F_Q` comes within `tolerance` (relative) of the twin-Fock value `2/(N(N+2))`.
///
/// The grid `0, step, 2 step, ...` up to `t_max` is scanned for the first
/// crossing, which is then bisected to `1e-4`. Kerr plateaus touch the
/// twin-Fock value without exceeding it, so a zero tolerance rarely crosses.
/// An input already within reach at time zero (near vacuum, where the twin-Fock
/// and shot-noise values coincide) has no crossing.
pub fn time_to_tfs(protocol: &Protocol, t_max: f64, step: f64, tolerance: f64) -> Result<f64> {
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let target = protocol.bounds().tfs_inv_fi * (1.0 + tolerance);
    let excess = |t: f64| -> Result<f64> { Ok(protocol.qfi(&protocol.continuous_probe(t)?)?.inverse() - target) };
    let grid = uniform_grid(0.0, t_max, step)?;
    let mut prev = (grid[0], excess(grid[0])?);
    if prev.1 <= 0.0 {
        return Err(Error::NoCrossing);
    }
    for &t in &grid[1..] {
        let e = excess(t)?;
        if e <= 0.0 {
            let (mut lo, mut hi) = (prev.0, t);
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if excess(mid)? <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        prev = (t, e);
    }
    Err(Error::NoCrossing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `y = alpha sqrt(x + beta) + gamma`; coefficients `[alpha, beta, gamma]`.
    Sqrt,
    /// `y = a x^mu`, fitted as a line in log-log space; coefficients `[a, mu]`.
    Powerlaw,
    /// `y = a + b x`; coefficients `[a, b]`.
    Linear,
}

impl FitModel {
    pub fn coefficient_count(self) -> usize {
        match self {
            FitModel::Sqrt => 3,
            FitModel::Powerlaw | FitModel::Linear => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub coefficients: Vec<f64>,
    /// Coefficient of determination in the fitted space (log-log for power laws).
    pub r_squared: f64,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        match self.model {
            FitModel::Sqrt => c[0] * (x + c[1]).sqrt() + c[2],
            FitModel::Powerlaw => c[0] * x.powf(c[1]),
            FitModel::Linear => c[0] + c[1] * x,
        }
    }
}

/// Least-squares line `y = a + b x` and its residual sum of squares.
fn line_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    Some((a, b, ssr))
}

fn r_squared(ys: &[f64], ssr: f64) -> Result<f64> {
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::DegenerateFit("response is constant".into()));
    }
    Ok((1.0 - ssr / sst).clamp(0.0, 1.0))
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn sqrt_fit(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, f64)> {
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let span = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x_min;
    // profile over beta = -x_min + e^u; alpha and gamma follow linearly
    let profile = |u: f64| -> f64 {
        let beta = -x_min + u.exp();
        let feats: Vec<f64> = xs.iter().map(|x| (x + beta).sqrt()).collect();
        line_fit(&feats, ys).map(|(_, _, ssr)| ssr).unwrap_or(f64::INFINITY)
    };
    let (u_lo, u_hi) = (-20.0, (1e3 * (span + 1.0)).ln());
    let scan = 800;
    let us: Vec<f64> = (0..=scan).map(|i| u_lo + (u_hi - u_lo) * i as f64 / scan as f64).collect();
    let best = (0..=scan).min_by(|&i, &j| profile(us[i]).total_cmp(&profile(us[j]))).expect("non-empty scan");
    let u = golden_min(profile, us[best.saturating_sub(1)], us[(best + 1).min(scan)], 1e-14);
    let beta = -x_min + u.exp();
    let feats: Vec<f64> = xs.iter().map(|x| (x + beta).sqrt()).collect();
    let (gamma, alpha, ssr) = line_fit(&feats, ys).ok_or_else(|| Error::DegenerateFit("collinear square-root features".into()))?;
    Ok((vec![alpha, beta, gamma], ssr))
}

/// Least-squares fit of `model` to the points `(xs, ys)`.
pub fn fit(model: FitModel, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    if xs.len() < model.coefficient_count() {
        return Err(Error::DegenerateFit(format!("{} points for {} coefficients", xs.len(), model.coefficient_count())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite data".into()));
    }
    let degenerate = || Error::DegenerateFit("all abscissae equal".into());
    let (coefficients, r_squared) = match model {
        FitModel::Linear => {
            let (a, b, ssr) = line_fit(xs, ys).ok_or_else(degenerate)?;
            (vec![a, b], r_squared(ys, ssr)?)
        }
        FitModel::Powerlaw => {
            if xs.iter().chain(ys).any(|&v| v <= 0.0) {
                return Err(Error::DegenerateFit("power law needs positive data".into()));
            }
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
            let (a, b, ssr) = line_fit(&lx, &ly).ok_or_else(degenerate)?;
            (vec![a.exp(), b], r_squared(&ly, ssr)?)
        }
        FitModel::Sqrt => {
            let (c, ssr) = sqrt_fit(xs, ys)?;
            (c, r_squared(ys, ssr)?)
        }
    };
    Ok(FitResult { model, coefficients, r_squared })
}

/// Homodyne `1/F_C` against the quadrature angle for one continuous-evolution probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSweep {
    pub kind: Nonlinearity,
    pub n_mean: f64,
    pub probe_time: f64,
    pub points: Vec<(f64, f64)>,
    /// First global grid minimum.
    pub theta_min: f64,
    pub inv_cfi_min: f64,
}

/// `theta` in `[0, pi)` with `count` points.
pub fn default_theta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| PI * i as f64 / count as f64).collect()
}

pub fn sweep_theta(protocol: &Protocol, probe_time: f64, thetas: &[f64], grid: HomodyneGrid) -> Result<ThetaSweep> {
    let probe = protocol.continuous_probe(probe_time)?;
    sweep_theta_for(protocol, &probe, probe_time, thetas, grid)
}

/// As [`sweep_theta`] for an arbitrary probe.
pub fn sweep_theta_for(protocol: &Protocol, probe: &CompositeState, probe_time: f64, thetas: &[f64], grid: HomodyneGrid) -> Result<ThetaSweep> {
    if thetas.is_empty() {
        return Err(Error::InvalidArgument("empty angle grid".into()));
    }
    let settings = protocol.settings();
    let (state, derivative) = protocol.encoded(probe)?;
    let base = MeasurementModel::homodyne(0.0, grid, protocol.include_emitters());
    let points = thetas
        .par_iter()
        .map(|&theta| Ok((theta, cfi(&state, &derivative, &base.with_theta(theta), settings.phi)?.inverse())))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (theta_min, inv_cfi_min) = points.iter().fold((f64::NAN, f64::INFINITY), |acc, &(t, v)| if v < acc.1 { (t, v) } else { acc });
    Ok(ThetaSweep { kind: settings.kind, n_mean: settings.n_mean, probe_time, points, theta_min, inv_cfi_min })
}

/// Homodyne model used by a sweep column or angle scan.
pub fn homodyne_model(protocol: &Protocol, theta: f64, points: Option<usize>) -> MeasurementModel {
    let cutoff = protocol.settings().cutoff;
    let grid = match points {
        Some(p) => HomodyneGrid::with_points(cutoff, p),
        None => HomodyneGrid::default_for(cutoff),
    };
    MeasurementModel::homodyne(theta, grid, protocol.include_emitters())
}

/// Whether `model` measures quadratures.
pub fn is_homodyne(model: &MeasurementModel) -> bool {
    matches!(model.kind, MeasurementKind::Homodyne { .. })
}
