//! Quantum and classical Fisher information of the encoded probe, measurement
//! models (photon counting and homodyne detection), and reference bounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode, first_beam_splitter, phase_generator_moments};
use crate::error::{Error, Result};
use crate::hilbert::{inner_product, CompositeState, FactorKind, SubsystemLayout, C64};

/// Default finite phase step of the fidelity-based QFI.
pub const DEFAULT_DELTA: f64 = 1e-2;

/// Outcomes below this probability (or density) are left out of the CFI sum.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const TABLE_TOLERANCE: f64 = 1e-6;
const GRID_DEFICIT_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FisherKind {
    Qfi,
    Cfi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub value: f64,
    pub kind: FisherKind,
    pub delta_used: Option<f64>,
    pub phi: f64,
}

impl FisherResult {
    fn new(value: f64, kind: FisherKind, delta_used: Option<f64>, phi: f64) -> Self {
        FisherResult { value: value.max(0.0), kind, delta_used, phi }
    }

    /// `1 / F`, infinite for a vanishing Fisher information.
    pub fn inverse(&self) -> f64 {
        if self.value > 0.0 {
            1.0 / self.value
        } else {
            f64::INFINITY
        }
    }
}

/// Uniform symmetric quadrature grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneGrid {
    pub x_max: f64,
    pub points: usize,
}

impl HomodyneGrid {
    pub const DEFAULT_POINTS: usize = 801;

    /// 801 points over `|x| <= sqrt(2 cutoff) + 4`.
    pub fn default_for(cutoff: usize) -> Self {
        HomodyneGrid { x_max: (2.0 * cutoff as f64).sqrt() + 4.0, points: Self::DEFAULT_POINTS }
    }

    pub fn with_points(cutoff: usize, points: usize) -> Self {
        HomodyneGrid { points, ..Self::default_for(cutoff) }
    }

    pub fn validate(&self, cutoff: usize) -> Result<()> {
        if self.points < 201 || self.points.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("homodyne grid needs an odd count >= 201, got {}", self.points)));
        }
        let min_extent = (2.0 * cutoff as f64).sqrt() + 3.0;
        if !(self.x_max >= min_extent) {
            return Err(Error::InvalidArgument(format!(
                "homodyne grid half-width {} below sqrt(2*{cutoff})+3 = {min_extent:.3}",
                self.x_max
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        2.0 * self.x_max / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| -self.x_max + i as f64 * h).collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasurementKind {
    Counting,
    Homodyne { theta: f64, grid: HomodyneGrid },
}

/// Measurement applied to the state leaving the interferometer (and any pre-measurement circuit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub kind: MeasurementKind,
    /// Whether the emitters' `sigma_z` outcomes are recorded alongside the photonic ones.
    pub include_emitters: bool,
}

impl MeasurementModel {
    pub fn counting(include_emitters: bool) -> Self {
        MeasurementModel { kind: MeasurementKind::Counting, include_emitters }
    }

    pub fn homodyne(theta: f64, grid: HomodyneGrid, include_emitters: bool) -> Self {
        MeasurementModel { kind: MeasurementKind::Homodyne { theta, grid }, include_emitters }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        match self.kind {
            MeasurementKind::Homodyne { grid, .. } => {
                MeasurementModel { kind: MeasurementKind::Homodyne { theta, grid }, ..self }
            }
            MeasurementKind::Counting => self,
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match self.kind {
            MeasurementKind::Homodyne { theta, .. } => Some(theta),
            MeasurementKind::Counting => None,
        }
    }
}

/// SQL, twin-Fock and Heisenberg inverse Fisher informations for `n_mean` photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub n_mean: f64,
    pub sql_inv_fi: f64,
    pub tfs_inv_fi: f64,
    pub hl_inv_fi: f64,
}

pub fn bounds(n_mean: f64) -> Result<Bounds> {
    if !(n_mean > 0.0) || !n_mean.is_finite() {
        return Err(Error::InvalidArgument(format!("mean photon number must be positive, got {n_mean}")));
    }
    Ok(Bounds {
        n_mean,
        sql_inv_fi: 1.0 / n_mean,
        tfs_inv_fi: 2.0 / (n_mean * (n_mean + 2.0)),
        hl_inv_fi: 1.0 / (n_mean * n_mean),
    })
}

/// `8 (1 - |<psi_E(phi)|psi_E(phi + delta)>|) / delta^2`.
pub fn qfi_fidelity(probe: &CompositeState, phi: f64, delta: f64) -> Result<FisherResult> {
    probe.ensure_normalized()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let a = encode(probe, phi)?;
    let b = encode(probe, phi + delta)?;
    let fidelity = inner_product(&a, &b)?.norm();
    Ok(FisherResult::new(8.0 * (1.0 - fidelity) / (delta * delta), FisherKind::Qfi, Some(delta), phi))
}

/// `4 Var((n2 - n1)/2)` after the first beam splitter.
pub fn qfi_variance_oracle(probe: &CompositeState, phi: f64) -> Result<FisherResult> {
    probe.ensure_normalized()?;
    let rotated = first_beam_splitter(probe)?;
    let (m1, m2) = phase_generator_moments(&rotated)?;
    Ok(FisherResult::new(4.0 * (m2 - m1 * m1), FisherKind::Qfi, None, phi))
}

/// Offsets of (emitter outcome, photonic outcome) blocks of a layout.
struct OutcomeSplit {
    emitter_dims: Vec<usize>,
    emitter_offsets: Vec<usize>,
    mode_offsets: Vec<usize>,
    cutoff: usize,
}

impl OutcomeSplit {
    fn new(layout: &SubsystemLayout) -> Result<Self> {
        let modes = layout.mode_pair()?;
        let qubits = layout.qubit_indices();
        let cutoff = layout.factors()[modes[0]].dim;
        if layout.factors()[modes[1]].dim != cutoff {
            return Err(Error::LayoutMismatch("modes with different cutoffs".into()));
        }
        Ok(OutcomeSplit {
            emitter_dims: qubits.iter().map(|&q| layout.factors()[q].dim).collect(),
            emitter_offsets: layout.factor_offsets(&qubits),
            mode_offsets: layout.factor_offsets(&modes),
            cutoff,
        })
    }
}

/// Photon-counting outcome probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingTable {
    /// Dimensions of the outcome digits, `(z1, z2, n1, n2)` or `(n1, n2)`.
    pub outcome_dims: Vec<usize>,
    pub probs: Vec<f64>,
}

impl CountingTable {
    pub fn prob(&self, outcome: &[usize]) -> f64 {
        let idx = outcome.iter().zip(&self.outcome_dims).fold(0, |acc, (&d, &n)| acc * n + d);
        self.probs[idx]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// `|<z, n1, n2|psi>|^2`, with the emitters marginalized unless `include_emitters`.
pub fn counting_probabilities(state: &CompositeState, include_emitters: bool) -> Result<CountingTable> {
    let split = OutcomeSplit::new(state.layout())?;
    let amps = state.amplitudes();
    let photonic = split.mode_offsets.len();
    let (outcome_dims, probs) = if include_emitters {
        let mut dims = split.emitter_dims.clone();
        dims.extend([split.cutoff, split.cutoff]);
        let probs = split
            .emitter_offsets
            .iter()
            .flat_map(|&e| split.mode_offsets.iter().map(move |&m| amps[e + m].norm_sqr()))
            .collect();
        (dims, probs)
    } else {
        let mut probs = vec![0.0; photonic];
        for &e in &split.emitter_offsets {
            for (p, &m) in probs.iter_mut().zip(&split.mode_offsets) {
                *p += amps[e + m].norm_sqr();
            }
        }
        (vec![split.cutoff, split.cutoff], probs)
    };
    Ok(CountingTable { outcome_dims, probs })
}

/// Harmonic-oscillator eigenfunctions `psi_n(x)`, `n < count`, by the stable three-term recurrence.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if count > 1 {
        out.push(std::f64::consts::SQRT_2 * x * psi0);
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Homodyne outcome densities over the joint quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneTable {
    pub axis: Vec<f64>,
    pub weights: Vec<f64>,
    /// Emitter outcome dimensions (empty when emitters are not recorded).
    pub emitter_dims: Vec<usize>,
    /// Row-major `[emitter outcome][x1][x2]`.
    pub density: Vec<f64>,
}

impl HomodyneTable {
    pub fn integral(&self) -> f64 {
        let n = self.axis.len();
        self.density
            .chunks(n * n)
            .map(|block| {
                block
                    .chunks(n)
                    .zip(&self.weights)
                    .map(|(row, w1)| w1 * row.iter().zip(&self.weights).map(|(p, w2)| p * w2).sum::<f64>())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Marginal density of mode 1 (or mode 2) summed over emitter outcomes.
    pub fn marginal(&self, mode: usize) -> Vec<f64> {
        let n = self.axis.len();
        let mut out = vec![0.0; n];
        for block in self.density.chunks(n * n) {
            for i in 0..n {
                for j in 0..n {
                    let p = block[i * n + j];
                    if mode == 0 {
                        out[i] += p * self.weights[j];
                    } else {
                        out[j] += p * self.weights[i];
                    }
                }
            }
        }
        out
    }
}

/// Quadrature basis matrix `R[i, n] = psi_n(x_i)` (real; the angle enters as a phase on amplitudes).
fn quadrature_basis(axis: &[f64], cutoff: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(axis.len(), cutoff);
    for (i, &x) in axis.iter().enumerate() {
        for (n, v) in hermite_functions(x, cutoff).into_iter().enumerate() {
            r[(i, n)] = v;
        }
    }
    r
}

/// Joint quadrature amplitudes `sum_{n1,n2} psi_n1(x1) psi_n2(x2) e^{i(n1+n2) theta} c_{n1 n2}`
/// for one emitter configuration, as (real, imaginary) grids.
fn quadrature_amplitudes(
    amps: &[C64],
    base: usize,
    split: &OutcomeSplit,
    basis: &DMatrix<f64>,
    rotation: &[C64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = split.cutoff;
    let mut re = DMatrix::zeros(c, c);
    let mut im = DMatrix::zeros(c, c);
    for n1 in 0..c {
        for n2 in 0..c {
            let z = amps[base + split.mode_offsets[n1 * c + n2]] * rotation[n1 + n2];
            re[(n1, n2)] = z.re;
            im[(n1, n2)] = z.im;
        }
    }
    let bt = basis.transpose();
    (basis * re * &bt, basis * im * &bt)
}

fn rotation_phases(theta: f64, cutoff: usize) -> Vec<C64> {
    (0..2 * cutoff).map(|s| C64::from_polar(1.0, s as f64 * theta)).collect()
}

/// Outcome split, Hermite table, axis and weights of a homodyne grid.
type HomodyneSetup = (OutcomeSplit, DMatrix<f64>, Vec<f64>, Vec<f64>);

fn homodyne_setup(state: &CompositeState, grid: &HomodyneGrid) -> Result<HomodyneSetup> {
    let split = OutcomeSplit::new(state.layout())?;
    grid.validate(split.cutoff)?;
    let axis = grid.axis();
    let basis = quadrature_basis(&axis, split.cutoff);
    let weights = grid.weights();
    Ok((split, basis, axis, weights))
}

/// Joint densities `P(z, x1, x2)` for the generalized quadrature at angle `theta`,
/// trapezoid-normalized on the grid.
pub fn homodyne_probabilities(
    state: &CompositeState,
    theta: f64,
    grid: &HomodyneGrid,
    include_emitters: bool,
) -> Result<HomodyneTable> {
    let (split, basis, axis, weights) = homodyne_setup(state, grid)?;
    let rotation = rotation_phases(theta, split.cutoff);
    let n = axis.len();
    let blocks = if include_emitters { split.emitter_offsets.len() } else { 1 };
    let mut density = vec![0.0; blocks * n * n];
    for (k, &base) in split.emitter_offsets.iter().enumerate() {
        let (re, im) = quadrature_amplitudes(state.amplitudes(), base, &split, &basis, &rotation);
        let slot = if include_emitters { k } else { 0 };
        let block = &mut density[slot * n * n..(slot + 1) * n * n];
        for i in 0..n {
            for j in 0..n {
                block[i * n + j] += re[(i, j)] * re[(i, j)] + im[(i, j)] * im[(i, j)];
            }
        }
    }
    let mut table = HomodyneTable {
        axis,
        weights,
        emitter_dims: if include_emitters { split.emitter_dims.clone() } else { Vec::new() },
        density,
    };
    let total = table.integral();
    if (1.0 - total).abs() > GRID_DEFICIT_LIMIT {
        return Err(Error::GridTooSmall { deficit: 1.0 - total });
    }
    table.density.iter_mut().for_each(|p| *p /= total);
    Ok(table)
}

/// Classical Fisher information at `phi` of the measured state and its phase derivative.
///
/// `derivative` is `d/dphi` of `state`; both must already include any
/// phase-independent pre-measurement unitary.
pub fn cfi(state: &CompositeState, derivative: &CompositeState, model: &MeasurementModel, phi: f64) -> Result<FisherResult> {
    if state.layout() != derivative.layout() {
        return Err(Error::LayoutMismatch("state and derivative on different layouts".into()));
    }
    let value = match model.kind {
        MeasurementKind::Counting => counting_cfi(state, derivative, model.include_emitters)?,
        MeasurementKind::Homodyne { theta, grid } => {
            homodyne_cfi(state, derivative, theta, &grid, model.include_emitters)?
        }
    };
    Ok(FisherResult::new(value, FisherKind::Cfi, None, phi))
}

fn counting_cfi(state: &CompositeState, derivative: &CompositeState, include_emitters: bool) -> Result<f64> {
    let split = OutcomeSplit::new(state.layout())?;
    let (amps, damps) = (state.amplitudes(), derivative.amplitudes());
    let outcome = |e: usize, m: usize| {
        let (a, d) = (amps[e + m], damps[e + m]);
        (a.norm_sqr(), 2.0 * (a.conj() * d).re)
    };
    let mut total = 0.0;
    let mut fisher = 0.0;
    let mut add = |p: f64, dp: f64| {
        total += p;
        if p >= PROBABILITY_FLOOR {
            fisher += dp * dp / p;
        }
    };
    if include_emitters {
        for &e in &split.emitter_offsets {
            for &m in &split.mode_offsets {
                let (p, dp) = outcome(e, m);
                add(p, dp);
            }
        }
    } else {
        for &m in &split.mode_offsets {
            let (p, dp) = split
                .emitter_offsets
                .iter()
                .map(|&e| outcome(e, m))
                .fold((0.0, 0.0), |(p, dp), (q, dq)| (p + q, dp + dq));
            add(p, dp);
        }
    }
    if (total - 1.0).abs() > TABLE_TOLERANCE {
        return Err(Error::ProbabilityNotNormalized { total });
    }
    Ok(fisher)
}

fn homodyne_cfi(
    state: &CompositeState,
    derivative: &CompositeState,
    theta: f64,
    grid: &HomodyneGrid,
    include_emitters: bool,
) -> Result<f64> {
    let (split, basis, axis, weights) = homodyne_setup(state, grid)?;
    let rotation = rotation_phases(theta, split.cutoff);
    let n = axis.len();
    let blocks = if include_emitters { split.emitter_offsets.len() } else { 1 };
    let mut p = vec![0.0; blocks * n * n];
    let mut dp = vec![0.0; blocks * n * n];
    for (k, &base) in split.emitter_offsets.iter().enumerate() {
        let (are, aim) = quadrature_amplitudes(state.amplitudes(), base, &split, &basis, &rotation);
        let (dre, dim) = quadrature_amplitudes(derivative.amplitudes(), base, &split, &basis, &rotation);
        let slot = if include_emitters { k } else { 0 };
        let off = slot * n * n;
        for i in 0..n {
            for j in 0..n {
                let (ar, ai) = (are[(i, j)], aim[(i, j)]);
                p[off + i * n + j] += ar * ar + ai * ai;
                dp[off + i * n + j] += 2.0 * (ar * dre[(i, j)] + ai * dim[(i, j)]);
            }
        }
    }
    let mut total = 0.0;
    let mut fisher = 0.0;
    for blk in 0..blocks {
        for i in 0..n {
            for j in 0..n {
                let idx = blk * n * n + i * n + j;
                let w = weights[i] * weights[j];
                total += w * p[idx];
                if p[idx] >= PROBABILITY_FLOOR {
                    fisher += w * dp[idx] * dp[idx] / p[idx];
                }
            }
        }
    }
    if (1.0 - total).abs() > GRID_DEFICIT_LIMIT {
        return Err(Error::GridTooSmall { deficit: 1.0 - total });
    }
    // densities renormalized to unit integral: P -> P/total, dP -> dP/total
    Ok(fisher / total)
}

/// Whether the layout records emitters (JC registers).
pub fn has_emitters(layout: &SubsystemLayout) -> bool {
    layout.factors().iter().any(|f| f.kind == FactorKind::Qubit)
}
