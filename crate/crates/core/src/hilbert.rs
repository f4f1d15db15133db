//! Truncated composite Hilbert space of up to two emitters and two bosonic modes.
//!
//! Amplitudes are stored row-major over the factor indices with the leftmost
//! factor varying slowest. The Jaynes-Cummings register is ordered
//! `(emitter1, emitter2, mode1, mode2)` and the Kerr register `(mode1, mode2)`.
//! Emitter basis index 0 is the ground state `|g>`, index 1 the excited `|e>`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum truncation tail accepted for a coherent state.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-6;

const NORM_TOLERANCE: f64 = 1e-9;

/// Which nonlinear register the protocol runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Jc,
    Kerr,
}

impl Nonlinearity {
    pub fn layout(self, cutoff: usize) -> Result<SubsystemLayout> {
        match self {
            Nonlinearity::Jc => SubsystemLayout::jc(cutoff),
            Nonlinearity::Kerr => SubsystemLayout::kerr(cutoff),
        }
    }

    /// Factor indices of the two photonic modes.
    pub fn mode_factors(self) -> [usize; 2] {
        match self {
            Nonlinearity::Jc => [2, 3],
            Nonlinearity::Kerr => [0, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Jc => "jc",
            Nonlinearity::Kerr => "kerr",
        }
    }
}

impl std::fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jc" => Ok(Nonlinearity::Jc),
            "kerr" => Ok(Nonlinearity::Kerr),
            other => Err(Error::InvalidArgument(format!("unknown nonlinearity '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorKind {
    Qubit,
    Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
}

impl Factor {
    pub fn qubit() -> Self {
        Factor { kind: FactorKind::Qubit, dim: 2 }
    }

    pub fn mode(cutoff: usize) -> Self {
        Factor { kind: FactorKind::Mode, dim: cutoff }
    }
}

/// Ordered tensor-product structure of a register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemLayout {
    factors: Vec<Factor>,
    total_dim: usize,
}

impl SubsystemLayout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::LayoutMismatch("layout needs at least one factor".into()));
        }
        for f in &factors {
            match f.kind {
                FactorKind::Qubit if f.dim != 2 => {
                    return Err(Error::LayoutMismatch(format!("qubit factor with dim {}", f.dim)))
                }
                FactorKind::Mode if f.dim < 2 => {
                    return Err(Error::LayoutMismatch(format!("mode cutoff {} < 2", f.dim)))
                }
                _ => {}
            }
        }
        let total_dim = factors.iter().map(|f| f.dim).product();
        Ok(SubsystemLayout { factors, total_dim })
    }

    /// `(emitter1, emitter2, mode1, mode2)`.
    pub fn jc(cutoff: usize) -> Result<Self> {
        Self::new(vec![Factor::qubit(), Factor::qubit(), Factor::mode(cutoff), Factor::mode(cutoff)])
    }

    /// `(mode1, mode2)`.
    pub fn kerr(cutoff: usize) -> Result<Self> {
        Self::new(vec![Factor::mode(cutoff), Factor::mode(cutoff)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    /// Distance in the flat amplitude vector between consecutive values of each factor index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factors[k + 1].dim;
        }
        strides
    }

    /// Factor indices of all mode factors, in layout order.
    pub fn mode_indices(&self) -> Vec<usize> {
        self.indices_of(FactorKind::Mode)
    }

    pub fn qubit_indices(&self) -> Vec<usize> {
        self.indices_of(FactorKind::Qubit)
    }

    fn indices_of(&self, kind: FactorKind) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// The two mode factors of a two-mode register.
    pub fn mode_pair(&self) -> Result<[usize; 2]> {
        match self.mode_indices().as_slice() {
            &[a, b] => Ok([a, b]),
            other => Err(Error::LayoutMismatch(format!("expected two modes, found {}", other.len()))),
        }
    }

    /// Decompose a flat index into per-factor digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for k in (0..self.factors.len()).rev() {
            digits[k] = index % self.factors[k].dim;
            index /= self.factors[k].dim;
        }
        digits
    }

    pub fn flat_index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&d, f)| acc * f.dim + d)
    }

    /// Flat offsets of every joint configuration of `factors` (first listed slowest), others at 0.
    pub fn factor_offsets(&self, factors: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offs = vec![0usize];
        for &f in factors {
            let (dim, stride) = (self.factors[f].dim, strides[f]);
            offs = offs.iter().flat_map(|&o| (0..dim).map(move |d| o + d * stride)).collect();
        }
        offs
    }

    pub fn cutoff(&self) -> Option<usize> {
        self.factors.iter().find(|f| f.kind == FactorKind::Mode).map(|f| f.dim)
    }
}

/// Truncated coherent-state amplitudes of a single mode.
#[derive(Debug, Clone)]
pub struct CoherentAmplitudes {
    pub amplitudes: Vec<C64>,
    /// Probability weight lost to truncation before renormalization.
    pub tail: f64,
}

/// Coherent state `|alpha>` truncated to `cutoff` Fock levels and renormalized.
pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<CoherentAmplitudes> {
    if cutoff < 2 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} < 2")));
    }
    let mut amplitudes = Vec::with_capacity(cutoff);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amplitudes.push(c);
    for n in 1..cutoff {
        c = c * alpha / (n as f64).sqrt();
        amplitudes.push(c);
    }
    let kept: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let tail = (1.0 - kept).max(0.0);
    if tail > COHERENT_TAIL_LIMIT {
        return Err(Error::CutoffTooSmall { cutoff, tail, limit: COHERENT_TAIL_LIMIT });
    }
    let scale = 1.0 / kept.sqrt();
    amplitudes.iter_mut().for_each(|a| *a *= scale);
    Ok(CoherentAmplitudes { amplitudes, tail })
}

/// Smallest cutoff whose coherent-state tail at mean photon number `mean` stays within the guard.
pub fn min_coherent_cutoff(mean: f64) -> usize {
    let alpha = C64::new(mean.max(0.0).sqrt(), 0.0);
    (2..)
        .find(|&c| coherent_state(alpha, c).is_ok())
        .expect("unbounded search")
}

/// Default per-mode cutoff for a register with total mean photon number `n_total`:
/// twice the photon number, raised if a coherent input of `n_total / 2` would be truncated.
pub fn default_cutoff(n_total: f64) -> usize {
    let twice = (2.0 * n_total).ceil().max(2.0) as usize;
    twice.max(min_coherent_cutoff(n_total / 2.0))
}

pub fn fock(n: usize, cutoff: usize) -> Result<Vec<C64>> {
    if n >= cutoff {
        return Err(Error::IndexOutOfRange { index: n, len: cutoff });
    }
    let mut v = vec![C64::new(0.0, 0.0); cutoff];
    v[n] = C64::new(1.0, 0.0);
    Ok(v)
}

pub fn ground() -> Vec<C64> {
    vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
}

pub fn excited() -> Vec<C64> {
    vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
}

/// Pure state of a composite register.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    layout: SubsystemLayout,
    amplitudes: Vec<C64>,
}

impl CompositeState {
    pub fn from_amplitudes(layout: SubsystemLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: amplitudes.len() });
        }
        Ok(CompositeState { layout, amplitudes })
    }

    pub fn basis(layout: SubsystemLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.factors().len() {
            return Err(Error::DimensionMismatch { expected: layout.factors().len(), found: digits.len() });
        }
        for (&d, f) in digits.iter().zip(layout.factors()) {
            if d >= f.dim {
                return Err(Error::IndexOutOfRange { index: d, len: f.dim });
            }
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amplitudes[layout.flat_index(digits)] = C64::new(1.0, 0.0);
        Ok(CompositeState { layout, amplitudes })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let norm_sq = self.norm_sqr();
        if (norm_sq.sqrt() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(())
    }

    /// Expectation value of the number operator of a mode factor.
    pub fn mean_occupation(&self, factor: usize) -> Result<f64> {
        let factors = self.layout.factors();
        if factor >= factors.len() {
            return Err(Error::IndexOutOfRange { index: factor, len: factors.len() });
        }
        let stride = self.layout.strides()[factor];
        let dim = factors[factor].dim;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| ((i / stride) % dim) as f64 * a.norm_sqr())
            .sum())
    }

    /// Total photon number summed over all mode factors.
    pub fn mean_photons(&self) -> f64 {
        self.layout
            .mode_indices()
            .into_iter()
            .map(|m| self.mean_occupation(m).expect("mode index in range"))
            .sum()
    }

    /// Photons plus emitter excitations.
    pub fn mean_excitations(&self) -> f64 {
        self.layout
            .factors()
            .iter()
            .enumerate()
            .map(|(k, _)| self.mean_occupation(k).expect("index in range"))
            .sum()
    }
}

/// Kronecker product of one unit vector per layout factor.
pub fn product_state(layout: &SubsystemLayout, factor_vectors: &[Vec<C64>]) -> Result<CompositeState> {
    let factors = layout.factors();
    if factor_vectors.len() != factors.len() {
        return Err(Error::DimensionMismatch { expected: factors.len(), found: factor_vectors.len() });
    }
    for (v, f) in factor_vectors.iter().zip(factors) {
        if v.len() != f.dim {
            return Err(Error::DimensionMismatch { expected: f.dim, found: v.len() });
        }
        let norm_sq: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq.sqrt() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sq });
        }
    }
    let mut amplitudes = vec![C64::new(1.0, 0.0)];
    for v in factor_vectors {
        amplitudes = amplitudes
            .iter()
            .flat_map(|&a| v.iter().map(move |&b| a * b))
            .collect();
    }
    CompositeState::from_amplitudes(layout.clone(), amplitudes)
}

/// `<a|b>`, conjugating `a`.
pub fn inner_product(a: &CompositeState, b: &CompositeState) -> Result<C64> {
    if a.layout != b.layout {
        return Err(Error::LayoutMismatch("inner product of states on different layouts".into()));
    }
    Ok(a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum())
}

/// Density matrix on a subset of factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    dims: Vec<usize>,
    matrix: DMatrix<C64>,
}

impl ReducedDensity {
    pub fn from_pure(state: &CompositeState) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        ReducedDensity { dims: state.layout().dims(), matrix: &v * v.adjoint() }
    }

    /// Wrap a square matrix over factors of the given dimensions.
    pub fn from_matrix(dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(ReducedDensity { dims, matrix })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Trace out one of the remaining factors (index into `dims`).
    pub fn trace_out(&self, factor: usize) -> Result<ReducedDensity> {
        if factor >= self.dims.len() {
            return Err(Error::IndexOutOfRange { index: factor, len: self.dims.len() });
        }
        if self.dims.len() == 1 {
            return Err(Error::InvalidArgument("cannot trace out the last factor".into()));
        }
        let outer: usize = self.dims[..factor].iter().product();
        let traced = self.dims[factor];
        let inner: usize = self.dims[factor + 1..].iter().product();
        let kept = outer * inner;
        let mut out = DMatrix::zeros(kept, kept);
        for r in 0..kept {
            let (ro, ri) = (r / inner, r % inner);
            for c in 0..kept {
                let (co, ci) = (c / inner, c % inner);
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..traced {
                    let fr = (ro * traced + t) * inner + ri;
                    let fc = (co * traced + t) * inner + ci;
                    acc += self.matrix[(fr, fc)];
                }
                out[(r, c)] = acc;
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(factor);
        Ok(ReducedDensity { dims, matrix: out })
    }

    /// Largest deviation from Hermiticity, entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Partial trace of a pure state keeping `keep` (factor indices, in the given order).
pub fn reduce(state: &CompositeState, keep: &[usize]) -> Result<ReducedDensity> {
    let layout = state.layout();
    let n_factors = layout.factors().len();
    for (i, &k) in keep.iter().enumerate() {
        if k >= n_factors {
            return Err(Error::IndexOutOfRange { index: k, len: n_factors });
        }
        if keep[..i].contains(&k) {
            return Err(Error::InvalidArgument(format!("factor {k} listed twice")));
        }
    }
    if keep.is_empty() {
        return Err(Error::InvalidArgument("must keep at least one factor".into()));
    }
    let dims = layout.dims();
    let traced: Vec<usize> = (0..n_factors).filter(|k| !keep.contains(k)).collect();
    let kept_offsets = layout.factor_offsets(keep);
    let traced_offsets = layout.factor_offsets(&traced);
    let amps = state.amplitudes();
    let m = DMatrix::from_fn(kept_offsets.len(), traced_offsets.len(), |r, c| {
        amps[kept_offsets[r] + traced_offsets[c]]
    });
    Ok(ReducedDensity {
        dims: keep.iter().map(|&k| dims[k]).collect(),
        matrix: &m * m.adjoint(),
    })
}

/// Single-mode reduced density matrix; all other factors are traced out.
pub fn reduce_to_mode(state: &CompositeState, mode_index: usize) -> Result<ReducedDensity> {
    let factors = state.layout().factors();
    if mode_index >= factors.len() {
        return Err(Error::IndexOutOfRange { index: mode_index, len: factors.len() });
    }
    if factors[mode_index].kind != FactorKind::Mode {
        return Err(Error::LayoutMismatch(format!("factor {mode_index} is not a mode")));
    }
    reduce(state, &[mode_index])
}

/// `|alpha, alpha>` (Kerr) or `|g, g, alpha, alpha>` (JC) with `|alpha|^2 = n_total / 2`.
pub fn initial_state(kind: Nonlinearity, n_total: f64, cutoff: usize) -> Result<CompositeState> {
    if !(n_total >= 0.0) || !n_total.is_finite() {
        return Err(Error::InvalidArgument(format!("mean photon number {n_total}")));
    }
    let layout = kind.layout(cutoff)?;
    let alpha = C64::new((n_total / 2.0).sqrt(), 0.0);
    let coh = coherent_state(alpha, cutoff)?.amplitudes;
    let vectors = match kind {
        Nonlinearity::Jc => vec![ground(), ground(), coh.clone(), coh],
        Nonlinearity::Kerr => vec![coh.clone(), coh],
    };
    product_state(&layout, &vectors)
}
