//! Local gates and unitary evolution under the Jaynes-Cummings, Kerr, tunneling
//! and detuning Hamiltonians.
//!
//! Every generator used here is real symmetric and block diagonal in a
//! conserved excitation number, so propagators are built per block from a
//! cached eigendecomposition `U = V exp(-i t diag(w)) V^T`. Diagonal generators
//! (Kerr, detuning, phase difference) are kept as phase vectors.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CompositeState, FactorKind, Nonlinearity, SubsystemLayout, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateLabel {
    Jc(usize),
    Kerr(usize),
    Tunnel,
    Detune(usize),
    BeamSplitter,
    PhaseDiff,
    Identity,
    Custom,
}

/// A unitary block acting on a subset of the local basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GateBlock {
    pub indices: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

#[derive(Debug, Clone)]
pub enum GateAction {
    Identity,
    Diagonal(Arc<Vec<C64>>),
    /// Disjoint blocks; local indices not covered by any block are left unchanged.
    Blocks(Arc<Vec<GateBlock>>),
    Dense(Arc<DMatrix<C64>>),
    /// `exp(-i t H)` applied in the eigenbasis of a cached generator.
    Spectral(Arc<BlockGenerator>, f64),
}

/// Unitary acting on an ordered subset of layout factors.
///
/// The local basis is row-major over `target_dims`, first target slowest.
#[derive(Debug, Clone)]
pub struct LocalGate {
    targets: Vec<usize>,
    target_dims: Vec<usize>,
    action: GateAction,
    label: GateLabel,
}

impl LocalGate {
    pub fn new(targets: Vec<usize>, target_dims: Vec<usize>, action: GateAction, label: GateLabel) -> Result<Self> {
        if targets.len() != target_dims.len() || targets.is_empty() {
            return Err(Error::InvalidArgument("gate targets and dims disagree".into()));
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(Error::InvalidArgument(format!("repeated gate target {t}")));
            }
        }
        let dim: usize = target_dims.iter().product();
        match &action {
            GateAction::Identity => {}
            GateAction::Diagonal(d) if d.len() != dim => {
                return Err(Error::DimensionMismatch { expected: dim, found: d.len() })
            }
            GateAction::Dense(m) if m.nrows() != dim || m.ncols() != dim => {
                return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() })
            }
            GateAction::Blocks(blocks) => {
                let mut seen = vec![false; dim];
                for b in blocks.iter() {
                    if b.matrix.nrows() != b.indices.len() || b.matrix.ncols() != b.indices.len() {
                        return Err(Error::DimensionMismatch { expected: b.indices.len(), found: b.matrix.nrows() });
                    }
                    for &i in &b.indices {
                        if i >= dim || seen[i] {
                            return Err(Error::InvalidArgument(format!("bad block index {i}")));
                        }
                        seen[i] = true;
                    }
                }
            }
            _ => {}
        }
        Ok(LocalGate { targets, target_dims, action, label })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_dims(&self) -> &[usize] {
        &self.target_dims
    }

    pub fn action(&self) -> &GateAction {
        &self.action
    }

    pub fn label(&self) -> GateLabel {
        self.label
    }

    pub fn local_dim(&self) -> usize {
        self.target_dims.iter().product()
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.action, GateAction::Identity)
    }

    /// Full local matrix.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = self.local_dim();
        match &self.action {
            GateAction::Identity => DMatrix::identity(dim, dim),
            GateAction::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            GateAction::Dense(m) => (**m).clone(),
            GateAction::Spectral(generator, t) => LocalGate {
                action: GateAction::Blocks(Arc::new(generator.propagator(*t).unwrap_or_default())),
                ..self.clone()
            }
            .to_dense(),
            GateAction::Blocks(blocks) => {
                let mut m = DMatrix::identity(dim, dim);
                for b in blocks.iter() {
                    for (r, &i) in b.indices.iter().enumerate() {
                        for (c, &j) in b.indices.iter().enumerate() {
                            m[(i, j)] = b.matrix[(r, c)];
                        }
                    }
                }
                m
            }
        }
    }

    pub fn adjoint(&self) -> LocalGate {
        let action = match &self.action {
            GateAction::Identity => GateAction::Identity,
            GateAction::Diagonal(d) => GateAction::Diagonal(Arc::new(d.iter().map(|z| z.conj()).collect())),
            GateAction::Dense(m) => GateAction::Dense(Arc::new(m.adjoint())),
            GateAction::Spectral(generator, t) => GateAction::Spectral(generator.clone(), -t),
            GateAction::Blocks(blocks) => GateAction::Blocks(Arc::new(
                blocks
                    .iter()
                    .map(|b| GateBlock { indices: b.indices.clone(), matrix: b.matrix.adjoint() })
                    .collect(),
            )),
        };
        LocalGate { targets: self.targets.clone(), target_dims: self.target_dims.clone(), action, label: self.label }
    }

    /// Largest entry of `U^dagger U - I`.
    pub fn unitarity_error(&self) -> f64 {
        let u = self.to_dense();
        let dim = u.nrows();
        let prod = u.adjoint() * &u;
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    fn check_layout(&self, layout: &SubsystemLayout) -> Result<()> {
        let factors = layout.factors();
        for (&t, &d) in self.targets.iter().zip(&self.target_dims) {
            if t >= factors.len() {
                return Err(Error::LayoutMismatch(format!("gate target {t} outside {} factors", factors.len())));
            }
            if factors[t].dim != d {
                return Err(Error::LayoutMismatch(format!(
                    "gate target {t} has dim {d}, layout factor has {}",
                    factors[t].dim
                )));
            }
        }
        Ok(())
    }

    /// Apply in place, touching only the target axes.
    pub fn apply_mut(&self, state: &mut CompositeState) -> Result<()> {
        self.check_layout(state.layout())?;
        if self.is_identity() {
            return Ok(());
        }
        let (local, bases) = offsets(state.layout(), &self.targets);
        let amps = state.amplitudes_mut();
        match &self.action {
            GateAction::Identity => {}
            GateAction::Diagonal(d) => {
                for &base in &bases {
                    for (off, phase) in local.iter().zip(d.iter()) {
                        amps[base + off] *= phase;
                    }
                }
            }
            GateAction::Blocks(blocks) => {
                let max = blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0);
                let mut buf = vec![ZERO; max];
                for &base in &bases {
                    for b in blocks.iter() {
                        apply_block(amps, base, &local, b, &mut buf);
                    }
                }
            }
            GateAction::Spectral(generator, t) => generator.apply_evolution(amps, &local, &bases, *t),
            GateAction::Dense(m) => {
                let dim = local.len();
                let mut buf = vec![ZERO; dim];
                for &base in &bases {
                    for (slot, off) in buf.iter_mut().zip(&local) {
                        *slot = amps[base + off];
                    }
                    for r in 0..dim {
                        let mut acc = ZERO;
                        for c in 0..dim {
                            acc += m[(r, c)] * buf[c];
                        }
                        amps[base + local[r]] = acc;
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn apply_block(amps: &mut [C64], base: usize, local: &[usize], block: &GateBlock, buf: &mut [C64]) {
    let n = block.indices.len();
    if n == 1 {
        amps[base + local[block.indices[0]]] *= block.matrix[(0, 0)];
        return;
    }
    for (slot, &i) in buf.iter_mut().zip(&block.indices) {
        *slot = amps[base + local[i]];
    }
    let m = &block.matrix;
    for (r, &i) in block.indices.iter().enumerate() {
        let mut acc = ZERO;
        for (c, x) in buf[..n].iter().enumerate() {
            acc += m[(r, c)] * x;
        }
        amps[base + local[i]] = acc;
    }
}

/// Flat offsets of the local basis of `targets`, and of every configuration of the remaining factors.
fn offsets(layout: &SubsystemLayout, targets: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let others: Vec<usize> = (0..layout.factors().len()).filter(|k| !targets.contains(k)).collect();
    (layout.factor_offsets(targets), layout.factor_offsets(&others))
}

/// `gate |state>`.
pub fn apply(gate: &LocalGate, state: &CompositeState) -> Result<CompositeState> {
    let mut out = state.clone();
    gate.apply_mut(&mut out)?;
    Ok(out)
}

/// Eigendecomposition of a real symmetric block-diagonal generator.
#[derive(Debug)]
pub struct BlockGenerator {
    blocks: Vec<EigenBlock>,
}

#[derive(Debug)]
struct EigenBlock {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl BlockGenerator {
    /// `blocks` lists (local indices, real symmetric block matrix).
    pub fn new(blocks: Vec<(Vec<usize>, DMatrix<f64>)>) -> Self {
        let blocks = blocks
            .into_iter()
            .map(|(indices, h)| {
                let eig = SymmetricEigen::new(h);
                EigenBlock { indices, values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
            })
            .collect();
        BlockGenerator { blocks }
    }

    /// Blocks of `exp(-i t H)`; `None` when `t == 0`.
    pub fn propagator(&self, t: f64) -> Option<Vec<GateBlock>> {
        if t == 0.0 {
            return None;
        }
        Some(
            self.blocks
                .iter()
                .map(|b| {
                    let n = b.indices.len();
                    let phases: Vec<C64> = b.values.iter().map(|&w| C64::from_polar(1.0, -w * t)).collect();
                    let v = &b.vectors;
                    let matrix = DMatrix::from_fn(n, n, |r, c| {
                        let mut acc = ZERO;
                        for (k, p) in phases.iter().enumerate() {
                            acc += p * (v[(r, k)] * v[(c, k)]);
                        }
                        acc
                    });
                    GateBlock { indices: b.indices.clone(), matrix }
                })
                .collect(),
        )
    }

    /// `exp(-i t H)` on every configuration `bases` of the spectator factors.
    fn apply_evolution(&self, amps: &mut [C64], local: &[usize], bases: &[usize], t: f64) {
        let max = self.blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0);
        let mut x = vec![ZERO; max];
        let mut y = vec![ZERO; max];
        let phases: Vec<Vec<C64>> = self
            .blocks
            .iter()
            .map(|b| b.values.iter().map(|&w| C64::from_polar(1.0, -w * t)).collect())
            .collect();
        for &base in bases {
            for (b, ph) in self.blocks.iter().zip(&phases) {
                let n = b.indices.len();
                if n == 1 {
                    amps[base + local[b.indices[0]]] *= ph[0];
                    continue;
                }
                for (slot, &i) in x.iter_mut().zip(&b.indices) {
                    *slot = amps[base + local[i]];
                }
                let v = &b.vectors;
                // y = diag(phase) V^T x
                for k in 0..n {
                    let col = v.column(k);
                    let mut acc = ZERO;
                    for (r, xr) in x[..n].iter().enumerate() {
                        acc += xr * col[r];
                    }
                    y[k] = acc * ph[k];
                }
                // x = V y
                for (r, &i) in b.indices.iter().enumerate() {
                    let mut acc = ZERO;
                    for (k, yk) in y[..n].iter().enumerate() {
                        acc += yk * v[(r, k)];
                    }
                    amps[base + local[i]] = acc;
                }
            }
        }
    }

    pub fn max_eigenvalue_abs(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.values.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum GeneratorKey {
    Jc(usize),
    Tunnel(usize),
}

fn generator_cache() -> &'static Mutex<HashMap<GeneratorKey, Arc<BlockGenerator>>> {
    static CACHE: OnceLock<Mutex<HashMap<GeneratorKey, Arc<BlockGenerator>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: GeneratorKey, build: impl FnOnce() -> BlockGenerator) -> Arc<BlockGenerator> {
    if let Some(g) = generator_cache().lock().expect("cache poisoned").get(&key) {
        return g.clone();
    }
    // built outside the lock; a racing insert of an identical value is harmless
    let built = Arc::new(build());
    generator_cache().lock().expect("cache poisoned").entry(key).or_insert(built).clone()
}

/// `sigma^dagger a + sigma a^dagger` on the local space `(emitter, mode)`, index `q * cutoff + n`.
pub fn jc_generator(cutoff: usize) -> Arc<BlockGenerator> {
    cached(GeneratorKey::Jc(cutoff), || {
        let mut blocks = vec![(vec![0], DMatrix::zeros(1, 1))];
        for n in 1..cutoff {
            // |g,n> <-> |e,n-1> with amplitude sqrt(n)
            let s = (n as f64).sqrt();
            blocks.push((vec![n, cutoff + n - 1], DMatrix::from_row_slice(2, 2, &[0.0, s, s, 0.0])));
        }
        blocks.push((vec![cutoff + cutoff - 1], DMatrix::zeros(1, 1)));
        BlockGenerator::new(blocks)
    })
}

/// `a2^dagger a1 + a1^dagger a2` on `(mode1, mode2)`, index `n1 * cutoff + n2`,
/// split by total photon number.
pub fn tunnel_generator(cutoff: usize) -> Arc<BlockGenerator> {
    cached(GeneratorKey::Tunnel(cutoff), || {
        let top = cutoff - 1;
        let blocks = (0..=2 * top)
            .map(|total| {
                let lo = total.saturating_sub(top);
                let hi = total.min(top);
                let indices: Vec<usize> = (lo..=hi).map(|n1| n1 * cutoff + (total - n1)).collect();
                let len = hi - lo + 1;
                let mut h = DMatrix::zeros(len, len);
                for k in 1..len {
                    // (n1, n2) -> (n1 - 1, n2 + 1)
                    let n1 = lo + k;
                    let n2 = total - n1;
                    let amp = ((n1 * (n2 + 1)) as f64).sqrt();
                    h[(k - 1, k)] = amp;
                    h[(k, k - 1)] = amp;
                }
                (indices, h)
            })
            .collect();
        BlockGenerator::new(blocks)
    })
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 2 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} < 2")));
    }
    Ok(())
}

fn block_gate(targets: Vec<usize>, dims: Vec<usize>, blocks: Option<Vec<GateBlock>>, label: GateLabel) -> Result<LocalGate> {
    let action = blocks.map_or(GateAction::Identity, |b| GateAction::Blocks(Arc::new(b)));
    LocalGate::new(targets, dims, action, label)
}

/// `exp(-i g (sigma^dagger a + sigma a^dagger))` on the factor pair `(emitter, mode)`.
pub fn jc_gate(g_tilde: f64, cutoff: usize, pair: (usize, usize)) -> Result<LocalGate> {
    check_cutoff(cutoff)?;
    let blocks = jc_generator(cutoff).propagator(g_tilde);
    block_gate(vec![pair.0, pair.1], vec![2, cutoff], blocks, GateLabel::Jc(pair.1))
}

/// `exp(-i K n^2)` on one mode.
pub fn kerr_gate(k_tilde: f64, cutoff: usize, mode: usize) -> Result<LocalGate> {
    check_cutoff(cutoff)?;
    if k_tilde == 0.0 {
        return LocalGate::new(vec![mode], vec![cutoff], GateAction::Identity, GateLabel::Kerr(mode));
    }
    let phases = (0..cutoff).map(|n| C64::from_polar(1.0, -k_tilde * (n * n) as f64)).collect();
    LocalGate::new(vec![mode], vec![cutoff], GateAction::Diagonal(Arc::new(phases)), GateLabel::Kerr(mode))
}

/// `exp(-i J (a2^dagger a1 + a1^dagger a2))` on the two modes `modes = [mode1, mode2]`.
pub fn tunnel_gate_on(j_tilde: f64, cutoff: usize, modes: [usize; 2]) -> Result<LocalGate> {
    check_cutoff(cutoff)?;
    let action = if j_tilde == 0.0 {
        GateAction::Identity
    } else {
        GateAction::Spectral(tunnel_generator(cutoff), j_tilde)
    };
    LocalGate::new(modes.to_vec(), vec![cutoff, cutoff], action, GateLabel::Tunnel)
}

/// Tunneling gate on a Kerr register `(mode1, mode2)`.
pub fn tunnel_gate(j_tilde: f64, cutoff: usize) -> Result<LocalGate> {
    tunnel_gate_on(j_tilde, cutoff, [0, 1])
}

/// `exp(-i Delta sigma^dagger sigma)` on one emitter.
pub fn detune_gate(delta_tilde: f64, emitter: usize) -> Result<LocalGate> {
    if delta_tilde == 0.0 {
        return LocalGate::new(vec![emitter], vec![2], GateAction::Identity, GateLabel::Detune(emitter));
    }
    let phases = vec![ONE, C64::from_polar(1.0, -delta_tilde)];
    LocalGate::new(vec![emitter], vec![2], GateAction::Diagonal(Arc::new(phases)), GateLabel::Detune(emitter))
}

fn check_kind(kind: Nonlinearity, layout: &SubsystemLayout) -> Result<usize> {
    let cutoff = layout.cutoff().ok_or_else(|| Error::LayoutMismatch("no mode factors".into()))?;
    let expected = kind.layout(cutoff)?;
    if &expected != layout {
        return Err(Error::LayoutMismatch(format!("state layout does not match the {kind} register")));
    }
    Ok(cutoff)
}

/// The nonlinear gates of one interaction period `t` for both emitter-mode pairs or both modes.
pub fn nonlinear_gates(kind: Nonlinearity, t: f64, cutoff: usize) -> Result<[LocalGate; 2]> {
    Ok(match kind {
        Nonlinearity::Jc => [jc_gate(t, cutoff, (0, 2))?, jc_gate(t, cutoff, (1, 3))?],
        Nonlinearity::Kerr => [kerr_gate(t, cutoff, 0)?, kerr_gate(t, cutoff, 1)?],
    })
}

/// Continuous evolution under the two-pair JC or two-mode Kerr Hamiltonian for adimensional time `time`.
pub fn evolve_continuous(kind: Nonlinearity, time: f64, psi0: &CompositeState) -> Result<CompositeState> {
    let cutoff = check_kind(kind, psi0.layout())?;
    let mut state = psi0.clone();
    for gate in nonlinear_gates(kind, time, cutoff)? {
        gate.apply_mut(&mut state)?;
    }
    Ok(state)
}

/// Layout kind check shared with circuit builders.
pub(crate) fn register_cutoff(kind: Nonlinearity, layout: &SubsystemLayout) -> Result<usize> {
    check_kind(kind, layout)
}

/// Whether every factor named by `gate` is a mode.
pub fn acts_on_modes_only(gate: &LocalGate, layout: &SubsystemLayout) -> bool {
    gate.targets().iter().all(|&t| layout.factors().get(t).map(|f| f.kind) == Some(FactorKind::Mode))
}
