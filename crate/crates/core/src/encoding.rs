//! Mach-Zehnder phase encoding: beam splitter, relative phase, beam splitter.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dynamics::{tunnel_generator, GateAction, GateLabel, LocalGate};
use crate::error::{Error, Result};
use crate::hilbert::{CompositeState, C64};

/// Phase value at which estimation is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSetting {
    pub phi: f64,
}

impl Default for PhaseSetting {
    fn default() -> Self {
        PhaseSetting { phi: FRAC_PI_3 }
    }
}

impl PhaseSetting {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidArgument(format!("phase {phi} is not finite")));
        }
        Ok(PhaseSetting { phi })
    }
}

type GateCache = Mutex<HashMap<(usize, [usize; 2]), LocalGate>>;

fn bs_cache() -> &'static GateCache {
    static CACHE: OnceLock<GateCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Symmetric beam splitter `exp(-i pi/4 (a2^dagger a1 + a1^dagger a2))` on the given mode factors.
pub fn beam_splitter_gate_on(cutoff: usize, modes: [usize; 2]) -> Result<LocalGate> {
    if let Some(g) = bs_cache().lock().expect("cache poisoned").get(&(cutoff, modes)) {
        return Ok(g.clone());
    }
    // materialized once per cutoff, unlike per-call tunneling gates
    let blocks = tunnel_generator(cutoff).propagator(FRAC_PI_4).expect("nonzero angle");
    let gate = LocalGate::new(modes.to_vec(), vec![cutoff, cutoff], GateAction::Blocks(Arc::new(blocks)), GateLabel::BeamSplitter)?;
    Ok(bs_cache().lock().expect("cache poisoned").entry((cutoff, modes)).or_insert(gate).clone())
}

/// Beam splitter on a Kerr register.
pub fn beam_splitter_gate(cutoff: usize) -> Result<LocalGate> {
    beam_splitter_gate_on(cutoff, [0, 1])
}

/// `exp(-i (phi/2)(n2 - n1))` on the given mode factors.
pub fn phase_diff_gate_on(phi: f64, cutoff: usize, modes: [usize; 2]) -> Result<LocalGate> {
    let dims = vec![cutoff, cutoff];
    if phi == 0.0 {
        return LocalGate::new(modes.to_vec(), dims, GateAction::Identity, GateLabel::PhaseDiff);
    }
    let phases = (0..cutoff)
        .flat_map(|n1| (0..cutoff).map(move |n2| C64::from_polar(1.0, -0.5 * phi * (n2 as f64 - n1 as f64))))
        .collect();
    LocalGate::new(modes.to_vec(), dims, GateAction::Diagonal(Arc::new(phases)), GateLabel::PhaseDiff)
}

pub fn phase_diff_gate(phi: f64, cutoff: usize) -> Result<LocalGate> {
    phase_diff_gate_on(phi, cutoff, [0, 1])
}

fn modes_of(state: &CompositeState) -> Result<([usize; 2], usize)> {
    let modes = state.layout().mode_pair()?;
    let cutoff = state.layout().factors()[modes[0]].dim;
    if state.layout().factors()[modes[1]].dim != cutoff {
        return Err(Error::LayoutMismatch("modes with different cutoffs".into()));
    }
    Ok((modes, cutoff))
}

/// Multiply every amplitude by `f(n1, n2)` of its mode occupations.
fn scale_by_occupation(state: &mut CompositeState, modes: [usize; 2], f: impl Fn(usize, usize) -> C64) {
    let layout = state.layout().clone();
    let strides = layout.strides();
    let dims = layout.dims();
    for (i, a) in state.amplitudes_mut().iter_mut().enumerate() {
        let n1 = (i / strides[modes[0]]) % dims[modes[0]];
        let n2 = (i / strides[modes[1]]) % dims[modes[1]];
        *a *= f(n1, n2);
    }
}

/// `U_MZ(phi) |state>`; emitter factors are untouched.
pub fn encode(state: &CompositeState, phi: f64) -> Result<CompositeState> {
    let (modes, cutoff) = modes_of(state)?;
    let bs = beam_splitter_gate_on(cutoff, modes)?;
    let mut out = state.clone();
    bs.apply_mut(&mut out)?;
    phase_diff_gate_on(phi, cutoff, modes)?.apply_mut(&mut out)?;
    bs.apply_mut(&mut out)?;
    Ok(out)
}

/// Exact `d/dphi U_MZ(phi) |state>` (not normalized).
pub fn encode_derivative(state: &CompositeState, phi: f64) -> Result<CompositeState> {
    Ok(encode_with_derivative(state, phi)?.1)
}

/// The encoded state together with its phase derivative, sharing the first beam splitter.
pub fn encode_with_derivative(state: &CompositeState, phi: f64) -> Result<(CompositeState, CompositeState)> {
    let (modes, cutoff) = modes_of(state)?;
    let bs = beam_splitter_gate_on(cutoff, modes)?;
    let mut encoded = state.clone();
    bs.apply_mut(&mut encoded)?;
    phase_diff_gate_on(phi, cutoff, modes)?.apply_mut(&mut encoded)?;
    let mut derivative = encoded.clone();
    scale_by_occupation(&mut derivative, modes, |n1, n2| C64::new(0.0, -0.5 * (n2 as f64 - n1 as f64)));
    bs.apply_mut(&mut encoded)?;
    bs.apply_mut(&mut derivative)?;
    Ok((encoded, derivative))
}

/// `U_BS |state>`, the frame in which the phase generator is `(n2 - n1)/2`.
pub fn first_beam_splitter(state: &CompositeState) -> Result<CompositeState> {
    let (modes, cutoff) = modes_of(state)?;
    let mut out = state.clone();
    beam_splitter_gate_on(cutoff, modes)?.apply_mut(&mut out)?;
    Ok(out)
}

/// `<G>` and `<G^2>` of `G = (n2 - n1)/2`.
pub fn phase_generator_moments(state: &CompositeState) -> Result<(f64, f64)> {
    let (modes, _) = modes_of(state)?;
    let layout = state.layout();
    let strides = layout.strides();
    let dims = layout.dims();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, a) in state.amplitudes().iter().enumerate() {
        let n1 = ((i / strides[modes[0]]) % dims[modes[0]]) as f64;
        let n2 = ((i / strides[modes[1]]) % dims[modes[1]]) as f64;
        let g = 0.5 * (n2 - n1);
        let p = a.norm_sqr();
        m1 += g * p;
        m2 += g * g * p;
    }
    Ok((m1, m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::apply;
    use crate::hilbert::{inner_product, initial_state, Nonlinearity, SubsystemLayout};
    use std::f64::consts::PI;

    fn max_diff(a: &CompositeState, b: &CompositeState) -> f64 {
        a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn beam_splitter_basics() {
        let layout = SubsystemLayout::kerr(6).unwrap();
        let vac = CompositeState::basis(layout.clone(), &[0, 0]).unwrap();
        let bs = beam_splitter_gate(6).unwrap();
        assert_eq!(apply(&bs, &vac).unwrap(), vac);
        let one = CompositeState::basis(layout.clone(), &[1, 0]).unwrap();
        let out = apply(&bs, &one).unwrap();
        assert!((out.amplitudes()[layout.flat_index(&[1, 0])].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((out.amplitudes()[layout.flat_index(&[0, 1])].norm_sqr() - 0.5).abs() < 1e-12);
        assert!(bs.unitarity_error() < 1e-10);
    }

    #[test]
    fn phase_diff_values() {
        assert!(phase_diff_gate(0.0, 5).unwrap().is_identity());
        let d = phase_diff_gate(0.9, 5).unwrap().to_dense();
        for n1 in 0..5 {
            for n2 in 0..5 {
                let expected = C64::from_polar(1.0, -0.45 * (n2 as f64 - n1 as f64));
                assert!((d[(n1 * 5 + n2, n1 * 5 + n2)] - expected).norm() < 1e-15);
            }
        }
        let d = phase_diff_gate(2.0 * PI, 3).unwrap().to_dense();
        assert!((d[(3, 3)] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn encode_leaves_vacuum_and_emitters() {
        let layout = SubsystemLayout::jc(5).unwrap();
        let vac = CompositeState::basis(layout.clone(), &[1, 0, 0, 0]).unwrap();
        for phi in [0.0, 0.4, 2.9] {
            assert!(max_diff(&encode(&vac, phi).unwrap(), &vac) < 1e-14);
            assert!(encode_derivative(&vac, phi).unwrap().norm_sqr() < 1e-28);
        }
    }

    #[test]
    fn encode_at_zero_is_two_beam_splitters() {
        let s = initial_state(Nonlinearity::Kerr, 6.0, 18).unwrap();
        let bs = beam_splitter_gate(18).unwrap();
        let direct = apply(&bs, &apply(&bs, &s).unwrap()).unwrap();
        assert!(max_diff(&encode(&s, 0.0).unwrap(), &direct) < 1e-12);
    }

    #[test]
    fn encode_conserves_photons() {
        let s = initial_state(Nonlinearity::Kerr, 6.0, 18).unwrap();
        let e = encode(&s, 1.1).unwrap();
        assert!((e.mean_photons() - s.mean_photons()).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let s = initial_state(Nonlinearity::Kerr, 6.0, 18).unwrap();
        let phi = PI / 3.0;
        let h = 1e-4;
        let plus = encode(&s, phi + h).unwrap();
        let minus = encode(&s, phi - h).unwrap();
        let d = encode_derivative(&s, phi).unwrap();
        let err = plus
            .amplitudes()
            .iter()
            .zip(minus.amplitudes())
            .zip(d.amplitudes())
            .map(|((p, m), d)| ((p - m) / (2.0 * h) - d).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-6, "{err}");

        let e = encode(&s, phi).unwrap();
        let overlap = inner_product(&e, &d).unwrap();
        assert!(overlap.re.abs() < 1e-10);
    }

    #[test]
    fn rejects_single_mode_layouts() {
        let layout = SubsystemLayout::new(vec![crate::hilbert::Factor::mode(4)]).unwrap();
        let s = CompositeState::basis(layout, &[1]).unwrap();
        assert!(encode(&s, 0.1).is_err());
        assert!(encode_derivative(&s, 0.1).is_err());
    }
}
