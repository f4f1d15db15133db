//! Fixed settings of one estimation protocol: register, photon number, truncation and phase point.

use serde::{Deserialize, Serialize};

use crate::circuits::{build_circuit, AnsatzParams, CircuitRole};
use crate::dynamics::evolve_continuous;
use crate::encoding::{encode_with_derivative, PhaseSetting};
use crate::error::{Error, Result};
use crate::hilbert::{default_cutoff, initial_state, CompositeState, Nonlinearity};
use crate::metrology::{bounds, cfi, qfi_fidelity, Bounds, FisherResult, MeasurementModel, DEFAULT_DELTA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    pub kind: Nonlinearity,
    /// Total mean photon number of the coherent input.
    pub n_mean: f64,
    pub cutoff: usize,
    pub phi: f64,
    pub delta: f64,
}

impl ProtocolSettings {
    /// Default cutoff, `phi = pi/3`, `delta = 1e-2`.
    pub fn new(kind: Nonlinearity, n_mean: f64) -> Self {
        ProtocolSettings {
            kind,
            n_mean,
            cutoff: default_cutoff(n_mean),
            phi: PhaseSetting::default().phi,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_cutoff(self, cutoff: usize) -> Self {
        ProtocolSettings { cutoff, ..self }
    }

    pub fn with_phi(self, phi: f64) -> Self {
        ProtocolSettings { phi, ..self }
    }
}

/// A protocol with its input state built.
#[derive(Debug, Clone)]
pub struct Protocol {
    settings: ProtocolSettings,
    initial: CompositeState,
}

impl Protocol {
    pub fn new(settings: ProtocolSettings) -> Result<Self> {
        if !(settings.n_mean > 0.0) {
            return Err(Error::InvalidArgument(format!("mean photon number must be positive, got {}", settings.n_mean)));
        }
        PhaseSetting::new(settings.phi)?;
        let initial = initial_state(settings.kind, settings.n_mean, settings.cutoff)?;
        Ok(Protocol { settings, initial })
    }

    pub fn settings(&self) -> &ProtocolSettings {
        &self.settings
    }

    pub fn kind(&self) -> Nonlinearity {
        self.settings.kind
    }

    pub fn initial(&self) -> &CompositeState {
        &self.initial
    }

    pub fn bounds(&self) -> Bounds {
        bounds(self.settings.n_mean).expect("positive photon number")
    }

    pub fn continuous_probe(&self, time: f64) -> Result<CompositeState> {
        evolve_continuous(self.settings.kind, time, &self.initial)
    }

    pub fn programmable_probe(&self, params: &AnsatzParams) -> Result<CompositeState> {
        self.check_kind(params)?;
        build_circuit(params, self.initial.layout(), CircuitRole::Prepare)?.run(&self.initial)
    }

    pub fn qfi(&self, probe: &CompositeState) -> Result<FisherResult> {
        qfi_fidelity(probe, self.settings.phi, self.settings.delta)
    }

    /// Encoded state and its phase derivative at the protocol's phase point.
    pub fn encoded(&self, probe: &CompositeState) -> Result<(CompositeState, CompositeState)> {
        encode_with_derivative(probe, self.settings.phi)
    }

    /// CFI of `probe`, optionally after a pre-measurement circuit.
    pub fn cfi(&self, probe: &CompositeState, premeasure: Option<&AnsatzParams>, model: &MeasurementModel) -> Result<FisherResult> {
        let (mut state, mut derivative) = self.encoded(probe)?;
        if let Some(params) = premeasure {
            self.check_kind(params)?;
            let circuit = build_circuit(params, state.layout(), CircuitRole::Premeasure)?;
            circuit.apply_mut(&mut state)?;
            circuit.apply_mut(&mut derivative)?;
        }
        cfi(&state, &derivative, model, self.settings.phi)
    }

    /// Default measurement of this register: emitters are recorded for JC.
    pub fn include_emitters(&self) -> bool {
        self.settings.kind == Nonlinearity::Jc
    }

    fn check_kind(&self, params: &AnsatzParams) -> Result<()> {
        if params.kind() != self.settings.kind {
            return Err(Error::LayoutMismatch(format!(
                "{} parameters on a {} register",
                params.kind(),
                self.settings.kind
            )));
        }
        Ok(())
    }
}
