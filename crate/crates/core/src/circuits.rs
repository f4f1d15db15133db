//! Layered programmable circuits for probe preparation and pre-measurement.
//!
//! A JC layer applies, in order, tunneling `J`, a common emitter detuning
//! `Delta` on both emitters, and the JC coupling `g` on both emitter-mode
//! pairs. A Kerr layer applies tunneling `J` then the Kerr phase `K` on both
//! modes. Flat parameter vectors are laid out layer by layer as
//! `(J1, Delta1, g1, J2, ...)` or `(J1, K1, J2, ...)`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{detune_gate, nonlinear_gates, register_cutoff, tunnel_gate_on, LocalGate};
use crate::error::{Error, Result};
use crate::hilbert::{CompositeState, Nonlinearity, SubsystemLayout};

/// Parameters per layer.
pub fn layer_width(kind: Nonlinearity) -> usize {
    match kind {
        Nonlinearity::Jc => 3,
        Nonlinearity::Kerr => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layer {
    Jc { tunnel: f64, detune: f64, coupling: f64 },
    Kerr { tunnel: f64, kerr: f64 },
}

impl Layer {
    /// The nonlinear interaction time of this layer.
    pub fn interaction(&self) -> f64 {
        match *self {
            Layer::Jc { coupling, .. } => coupling,
            Layer::Kerr { kerr, .. } => kerr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    kind: Nonlinearity,
    values: Vec<f64>,
}

impl AnsatzParams {
    pub fn from_flat(kind: Nonlinearity, values: Vec<f64>) -> Result<Self> {
        let w = layer_width(kind);
        if values.is_empty() || !values.len().is_multiple_of(w) {
            return Err(Error::InvalidArgument(format!(
                "{kind} ansatz needs a positive multiple of {w} parameters, got {}",
                values.len()
            )));
        }
        Ok(AnsatzParams { kind, values })
    }

    pub fn zeros(kind: Nonlinearity, layers: usize) -> Result<Self> {
        Self::from_flat(kind, vec![0.0; layers * layer_width(kind)])
    }

    pub fn from_layers(kind: Nonlinearity, layers: &[Layer]) -> Result<Self> {
        let mut values = Vec::new();
        for layer in layers {
            match (kind, *layer) {
                (Nonlinearity::Jc, Layer::Jc { tunnel, detune, coupling }) => values.extend([tunnel, detune, coupling]),
                (Nonlinearity::Kerr, Layer::Kerr { tunnel, kerr }) => values.extend([tunnel, kerr]),
                _ => return Err(Error::InvalidArgument(format!("layer kind does not match {kind}"))),
            }
        }
        Self::from_flat(kind, values)
    }

    pub fn kind(&self) -> Nonlinearity {
        self.kind
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    pub fn depth(&self) -> usize {
        self.values.len() / layer_width(self.kind)
    }

    pub fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        let kind = self.kind;
        self.values.chunks(layer_width(kind)).map(move |c| match kind {
            Nonlinearity::Jc => Layer::Jc { tunnel: c[0], detune: c[1], coupling: c[2] },
            Nonlinearity::Kerr => Layer::Kerr { tunnel: c[0], kerr: c[1] },
        })
    }

    /// Append a layer with all parameters zero (the identity).
    pub fn push_zero_layer(&mut self) {
        self.values.extend(std::iter::repeat_n(0.0, layer_width(self.kind)));
    }

    pub fn with_zero_layer(mut self) -> Self {
        self.push_zero_layer();
        self
    }
}

/// Total nonlinear interaction time of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionBudget {
    pub total: f64,
}

pub fn interaction_budget(params: &AnsatzParams) -> InteractionBudget {
    InteractionBudget { total: params.layers().map(|l| l.interaction().abs()).sum() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitRole {
    Prepare,
    Premeasure,
}

/// Gates in application order.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub role: CircuitRole,
    pub gates: Vec<LocalGate>,
}

impl Circuit {
    pub fn apply_mut(&self, state: &mut CompositeState) -> Result<()> {
        for g in &self.gates {
            g.apply_mut(state)?;
        }
        Ok(())
    }

    pub fn run(&self, state: &CompositeState) -> Result<CompositeState> {
        let mut out = state.clone();
        self.apply_mut(&mut out)?;
        Ok(out)
    }

    /// The inverse circuit: adjoint gates in reverse order.
    pub fn adjoint(&self) -> Circuit {
        Circuit { role: self.role, gates: self.gates.iter().rev().map(|g| g.adjoint()).collect() }
    }
}

pub fn build_circuit(params: &AnsatzParams, layout: &SubsystemLayout, role: CircuitRole) -> Result<Circuit> {
    let kind = params.kind();
    let cutoff = register_cutoff(kind, layout)?;
    let modes = kind.mode_factors();
    let mut gates = Vec::with_capacity(params.depth() * 4);
    for layer in params.layers() {
        match layer {
            Layer::Jc { tunnel, detune, coupling } => {
                gates.push(tunnel_gate_on(tunnel, cutoff, modes)?);
                gates.push(detune_gate(detune, 0)?);
                gates.push(detune_gate(detune, 1)?);
                gates.extend(nonlinear_gates(kind, coupling, cutoff)?);
            }
            Layer::Kerr { tunnel, kerr } => {
                gates.push(tunnel_gate_on(tunnel, cutoff, modes)?);
                gates.extend(nonlinear_gates(kind, kerr, cutoff)?);
            }
        }
    }
    Ok(Circuit { role, gates })
}

pub fn run_circuit(params: &AnsatzParams, state: &CompositeState) -> Result<CompositeState> {
    build_circuit(params, state.layout(), CircuitRole::Prepare)?.run(state)
}
