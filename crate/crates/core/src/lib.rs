//! Simulation and optimization of two-mode photonic phase-estimation protocols.
//!
//! Probe states are prepared from coherent inputs by Jaynes-Cummings or Kerr
//! nonlinearities, either by continuous evolution or by layered programmable
//! circuits, pushed through a Mach-Zehnder phase encoding, and scored by their
//! quantum and classical Fisher information.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuits;
pub mod dynamics;
pub mod encoding;
pub mod error;
pub mod hilbert;
pub mod metrology;
pub mod optimize;
pub mod protocol;
pub mod wigner;

pub use error::{Error, Result};
pub use hilbert::{CompositeState, Nonlinearity, SubsystemLayout, C64};
pub use protocol::{Protocol, ProtocolSettings};
