//! Statevector emulation of a quantum fixed-point solver for periodic
//! antiplane-shear cells, with a classical FFT reference solver and a
//! gate-count transpiler.
//!
//! Qubit order is little-endian everywhere: bit `i` of a register value lives
//! on the register's `i`-th qubit, and bit `q` of a global basis index is the
//! state of qubit `q`.

pub mod circuit;
pub mod ensemble;
pub mod error;
pub mod gate;
pub mod greens;
pub mod layout;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod rve;
pub mod scaling;
pub mod scalar;
pub mod statevector;
pub mod transpile;
pub mod unitary;

pub use circuit::{CircuitBlock, Op};
pub use error::{Error, Result};
pub use gate::{Control, Gate, GateKind};
pub use layout::{QubitLayout, Register};
pub use scalar::Real;
pub use statevector::Projector;

/// Double precision statevector.
pub type StateVector = statevector::StateVector<f64>;
/// Single precision statevector.
pub type StateVector32 = statevector::StateVector<f32>;
