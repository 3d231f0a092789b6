//! Gate vocabulary of the emulator.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// 2x2 complex matrix, row major.
pub type Mat2 = [[Complex64; 2]; 2];

/// A control condition: the gate fires only when `qubit` equals `state`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Control {
    pub qubit: usize,
    pub state: bool,
}

impl Control {
    /// Closed (filled) control, active on |1>.
    pub fn on(qubit: usize) -> Self {
        Self { qubit, state: true }
    }

    /// Open control, active on |0>.
    pub fn off(qubit: usize) -> Self {
        Self { qubit, state: false }
    }

    /// Controls that fire when the qubits hold the little-endian `value`.
    pub fn pattern(qubits: &[usize], value: usize) -> Vec<Control> {
        qubits
            .iter()
            .enumerate()
            .map(|(i, &q)| Control { qubit: q, state: (value >> i) & 1 == 1 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    H,
    X,
    Z,
    Ry(f64),
    U3 { theta: f64, phi: f64, lambda: f64 },
    /// diag(1, e^{iθ}); with one control this is CPHASE.
    Phase(f64),
    /// Exchanges the two target qubits.
    Swap,
    /// Arbitrary single-qubit unitary.
    Unitary(Mat2),
    /// RY on the target whose angle is `angles[v]`, where `v` is the
    /// little-endian value of the selector qubits.
    MultiplexedRy { selectors: Vec<usize>, angles: Vec<f64> },
    /// Unitary DFT on the target register (targets are little-endian bits).
    Qft { inverse: bool },
}

/// A (possibly controlled) gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ry_matrix(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

/// U3(θ, φ, λ) in the usual convention, determinant e^{i(φ+λ)}.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [
        [c(co, 0.0), -Complex64::from_polar(s, lambda)],
        [Complex64::from_polar(s, phi), Complex64::from_polar(co, phi + lambda)],
    ]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn adjoint(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

pub fn is_unitary(m: &Mat2, tol: f64) -> bool {
    let p = mat_mul(&adjoint(m), m);
    (p[0][0] - 1.0).norm() <= tol
        && (p[1][1] - 1.0).norm() <= tol
        && p[0][1].norm() <= tol
        && p[1][0].norm() <= tol
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>, controls: Vec<Control>) -> Self {
        Self { kind, targets, controls }
    }

    fn single(kind: GateKind, q: usize) -> Self {
        Self::new(kind, vec![q], vec![])
    }

    pub fn h(q: usize) -> Self {
        Self::single(GateKind::H, q)
    }
    pub fn x(q: usize) -> Self {
        Self::single(GateKind::X, q)
    }
    pub fn z(q: usize) -> Self {
        Self::single(GateKind::Z, q)
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::single(GateKind::Ry(theta), q)
    }
    pub fn u3(q: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Self::single(GateKind::U3 { theta, phi, lambda }, q)
    }
    pub fn phase(q: usize, theta: f64) -> Self {
        Self::single(GateKind::Phase(theta), q)
    }
    pub fn unitary(q: usize, m: Mat2) -> Self {
        Self::single(GateKind::Unitary(m), q)
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(GateKind::X, vec![target], vec![Control::on(control)])
    }
    pub fn cphase(control: usize, target: usize, theta: f64) -> Self {
        Self::new(GateKind::Phase(theta), vec![target], vec![Control::on(control)])
    }
    pub fn toffoli(c0: usize, c1: usize, target: usize) -> Self {
        Self::new(GateKind::X, vec![target], vec![Control::on(c0), Control::on(c1)])
    }
    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        Self::new(GateKind::X, vec![target], controls)
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::new(GateKind::Swap, vec![a, b], vec![])
    }
    pub fn multiplexed_ry(selectors: Vec<usize>, target: usize, angles: Vec<f64>) -> Self {
        Self::single(GateKind::MultiplexedRy { selectors, angles }, target)
    }
    pub fn qft(register: Vec<usize>, inverse: bool) -> Self {
        Self::new(GateKind::Qft { inverse }, register, vec![])
    }

    /// Adds further control conditions.
    pub fn with_controls(mut self, extra: &[Control]) -> Self {
        self.controls.extend_from_slice(extra);
        self
    }

    /// Short human readable name used in error messages and breakdowns.
    pub fn label(&self) -> String {
        let base = match &self.kind {
            GateKind::H => "H".to_string(),
            GateKind::X => match self.controls.len() {
                0 => "X".into(),
                1 => "CNOT".into(),
                2 => "Toffoli".into(),
                k => format!("MCX{k}"),
            },
            GateKind::Z => "Z".into(),
            GateKind::Ry(_) => "RY".into(),
            GateKind::U3 { .. } => "U3".into(),
            GateKind::Phase(_) => "PHASE".into(),
            GateKind::Swap => "SWAP".into(),
            GateKind::Unitary(_) => "U".into(),
            GateKind::MultiplexedRy { selectors, .. } => format!("MUXRY{}", selectors.len()),
            GateKind::Qft { inverse } => if *inverse { "QFT^-1".into() } else { "QFT".into() },
        };
        if self.controls.is_empty() || matches!(self.kind, GateKind::X) {
            base
        } else {
            format!("C{}-{}", self.controls.len(), base)
        }
    }

    /// Every qubit touched by the gate.
    pub fn qubits(&self) -> Vec<usize> {
        let mut q = self.targets.clone();
        q.extend(self.controls.iter().map(|c| c.qubit));
        if let GateKind::MultiplexedRy { selectors, .. } = &self.kind {
            q.extend_from_slice(selectors);
        }
        q
    }

    /// Matrix of single-target kinds; `None` for SWAP, multiplexed and QFT gates.
    pub fn matrix(&self) -> Option<Mat2> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Some(match &self.kind {
            GateKind::H => [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
            GateKind::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
            GateKind::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
            GateKind::Ry(t) => ry_matrix(*t),
            GateKind::U3 { theta, phi, lambda } => u3_matrix(*theta, *phi, *lambda),
            GateKind::Phase(t) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::from_polar(1.0, *t)]],
            GateKind::Unitary(m) => *m,
            GateKind::Swap | GateKind::MultiplexedRy { .. } | GateKind::Qft { .. } => return None,
        })
    }

    /// Checks index bounds, disjointness and unitarity.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange { index: q, num_qubits });
            }
        }
        let mut sorted = qs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != qs.len() {
            return Err(Error::InvalidGate(format!("{}: qubits overlap", self.label())));
        }
        let expected_targets = match &self.kind {
            GateKind::Swap => Some(2),
            GateKind::Qft { .. } => None,
            _ => Some(1),
        };
        if let Some(n) = expected_targets {
            if self.targets.len() != n {
                return Err(Error::InvalidGate(format!("{}: expected {n} targets", self.label())));
            }
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidGate("gate without targets".into()));
        }
        if let GateKind::MultiplexedRy { selectors, angles } = &self.kind {
            if angles.len() != 1usize << selectors.len() {
                return Err(Error::InvalidGate(format!(
                    "multiplexed RY needs {} angles, got {}",
                    1usize << selectors.len(),
                    angles.len()
                )));
            }
        }
        if let Some(m) = self.matrix() {
            if !is_unitary(&m, 1e-12) {
                return Err(Error::InvalidGate(format!("{}: matrix is not unitary", self.label())));
            }
        }
        Ok(())
    }

    /// The adjoint gate.
    pub fn inverse(&self) -> Self {
        let kind = match &self.kind {
            GateKind::H | GateKind::X | GateKind::Z | GateKind::Swap => self.kind.clone(),
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Phase(t) => GateKind::Phase(-t),
            GateKind::U3 { theta, phi, lambda } => GateKind::U3 { theta: -theta, phi: -lambda, lambda: -phi },
            GateKind::Unitary(m) => GateKind::Unitary(adjoint(m)),
            GateKind::MultiplexedRy { selectors, angles } => GateKind::MultiplexedRy {
                selectors: selectors.clone(),
                angles: angles.iter().map(|a| -a).collect(),
            },
            GateKind::Qft { inverse } => GateKind::Qft { inverse: !inverse },
        };
        Self { kind, targets: self.targets.clone(), controls: self.controls.clone() }
    }
}
