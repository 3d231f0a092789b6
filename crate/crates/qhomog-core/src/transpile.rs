//! Lowering to the universal {CNOT, U3} gate set and gate counting.
//!
//! Decomposition choices:
//! * SWAP is three CNOTs, CPHASE is 2 CNOT + 3 U3, controlled RY is
//!   2 CNOT + 2 U3 and any other singly controlled unitary uses the usual
//!   A·X·B·X·C construction (2 CNOT + 4 U3).
//! * Toffoli uses the standard 6-CNOT circuit.
//! * A k-controlled X with k >= 3 splits its controls in two halves around one
//!   borrowed qubit, and each half is a ladder of Toffolis over borrowed
//!   qubits (Barenco et al. lemmas 7.2 and 7.3). The cost is linear in k.
//! * A multi-controlled unitary other than X first computes the AND of its
//!   controls into the clean work qubit. Without a work qubit it falls back
//!   to the controlled square-root recursion.
//! * A multiplexed RY becomes a CNOT parity network visiting its nonzero
//!   Walsh terms in Gray-code order.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::circuit::CircuitBlock;
use crate::error::{Error, Result};
use crate::gate::{adjoint, mat_mul, u3_matrix, Control, Gate, GateKind, Mat2};

/// A gate of the target set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoweredGate {
    Cnot { control: usize, target: usize },
    U3 { qubit: usize, theta: f64, phi: f64, lambda: f64 },
}

/// Lowered gate list plus the global phase needed for exact equality.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoweredCircuit {
    pub gates: Vec<LoweredGate>,
    pub global_phase: f64,
}

impl LoweredCircuit {
    /// Converts back to emulator gates (CNOT and U3), global phase dropped.
    pub fn to_block(&self) -> CircuitBlock {
        let mut b = CircuitBlock::new("lowered");
        for g in &self.gates {
            b.push(match *g {
                LoweredGate::Cnot { control, target } => Gate::cnot(control, target),
                LoweredGate::U3 { qubit, theta, phi, lambda } => Gate::u3(qubit, theta, phi, lambda),
            });
        }
        b
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, LoweredGate::Cnot { .. })).count()
    }

    pub fn u3_count(&self) -> usize {
        self.gates.len() - self.cnot_count()
    }

    /// Optional peephole pass fusing runs of U3 gates on the same qubit.
    /// Off in every count reported by the crate.
    pub fn merge_single_qubit_runs(&self) -> Self {
        let mut out: Vec<LoweredGate> = Vec::with_capacity(self.gates.len());
        let mut phase = self.global_phase;
        // index into `out` of the trailing U3 on each qubit, if it is still mergeable
        let mut last: BTreeMap<usize, usize> = BTreeMap::new();
        for g in &self.gates {
            match *g {
                LoweredGate::Cnot { control, target } => {
                    last.remove(&control);
                    last.remove(&target);
                    out.push(*g);
                }
                LoweredGate::U3 { qubit, theta, phi, lambda } => {
                    if let Some(&idx) = last.get(&qubit) {
                        if let LoweredGate::U3 { theta: t0, phi: p0, lambda: l0, .. } = out[idx] {
                            let m = mat_mul(&u3_matrix(theta, phi, lambda), &u3_matrix(t0, p0, l0));
                            let (gp, t, p, l) = zyz(&m);
                            phase += gp;
                            out[idx] = LoweredGate::U3 { qubit, theta: t, phi: p, lambda: l };
                            continue;
                        }
                    }
                    last.insert(qubit, out.len());
                    out.push(*g);
                }
            }
        }
        Self { gates: out, global_phase: phase }
    }
}

/// Options of the lowering pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LowerOptions {
    /// Qubit guaranteed to be |0> before and after every gate.
    pub work_qubit: Option<usize>,
    /// Total number of qubits (enables borrowing idle qubits); 0 means the block width.
    pub num_qubits: usize,
}

/// Gate counts of a lowered block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GateCountReport {
    pub cnot_count: usize,
    pub u3_count: usize,
    pub total: usize,
    pub depth: usize,
    /// Counts per sub-block path ("a/b/c"), root excluded; gates directly in
    /// the root block are filed under "".
    pub per_subblock: BTreeMap<String, (usize, usize)>,
}

impl GateCountReport {
    /// Sums the breakdown entries whose path starts with `prefix`.
    pub fn subblock_total(&self, prefix: &str) -> (usize, usize) {
        self.per_subblock
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .fold((0, 0), |acc, (_, v)| (acc.0 + v.0, acc.1 + v.1))
    }
}

/// Where lowered gates go.
trait Sink {
    fn cnot(&mut self, control: usize, target: usize);
    fn u3(&mut self, qubit: usize, theta: f64, phi: f64, lambda: f64);
    fn phase(&mut self, _phi: f64) {}
}

impl Sink for LoweredCircuit {
    fn cnot(&mut self, control: usize, target: usize) {
        self.gates.push(LoweredGate::Cnot { control, target });
    }
    fn u3(&mut self, qubit: usize, theta: f64, phi: f64, lambda: f64) {
        self.gates.push(LoweredGate::U3 { qubit, theta, phi, lambda });
    }
    fn phase(&mut self, phi: f64) {
        self.global_phase += phi;
    }
}

#[derive(Default)]
struct Counter {
    cnot: usize,
    u3: usize,
    layers: Vec<usize>,
    depth: usize,
}

impl Counter {
    fn bump(&mut self, qs: &[usize]) {
        let need = qs.iter().copied().max().unwrap_or(0) + 1;
        if self.layers.len() < need {
            self.layers.resize(need, 0);
        }
        let l = qs.iter().map(|&q| self.layers[q]).max().unwrap_or(0) + 1;
        for &q in qs {
            self.layers[q] = l;
        }
        self.depth = self.depth.max(l);
    }
}

impl Sink for Counter {
    fn cnot(&mut self, control: usize, target: usize) {
        self.cnot += 1;
        self.bump(&[control, target]);
    }
    fn u3(&mut self, qubit: usize, _: f64, _: f64, _: f64) {
        self.u3 += 1;
        self.bump(&[qubit]);
    }
}

/// Decomposes a 2x2 unitary as e^{i gamma} U3(theta, phi, lambda); returns (gamma, theta, phi, lambda).
pub fn zyz(m: &Mat2) -> (f64, f64, f64, f64) {
    let a = m[0][0].norm();
    let b = m[1][0].norm();
    let theta = 2.0 * b.atan2(a);
    const EPS: f64 = 1e-14;
    if b < EPS {
        let gamma = m[0][0].arg();
        (gamma, theta, 0.0, m[1][1].arg() - gamma)
    } else if a < EPS {
        let gamma = (-m[0][1]).arg();
        (gamma, theta, m[1][0].arg() - gamma, 0.0)
    } else {
        let gamma = m[0][0].arg();
        (gamma, theta, m[1][0].arg() - gamma, (-m[0][1]).arg() - gamma)
    }
}

/// A square root of a 2x2 unitary which is itself unitary.
pub fn sqrt_unitary(m: &Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    let mut s = det.sqrt();
    let mut t2 = tr + s * 2.0;
    if t2.norm() < 1e-8 {
        s = -s;
        t2 = tr + s * 2.0;
    }
    let t = t2.sqrt();
    [[(m[0][0] + s) / t, m[0][1] / t], [m[1][0] / t, (m[1][1] + s) / t]]
}

const X_MAT: Mat2 = [
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
];

fn is_x(m: &Mat2) -> bool {
    (m[0][0]).norm() < 1e-15 && (m[1][1]).norm() < 1e-15 && (m[0][1] - 1.0).norm() < 1e-15 && (m[1][0] - 1.0).norm() < 1e-15
}

fn is_diagonal(m: &Mat2) -> bool {
    m[0][1].norm() < 1e-15 && m[1][0].norm() < 1e-15
}

/// Expands a QFT on `qubits` (little-endian) into H, CPHASE and SWAP gates.
/// With `swaps = false` the output register is bit-reversed.
pub fn qft_gates(qubits: &[usize], inverse: bool, swaps: bool) -> Vec<Gate> {
    let n = qubits.len();
    let mut g = Vec::new();
    for j in (0..n).rev() {
        g.push(Gate::h(qubits[j]));
        for m in (0..j).rev() {
            g.push(Gate::cphase(qubits[m], qubits[j], PI / (1u64 << (j - m)) as f64));
        }
    }
    if swaps {
        for i in 0..n / 2 {
            g.push(Gate::swap(qubits[i], qubits[n - 1 - i]));
        }
    }
    if inverse {
        g.reverse();
        g = g.into_iter().map(|x| x.inverse()).collect();
    }
    g
}

/// Walsh coefficients phi_T with theta(s) = sum_T phi_T (-1)^{|s & T|}.
pub fn walsh_coefficients(angles: &[f64]) -> Vec<f64> {
    let mut a = angles.to_vec();
    let n = a.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (x, y) = (a[j], a[j + h]);
                a[j] = x + y;
                a[j + h] = x - y;
            }
        }
        h *= 2;
    }
    let inv = 1.0 / n as f64;
    a.iter_mut().for_each(|v| *v *= inv);
    a
}

/// Relative threshold below which Walsh terms are treated as exact zeros.
pub const WALSH_PRUNE: f64 = 1e-12;

/// Nonzero Walsh terms (mask, angle) ordered along the reflected Gray code.
pub fn walsh_terms(angles: &[f64]) -> Vec<(usize, f64)> {
    let phi = walsh_coefficients(angles);
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = WALSH_PRUNE * scale;
    let mut terms: Vec<(usize, usize, f64)> = phi
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(mask, v)| (gray_rank(mask), mask, *v))
        .collect();
    terms.sort_by_key(|t| t.0);
    terms.into_iter().map(|(_, m, v)| (m, v)).collect()
}

/// Position of `g` in the reflected binary Gray sequence.
fn gray_rank(mut g: usize) -> usize {
    let mut r = 0;
    while g != 0 {
        r ^= g;
        g >>= 1;
    }
    r
}

struct Lowerer<'a, S: Sink> {
    sink: &'a mut S,
    work: Option<usize>,
    num_qubits: usize,
}

impl<'a, S: Sink> Lowerer<'a, S> {
    fn x(&mut self, q: usize) {
        self.sink.u3(q, PI, 0.0, PI);
    }

    fn h(&mut self, q: usize) {
        self.sink.u3(q, FRAC_PI_2, 0.0, PI);
    }

    fn mat(&mut self, q: usize, m: &Mat2) {
        let (g, t, p, l) = zyz(m);
        self.sink.phase(g);
        self.sink.u3(q, t, p, l);
    }

    fn rz_u3(&mut self, q: usize, angle: f64) {
        // RZ(a) = e^{-ia/2} U3(0, 0, a)
        self.sink.phase(-angle / 2.0);
        self.sink.u3(q, 0.0, 0.0, angle);
    }

    fn ry_u3(&mut self, q: usize, angle: f64) {
        self.sink.u3(q, angle, 0.0, 0.0);
    }

    fn p_u3(&mut self, q: usize, angle: f64) {
        self.sink.u3(q, 0.0, 0.0, angle);
    }

    fn toffoli(&mut self, a: usize, b: usize, t: usize) {
        let s = &mut *self.sink;
        s.u3(t, FRAC_PI_2, 0.0, PI);
        s.cnot(b, t);
        s.u3(t, 0.0, 0.0, -FRAC_PI_4);
        s.cnot(a, t);
        s.u3(t, 0.0, 0.0, FRAC_PI_4);
        s.cnot(b, t);
        s.u3(t, 0.0, 0.0, -FRAC_PI_4);
        s.cnot(a, t);
        s.u3(b, 0.0, 0.0, FRAC_PI_4);
        s.u3(t, 0.0, 0.0, FRAC_PI_4);
        s.u3(t, FRAC_PI_2, 0.0, PI);
        s.cnot(a, b);
        s.u3(a, 0.0, 0.0, FRAC_PI_4);
        s.u3(b, 0.0, 0.0, -FRAC_PI_4);
        s.cnot(a, b);
    }

    /// Qubits usable as dirty borrowed ancillas for an operation on `busy`.
    fn idle(&self, busy: &[usize]) -> Vec<usize> {
        let mut v: Vec<usize> = Vec::new();
        if let Some(w) = self.work {
            if !busy.contains(&w) {
                v.push(w);
            }
        }
        for q in 0..self.num_qubits {
            if !busy.contains(&q) && Some(q) != self.work {
                v.push(q);
            }
        }
        v
    }

    /// X on `t` controlled (on |1>) by all of `cs`, using dirty `anc` (len >= cs.len()-2).
    fn mcx_ladder(&mut self, cs: &[usize], anc: &[usize], t: usize) {
        let m = cs.len();
        match m {
            0 => self.x(t),
            1 => self.sink.cnot(cs[0], t),
            2 => self.toffoli(cs[0], cs[1], t),
            _ => {
                debug_assert!(anc.len() >= m - 2);
                // c_i and a_i below are 1-indexed as in the lemma.
                let c = |i: usize| cs[i - 1];
                let a = |i: usize| anc[i - 1];
                // First pass toggles t, second pass restores the dirty ancillas.
                for _ in 0..2 {
                    self.toffoli(c(m), a(m - 2), t);
                    for i in (3..m).rev() {
                        self.toffoli(c(i), a(i - 2), a(i - 1));
                    }
                    self.toffoli(c(1), c(2), a(1));
                    for i in 3..m {
                        self.toffoli(c(i), a(i - 2), a(i - 1));
                    }
                }
            }
        }
    }

    /// X on `t` controlled on |1> by `cs`, borrowing `b` when needed.
    fn mcx_split(&mut self, cs: &[usize], b: usize, t: usize) {
        let m = cs.len();
        if m <= 2 {
            return self.mcx_ladder(cs, &[], t);
        }
        let m1 = m.div_ceil(2);
        let (first, second) = cs.split_at(m1);
        let mut second_b: Vec<usize> = second.to_vec();
        second_b.push(b);
        let mut anc1: Vec<usize> = second.to_vec();
        anc1.push(t);
        let anc2: Vec<usize> = first.to_vec();
        for _ in 0..2 {
            self.mcx_ladder(first, &anc1, b);
            self.mcx_ladder(&second_b, &anc2, t);
        }
    }

    /// X on `t` controlled on |1> by `cs`.
    fn mcx_closed(&mut self, cs: &[usize], t: usize) {
        if cs.len() <= 2 {
            return self.mcx_ladder(cs, &[], t);
        }
        let mut busy = cs.to_vec();
        busy.push(t);
        match self.idle(&busy).first() {
            Some(&b) => self.mcx_split(cs, b, t),
            None => self.mcu_recursive(cs, t, &X_MAT),
        }
    }

    /// Singly controlled unitary.
    fn cu(&mut self, c: usize, t: usize, m: &Mat2) {
        if is_x(m) {
            return self.sink.cnot(c, t);
        }
        if is_diagonal(m) {
            // diag(e^{ia}, e^{ib}) = phase on control times CPHASE(b - a)
            let a = m[0][0].arg();
            let b = m[1][1].arg();
            let th = b - a;
            self.p_u3(c, a + th / 2.0);
            self.sink.cnot(c, t);
            self.p_u3(t, -th / 2.0);
            self.sink.cnot(c, t);
            self.p_u3(t, th / 2.0);
            return;
        }
        let (g, theta, phi, lambda) = zyz(m);
        let alpha = g + (phi + lambda) / 2.0;
        let (beta, gam, delta) = (phi, theta, lambda);
        let real_ry = m[0][0].im.abs() < 1e-15
            && m[0][1].im.abs() < 1e-15
            && m[1][0].im.abs() < 1e-15
            && m[1][1].im.abs() < 1e-15
            && (m[0][0] - m[1][1]).norm() < 1e-15
            && (m[0][1] + m[1][0]).norm() < 1e-15;
        if real_ry {
            let ang = 2.0 * m[1][0].re.atan2(m[0][0].re);
            self.ry_u3(t, ang / 2.0);
            self.sink.cnot(c, t);
            self.ry_u3(t, -ang / 2.0);
            self.sink.cnot(c, t);
            return;
        }
        // C = RZ((delta - beta)/2), B = RY(-gam/2) RZ(-(delta + beta)/2), A = RZ(beta) RY(gam/2)
        self.rz_u3(t, (delta - beta) / 2.0);
        self.sink.cnot(c, t);
        let b = mat_mul(&rot_y(-gam / 2.0), &rot_z(-(delta + beta) / 2.0));
        self.mat(t, &b);
        self.sink.cnot(c, t);
        let a = mat_mul(&rot_z(beta), &rot_y(gam / 2.0));
        self.mat(t, &a);
        self.p_u3(c, alpha);
    }

    /// Multi-controlled unitary without a clean ancilla.
    fn mcu_recursive(&mut self, cs: &[usize], t: usize, m: &Mat2) {
        match cs.len() {
            0 => self.mat(t, m),
            1 => self.cu(cs[0], t, m),
            k => {
                let v = sqrt_unitary(m);
                let vd = adjoint(&v);
                let last = cs[k - 1];
                let rest = &cs[..k - 1];
                self.cu(last, t, &v);
                self.mcx_split_or_ladder(rest, t, last);
                self.cu(last, t, &vd);
                self.mcx_split_or_ladder(rest, t, last);
                self.mcu_recursive(rest, t, &v);
            }
        }
    }

    fn mcx_split_or_ladder(&mut self, cs: &[usize], borrowed: usize, t: usize) {
        if cs.len() <= 2 {
            self.mcx_ladder(cs, &[], t)
        } else {
            self.mcx_split(cs, borrowed, t)
        }
    }

    /// Multi-controlled unitary, controls on |1>.
    fn mcu_closed(&mut self, cs: &[usize], t: usize, m: &Mat2) {
        if is_x(m) {
            return self.mcx_closed(cs, t);
        }
        match cs.len() {
            0 => self.mat(t, m),
            1 => self.cu(cs[0], t, m),
            _ => {
                let w = self.work.filter(|w| *w != t && !cs.contains(w));
                match w {
                    Some(w) => {
                        self.and_into(cs, w, t);
                        self.cu(w, t, m);
                        self.and_into(cs, w, t);
                    }
                    None => self.mcu_recursive(cs, t, m),
                }
            }
        }
    }

    /// Toggles `w` by the AND of `cs`, borrowing `b` if needed.
    fn and_into(&mut self, cs: &[usize], w: usize, b: usize) {
        if cs.len() <= 2 {
            self.mcx_ladder(cs, &[], w)
        } else {
            self.mcx_split(cs, b, w)
        }
    }

    fn with_open_controls(&mut self, controls: &[Control], f: impl FnOnce(&mut Self, &[usize])) {
        let open: Vec<usize> = controls.iter().filter(|c| !c.state).map(|c| c.qubit).collect();
        for &q in &open {
            self.x(q);
        }
        let cs: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
        f(self, &cs);
        for &q in &open {
            self.x(q);
        }
    }

    fn gate(&mut self, g: &Gate) -> Result<()> {
        match &g.kind {
            GateKind::Swap => {
                let (a, b) = (g.targets[0], g.targets[1]);
                if g.controls.is_empty() {
                    self.sink.cnot(a, b);
                    self.sink.cnot(b, a);
                    self.sink.cnot(a, b);
                } else {
                    self.sink.cnot(b, a);
                    let mut cs = g.controls.clone();
                    cs.push(Control::on(a));
                    self.gate(&Gate::mcx(cs, b))?;
                    self.sink.cnot(b, a);
                }
            }
            GateKind::Qft { inverse } => {
                for sub in qft_gates(&g.targets, *inverse, true) {
                    self.gate(&sub.with_controls(&g.controls))?;
                }
            }
            GateKind::MultiplexedRy { selectors, angles } => {
                let t = g.targets[0];
                let terms = walsh_terms(angles);
                let mut parity = 0usize;
                for (mask, phi) in terms {
                    let diff = parity ^ mask;
                    for (b, &q) in selectors.iter().enumerate() {
                        if diff >> b & 1 == 1 {
                            self.sink.cnot(q, t);
                        }
                    }
                    parity = mask;
                    self.gate(&Gate::ry(t, phi).with_controls(&g.controls))?;
                }
                for (b, &q) in selectors.iter().enumerate() {
                    if parity >> b & 1 == 1 {
                        self.sink.cnot(q, t);
                    }
                }
            }
            _ => {
                let m = g.matrix().ok_or_else(|| Error::Lowering(g.label()))?;
                let t = g.targets[0];
                if g.controls.is_empty() {
                    match g.kind {
                        GateKind::H => self.h(t),
                        GateKind::X => self.x(t),
                        GateKind::Ry(a) => self.ry_u3(t, a),
                        GateKind::Phase(a) => self.p_u3(t, a),
                        GateKind::U3 { theta, phi, lambda } => self.sink.u3(t, theta, phi, lambda),
                        _ => self.mat(t, &m),
                    }
                } else if matches!(g.kind, GateKind::Z) && g.controls.len() >= 2 {
                    self.h(t);
                    self.gate(&Gate::mcx(g.controls.clone(), t))?;
                    self.h(t);
                } else {
                    self.with_open_controls(&g.controls, |me, cs| me.mcu_closed(cs, t, &m));
                }
            }
        }
        Ok(())
    }
}

fn rot_y(a: f64) -> Mat2 {
    crate::gate::ry_matrix(a)
}

fn rot_z(a: f64) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::from_polar(1.0, -a / 2.0), z], [z, Complex64::from_polar(1.0, a / 2.0)]]
}

fn run<S: Sink>(block: &CircuitBlock, opts: LowerOptions, sink: &mut S, mut on_gate: impl FnMut(&[&str], &mut S)) -> Result<()> {
    let num_qubits = if opts.num_qubits == 0 { block.width().max(opts.work_qubit.map_or(0, |w| w + 1)) } else { opts.num_qubits };
    let mut res = Ok(());
    block.visit(&mut |path, g| {
        if res.is_err() {
            return;
        }
        let mut lw = Lowerer { sink: &mut *sink, work: opts.work_qubit, num_qubits };
        res = lw.gate(g);
        on_gate(path, sink);
    });
    res
}

/// Lowers a block to CNOT and U3 gates.
pub fn lower(block: &CircuitBlock, opts: LowerOptions) -> Result<LoweredCircuit> {
    let mut out = LoweredCircuit::default();
    run(block, opts, &mut out, |_, _| {})?;
    Ok(out)
}

/// Counts the lowered gates of a block without materialising them.
pub fn count(block: &CircuitBlock, opts: LowerOptions) -> Result<GateCountReport> {
    let mut counter = Counter::default();
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut prev = (0usize, 0usize);
    run(block, opts, &mut counter, |path, c| {
        let key = path[1..].join("/");
        let e = per.entry(key).or_default();
        e.0 += c.cnot - prev.0;
        e.1 += c.u3 - prev.1;
        prev = (c.cnot, c.u3);
    })?;
    Ok(GateCountReport {
        cnot_count: counter.cnot,
        u3_count: counter.u3,
        total: counter.cnot + counter.u3,
        depth: counter.depth,
        per_subblock: per,
    })
}

/// Counts for a family of blocks indexed by size, sorted by index.
pub fn scaling_table(family: &[(usize, CircuitBlock, LowerOptions)]) -> Result<Vec<(usize, GateCountReport)>> {
    let mut rows = family
        .iter()
        .map(|(i, b, o)| count(b, *o).map(|r| (*i, r)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.0);
    Ok(rows)
}

/// CSV text `index,cnot,u3,total,depth` for a scaling table.
pub fn scaling_csv(rows: &[(usize, GateCountReport)]) -> String {
    let mut s = String::from("index,cnot,u3,total,depth\n");
    for (i, r) in rows {
        s.push_str(&format!("{i},{},{},{},{}\n", r.cnot_count, r.u3_count, r.total, r.depth));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_rank_inverts_gray_code() {
        for i in 0..64usize {
            assert_eq!(gray_rank(i ^ (i >> 1)), i);
        }
    }

    #[test]
    fn walsh_roundtrip() {
        let angles = [0.3, -0.1, 0.7, 0.2];
        let phi = walsh_coefficients(&angles);
        for (s, a) in angles.iter().enumerate() {
            let v: f64 = phi
                .iter()
                .enumerate()
                .map(|(t, p)| if (s & t).count_ones() % 2 == 1 { -p } else { *p })
                .sum();
            assert!((v - a).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_of_x_squares_to_x() {
        let v = sqrt_unitary(&X_MAT);
        let vv = mat_mul(&v, &v);
        for i in 0..2 {
            for j in 0..2 {
                assert!((vv[i][j] - X_MAT[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zyz_reconstructs() {
        let m = crate::gate::u3_matrix(0.4, 1.1, -0.3);
        let (g, t, p, l) = zyz(&m);
        let r = u3_matrix(t, p, l);
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[i][j] * Complex64::from_polar(1.0, g) - m[i][j]).norm() < 1e-14);
            }
        }
    }
}
