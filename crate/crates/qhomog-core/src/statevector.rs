//! Dense noiseless statevector emulator.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::circuit::{CircuitBlock, Op};
use crate::error::{Error, Result};
use crate::gate::{Control, Gate, GateKind, Mat2};
use crate::layout::QubitLayout;
use crate::scalar::Real;

/// Constraints on computational basis values of some qubits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Projector {
    pub constraints: BTreeMap<usize, bool>,
}

impl Projector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, qubit: usize, value: bool) -> Self {
        self.constraints.insert(qubit, value);
        self
    }

    /// Constrains each qubit of `qubits` to the little-endian `value`.
    pub fn with_value(mut self, qubits: &[usize], value: usize) -> Self {
        for (i, &q) in qubits.iter().enumerate() {
            self.constraints.insert(q, (value >> i) & 1 == 1);
        }
        self
    }

    pub fn with_register(self, layout: &QubitLayout, name: &str, value: usize) -> Result<Self> {
        let qs = layout.qubits(name)?;
        Ok(self.with_value(&qs, value))
    }

    fn masks(&self) -> (usize, usize) {
        let mut mask = 0;
        let mut val = 0;
        for (&q, &v) in &self.constraints {
            mask |= 1 << q;
            if v {
                val |= 1 << q;
            }
        }
        (mask, val)
    }
}

fn control_masks(controls: &[Control]) -> (usize, usize) {
    let mut mask = 0;
    let mut val = 0;
    for c in controls {
        mask |= 1 << c.qubit;
        if c.state {
            val |= 1 << c.qubit;
        }
    }
    (mask, val)
}

/// Inserts a zero bit at position `t` of `i`.
#[inline]
fn insert_zero(i: usize, t: usize) -> usize {
    let low = i & ((1usize << t) - 1);
    ((i >> t) << (t + 1)) | low
}

/// Amplitudes of `num_qubits` qubits, index bit `q` = state of qubit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    num_qubits: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// |0...0> over the layout's qubits.
    pub fn new(layout: &QubitLayout) -> Self {
        Self::zero(layout.num_qubits())
    }

    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1usize << num_qubits];
        amps[index] = Complex::new(T::one(), T::zero());
        Self { num_qubits, amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Shape(format!("{} amplitudes is not a power of two", amps.len())));
        }
        Ok(Self { num_qubits: amps.len().trailing_zeros() as usize, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex<T> {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr().to_f64_lossy()).sum::<f64>().sqrt()
    }

    /// Inner product <self|other>.
    pub fn inner(&self, other: &Self) -> Complex<f64> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| {
                let p = a.conj() * b;
                Complex::new(p.re.to_f64_lossy(), p.im.to_f64_lossy())
            })
            .sum()
    }

    pub fn apply_block(&mut self, block: &CircuitBlock) -> Result<()> {
        for op in &block.ops {
            match op {
                Op::Gate(g) => self.apply_gate(g)?,
                Op::Block(b) => self.apply_block(b)?,
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let (cmask, cval) = control_masks(&gate.controls);
        match &gate.kind {
            GateKind::Swap => self.apply_swap(gate.targets[0], gate.targets[1], cmask, cval),
            GateKind::Qft { inverse } => self.apply_qft_masked(&gate.targets, *inverse, cmask, cval),
            GateKind::MultiplexedRy { selectors, angles } => {
                self.apply_multiplexed_ry(selectors, angles, gate.targets[0], cmask, cval)
            }
            GateKind::X => self.apply_x(gate.targets[0], cmask, cval),
            _ => {
                let m = gate.matrix().expect("single-qubit kind has a matrix");
                self.apply_mat2(&m, gate.targets[0], cmask, cval);
            }
        }
        Ok(())
    }

    fn apply_mat2(&mut self, m: &Mat2, t: usize, cmask: usize, cval: usize) {
        let cv = |z: num_complex::Complex64| Complex::new(T::from_f64_lossy(z.re), T::from_f64_lossy(z.im));
        let (m00, m01, m10, m11) = (cv(m[0][0]), cv(m[0][1]), cv(m[1][0]), cv(m[1][1]));
        let bit = 1usize << t;
        for i in 0..self.amps.len() / 2 {
            let i0 = insert_zero(i, t);
            if i0 & cmask != cval {
                continue;
            }
            let i1 = i0 | bit;
            let (a, b) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = m00 * a + m01 * b;
            self.amps[i1] = m10 * a + m11 * b;
        }
    }

    fn apply_x(&mut self, t: usize, cmask: usize, cval: usize) {
        let bit = 1usize << t;
        for i in 0..self.amps.len() / 2 {
            let i0 = insert_zero(i, t);
            if i0 & cmask == cval {
                self.amps.swap(i0, i0 | bit);
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize, cmask: usize, cval: usize) {
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ba != 0 && i & bb == 0 && i & cmask == cval {
                let j = (i & !ba) | bb;
                self.amps.swap(i, j);
            }
        }
    }

    fn apply_multiplexed_ry(&mut self, selectors: &[usize], angles: &[f64], t: usize, cmask: usize, cval: usize) {
        let cs: Vec<(T, T)> = angles
            .iter()
            .map(|a| {
                let (s, c) = (a / 2.0).sin_cos();
                (T::from_f64_lossy(c), T::from_f64_lossy(s))
            })
            .collect();
        let bit = 1usize << t;
        for i in 0..self.amps.len() / 2 {
            let i0 = insert_zero(i, t);
            if i0 & cmask != cval {
                continue;
            }
            let mut sel = 0;
            for (j, &q) in selectors.iter().enumerate() {
                sel |= ((i0 >> q) & 1) << j;
            }
            let (c, s) = cs[sel];
            let i1 = i0 | bit;
            let (a, b) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = a * c - b * s;
            self.amps[i1] = a * s + b * c;
        }
    }

    /// Unitary DFT on the named register, `|j> -> N^{-1/2} sum_k e^{2 pi i jk/N} |k>`.
    pub fn apply_qft(&mut self, layout: &QubitLayout, register: &str, inverse: bool) -> Result<()> {
        let qs = layout.qubits(register)?;
        self.apply_gate(&Gate::qft(qs, inverse))
    }

    /// Same as [`Self::apply_qft`] but only on the branch selected by `controls`.
    pub fn apply_controlled_qft(&mut self, qubits: &[usize], inverse: bool, controls: &[Control]) -> Result<()> {
        self.apply_gate(&Gate::new(GateKind::Qft { inverse }, qubits.to_vec(), controls.to_vec()))
    }

    fn apply_qft_masked(&mut self, qubits: &[usize], inverse: bool, cmask: usize, cval: usize) {
        let n = qubits.len();
        let dim = 1usize << n;
        let offsets: Vec<usize> = (0..dim)
            .map(|j| qubits.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((j >> b) & 1) << q)))
            .collect();
        let rmask = qubits.iter().fold(0usize, |acc, &q| acc | (1 << q));
        let mut planner = FftPlanner::<T>::new();
        // The forward QFT carries the positive exponent, which is rustfft's inverse direction.
        let fft = if inverse { planner.plan_fft_forward(dim) } else { planner.plan_fft_inverse(dim) };
        let scale = T::one() / T::from_usize(dim).unwrap().sqrt();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); dim];
        for base in 0..self.amps.len() {
            if base & rmask != 0 || base & cmask != cval {
                continue;
            }
            for (j, off) in offsets.iter().enumerate() {
                buf[j] = self.amps[base | off];
            }
            fft.process(&mut buf);
            for (j, off) in offsets.iter().enumerate() {
                self.amps[base | off] = buf[j] * scale;
            }
        }
    }

    /// Probability of the projector's subspace.
    pub fn probability(&self, proj: &Projector) -> f64 {
        let (mask, val) = proj.masks();
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == val)
            .map(|(_, a)| a.norm_sqr().to_f64_lossy())
            .sum()
    }

    /// Projects onto the subspace, returning the renormalised state and its probability.
    pub fn project_and_probability(&self, proj: &Projector) -> Result<(Self, f64)> {
        let p = self.probability(proj);
        if p <= 0.0 {
            return Err(Error::ImpossibleOutcome);
        }
        let (mask, val) = proj.masks();
        let inv = T::from_f64_lossy(1.0 / p.sqrt());
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == val { *a * inv } else { Complex::new(T::zero(), T::zero()) })
            .collect();
        Ok((Self { num_qubits: self.num_qubits, amps }, p))
    }

    /// Raw amplitudes of the constrained slice, keyed by the packed value of
    /// the unconstrained qubits (ascending qubit order, little-endian).
    pub fn read_amplitudes(&self, proj: &Projector) -> BTreeMap<usize, Complex<T>> {
        let (mask, val) = proj.masks();
        let free: Vec<usize> = (0..self.num_qubits).filter(|q| mask & (1 << q) == 0).collect();
        let mut out = BTreeMap::new();
        for (i, a) in self.amps.iter().enumerate() {
            if i & mask != val {
                continue;
            }
            let key = free.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
            out.insert(key, *a);
        }
        out
    }

    /// Exact outcome distribution of measuring `qubits` (packed little-endian).
    pub fn marginal(&self, qubits: &[usize]) -> Vec<f64> {
        let mut probs = vec![0.0; 1usize << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let key = qubits.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
            probs[key] += a.norm_sqr().to_f64_lossy();
        }
        probs
    }

    /// Seeded shot sampling of `qubits`; returns counts per packed outcome.
    pub fn sample(&self, qubits: &[usize], shots: u64, seed: u64) -> Vec<u64> {
        let probs = self.marginal(qubits);
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; probs.len()];
        for _ in 0..shots {
            let u: f64 = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(probs.len() - 1);
            counts[idx] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type Sv = StateVector<f64>;

    #[test]
    fn insert_zero_places_bit() {
        assert_eq!(insert_zero(0b11, 1), 0b101);
        assert_eq!(insert_zero(0b11, 0), 0b110);
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = Sv::zero(1);
        s.apply_gate(&Gate::h(0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.amplitude(0).re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(1).re, h, epsilon = 1e-15);
    }

    #[test]
    fn open_control_fires_on_zero() {
        let mut s = Sv::zero(2);
        s.apply_gate(&Gate::mcx(vec![Control::off(0)], 1)).unwrap();
        assert_abs_diff_eq!(s.amplitude(0b10).re, 1.0);
    }

    #[test]
    fn multiplexed_ry_selects_angle() {
        let mut s = Sv::basis(2, 0b01);
        s.apply_gate(&Gate::multiplexed_ry(vec![0], 1, vec![0.0, std::f64::consts::PI])).unwrap();
        assert_abs_diff_eq!(s.amplitude(0b11).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn controlled_swap_only_on_branch() {
        let mut s = Sv::basis(3, 0b001);
        s.apply_gate(&Gate::new(GateKind::Swap, vec![0, 1], vec![Control::on(2)])).unwrap();
        assert_abs_diff_eq!(s.amplitude(0b001).re, 1.0);
        let mut s = Sv::basis(3, 0b101);
        s.apply_gate(&Gate::new(GateKind::Swap, vec![0, 1], vec![Control::on(2)])).unwrap();
        assert_abs_diff_eq!(s.amplitude(0b110).re, 1.0);
    }

    #[test]
    fn rejects_overlapping_qubits() {
        let mut s = Sv::zero(2);
        assert!(s.apply_gate(&Gate::cnot(1, 1)).is_err());
        assert!(s.apply_gate(&Gate::h(5)).is_err());
    }

    #[test]
    fn rejects_non_unitary_matrix() {
        let mut s = Sv::zero(1);
        let one = num_complex::Complex64::new(1.0, 0.0);
        let zero = num_complex::Complex64::new(0.0, 0.0);
        assert!(s.apply_gate(&Gate::unitary(0, [[one, one], [zero, one]])).is_err());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut s = Sv::zero(2);
        s.apply_gate(&Gate::h(0)).unwrap();
        assert_eq!(s.sample(&[0], 1000, 7), s.sample(&[0], 1000, 7));
    }
}
