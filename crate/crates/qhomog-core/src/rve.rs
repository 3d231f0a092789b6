//! Circuits of the quantum fixed-point solver for one cell: initial state,
//! one fixed-point step, the zero-mode exchange and the S-step iteration.
//!
//! # Registers
//!
//! From qubit 0 upwards: the ensemble index `m` (only for ensembles), the
//! subspace flag `e`, one ancilla bundle per step (`l0 l1 p0 p1` in 2D,
//! `p0 p1` in 1D), the grid registers `k0` (and `k1`), the component qubit
//! `c` (2D), the load flag `d`, the extension qubits `ext0 ext1` (2D
//! extended-domain encoding only), the stress readout qubits `r a` (when
//! requested) and one clean `work` qubit used by the gate-count lowering.
//!
//! # Amplitude bookkeeping
//!
//! After `t` steps the physical branch is `e = 0`, bundles `1..=t` in the
//! success pattern (`l = 0, p0 = p1 = 1`), later bundles cleared, `d = 0`.
//! Its amplitude at `(k, c)` is `a_t * gamma^(t)_c(k)`, with
//! `a_t = a_0 * rho^t`. `rho` collects the scale of the polarisation
//! encoding, the LCU prefactor 1/3 (2D) and the Green's operator scale.
//!
//! Step `t` needs the macroscopic strain in the zero Fourier mode. The initial
//! state therefore holds, besides the physical field, one copy per step in the
//! `e = 1` subspace at `k = 0`. Copy `t` is pre-marked with the success
//! pattern on bundles `1..t`, so that in step `t` it agrees with the physical
//! branch on every spectator qubit and is the only `e = 1` state with a
//! cleared bundle `t`. The exchange of step `t` then swaps it into the
//! physical zero mode and moves the unwanted zero mode out of the way.
//! Copies of later steps carry marks on bundle `t` and are left untouched.

use crate::circuit::CircuitBlock;
use crate::error::{Error, Result};
use crate::gate::{Control, Gate};
use crate::greens::{build_u_gamma_1d, gamma_scale, gamma_scale_1d, GammaEncoding, GammaQubits, GammaTables};
use crate::layout::QubitLayout;
use crate::model::{NormalisationLedger, RveSpec, StrainField};
use crate::oracle::homogenised_stress;
use crate::poly::{encoding_scale, EncodedFunction, EncodingTarget, FunctionEncoding};
use crate::scalar::Real;
use crate::statevector::{Projector, StateVector};

/// How the material data and the Green's operator are loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingConfig {
    /// Encoding of `mu - mu0` (polarisation step).
    pub mu: FunctionEncoding,
    /// Encoding of the 2D operator coefficients.
    pub gamma: GammaEncoding,
    /// Encoding of `mu` for the stress readout.
    pub sigma: FunctionEncoding,
}

impl EncodingConfig {
    /// Exact per-point rotations everywhere.
    pub fn lookup() -> Self {
        Self { mu: FunctionEncoding::Lookup, gamma: GammaEncoding::Lookup, sigma: FunctionEncoding::Lookup }
    }

    /// Polynomial encodings with the default degrees: 8 in 1D, 4 per
    /// coordinate in 2D, and extended-domain (3, 4) for the 2D coefficients.
    pub fn polynomial(dims: usize) -> Self {
        let degrees = if dims == 1 { vec![8] } else { vec![4, 4] };
        Self {
            mu: FunctionEncoding::Polynomial { degrees: degrees.clone() },
            gamma: GammaEncoding::extended_default(),
            sigma: FunctionEncoding::Polynomial { degrees },
        }
    }

    /// True when the 2D layout needs the two extension qubits.
    pub fn needs_extension(&self, dims: usize) -> bool {
        dims == 2 && self.gamma.needs_extension()
    }
}

/// Number of steps, initial field and the names of the per-step bundles.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationPlan {
    pub steps: usize,
    /// Initial strain; `None` means the uniform macroscopic strain.
    pub initial: Option<StrainField<f64>>,
    pub bundle_names: Vec<String>,
}

impl IterationPlan {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("at least one iteration step is required".into()));
        }
        Ok(Self { steps, initial: None, bundle_names: (1..=steps).map(|t| format!("anci{t}")).collect() })
    }

    pub fn with_initial(mut self, initial: StrainField<f64>) -> Self {
        self.initial = Some(initial);
        self
    }

    /// The initial field for a cell and macroscopic strain.
    pub fn initial_field(&self, num_points: usize, gammabar: &[f64]) -> StrainField<f64> {
        self.initial.clone().unwrap_or_else(|| StrainField::uniform(gammabar, num_points))
    }
}

/// The ancilla qubits consumed by one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bundle {
    /// LCU selection qubits (2D only).
    pub l: Option<[usize; 2]>,
    /// Green's operator flag.
    pub p0: usize,
    /// Polarisation flag.
    pub p1: usize,
}

impl Bundle {
    pub fn qubits(&self) -> Vec<usize> {
        let mut q: Vec<usize> = self.l.map(|l| l.to_vec()).unwrap_or_default();
        q.push(self.p0);
        q.push(self.p1);
        q
    }

    /// Packed value of the success pattern over [`Bundle::qubits`].
    pub fn success_value(&self) -> usize {
        let off = if self.l.is_some() { 2 } else { 0 };
        0b11 << off
    }

    pub fn success(&self) -> Vec<Control> {
        Control::pattern(&self.qubits(), self.success_value())
    }

    pub fn cleared(&self) -> Vec<Control> {
        Control::pattern(&self.qubits(), 0)
    }
}

/// Qubit layout of the solver circuit plus typed accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct RveLayout {
    pub layout: QubitLayout,
    pub dims: usize,
    pub n: usize,
    pub steps: usize,
    pub extension: bool,
    pub readout: bool,
    pub ensemble_bits: usize,
}

impl RveLayout {
    pub fn new(dims: usize, n: usize, steps: usize, extension: bool, readout: bool, ensemble_bits: usize) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return Err(Error::Config(format!("dims must be 1 or 2, got {dims}")));
        }
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::Config(format!("grid size {n} is not a power of two >= 2")));
        }
        if steps == 0 {
            return Err(Error::Config("at least one iteration step is required".into()));
        }
        if extension && dims != 2 {
            return Err(Error::Config("extension qubits only exist in 2D".into()));
        }
        let bits = n.trailing_zeros() as usize;
        let mut regs: Vec<(String, usize)> = Vec::new();
        if ensemble_bits > 0 {
            regs.push(("m".into(), ensemble_bits));
        }
        regs.push(("e".into(), 1));
        for t in 1..=steps {
            if dims == 2 {
                regs.push((format!("anci{t}.l0"), 1));
                regs.push((format!("anci{t}.l1"), 1));
            }
            regs.push((format!("anci{t}.p0"), 1));
            regs.push((format!("anci{t}.p1"), 1));
        }
        regs.push(("k0".into(), bits));
        if dims == 2 {
            regs.push(("k1".into(), bits));
            regs.push(("c".into(), 1));
        }
        regs.push(("d".into(), 1));
        if extension {
            regs.push(("ext0".into(), 1));
            regs.push(("ext1".into(), 1));
        }
        if readout {
            regs.push(("r".into(), 1));
            regs.push(("a".into(), 1));
        }
        regs.push(("work".into(), 1));
        let layout = QubitLayout::sequential(&regs)?;
        Ok(Self { layout, dims, n, steps, extension, readout, ensemble_bits })
    }

    /// Layout for a spec and encoding choice.
    pub fn for_config(dims: usize, n: usize, steps: usize, enc: &EncodingConfig, readout: bool, ensemble_bits: usize) -> Result<Self> {
        Self::new(dims, n, steps, enc.needs_extension(dims), readout, ensemble_bits)
    }

    /// Qubit count without building the layout: `dims*log2 N + (2 dims) S + const`.
    pub fn qubit_count(dims: usize, n: usize, steps: usize, extension: bool, readout: bool, ensemble_bits: usize) -> usize {
        let bits = n.trailing_zeros() as usize;
        let per_step = if dims == 2 { 4 } else { 2 };
        let fixed = if dims == 2 { 4 } else { 3 }; // e, d, work (+ c)
        dims * bits + per_step * steps + fixed + 2 * extension as usize + 2 * readout as usize + ensemble_bits
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.num_qubits()
    }

    fn q(&self, name: &str) -> usize {
        self.layout.qubit(name).expect("register exists by construction")
    }

    pub fn e(&self) -> usize {
        self.q("e")
    }

    pub fn d(&self) -> usize {
        self.q("d")
    }

    pub fn c(&self) -> Option<usize> {
        (self.dims == 2).then(|| self.q("c"))
    }

    pub fn work(&self) -> usize {
        self.q("work")
    }

    pub fn r(&self) -> Option<usize> {
        self.readout.then(|| self.q("r"))
    }

    pub fn a(&self) -> Option<usize> {
        self.readout.then(|| self.q("a"))
    }

    pub fn ext(&self) -> Option<(usize, usize)> {
        self.extension.then(|| (self.q("ext0"), self.q("ext1")))
    }

    pub fn m(&self) -> Vec<usize> {
        self.layout.qubits("m").unwrap_or_default()
    }

    /// Grid registers, one per dimension.
    pub fn k_registers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![self.layout.qubits("k0").expect("k0")];
        if self.dims == 2 {
            out.push(self.layout.qubits("k1").expect("k1"));
        }
        out
    }

    /// All grid qubits; their packed value is the grid index `k0 + N k1`.
    pub fn k(&self) -> Vec<usize> {
        self.k_registers().concat()
    }

    /// Bundle of step `t` (1-based).
    pub fn bundle(&self, t: usize) -> Bundle {
        assert!(t >= 1 && t <= self.steps, "step {t} outside 1..={}", self.steps);
        let l = (self.dims == 2).then(|| [self.q(&format!("anci{t}.l0")), self.q(&format!("anci{t}.l1"))]);
        Bundle { l, p0: self.q(&format!("anci{t}.p0")), p1: self.q(&format!("anci{t}.p1")) }
    }

    /// Projector onto the physical branch after `t` steps (grid and
    /// component qubits left free). `m` is left free too.
    pub fn physical_projector(&self, t: usize) -> Projector {
        let mut p = Projector::new().with(self.e(), false).with(self.d(), false).with(self.work(), false);
        for s in 1..=self.steps {
            let b = self.bundle(s);
            let v = if s <= t { b.success_value() } else { 0 };
            p = p.with_value(&b.qubits(), v);
        }
        if let Some((x0, x1)) = self.ext() {
            p = p.with(x0, false).with(x1, false);
        }
        if let (Some(r), Some(a)) = (self.r(), self.a()) {
            p = p.with(r, false).with(a, false);
        }
        p
    }
}

/// Weights of the initial superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitWeights {
    /// Weights chosen so that every copy of the macroscopic strain has exactly
    /// the magnitude its step needs (see the module documentation).
    Consistent,
    /// Equal weights `1/sqrt(S+1)` and copy rotations with
    /// `cos(theta/2) = gammabar_c / N`, as in the illustrative state of the
    /// method description. Not usable for solving.
    Printed,
}

/// Initial-state block and its bookkeeping.
#[derive(Debug, Clone)]
pub struct InitCircuit {
    pub block: CircuitBlock,
    /// Contains `a_0` (or a zero factor for a zero load).
    pub ledger: NormalisationLedger,
    /// Branch weights: physical first, then copies 1..=S.
    pub weights: Vec<f64>,
}

/// Real amplitude preparation `|0> -> sum_i v_i |i>` on `qubits` for a unit
/// vector `values` (little-endian index), as a tree of multiplexed RY
/// rotations from the most significant qubit down. Signs are produced by the
/// last level through full-range angles.
pub fn prepare_real_amplitudes(name: &str, qubits: &[usize], values: &[f64], controls: &[Control]) -> Result<CircuitBlock> {
    let n = qubits.len();
    if values.len() != 1usize << n {
        return Err(Error::Shape(format!("{} values for {n} qubits", values.len())));
    }
    let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Encoding(format!("amplitudes have norm {norm}, expected 1")));
    }
    let mut b = CircuitBlock::new(name);
    for i in (0..n).rev() {
        let selectors: Vec<usize> = qubits[i + 1..].to_vec();
        let block = 1usize << i;
        let angles: Vec<f64> = (0..1usize << (n - 1 - i))
            .map(|h| {
                let base = h << (i + 1);
                let (lo, hi) = if i == 0 {
                    (values[base], values[base + 1])
                } else {
                    let nrm = |r: std::ops::Range<usize>| values[r].iter().map(|v| v * v).sum::<f64>().sqrt();
                    (nrm(base..base + block), nrm(base + block..base + 2 * block))
                };
                if lo == 0.0 && hi == 0.0 {
                    0.0
                } else {
                    2.0 * hi.atan2(lo)
                }
            })
            .collect();
        if angles.iter().all(|a| *a == 0.0) {
            continue;
        }
        if angles.iter().all(|a| *a == angles[0]) {
            b.push(Gate::ry(qubits[i], angles[0]).with_controls(controls));
        } else {
            b.push(Gate::multiplexed_ry(selectors, qubits[i], angles).with_controls(controls));
        }
    }
    Ok(b)
}

fn check_load(n: usize, dims: usize, gammabar: &[f64]) -> Result<()> {
    if gammabar.len() != dims {
        return Err(Error::Shape(format!("macroscopic strain has {} components, expected {dims}", gammabar.len())));
    }
    if let Some(g) = gammabar.iter().find(|g| g.abs() > n as f64 || !g.is_finite()) {
        return Err(Error::Encoding(format!("macroscopic strain component {g} exceeds the grid size {n}")));
    }
    Ok(())
}

/// Per-step amplitude factor `rho` and its ledger entries.
pub fn step_factors<T: Real>(spec: &RveSpec<T>, enc: &EncodingConfig) -> Vec<(String, f64)> {
    let mu0 = spec.mu0.to_f64_lossy();
    let bound = spec.mu.iter().map(|m| (m.to_f64_lossy() - mu0).abs()).fold(0.0, f64::max);
    let mut f = vec![("polarisation scale".to_string(), 1.0 / encoding_scale(bound, &enc.mu))];
    if spec.dims == 2 {
        f.push(("lcu prefactor".into(), 1.0 / 3.0));
        f.push(("green scale".into(), 1.0 / gamma_scale(mu0, &enc.gamma)));
    } else {
        f.push(("green scale".into(), 1.0 / gamma_scale_1d(mu0)));
    }
    f
}

/// Initial state: the physical field in `e = 0` and one copy of the
/// macroscopic strain per step in `e = 1`.
pub fn build_u_init<T: Real>(
    spec: &RveSpec<T>,
    gammabar: &[f64],
    plan: &IterationPlan,
    rl: &RveLayout,
    enc: &EncodingConfig,
    mode: InitWeights,
) -> Result<InitCircuit> {
    let (n, dims, steps) = (spec.n, spec.dims, plan.steps);
    check_load(n, dims, gammabar)?;
    if rl.dims != dims || rl.n != n || rl.steps < steps {
        return Err(Error::Config("layout does not match the cell or plan".into()));
    }
    let np = spec.num_points();
    let initial = plan.initial_field(np, gammabar);
    if initial.components.len() != dims || initial.components.iter().any(|c| c.len() != np) {
        return Err(Error::Shape("initial field does not match the cell".into()));
    }
    let g0 = initial.l2();
    let gmax = gammabar.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let rho: f64 = step_factors(spec, enc).iter().map(|f| f.1).product();
    let h = if dims == 2 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    let root = (np as f64).sqrt();

    let mut block = CircuitBlock::new("U_init");
    let mut ledger = NormalisationLedger::default();
    if g0 == 0.0 {
        // nothing to encode: every branch goes to the inert d = 1 subspace
        block.push(Gate::x(rl.d()));
        ledger.push("zero load", 0.0);
        return Ok(InitCircuit { block, ledger, weights: vec![0.0; steps + 1] });
    }

    let weights: Vec<f64> = match mode {
        InitWeights::Printed => vec![1.0 / ((steps + 1) as f64).sqrt(); steps + 1],
        InitWeights::Consistent => {
            let raw: Vec<f64> = std::iter::once(1.0)
                .chain((1..=steps).map(|t| rho.powi(t as i32) * root * gmax / (h * g0)))
                .collect();
            let z = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
            ledger.push("initial amplitude", 1.0 / (z * g0));
            raw.iter().map(|w| w / z).collect()
        }
    };
    if mode == InitWeights::Printed {
        ledger.push("initial amplitude", weights[0] / g0);
    }

    let e = rl.e();
    // split the physical weight from the copies, then peel copies off one by one
    let tail: Vec<f64> = (0..=steps).map(|t| weights[t..].iter().map(|w| w * w).sum::<f64>().sqrt()).collect();
    if tail[1] > 0.0 {
        block.push(Gate::ry(e, 2.0 * tail[1].atan2(weights[0])));
        for t in 1..steps {
            if tail[t + 1] == 0.0 {
                break;
            }
            let b = rl.bundle(t);
            let mut ctrl = vec![Control::on(e)];
            if t > 1 {
                ctrl.push(Control::on(rl.bundle(t - 1).p0));
            }
            block.push(Gate::ry(b.p0, 2.0 * tail[t + 1].atan2(weights[t])).with_controls(&ctrl));
            block.push(Gate::cnot(b.p0, b.p1));
        }
        // copy content: component direction on c and magnitude on d
        let copy_ctrl = [Control::on(e)];
        let cos = |g: f64| match mode {
            InitWeights::Printed => g / n as f64,
            InitWeights::Consistent => g / gmax,
        };
        match rl.c() {
            Some(c) => {
                block.push(Gate::h(c).with_controls(&copy_ctrl));
                for (v, g) in gammabar.iter().enumerate() {
                    let ctrl = [Control::on(e), Control { qubit: c, state: v == 1 }];
                    block.push(Gate::ry(rl.d(), 2.0 * cos(*g).clamp(-1.0, 1.0).acos()).with_controls(&ctrl));
                }
            }
            None => {
                block.push(Gate::ry(rl.d(), 2.0 * cos(gammabar[0]).clamp(-1.0, 1.0).acos()).with_controls(&copy_ctrl));
            }
        }
    }

    // physical field: component weights on c, then each component's shape on k
    let phys = [Control::off(e)];
    let k = rl.k();
    let norms: Vec<f64> = initial.components.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if let Some(c) = rl.c() {
        let theta = 2.0 * norms[1].atan2(norms[0]);
        if theta != 0.0 {
            block.push(Gate::ry(c, theta).with_controls(&phys));
        }
    }
    for (v, comp) in initial.components.iter().enumerate() {
        if norms[v] == 0.0 {
            continue;
        }
        let mut ctrl = phys.to_vec();
        if let Some(c) = rl.c() {
            ctrl.push(Control { qubit: c, state: v == 1 });
        }
        let unit: Vec<f64> = comp.iter().map(|x| x / norms[v]).collect();
        block.push_block(prepare_real_amplitudes("field", &k, &unit, &ctrl)?);
    }
    Ok(InitCircuit { block, ledger, weights })
}

/// Ordered sequence of basis values from `a` to `b` flipping one differing
/// bit at a time, in `order` (default: ascending bit position).
pub fn gray_path(a: usize, b: usize, order: Option<&[usize]>) -> Result<Vec<usize>> {
    let diff = a ^ b;
    if diff == 0 {
        return Err(Error::Config("exchange of a basis state with itself".into()));
    }
    let bits: Vec<usize> = match order {
        Some(o) => {
            let mut sorted = o.to_vec();
            sorted.sort_unstable();
            let expect: Vec<usize> = (0..usize::BITS as usize).filter(|i| diff >> i & 1 == 1).collect();
            if sorted != expect {
                return Err(Error::Config("flip order must list each differing bit once".into()));
            }
            o.to_vec()
        }
        None => (0..usize::BITS as usize).filter(|i| diff >> i & 1 == 1).collect(),
    };
    let mut path = vec![a];
    let mut cur = a;
    for bit in bits {
        cur ^= 1 << bit;
        path.push(cur);
    }
    Ok(path)
}

/// Transposition of the basis states `a` and `b` of `qubits` (packed
/// little-endian), identity on everything else, built along a Gray path:
/// neighbouring states are swapped by a multi-controlled X whose controls fix
/// every other qubit, first walking `a` towards `b`, then back. Hamming
/// distance `m` costs `2m - 1` multi-controlled X gates.
pub fn build_u_exch(qubits: &[usize], a: usize, b: usize, order: Option<&[usize]>) -> Result<CircuitBlock> {
    let width = qubits.len();
    if a >> width != 0 || b >> width != 0 {
        return Err(Error::Config("exchanged states do not fit the register".into()));
    }
    let path = gray_path(a, b, order)?;
    let hop = |from: usize, to: usize| {
        let bit = (from ^ to).trailing_zeros() as usize;
        let controls: Vec<Control> = (0..width)
            .filter(|&i| i != bit)
            .map(|i| Control { qubit: qubits[i], state: from >> i & 1 == 1 })
            .collect();
        Gate::mcx(controls, qubits[bit])
    };
    let m = path.len() - 1;
    let mut block = CircuitBlock::new("U_exch");
    for i in 0..m {
        block.push(hop(path[i], path[i + 1]));
    }
    for i in (0..m - 1).rev() {
        block.push(hop(path[i], path[i + 1]));
    }
    Ok(block)
}

/// Reusable pieces of the fixed-point step: encodings are computed once and
/// the per-step blocks only differ in the bundle they use.
#[derive(Debug, Clone)]
pub struct IrveFactory {
    pub rl: RveLayout,
    pub mu_encoding: EncodedFunction,
    pub gamma: Option<GammaTables>,
    pub mu0: f64,
    pub factors: Vec<(String, f64)>,
}

impl IrveFactory {
    pub fn new<T: Real>(spec: &RveSpec<T>, rl: &RveLayout, enc: &EncodingConfig) -> Result<Self> {
        if rl.dims != spec.dims || rl.n != spec.n {
            return Err(Error::Config("layout does not match the cell".into()));
        }
        if spec.dims == 2 && enc.gamma.needs_extension() && !rl.extension {
            return Err(Error::Config("extended-domain encoding needs extension qubits".into()));
        }
        let mu0 = spec.mu0.to_f64_lossy();
        let target: Vec<f64> = spec.mu.iter().map(|m| m.to_f64_lossy() - mu0).collect();
        let grid = vec![spec.n; spec.dims];
        let factors = step_factors(spec, enc);
        let mu_encoding = EncodedFunction::with_scale(&target, &grid, &enc.mu, 1.0 / factors[0].1)?;
        let gamma = if spec.dims == 2 { Some(GammaTables::new(spec.n, mu0, &enc.gamma)?) } else { None };
        Ok(Self { rl: rl.clone(), mu_encoding, gamma, mu0, factors })
    }

    /// Amplitude factor of one step.
    pub fn rho(&self) -> f64 {
        self.factors.iter().map(|f| f.1).product()
    }

    /// Cell with the modulus actually realised by the encoding; the circuit
    /// runs the classical iteration for this cell exactly.
    pub fn realised_spec<T: Real>(&self, spec: &RveSpec<T>) -> Result<RveSpec<f64>> {
        let mu = self.mu_encoding.values.iter().map(|v| v + self.mu0).collect();
        RveSpec::new(spec.dims, spec.n, spec.l.to_f64_lossy(), mu, self.mu0)
    }

    /// One fixed-point step on bundle `t`.
    pub fn step(&self, t: usize) -> Result<CircuitBlock> {
        let rl = &self.rl;
        let e_off = [Control::off(rl.e())];
        let b = rl.bundle(t);
        let regs = rl.k_registers();
        let mut block = CircuitBlock::new(format!("U_IRVE_{t}"));

        let target = EncodingTarget::new(regs.clone(), b.p1).with_controls(e_off.to_vec());
        block.push_block(self.mu_encoding.block("S1_polarisation", &target)?);

        let mut s2 = CircuitBlock::new("S2_qft");
        for r in &regs {
            s2.push(Gate::qft(r.clone(), false).with_controls(&e_off));
        }
        block.push_block(s2);

        let s3 = match (&self.gamma, b.l, rl.c()) {
            (Some(tables), Some([l0, l1]), Some(c)) => {
                let q = GammaQubits {
                    k0: regs[0].clone(),
                    k1: regs[1].clone(),
                    l0,
                    l1,
                    p0: b.p0,
                    c,
                    ext: if tables.encoding.needs_extension() { rl.ext() } else { None },
                    controls: e_off.to_vec(),
                };
                tables.block(&q)?
            }
            _ => build_u_gamma_1d(self.mu0, b.p0, &e_off).0,
        };
        block.push_block(s3.named("S3_green"));

        let mut ex_qubits = vec![rl.e()];
        ex_qubits.extend(b.qubits());
        ex_qubits.extend(rl.k());
        // (e = 0, bundle = success, k = 0) <-> (e = 1, bundle cleared, k = 0)
        let physical_zero = b.success_value() << 1;
        block.push_block(build_u_exch(&ex_qubits, physical_zero, 1, None)?.named("S4_exchange"));

        let mut s5 = CircuitBlock::new("S5_iqft");
        for r in &regs {
            s5.push(Gate::qft(r.clone(), true).with_controls(&e_off));
        }
        block.push_block(s5);
        Ok(block)
    }

    /// Steps `1..=steps` back to back.
    pub fn iteration(&self, steps: usize) -> Result<CircuitBlock> {
        let mut block = CircuitBlock::new("U_iter");
        for t in 1..=steps {
            block.push_block(self.step(t)?);
        }
        Ok(block)
    }
}

/// One fixed-point step on bundle `t` (see [`IrveFactory::step`]).
pub fn build_u_irve<T: Real>(spec: &RveSpec<T>, rl: &RveLayout, enc: &EncodingConfig, t: usize) -> Result<CircuitBlock> {
    IrveFactory::new(spec, rl, enc)?.step(t)
}

/// `S` fixed-point steps.
pub fn build_u_iter<T: Real>(spec: &RveSpec<T>, plan: &IterationPlan, rl: &RveLayout, enc: &EncodingConfig) -> Result<CircuitBlock> {
    IrveFactory::new(spec, rl, enc)?.iteration(plan.steps)
}

/// Ledger after `t` steps: the initial entries followed by `t` copies of the
/// step factors.
pub fn ledger_after(init: &NormalisationLedger, factors: &[(String, f64)], t: usize) -> NormalisationLedger {
    let mut l = init.clone();
    for s in 1..=t {
        for (name, f) in factors {
            l.push(format!("step {s} {name}"), *f);
        }
    }
    l
}

/// Strain field of the physical branch after `t` steps, divided by the ledger.
/// `m_value` fixes the ensemble register when present.
pub fn readout_strain<T: Real>(
    state: &StateVector<T>,
    rl: &RveLayout,
    t: usize,
    m_value: Option<usize>,
    ledger: &NormalisationLedger,
) -> Result<StrainField<f64>> {
    let np = rl.n.pow(rl.dims as u32);
    if ledger.is_zero_load() {
        return Ok(StrainField { components: vec![vec![0.0; np]; rl.dims], ledger: ledger.clone() });
    }
    let mut proj = rl.physical_projector(t);
    let m = rl.m();
    if !m.is_empty() {
        proj = proj.with_value(&m, m_value.unwrap_or(0));
    }
    let amps = state.read_amplitudes(&proj);
    let mass: f64 = amps.values().map(|a| a.norm_sqr().to_f64_lossy()).sum();
    if mass < 1e-14 {
        return Err(Error::EmptyPhysicalBranch(mass));
    }
    // free qubits in ascending order: grid qubits, then c
    let raw: Vec<Vec<f64>> = (0..rl.dims).map(|c| (0..np).map(|i| amps[&(i + c * np)].re.to_f64_lossy()).collect()).collect();
    Ok(StrainField::from_amplitudes(raw, ledger.clone()))
}

/// How the S-step solve is executed on the emulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One circuit holding all S steps (all copies prepared at once).
    Full,
    /// S one-step circuits; each starts from the field read out of the
    /// previous one. Used when the full circuit exceeds the qubit cap.
    Stepwise,
    /// Full when it fits the cap, stepwise otherwise.
    Auto,
}

/// Solver options.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub encoding: EncodingConfig,
    pub strategy: Strategy,
    pub qubit_cap: usize,
}

impl SolverConfig {
    pub fn new(encoding: EncodingConfig) -> Self {
        Self { encoding, strategy: Strategy::Auto, qubit_cap: 26 }
    }
}

/// Result of a single-cell solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `gamma^(1) .. gamma^(S)` read from the emulator.
    pub iterates: Vec<StrainField<f64>>,
    /// Homogenised stress of the last iterate (classical grid average).
    pub stress: Vec<f64>,
    /// Change between consecutive iterates, relative to the newer one.
    pub residuals: Vec<f64>,
    pub strategy: Strategy,
    pub qubits: usize,
    pub mu_fit_residual: f64,
    pub gamma_fit_residual: f64,
    /// Ledger of the final readout.
    pub ledger: NormalisationLedger,
}

/// Runs `steps` steps from `plan.initial` in one circuit, reading every
/// intermediate iterate. Returns iterates and the last ledger.
fn run_full<T: Real>(
    spec: &RveSpec<T>,
    gammabar: &[f64],
    plan: &IterationPlan,
    enc: &EncodingConfig,
) -> Result<(Vec<StrainField<f64>>, NormalisationLedger, usize, IrveFactory)> {
    let rl = RveLayout::for_config(spec.dims, spec.n, plan.steps, enc, false, 0)?;
    let init = build_u_init(spec, gammabar, plan, &rl, enc, InitWeights::Consistent)?;
    let fac = IrveFactory::new(spec, &rl, enc)?;
    let mut state = StateVector::<T>::new(&rl.layout);
    state.apply_block(&init.block)?;
    let mut out = Vec::with_capacity(plan.steps);
    let mut ledger = init.ledger.clone();
    for t in 1..=plan.steps {
        state.apply_block(&fac.step(t)?)?;
        ledger = ledger_after(&init.ledger, &fac.factors, t);
        out.push(readout_strain(&state, &rl, t, None, &ledger)?);
    }
    Ok((out, ledger, rl.num_qubits(), fac))
}

/// Solves one cell on the emulator.
pub fn solve<T: Real>(spec: &RveSpec<T>, gammabar: &[f64], plan: &IterationPlan, config: &SolverConfig) -> Result<SolveReport> {
    let enc = &config.encoding;
    let ext = enc.needs_extension(spec.dims);
    let full_q = RveLayout::qubit_count(spec.dims, spec.n, plan.steps, ext, false, 0);
    let step_q = RveLayout::qubit_count(spec.dims, spec.n, 1, ext, false, 0);
    let strategy = match config.strategy {
        Strategy::Auto if full_q <= config.qubit_cap => Strategy::Full,
        Strategy::Auto => Strategy::Stepwise,
        s => s,
    };
    let needed = if strategy == Strategy::Full { full_q } else { step_q };
    if needed > config.qubit_cap {
        return Err(Error::QubitBudget { required: needed, cap: config.qubit_cap });
    }
    let (iterates, ledger, qubits, fac) = match strategy {
        Strategy::Full => run_full(spec, gammabar, plan, enc)?,
        _ => {
            let mut iterates: Vec<StrainField<f64>> = Vec::with_capacity(plan.steps);
            let mut last = None;
            for _ in 0..plan.steps {
                let mut one = IterationPlan::new(1)?;
                one.initial = Some(iterates.last().cloned().unwrap_or_else(|| plan.initial_field(spec.num_points(), gammabar)));
                let (mut it, ledger, q, fac) = run_full(spec, gammabar, &one, enc)?;
                iterates.push(it.pop().expect("one iterate"));
                last = Some((ledger, q, fac));
            }
            let (ledger, q, fac) = last.expect("at least one step");
            (iterates, ledger, q, fac)
        }
    };
    let residuals = iterates
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let prev = if i == 0 { plan.initial_field(spec.num_points(), gammabar) } else { iterates[i - 1].clone() };
            let l2 = f.l2();
            if l2 == 0.0 {
                0.0
            } else {
                prev.relative_l2(f)
            }
        })
        .collect();
    let spec64 = RveSpec::new(spec.dims, spec.n, spec.l.to_f64_lossy(), spec.mu.iter().map(|m| m.to_f64_lossy()).collect(), fac.mu0)?;
    let stress = homogenised_stress(&spec64, iterates.last().expect("iterates"))?;
    Ok(SolveReport {
        iterates,
        stress,
        residuals,
        strategy,
        qubits,
        mu_fit_residual: fac.mu_encoding.fit_residual,
        gamma_fit_residual: fac.gamma.as_ref().map(|g| g.fit_residual).unwrap_or(0.0),
        ledger,
    })
}
