//! Several cells with identical material and grid solved at once in
//! orthogonal subspaces of an ensemble register `m`, followed by a readout of
//! each cell's homogenised stress through the zero Fourier mode.
//!
//! Each load case `j` gets its own initial state, controlled on `m = j`.
//! The fixed-point iteration itself is shared and uncontrolled, so its cost
//! does not grow with the number of cases.

use crate::circuit::CircuitBlock;
use crate::error::{Error, Result};
use crate::gate::{Control, Gate};
use crate::model::{NormalisationLedger, RveSpec, StrainField};
use crate::poly::{EncodedFunction, EncodingTarget};
use crate::rve::{build_u_init, ledger_after, readout_strain, EncodingConfig, InitWeights, IrveFactory, IterationPlan, RveLayout};
use crate::scalar::Real;
use crate::statevector::{Projector, StateVector};
use num_complex::Complex64;

/// Macroscopic strains of the load cases, padded with zero loads up to a
/// power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSet {
    pub dims: usize,
    pub gammabars: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// True for the zero loads added by padding.
    pub padded: Vec<bool>,
}

impl LoadSet {
    /// Loads labelled `0, 1, ...`.
    pub fn new(dims: usize, loads: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..loads.len()).map(|i| i.to_string()).collect();
        Self::with_labels(dims, loads, labels)
    }

    pub fn with_labels(dims: usize, loads: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if loads.is_empty() {
            return Err(Error::Config("a load set needs at least one case".into()));
        }
        if labels.len() != loads.len() {
            return Err(Error::Shape(format!("{} labels for {} loads", labels.len(), loads.len())));
        }
        if let Some(g) = loads.iter().find(|g| g.len() != dims) {
            return Err(Error::Shape(format!("load with {} components in a {dims}D set", g.len())));
        }
        let real = loads.len();
        let m = real.next_power_of_two();
        let mut gammabars = loads;
        let mut labels = labels;
        gammabars.resize(m, vec![0.0; dims]);
        labels.extend((real..m).map(|i| format!("pad{i}")));
        let padded = (0..m).map(|i| i >= real).collect();
        Ok(Self { dims, gammabars, labels, padded })
    }

    /// Number of subspaces (a power of two).
    pub fn len(&self) -> usize {
        self.gammabars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammabars.is_empty()
    }

    /// Qubits of the ensemble register; a single case still gets one (idle) qubit.
    pub fn bits(&self) -> usize {
        (self.len().trailing_zeros() as usize).max(1)
    }

    /// Indices of the cases that are not padding.
    pub fn real_cases(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&j| !self.padded[j])
    }
}

/// Ensemble initial state and the per-case ledgers of its amplitudes.
#[derive(Debug, Clone)]
pub struct ParallelInit {
    pub block: CircuitBlock,
    /// Ledger of each subspace's physical branch, including `1/sqrt(M)`.
    pub ledgers: Vec<NormalisationLedger>,
}

/// Equal superposition over `m`, then each case's initial state controlled
/// on its binary index.
pub fn build_parallel_init<T: Real>(
    loads: &LoadSet,
    spec: &RveSpec<T>,
    plan: &IterationPlan,
    rl: &RveLayout,
    enc: &EncodingConfig,
) -> Result<ParallelInit> {
    let m = rl.m();
    if m.len() != loads.bits() {
        return Err(Error::Config(format!("layout has {} ensemble qubits, load set needs {}", m.len(), loads.bits())));
    }
    if loads.dims != spec.dims {
        return Err(Error::Shape("load set and cell disagree on the dimension".into()));
    }
    // a single case leaves its (idle) ensemble qubit at |0>
    let superpose = loads.len() > 1;
    let mut block = CircuitBlock::new("U_init_parallel");
    if superpose {
        let mut hadamards = CircuitBlock::new("superposition");
        hadamards.extend_gates(m.iter().map(|&q| Gate::h(q)));
        block.push_block(hadamards);
    }
    let amp = 1.0 / (loads.len() as f64).sqrt();
    let mut ledgers = Vec::with_capacity(loads.len());
    for (j, g) in loads.gammabars.iter().enumerate() {
        let init = build_u_init(spec, g, plan, rl, enc, InitWeights::Consistent)?;
        let ctrl = Control::pattern(&m, j);
        block.push_block(init.block.controlled(&ctrl).named(format!("U_init_{j}")));
        let mut ledger = NormalisationLedger::default();
        if superpose {
            ledger.push("ensemble", amp);
        }
        for (name, f) in &init.ledger.factors {
            ledger.push(name.clone(), *f);
        }
        ledgers.push(ledger);
    }
    Ok(ParallelInit { block, ledgers })
}

/// Parallel initialisation followed by one shared, uncontrolled iteration.
pub fn build_parallel_solve<T: Real>(
    loads: &LoadSet,
    spec: &RveSpec<T>,
    plan: &IterationPlan,
    rl: &RveLayout,
    enc: &EncodingConfig,
) -> Result<(CircuitBlock, ParallelInit, IrveFactory)> {
    let init = build_parallel_init(loads, spec, plan, rl, enc)?;
    let fac = IrveFactory::new(spec, rl, enc)?;
    let mut block = CircuitBlock::new("U_parallel");
    block.push_block(init.block.clone());
    block.push_block(fac.iteration(plan.steps)?);
    Ok((block, init, fac))
}

/// Stress readout block and the encoding of the modulus it uses.
#[derive(Debug, Clone)]
pub struct StressReadout {
    pub block: CircuitBlock,
    pub sigma: EncodedFunction,
}

/// Multiplies the physical field by `mu / lambda` on the `r` qubit, moves the
/// grid to Fourier space and flags the zero mode of the fully successful
/// branch on `a`. The flagged amplitude of case `j`, component `c` is
/// `a_S N^(dims/2) sigma_bar_c / (lambda sqrt(M))`.
pub fn build_stress_readout<T: Real>(spec: &RveSpec<T>, rl: &RveLayout, enc: &EncodingConfig) -> Result<StressReadout> {
    let (r, a) = match (rl.r(), rl.a()) {
        (Some(r), Some(a)) => (r, a),
        _ => return Err(Error::Config("layout has no readout qubits".into())),
    };
    let mu: Vec<f64> = spec.mu.iter().map(|m| m.to_f64_lossy()).collect();
    let sigma = EncodedFunction::new(&mu, &vec![spec.n; spec.dims], &enc.sigma)?;
    let regs = rl.k_registers();
    let mut block = CircuitBlock::new("U_readout");
    block.push_block(sigma.block("stress_encoding", &EncodingTarget::new(regs.clone(), r))?);
    let mut qft = CircuitBlock::new("readout_qft");
    for reg in &regs {
        qft.push(Gate::qft(reg.clone(), false));
    }
    block.push_block(qft);
    let mut ctrl = vec![Control::off(rl.e()), Control::off(rl.d()), Control::on(r)];
    for t in 1..=rl.steps {
        ctrl.extend(rl.bundle(t).success());
    }
    ctrl.extend(rl.k().into_iter().map(Control::off));
    let mut flag = CircuitBlock::new("zero_mode_flag");
    flag.push(Gate::mcx(ctrl, a));
    block.push_block(flag);
    Ok(StressReadout { block, sigma })
}

/// How the stresses are extracted from the final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutMode {
    /// Signed amplitudes read directly from the emulator.
    Amplitude,
    /// Magnitudes estimated from seeded shot sampling of `(a, m, c)`.
    Sampling { shots: u64, seed: u64 },
}

/// Per-case results of an ensemble solve.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub labels: Vec<String>,
    /// Homogenised stress per real case, one value per component.
    pub stresses: Vec<Vec<f64>>,
    /// Probability `p(j)` of finding the flag set in subspace `j`.
    pub probabilities: Vec<f64>,
    /// Strain fields read before the stress readout.
    pub strains: Vec<StrainField<f64>>,
    /// Ledger turning a flagged amplitude of each case into a stress.
    pub stress_ledgers: Vec<NormalisationLedger>,
    pub qubits: usize,
}

/// Projector onto the flagged outcome of subspace `j` (component left free).
pub fn flag_projector(rl: &RveLayout, j: usize) -> Projector {
    let mut p = Projector::new().with_value(&rl.m(), j);
    if let Some(a) = rl.a() {
        p = p.with(a, true);
    }
    p
}

fn flagged_amplitudes<T: Real>(state: &StateVector<T>, rl: &RveLayout, j: usize) -> Vec<f64> {
    let mut p = flag_projector(rl, j).with(rl.e(), false).with(rl.d(), false).with(rl.work(), false);
    p = p.with(rl.r().expect("readout layout"), true).with_value(&rl.k(), 0);
    for t in 1..=rl.steps {
        let b = rl.bundle(t);
        p = p.with_value(&b.qubits(), b.success_value());
    }
    if let Some((x0, x1)) = rl.ext() {
        p = p.with(x0, false).with(x1, false);
    }
    let amps = state.read_amplitudes(&p);
    (0..rl.dims).map(|c| amps.get(&c).map(|a| a.re.to_f64_lossy()).unwrap_or(0.0)).collect()
}

/// Stresses and probabilities of every real case from the post-readout state.
pub fn extract_report<T: Real>(
    state: &StateVector<T>,
    loads: &LoadSet,
    rl: &RveLayout,
    ledgers: &[NormalisationLedger],
    mode: ReadoutMode,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let probabilities: Vec<f64> = (0..loads.len()).map(|j| state.probability(&flag_projector(rl, j))).collect();
    let sampled = match mode {
        ReadoutMode::Amplitude => None,
        ReadoutMode::Sampling { shots, seed } => {
            let mut qubits = vec![rl.a().expect("readout layout")];
            qubits.extend(rl.m());
            qubits.extend(rl.c());
            Some((state.sample(&qubits, shots, seed), shots as f64))
        }
    };
    let bits = rl.m().len();
    let mut stresses = Vec::new();
    for j in loads.real_cases() {
        let ledger = &ledgers[j];
        if ledger.is_zero_load() {
            stresses.push(vec![0.0; rl.dims]);
            continue;
        }
        let f = ledger.product();
        let values = match &sampled {
            None => flagged_amplitudes(state, rl, j).into_iter().map(|a| a / f).collect(),
            Some((counts, shots)) => (0..rl.dims)
                .map(|c| {
                    let key = 1 | j << 1 | c << (1 + bits);
                    (counts[key] as f64 / shots).sqrt() / f.abs()
                })
                .collect(),
        };
        stresses.push(values);
    }
    Ok((stresses, probabilities))
}

/// Builds, runs and reads out an ensemble solve on the emulator.
pub fn solve_ensemble<T: Real>(
    spec: &RveSpec<T>,
    loads: &LoadSet,
    plan: &IterationPlan,
    enc: &EncodingConfig,
    mode: ReadoutMode,
    qubit_cap: usize,
) -> Result<EnsembleReport> {
    let rl = RveLayout::for_config(spec.dims, spec.n, plan.steps, enc, true, loads.bits())?;
    if rl.num_qubits() > qubit_cap {
        return Err(Error::QubitBudget { required: rl.num_qubits(), cap: qubit_cap });
    }
    let (solve, init, fac) = build_parallel_solve(loads, spec, plan, &rl, enc)?;
    let mut state = StateVector::<T>::new(&rl.layout);
    state.apply_block(&solve)?;
    let mut strains = Vec::new();
    let mut stress_ledgers = Vec::new();
    let readout = build_stress_readout(spec, &rl, enc)?;
    let np = (spec.n.pow(spec.dims as u32)) as f64;
    for j in 0..loads.len() {
        let ledger = ledger_after(&init.ledgers[j], &fac.factors, plan.steps);
        if !loads.padded[j] {
            strains.push(readout_strain(&state, &rl, plan.steps, Some(j), &ledger)?);
        }
        let mut sl = ledger;
        sl.push("zero mode", np.sqrt());
        sl.push("stress scale", 1.0 / readout.sigma.scale);
        stress_ledgers.push(sl);
    }
    state.apply_block(&readout.block)?;
    let (stresses, probabilities) = extract_report(&state, loads, &rl, &stress_ledgers, mode)?;
    Ok(EnsembleReport {
        labels: loads.real_cases().map(|j| loads.labels[j].clone()).collect(),
        stresses,
        probabilities,
        strains,
        stress_ledgers: loads.real_cases().map(|j| stress_ledgers[j].clone()).collect(),
        qubits: rl.num_qubits(),
    })
}

/// Amplitudes of subspace `j` of an ensemble state with `bits` ensemble
/// qubits at the bottom of the layout.
pub fn subspace_slice<T: Real>(state: &StateVector<T>, bits: usize, j: usize) -> Vec<Complex64> {
    let amps = state.amplitudes();
    (0..amps.len() >> bits)
        .map(|i| {
            let a = amps[i << bits | j];
            Complex64::new(a.re.to_f64_lossy(), a.im.to_f64_lossy())
        })
        .collect()
}
