use qhomog_core::ensemble::{
    build_parallel_init, build_parallel_solve, build_stress_readout, flag_projector, solve_ensemble, subspace_slice, LoadSet, ReadoutMode,
};
use qhomog_core::model::RveSpec;
use qhomog_core::oracle::{fft_fixed_point, homogenised_stress, AnalyticBenchmark};
use qhomog_core::rve::{build_u_init, EncodingConfig, InitWeights, IrveFactory, IterationPlan, RveLayout};
use qhomog_core::transpile::{count, LowerOptions};
use qhomog_core::StateVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spec(dims: usize, n: usize, rng: &mut ChaCha8Rng) -> RveSpec<f64> {
    let np = n.pow(dims as u32);
    let mu: Vec<f64> = (0..np).map(|_| rng.gen_range(0.5..2.0)).collect();
    let spec = RveSpec::new(dims, n, 1.0, mu, 1.0).unwrap();
    let mu0 = spec.suggested_mu0();
    spec.with_mu0(mu0)
}

/// Final single-cell state on the readout layout without an ensemble register.
fn single_state(spec: &RveSpec<f64>, g: &[f64], plan: &IterationPlan, enc: &EncodingConfig) -> StateVector {
    let rl = RveLayout::for_config(spec.dims, spec.n, plan.steps, enc, true, 0).unwrap();
    let init = build_u_init(spec, g, plan, &rl, enc, InitWeights::Consistent).unwrap();
    let fac = IrveFactory::new(spec, &rl, enc).unwrap();
    let mut st = StateVector::new(&rl.layout);
    st.apply_block(&init.block).unwrap();
    st.apply_block(&fac.iteration(plan.steps).unwrap()).unwrap();
    st
}

fn ensemble_state(spec: &RveSpec<f64>, loads: &LoadSet, plan: &IterationPlan, enc: &EncodingConfig) -> (StateVector, RveLayout) {
    let rl = RveLayout::for_config(spec.dims, spec.n, plan.steps, enc, true, loads.bits()).unwrap();
    let (block, _, _) = build_parallel_solve(loads, spec, plan, &rl, enc).unwrap();
    let mut st = StateVector::new(&rl.layout);
    st.apply_block(&block).unwrap();
    (st, rl)
}

fn max_slice_gap(ens: &StateVector, bits: usize, j: usize, m: usize, single: &StateVector) -> f64 {
    let scale = (m as f64).sqrt();
    subspace_slice(ens, bits, j).iter().zip(single.amplitudes()).map(|(a, b)| (a * scale - b).norm()).fold(0.0, f64::max)
}

#[test]
fn load_set_padding_and_bits() {
    let l = LoadSet::new(1, vec![vec![0.01], vec![0.02], vec![0.03]]).unwrap();
    assert_eq!(l.len(), 4);
    assert_eq!(l.bits(), 2);
    assert_eq!(l.padded, vec![false, false, false, true]);
    assert_eq!(l.gammabars[3], vec![0.0]);
    assert_eq!(l.real_cases().count(), 3);
    let one = LoadSet::new(2, vec![vec![0.01, 0.0]]).unwrap();
    assert_eq!((one.len(), one.bits()), (1, 1));
    assert!(LoadSet::new(1, vec![vec![0.01, 0.02]]).is_err());
    assert!(LoadSet::new(1, vec![]).is_err());
}

#[test]
fn identical_loads_give_identical_init_slices() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(8).unwrap();
    let plan = IterationPlan::new(2).unwrap();
    let enc = EncodingConfig::lookup();
    let loads = LoadSet::new(1, vec![vec![0.01], vec![0.01]]).unwrap();
    let rl = RveLayout::for_config(1, 8, 2, &enc, true, 1).unwrap();
    let init = build_parallel_init(&loads, &spec, &plan, &rl, &enc).unwrap();
    let mut st = StateVector::new(&rl.layout);
    st.apply_block(&init.block).unwrap();
    let (s0, s1) = (subspace_slice(&st, 1, 0), subspace_slice(&st, 1, 1));
    let gap = s0.iter().zip(&s1).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-12);

    let single_rl = RveLayout::for_config(1, 8, 2, &enc, true, 0).unwrap();
    let single = build_u_init(&spec, &[0.01], &plan, &single_rl, &enc, InitWeights::Consistent).unwrap();
    let mut ss = StateVector::new(&single_rl.layout);
    ss.apply_block(&single.block).unwrap();
    assert!(max_slice_gap(&st, 1, 0, 2, &ss) < 1e-12);
}

#[test]
fn padded_subspaces_carry_no_load() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(8).unwrap();
    let plan = IterationPlan::new(1).unwrap();
    let enc = EncodingConfig::lookup();
    let loads = LoadSet::new(1, vec![vec![0.01], vec![0.02], vec![0.03]]).unwrap();
    let (st, rl) = ensemble_state(&spec, &loads, &plan, &enc);
    let proj = rl.physical_projector(1).with_value(&rl.m(), 3);
    assert!(st.probability(&proj) < 1e-24);
    let report = solve_ensemble(&spec, &loads, &plan, &enc, ReadoutMode::Amplitude, 26).unwrap();
    assert_eq!(report.stresses.len(), 3);
    assert_eq!(report.probabilities[3], 0.0);
}

#[test]
fn slices_match_single_solves_1d() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(16).unwrap();
    let plan = IterationPlan::new(3).unwrap();
    let enc = EncodingConfig::lookup();
    for loads in [vec![vec![0.01], vec![-0.03]], vec![vec![0.01], vec![0.02], vec![0.005], vec![-0.04]]] {
        let m = loads.len();
        let set = LoadSet::new(1, loads.clone()).unwrap();
        let (st, _) = ensemble_state(&spec, &set, &plan, &enc);
        for (j, g) in loads.iter().enumerate() {
            let single = single_state(&spec, g, &plan, &enc);
            let gap = max_slice_gap(&st, set.bits(), j, m, &single);
            assert!(gap < 1e-9, "M={m} case {j}: {gap:e}");
        }
    }
}

#[test]
fn slices_match_single_solves_2d_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let enc = EncodingConfig::lookup();
    let plan = IterationPlan::new(1).unwrap();
    let spec = random_spec(2, 4, &mut rng);
    let loads: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)]).collect();
    let set = LoadSet::new(2, loads.clone()).unwrap();
    let (st, _) = ensemble_state(&spec, &set, &plan, &enc);
    for (j, g) in loads.iter().enumerate() {
        let gap = max_slice_gap(&st, 1, j, 2, &single_state(&spec, g, &plan, &enc));
        assert!(gap < 1e-9, "case {j}: {gap:e}");
    }
}

#[test]
fn doubled_load_doubles_field_and_stress() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(16).unwrap();
    let plan = IterationPlan::new(3).unwrap();
    let enc = EncodingConfig::lookup();
    let set = LoadSet::new(1, vec![vec![0.01], vec![0.02]]).unwrap();
    let r = solve_ensemble(&spec, &set, &plan, &enc, ReadoutMode::Amplitude, 26).unwrap();
    let gap = r.strains[0].components[0].iter().zip(&r.strains[1].components[0]).map(|(a, b)| (2.0 * a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-9, "{gap:e}");
    assert!((2.0 * r.stresses[0][0] - r.stresses[1][0]).abs() < 1e-9);

    let oracle = fft_fixed_point(&spec, &[0.01], 3, None).unwrap();
    let want = homogenised_stress(&spec, &oracle[2]).unwrap()[0];
    assert!((r.stresses[0][0] - want).abs() < 1e-9, "{} vs {want}", r.stresses[0][0]);
    assert!(r.strains[0].max_abs_diff(&oracle[2]) < 1e-9);
}

#[test]
fn single_case_matches_plain_solver_with_idle_qubit() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(8).unwrap();
    let plan = IterationPlan::new(2).unwrap();
    let enc = EncodingConfig::lookup();
    let set = LoadSet::new(1, vec![vec![0.01]]).unwrap();
    let (st, rl) = ensemble_state(&spec, &set, &plan, &enc);
    assert_eq!(rl.m().len(), 1);
    let single = single_state(&spec, &[0.01], &plan, &enc);
    assert!(max_slice_gap(&st, 1, 0, 1, &single) < 1e-12);
    assert!(st.probability(&qhomog_core::Projector::new().with(rl.m()[0], true)) < 1e-24);
}

#[test]
fn homogeneous_cell_stress_equals_load() {
    let spec = RveSpec::new(1, 8, 1.0, vec![1.0; 8], 1.0).unwrap();
    let plan = IterationPlan::new(1).unwrap();
    let set = LoadSet::new(1, vec![vec![0.01], vec![0.01]]).unwrap();
    let r = solve_ensemble(&spec, &set, &plan, &EncodingConfig::lookup(), ReadoutMode::Amplitude, 26).unwrap();
    for s in &r.stresses {
        assert!((s[0] - 0.01).abs() < 1e-12);
    }
}

#[test]
fn two_dimensional_stress_readout() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = random_spec(2, 4, &mut rng);
    let plan = IterationPlan::new(1).unwrap();
    let g = vec![vec![0.02, -0.01], vec![0.0, 0.03]];
    let set = LoadSet::new(2, g.clone()).unwrap();
    let r = solve_ensemble(&spec, &set, &plan, &EncodingConfig::lookup(), ReadoutMode::Amplitude, 26).unwrap();
    for (j, gb) in g.iter().enumerate() {
        let it = fft_fixed_point(&spec, gb, 1, None).unwrap();
        let want = homogenised_stress(&spec, &it[0]).unwrap();
        for c in 0..2 {
            assert!((r.stresses[j][c] - want[c]).abs() < 1e-9, "case {j} comp {c}");
        }
    }
}

#[test]
fn probabilities_equal_squared_amplitudes() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(16).unwrap();
    let plan = IterationPlan::new(2).unwrap();
    let enc = EncodingConfig::lookup();
    let set = LoadSet::new(1, vec![vec![0.01], vec![0.02]]).unwrap();
    let r = solve_ensemble(&spec, &set, &plan, &enc, ReadoutMode::Amplitude, 26).unwrap();
    for j in 0..2 {
        let amp = r.stresses[j][0] * r.stress_ledgers[j].product();
        assert!((r.probabilities[j] - amp * amp).abs() < 1e-12);
    }

    let (mut st, rl) = ensemble_state(&spec, &set, &plan, &enc);
    st.apply_block(&build_stress_readout(&spec, &rl, &enc).unwrap().block).unwrap();
    for j in 0..2 {
        let (_, p) = st.project_and_probability(&flag_projector(&rl, j)).unwrap();
        assert!((p - r.probabilities[j]).abs() < 1e-12);
    }
}

#[test]
fn sampling_estimates_within_three_standard_errors() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(8).unwrap();
    let plan = IterationPlan::new(1).unwrap();
    let enc = EncodingConfig::lookup();
    let set = LoadSet::new(1, vec![vec![0.4], vec![0.8]]).unwrap();
    let exact = solve_ensemble(&spec, &set, &plan, &enc, ReadoutMode::Amplitude, 26).unwrap();
    let shots = 1_000_000u64;
    let sampled = solve_ensemble(&spec, &set, &plan, &enc, ReadoutMode::Sampling { shots, seed: 7 }, 26).unwrap();
    for j in 0..2 {
        let f = exact.stress_ledgers[j].product();
        let p = exact.probabilities[j];
        let p_hat = (sampled.stresses[j][0] * f).powi(2);
        let se = (p * (1.0 - p) / shots as f64).sqrt();
        assert!((p_hat - p).abs() <= 3.0 * se, "case {j}: {p_hat} vs {p} (se {se:e})");
    }
}

#[test]
fn init_cost_carries_the_ensemble_growth() {
    let spec = AnalyticBenchmark::standard(1).spec::<f64>(16).unwrap();
    let plan = IterationPlan::new(2).unwrap();
    let enc = EncodingConfig::lookup();
    let counts = |m: usize| {
        let set = LoadSet::new(1, vec![vec![0.01]; m]).unwrap();
        let rl = RveLayout::for_config(1, 16, 2, &enc, true, set.bits()).unwrap();
        let (mut block, _, _) = build_parallel_solve(&set, &spec, &plan, &rl, &enc).unwrap();
        block.push_block(build_stress_readout(&spec, &rl, &enc).unwrap().block);
        let opts = LowerOptions { work_qubit: Some(rl.work()), num_qubits: rl.num_qubits() };
        count(&block, opts).unwrap()
    };
    let (c1, c4) = (counts(1), counts(4));
    let iter = |r: &qhomog_core::transpile::GateCountReport| r.subblock_total("U_iter");
    let readout = |r: &qhomog_core::transpile::GateCountReport| r.subblock_total("U_readout");
    let init = |r: &qhomog_core::transpile::GateCountReport| r.subblock_total("U_init_parallel");
    assert_eq!(iter(&c1), iter(&c4));
    let diff = c4.total - c1.total;
    let (i1, i4) = (init(&c1), init(&c4));
    let (r1, r4) = (readout(&c1), readout(&c4));
    assert_eq!(diff, (i4.0 + i4.1 + r4.0 + r4.1) - (i1.0 + i1.1 + r1.0 + r1.1));
}
