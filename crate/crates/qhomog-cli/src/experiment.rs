//! Experiment runner: builds the cells of a config, runs or counts the
//! circuits for every sweep point and writes the CSV files.

use std::path::{Path, PathBuf};
use std::thread;

use anyhow::{Context, Result};
use qhomog_core::ensemble::{build_parallel_solve, build_stress_readout, solve_ensemble, LoadSet, ReadoutMode};
use qhomog_core::model::{RveSpec, StrainField};
use qhomog_core::oracle::{fft_fixed_point, homogenised_stress, AnalyticBenchmark};
use qhomog_core::rve::{build_u_init, build_u_iter, solve, InitWeights, IrveFactory, IterationPlan, RveLayout, SolverConfig, Strategy};
use qhomog_core::scaling::{doubling_ratios, fit_ensemble, fit_polylog};
use qhomog_core::transpile::{count, GateCountReport, LowerOptions};
use qhomog_core::CircuitBlock;

use crate::config::{ExperimentConfig, Kind, MaterialModel, Mode};
use crate::io;

/// Command-line overrides of a run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Human-readable summary lines and the files written.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    fn file(&mut self, path: PathBuf) -> &Path {
        self.files.push(path);
        self.files.last().expect("just pushed")
    }
}

/// Cell of grid size `n` and, for the benchmark, its closed form.
pub fn build_cell(cfg: &ExperimentConfig, n: usize) -> Result<(RveSpec<f64>, Option<AnalyticBenchmark>)> {
    let m = &cfg.material;
    match m.model {
        MaterialModel::Benchmark => {
            let bench = AnalyticBenchmark { dims: cfg.dims, l: m.length, mu0: m.mu0.unwrap_or(1.0), alpha: m.alpha, gammabar: cfg.gammabar() };
            Ok((bench.spec::<f64>(n)?, Some(bench)))
        }
        MaterialModel::Csv => {
            let path = cfg.resolve(m.mu_csv.as_deref().expect("validated"));
            let mu = io::read_modulus(&path, cfg.dims, n)?;
            let spec = RveSpec::new(cfg.dims, n, m.length, mu, 1.0)?;
            let mu0 = m.mu0.unwrap_or_else(|| spec.suggested_mu0());
            Ok((spec.with_mu0(mu0), None))
        }
    }
}

/// Field the errors are measured against.
fn reference(cfg: &ExperimentConfig, spec: &RveSpec<f64>, bench: Option<&AnalyticBenchmark>) -> Result<StrainField<f64>> {
    match bench {
        Some(b) => Ok(b.sampled(spec.n)),
        None => Ok(fft_fixed_point(spec, &cfg.gammabar(), cfg.reference_steps, None)?.pop().expect("at least one step")),
    }
}

fn lower_opts(rl: &RveLayout) -> LowerOptions {
    LowerOptions { work_qubit: Some(rl.work()), num_qubits: rl.num_qubits() }
}

/// Gate counts of initial-state preparation followed by all S steps.
pub fn single_counts(cfg: &ExperimentConfig, spec: &RveSpec<f64>) -> Result<GateCountReport> {
    let enc = cfg.encoding_config();
    let rl = RveLayout::for_config(cfg.dims, spec.n, cfg.steps, &enc, false, 0)?;
    let plan = IterationPlan::new(cfg.steps)?;
    let init = build_u_init(spec, &cfg.gammabar(), &plan, &rl, &enc, InitWeights::Consistent)?;
    let mut block = CircuitBlock::new("solve");
    block.push_block(init.block).push_block(build_u_iter(spec, &plan, &rl, &enc)?);
    Ok(count(&block, lower_opts(&rl))?)
}

/// Gate counts of a full ensemble solve with stress readout.
pub fn ensemble_counts(cfg: &ExperimentConfig, spec: &RveSpec<f64>, loads: &LoadSet) -> Result<GateCountReport> {
    let enc = cfg.encoding_config();
    let rl = RveLayout::for_config(cfg.dims, spec.n, cfg.steps, &enc, true, loads.bits())?;
    let plan = IterationPlan::new(cfg.steps)?;
    let (mut block, _, _) = build_parallel_solve(loads, spec, &plan, &rl, &enc)?;
    block.push_block(build_stress_readout(spec, &rl, &enc)?.block);
    Ok(count(&block, lower_opts(&rl))?)
}

/// Runs `f` on every item on its own thread and returns results in order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    thread::scope(|s| {
        let handles: Vec<_> = items.iter().map(|it| s.spawn(|| f(it))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn report_steps(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.report_steps.clone().unwrap_or_else(|| (1..=cfg.steps).collect())
}

/// Polynomial coefficients of the modulus encoding as `i[,j],coefficient`.
fn write_fit(path: &Path, cfg: &ExperimentConfig, spec: &RveSpec<f64>) -> Result<Option<f64>> {
    let enc = cfg.encoding_config();
    let rl = RveLayout::for_config(cfg.dims, spec.n, 1, &enc, false, 0)?;
    let fac = IrveFactory::new(spec, &rl, &enc)?;
    let Some(fit) = &fac.mu_encoding.fit else { return Ok(None) };
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["i"];
    if fit.variables == 2 {
        header.push("j");
    }
    header.push("coefficient");
    w.write_record(&header)?;
    let d0 = fit.degrees[0] + 1;
    for (idx, c) in fit.coefficients.iter().enumerate() {
        let mut rec = vec![(idx % d0).to_string()];
        if fit.variables == 2 {
            rec.push((idx / d0).to_string());
        }
        rec.push(c.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(Some(fac.mu_encoding.fit_residual))
}

struct SinglePoint {
    n: usize,
    counts: GateCountReport,
    qubits: usize,
    executed: Option<(qhomog_core::rve::SolveReport, StrainField<f64>)>,
}

fn run_single(cfg: &ExperimentConfig, opts: &RunOptions, summary: &mut RunSummary) -> Result<()> {
    let enc = cfg.encoding_config();
    let points = par_map(&cfg.grid, |&n| -> Result<SinglePoint> {
        let (spec, bench) = build_cell(cfg, n)?;
        let counts = single_counts(cfg, &spec).with_context(|| format!("counting N={n}"))?;
        let qubits = RveLayout::qubit_count(cfg.dims, n, cfg.steps, enc.needs_extension(cfg.dims), false, 0);
        let executed = if cfg.executes(n, opts.mode) {
            let config = SolverConfig { encoding: enc.clone(), strategy: Strategy::Auto, qubit_cap: cfg.qubit_cap };
            let plan = IterationPlan::new(cfg.steps)?;
            let report = solve(&spec, &cfg.gammabar(), &plan, &config).with_context(|| format!("executing N={n}"))?;
            Some((report, reference(cfg, &spec, bench.as_ref())?))
        } else {
            None
        };
        Ok(SinglePoint { n, counts, qubits, executed })
    })?;

    let out = &opts.out_dir;
    let mut errors = Vec::new();
    for p in &points {
        let mut line = format!("N={}: {} qubits (full circuit), {} CNOT + {} U3", p.n, p.qubits, p.counts.cnot_count, p.counts.u3_count);
        if let Some((report, exact)) = &p.executed {
            let iterates: Vec<(usize, &StrainField<f64>)> = report_steps(cfg).into_iter().map(|s| (s, &report.iterates[s - 1])).collect();
            io::write_strain(summary.file(out.join(format!("strain_N{}.csv", p.n))), p.n, cfg.material.length, &iterates, cfg.slice_x1)?;
            for (s, f) in report.iterates.iter().enumerate() {
                errors.push((p.n, s + 1, f.relative_l2(exact)));
            }
            let stress: Vec<String> = report.stress.iter().map(|v| format!("{v:.6e}")).collect();
            line.push_str(&format!(
                "; executed {:?} on {} qubits, final error {:.3e}, stress [{}]",
                report.strategy,
                report.qubits,
                report.iterates.last().expect("steps >= 1").relative_l2(exact),
                stress.join(", ")
            ));
        } else {
            line.push_str("; count only");
        }
        let (spec, _) = build_cell(cfg, p.n)?;
        if let Some(res) = write_fit(summary.file(out.join(format!("fit_mu_N{}.csv", p.n))), cfg, &spec)? {
            line.push_str(&format!(", modulus fit residual {res:.3e}"));
        } else {
            summary.files.pop();
        }
        summary.lines.push(line);
    }
    if !errors.is_empty() {
        io::write_errors(summary.file(out.join("error.csv")), &errors)?;
    }
    let rows: Vec<(usize, GateCountReport)> = points.into_iter().map(|p| (p.n, p.counts)).collect();
    io::write_counts(summary.file(out.join("counts.csv")), &rows)?;
    let pts: Vec<(usize, f64)> = rows.iter().map(|(n, r)| (*n, r.total as f64)).collect();
    summary.lines.push(fit_report(&pts));
    Ok(())
}

fn load_set(cfg: &ExperimentConfig) -> Result<LoadSet> {
    let e = cfg.ensemble.as_ref().expect("validated");
    match (&e.loads, &e.loads_csv) {
        (Some(l), _) => Ok(LoadSet::new(cfg.dims, l.clone())?),
        (_, Some(p)) => io::read_loads(&cfg.resolve(p), cfg.dims),
        _ => unreachable!("validated"),
    }
}

/// `m` cases cycling through the configured loads.
fn cycled(loads: &LoadSet, dims: usize, m: usize) -> Result<LoadSet> {
    let real: Vec<usize> = loads.real_cases().collect();
    Ok(LoadSet::new(dims, (0..m).map(|j| loads.gammabars[real[j % real.len()]].clone()).collect())?)
}

fn run_ensemble(cfg: &ExperimentConfig, opts: &RunOptions, summary: &mut RunSummary) -> Result<()> {
    let e = cfg.ensemble.as_ref().expect("validated");
    let loads = load_set(cfg)?;
    let enc = cfg.encoding_config();
    let out = &opts.out_dir;
    let mode = if e.shots > 0 { ReadoutMode::Sampling { shots: e.shots, seed: opts.seed } } else { ReadoutMode::Amplitude };

    let exec_grid: Vec<usize> = cfg.grid.iter().copied().filter(|&n| cfg.executes(n, opts.mode)).collect();
    let reports = par_map(&exec_grid, |&n| {
        let (spec, _) = build_cell(cfg, n)?;
        let plan = IterationPlan::new(cfg.steps)?;
        let r = solve_ensemble(&spec, &loads, &plan, &enc, mode, cfg.qubit_cap).with_context(|| format!("executing ensemble at N={n}"))?;
        let oracle: Vec<Vec<f64>> = loads
            .real_cases()
            .map(|j| {
                let it = fft_fixed_point(&spec, &loads.gammabars[j], cfg.steps, None)?;
                homogenised_stress(&spec, it.last().expect("steps >= 1"))
            })
            .collect::<qhomog_core::Result<_>>()?;
        Ok((n, r, oracle))
    })?;
    for (n, r, oracle) in &reports {
        io::write_ensemble(summary.file(out.join(format!("ensemble_N{n}.csv"))), r)?;
        for (j, label) in r.labels.iter().enumerate() {
            io::write_strain(summary.file(out.join(format!("strain_N{n}_{label}.csv"))), *n, cfg.material.length, &[(cfg.steps, &r.strains[j])], cfg.slice_x1)?;
            summary.lines.push(format!(
                "N={n} case {label}: stress {:?} (classical {:?}), p = {:.6e}",
                r.stresses[j], oracle[j], r.probabilities[j]
            ));
        }
        summary.lines.push(format!("N={n}: {} cases on {} qubits", r.labels.len(), r.qubits));
    }

    let pairs: Vec<(usize, usize)> = e.count_grid.iter().flat_map(|&n| e.m_sweep.iter().map(move |&m| (n, m))).collect();
    let counts = par_map(&pairs, |&(n, m)| {
        let (spec, _) = build_cell(cfg, n)?;
        ensemble_counts(cfg, &spec, &cycled(&loads, cfg.dims, m)?).with_context(|| format!("counting N={n} M={m}"))
    })?;
    for &n in &e.count_grid {
        let rows: Vec<(usize, GateCountReport)> =
            pairs.iter().zip(&counts).filter(|((pn, _), _)| *pn == n).map(|((_, m), r)| (*m, r.clone())).collect();
        io::write_counts(summary.file(out.join(format!("counts_M_N{n}.csv"))), &rows)?;
        let pts: Vec<(usize, f64)> = rows.iter().map(|(m, r)| (*m, r.total as f64)).collect();
        summary.lines.push(format!("N={n}: {}", fit_report(&pts)));
    }
    Ok(())
}

/// Runs an experiment and writes its CSV files into `opts.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    std::fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let mut summary = RunSummary::default();
    summary.lines.push(format!("experiment {} ({:?} mode)", cfg.name, opts.mode));
    match cfg.kind {
        Kind::Single => run_single(cfg, opts, &mut summary)?,
        Kind::Ensemble => run_ensemble(cfg, opts, &mut summary)?,
    }
    let text = summary.lines.join("\n") + "\n";
    let path = opts.out_dir.join("summary.txt");
    std::fs::write(&path, text)?;
    summary.files.push(path);
    Ok(summary)
}

/// Classical fixed-point solve of every grid size of a config.
pub fn run_oracle(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let mut summary = RunSummary::default();
    let mut errors = Vec::new();
    for &n in &cfg.grid {
        let (spec, bench) = build_cell(cfg, n)?;
        let it = fft_fixed_point(&spec, &cfg.gammabar(), cfg.steps, None)?;
        let exact = reference(cfg, &spec, bench.as_ref())?;
        let iterates: Vec<(usize, &StrainField<f64>)> = report_steps(cfg).into_iter().map(|s| (s, &it[s - 1])).collect();
        io::write_strain(summary.file(out_dir.join(format!("strain_N{n}.csv"))), n, cfg.material.length, &iterates, cfg.slice_x1)?;
        for (s, f) in it.iter().enumerate() {
            errors.push((n, s + 1, f.relative_l2(&exact)));
        }
        let last = it.last().expect("steps >= 1");
        summary.lines.push(format!(
            "N={n}: error after {} steps {:.3e}, homogenised stress {:?}",
            cfg.steps,
            last.relative_l2(&exact),
            homogenised_stress(&spec, last)?
        ));
    }
    io::write_errors(summary.file(out_dir.join("error.csv")), &errors)?;
    Ok(summary)
}

/// Doubling ratios and both scaling fits of `(index, total)` points.
pub fn fit_report(points: &[(usize, f64)]) -> String {
    let mut parts = Vec::new();
    let ratios: Vec<String> = doubling_ratios(points).iter().map(|(i, r)| format!("{i}->{}: {r:.3}", 2 * i)).collect();
    if !ratios.is_empty() {
        parts.push(format!("doubling ratios [{}]", ratios.join(", ")));
    }
    match fit_polylog(points) {
        Ok(f) => parts.push(format!("a*(log2 x)^c: a={:.4} c={:.3} R^2={:.4}", f.a, f.c, f.r_squared)),
        Err(e) => parts.push(format!("a*(log2 x)^c: {e}")),
    }
    match fit_ensemble(points) {
        Ok(f) => parts.push(format!("a*x*(log2 x)^c+b: a={:.4} b={:.1} c={:.3} R^2={:.4}", f.a, f.b, f.c, f.r_squared)),
        Err(e) => parts.push(format!("a*x*(log2 x)^c+b: {e}")),
    }
    parts.join("; ")
}
