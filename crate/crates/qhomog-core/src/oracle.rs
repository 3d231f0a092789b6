//! Classical reference: the Moulinec–Suquet FFT fixed-point scheme and the
//! closed-form benchmark solutions.
//!
//! Transform convention: the forward DFT is unnormalised and the inverse
//! carries `1 / N^dims`, so the zero mode of a field with mean `g` is
//! `g * N^dims`.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{RveSpec, StrainField};
use crate::poly::relabel_unchecked as relabel;
use crate::scalar::Real;

/// In-place multidimensional DFT over a grid stored first-coordinate-fastest.
pub struct GridFft<T: Real> {
    n: usize,
    dims: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> GridFft<T> {
    pub fn new(n: usize, dims: usize) -> Self {
        let mut p = FftPlanner::new();
        Self { n, dims, forward: p.plan_fft_forward(n), inverse: p.plan_fft_inverse(n) }
    }

    fn run(&self, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let n = self.n;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for d in 0..self.dims {
            let stride = n.pow(d as u32);
            for base in 0..data.len() {
                if (base / stride) % n != 0 {
                    continue;
                }
                for j in 0..n {
                    buf[j] = data[base + j * stride];
                }
                fft.process(&mut buf);
                for j in 0..n {
                    data[base + j * stride] = buf[j];
                }
            }
        }
    }

    /// Unnormalised forward transform.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1 / N^dims` factor.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.inverse);
        let s = T::one() / T::from_usize(data.len()).unwrap();
        data.iter_mut().for_each(|v| *v = *v * s);
    }
}

/// One fixed-point step `gamma -> gammabar + Gamma * ((mu - mu0) gamma)`.
pub fn oracle_step<T: Real>(spec: &RveSpec<T>, gamma: &StrainField<T>, gammabar: &[T], fft: &GridFft<T>) -> Result<StrainField<T>> {
    let (n, dims, np) = (spec.n, spec.dims, spec.num_points());
    if gamma.dims() != dims || gammabar.len() != dims || gamma.components.iter().any(|c| c.len() != np) {
        return Err(Error::Shape("strain field does not match the cell".into()));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut tau: Vec<Vec<Complex<T>>> = gamma
        .components
        .iter()
        .map(|c| c.iter().zip(&spec.mu).map(|(g, m)| Complex::new((*m - spec.mu0) * *g, T::zero())).collect())
        .collect();
    for t in tau.iter_mut() {
        fft.forward(t);
    }
    let mut out = vec![vec![zero; np]; dims];
    let inv_mu0 = T::one() / spec.mu0;
    for i in 0..np {
        if i == 0 {
            for c in 0..dims {
                out[c][0] = Complex::new(gammabar[c] * T::from_usize(np).unwrap(), T::zero());
            }
            continue;
        }
        if dims == 1 {
            out[0][i] = -tau[0][i] * inv_mu0;
        } else {
            let xi = [T::from_i64(relabel(i % n, n)).unwrap(), T::from_i64(relabel(i / n, n)).unwrap()];
            let den = xi[0] * xi[0] + xi[1] * xi[1];
            // off-diagonal coupling dropped on the Nyquist lines, as in the
            // Green's operator encoding
            let keep = if crate::greens::nyquist_line(i % n, i / n, n) { T::zero() } else { T::one() };
            let f = inv_mu0 / den;
            out[0][i] = -(tau[0][i] * xi[0] * xi[0] + tau[1][i] * xi[0] * xi[1] * keep) * f;
            out[1][i] = -(tau[0][i] * xi[0] * xi[1] * keep + tau[1][i] * xi[1] * xi[1]) * f;
        }
    }
    let components = out
        .into_iter()
        .map(|mut c| {
            fft.inverse(&mut c);
            c.into_iter().map(|v| v.re).collect()
        })
        .collect();
    Ok(StrainField::new(components))
}

/// Runs `s` fixed-point steps from `initial` (uniform `gammabar` when `None`)
/// and returns every iterate `gamma^(1) .. gamma^(s)`.
pub fn fft_fixed_point<T: Real>(spec: &RveSpec<T>, gammabar: &[T], s: usize, initial: Option<&StrainField<T>>) -> Result<Vec<StrainField<T>>> {
    let fft = GridFft::new(spec.n, spec.dims);
    let mut cur = match initial {
        Some(f) => f.clone(),
        None => StrainField::uniform(gammabar, spec.num_points()),
    };
    let mut out = Vec::with_capacity(s);
    for _ in 0..s {
        cur = oracle_step(spec, &cur, gammabar, &fft)?;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Grid average of `mu * gamma`, one entry per component.
pub fn homogenised_stress<T: Real>(spec: &RveSpec<T>, strain: &StrainField<T>) -> Result<Vec<T>> {
    if strain.components.iter().any(|c| c.len() != spec.mu.len()) {
        return Err(Error::Shape("strain and modulus grids differ".into()));
    }
    Ok(strain
        .components
        .iter()
        .map(|c| c.iter().zip(&spec.mu).fold(T::zero(), |a, (g, m)| a + *g * *m) / T::from_usize(c.len()).unwrap())
        .collect())
}

/// L2 norm of the spectral divergence of `mu * gamma`, relative to ||mu * gamma||.
pub fn equilibrium_residual<T: Real>(spec: &RveSpec<T>, strain: &StrainField<T>) -> T {
    let fft = GridFft::new(spec.n, spec.dims);
    let np = spec.num_points();
    let zero = Complex::new(T::zero(), T::zero());
    let mut div = vec![zero; np];
    let mut norm = T::zero();
    for (c, comp) in strain.components.iter().enumerate() {
        let mut s: Vec<Complex<T>> = comp.iter().zip(&spec.mu).map(|(g, m)| Complex::new(*g * *m, T::zero())).collect();
        norm += s.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b);
        fft.forward(&mut s);
        for (i, v) in s.iter().enumerate() {
            let k = (i / spec.n.pow(c as u32)) % spec.n;
            let r = relabel(k, spec.n);
            // drop the unpaired Nyquist mode, whose derivative is ambiguous
            if 2 * r.unsigned_abs() as usize == spec.n {
                continue;
            }
            div[i] += *v * Complex::new(T::zero(), T::from_i64(r).unwrap());
        }
    }
    let e: T = div.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b) / T::from_usize(np).unwrap();
    e.sqrt() / norm.sqrt()
}

/// Closed-form benchmark: `mu = mu0 / (alpha + (1/alpha - alpha) sin^2(pi x / L))`
/// along each axis; in 2D the modulus is the product of the two axis factors.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticBenchmark {
    pub dims: usize,
    pub l: f64,
    pub mu0: f64,
    pub alpha: f64,
    pub gammabar: Vec<f64>,
}

impl AnalyticBenchmark {
    /// L = 1, mu0 = 1, alpha = 3/4, gammabar = 0.01 per component.
    pub fn standard(dims: usize) -> Self {
        Self { dims, l: 1.0, mu0: 1.0, alpha: 0.75, gammabar: vec![0.01; dims] }
    }

    /// One-axis factor kappa(x).
    pub fn kappa(&self, x: f64) -> f64 {
        let s = (std::f64::consts::PI * x / self.l).sin();
        self.mu0 / (self.alpha + (1.0 / self.alpha - self.alpha) * s * s)
    }

    pub fn mu(&self, x: &[f64]) -> f64 {
        if self.dims == 1 {
            self.kappa(x[0])
        } else {
            self.kappa(x[0]) * self.kappa(x[1])
        }
    }

    /// Strain amplitude ratio (1 - alpha^2) / (1 + alpha^2).
    fn ratio(&self) -> f64 {
        (1.0 - self.alpha * self.alpha) / (1.0 + self.alpha * self.alpha)
    }

    /// Homogenised modulus factor C / gammabar = 2 mu0 alpha / (1 + alpha^2) in 1D.
    pub fn effective_modulus(&self) -> f64 {
        2.0 * self.mu0 * self.alpha / (1.0 + self.alpha * self.alpha)
    }

    /// Closed-form strain at `x`.
    pub fn strain(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dims)
            .map(|i| self.gammabar[i] * (1.0 - self.ratio() * (2.0 * std::f64::consts::PI * x[i] / self.l).cos()))
            .collect()
    }

    /// Homogenised stress of the exact solution (1D).
    pub fn stress(&self) -> Vec<f64> {
        self.gammabar.iter().map(|g| g * self.effective_modulus()).collect()
    }

    pub fn spec<T: Real>(&self, n: usize) -> Result<RveSpec<T>> {
        let spec64 = RveSpec::<f64>::from_fn(self.dims, n, self.l, self.mu0, |x| self.mu(x))?;
        RveSpec::new(
            self.dims,
            n,
            T::from_f64_lossy(self.l),
            spec64.mu.iter().map(|m| T::from_f64_lossy(*m)).collect(),
            T::from_f64_lossy(self.mu0),
        )
    }

    /// Closed-form strain sampled on the grid of `spec`.
    pub fn sampled<T: Real>(&self, n: usize) -> StrainField<T> {
        let h = self.l / n as f64;
        let np = n.pow(self.dims as u32);
        let mut comps = vec![Vec::with_capacity(np); self.dims];
        for i in 0..np {
            let x: Vec<f64> = (0..self.dims).map(|d| ((i / n.pow(d as u32)) % n) as f64 * h).collect();
            for (c, v) in self.strain(&x).into_iter().enumerate() {
                comps[c].push(T::from_f64_lossy(v));
            }
        }
        StrainField::new(comps)
    }
}

/// Strain analytic evaluator (free function form).
pub fn analytic_strain(bench: &AnalyticBenchmark, x: &[f64]) -> Vec<f64> {
    bench.strain(x)
}
