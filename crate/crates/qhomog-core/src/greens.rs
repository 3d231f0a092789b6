//! Block encoding of the strain Green's operator.
//!
//! In 2D the operator at a frequency is a real symmetric 2x2 matrix and is
//! written as `a0 I + a1 X + a2 Z` acting on the component qubit `c`. A
//! prepare register `l` (two qubits, three used branches) selects the terms.
//! After preparation, selection and un-preparation, the branch with `l = 0`
//! and flag `p0 = 1` carries `(1/3) * Gamma / scale`.
//!
//! In 1D the operator is the constant `-1/mu0` away from the zero mode, so a
//! single rotation on `p0` suffices.

use crate::circuit::CircuitBlock;
use crate::error::{Error, Result};
use crate::gate::{Control, Gate};
use crate::poly::{
    build_angle_rotation, build_extended_rotation, encode_samples, encoding_scale, relabel_unchecked as relabel,
    EncodedFunction, EncodingTarget, ExtendedDomainSpec, FunctionEncoding,
};

/// LCU weights `(a0, a1, a2)` of the operator at frequency `(k0, k1)`.
///
/// The zero mode is assigned `(-1/(2 mu0), 0, 0)`; its value never matters
/// because the macroscopic strain overwrites that mode. On the Nyquist lines
/// (`k0` or `k1` equal to `N/2`) the off-diagonal weight is set to zero, see
/// [`nyquist_line`].
pub fn lcu_coefficients(k0: usize, k1: usize, n: usize, mu0: f64) -> [f64; 3] {
    let (r0, r1) = (relabel(k0, n) as f64, relabel(k1, n) as f64);
    let a0 = -0.5 / mu0;
    let den = r0 * r0 + r1 * r1;
    if den == 0.0 {
        return [a0, 0.0, 0.0];
    }
    let a1 = if nyquist_line(k0, k1, n) { 0.0 } else { -(r0 * r1) / (mu0 * den) };
    [a0, a1, -0.5 * (r0 * r0 - r1 * r1) / (mu0 * den)]
}

/// True when either index is the Nyquist index `N/2`.
///
/// There the signed frequency `-N/2` is its own mirror image, so the
/// off-diagonal product `xi0 xi1` would change sign between `k` and `-k`.
/// The operator would then map real fields to complex ones. Dropping the
/// off-diagonal coupling on these lines keeps real fields real.
pub fn nyquist_line(k0: usize, k1: usize, n: usize) -> bool {
    2 * k0 == n || 2 * k1 == n
}

/// The operator itself: `-(1/mu0) xi xi^T / |xi|^2` in 2D (off-diagonal
/// dropped on the Nyquist lines), `-1/mu0` in 1D. `k` holds one index per
/// dimension.
pub fn green_matrix(k: &[usize], n: usize, mu0: f64) -> Result<Vec<Vec<f64>>> {
    if k.iter().all(|&v| v == 0) {
        return Err(Error::ExcludedMode);
    }
    if let Some(&bad) = k.iter().find(|&&v| v >= n) {
        return Err(Error::IndexOutOfRange { k: bad, n });
    }
    match k.len() {
        1 => Ok(vec![vec![-1.0 / mu0]]),
        2 => {
            let xi = [relabel(k[0], n) as f64, relabel(k[1], n) as f64];
            let den = xi[0] * xi[0] + xi[1] * xi[1];
            let off = !nyquist_line(k[0], k[1], n);
            Ok((0..2)
                .map(|i| (0..2).map(|j| if i == j || off { -xi[i] * xi[j] / (mu0 * den) } else { 0.0 }).collect())
                .collect())
        }
        d => Err(Error::Config(format!("unsupported dimension {d}"))),
    }
}

/// Pauli attached to an LCU branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Z,
}

/// The three-term decomposition with its success prefactor.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuDecomposition {
    pub n: usize,
    pub mu0: f64,
    pub terms: [Pauli; 3],
    /// Amplitude factor of the selected branch from the uniform preparation.
    pub prefactor: f64,
}

impl LcuDecomposition {
    pub fn new(n: usize, mu0: f64) -> Self {
        Self { n, mu0, terms: [Pauli::I, Pauli::X, Pauli::Z], prefactor: 1.0 / 3.0 }
    }

    /// `sum_l a_l P_l` at one frequency.
    pub fn reconstruct(&self, k0: usize, k1: usize) -> [[f64; 2]; 2] {
        let a = lcu_coefficients(k0, k1, self.n, self.mu0);
        [[a[0] + a[2], a[1]], [a[1], a[0] - a[2]]]
    }

    /// Bound on every |a_l|, used to pick the amplitude scale.
    pub fn bound(&self) -> f64 {
        0.5 / self.mu0
    }
}

/// Uniform preparation over the three used states of `(l0, l1)`:
/// `|00> -> (|0> + |1> + |2>) / sqrt(3)` with `l = l0 + 2 l1`.
pub fn build_u_prep(l0: usize, l1: usize) -> CircuitBlock {
    let mut b = CircuitBlock::new("U_prep");
    // amplitude sqrt(2/3) stays on l1 = 0, the rest goes to l = 2
    b.push(Gate::ry(l1, 2.0 * (2.0f64 / 3.0).sqrt().acos()));
    b.push(Gate::h(l0).with_controls(&[Control::off(l1)]));
    b
}

/// Where the 2D operator encoding acts.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaQubits {
    pub k0: Vec<usize>,
    pub k1: Vec<usize>,
    pub l0: usize,
    pub l1: usize,
    pub p0: usize,
    pub c: usize,
    /// Extension qubits for the extended-domain encoding.
    pub ext: Option<(usize, usize)>,
    /// Controls applied to the selection (the iteration uses `e = 0`).
    pub controls: Vec<Control>,
}

/// Coordinates in which the coefficient polynomials are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaCoordinates {
    /// Raw indices `k / N` extended to a grid of size `2N` per axis so that
    /// the jump of the relabelling at `N/2` disappears; needs two extension
    /// qubits.
    Extended,
    /// Signed frequencies `r(k) / N` directly. A polynomial in `r(k)` is
    /// still a polynomial in the index bits because `r(k) = k - N * msb`.
    Relabelled,
}

/// How the coefficients `a1, a2` are loaded.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaEncoding {
    /// Exact per-mode rotations.
    Lookup,
    /// Angle-domain polynomials with per-variable degrees for `a1` and `a2`.
    Polynomial { alpha1: [usize; 2], alpha2: [usize; 2], coordinates: AlphaCoordinates },
}

impl GammaEncoding {
    /// Degrees (3, 4) on the extended domain.
    pub fn extended_default() -> Self {
        Self::Polynomial { alpha1: [3, 3], alpha2: [4, 4], coordinates: AlphaCoordinates::Extended }
    }

    /// Degrees (7, 6) without the extension.
    pub fn plain_default() -> Self {
        Self::Polynomial { alpha1: [7, 7], alpha2: [6, 6], coordinates: AlphaCoordinates::Relabelled }
    }

    pub fn needs_extension(&self) -> bool {
        matches!(self, Self::Polynomial { coordinates: AlphaCoordinates::Extended, .. })
    }

    fn function_encoding(&self) -> FunctionEncoding {
        match self {
            Self::Lookup => FunctionEncoding::Lookup,
            Self::Polynomial { alpha1, .. } => FunctionEncoding::Polynomial { degrees: alpha1.to_vec() },
        }
    }
}

/// Rotation tables of the 2D encoding, computed once per grid and reused
/// for every iteration step.
#[derive(Debug, Clone)]
pub struct GammaTables {
    pub n: usize,
    pub mu0: f64,
    pub encoding: GammaEncoding,
    /// Amplitude scale dividing every coefficient.
    pub scale: f64,
    /// Multiplexed RY angles for `a1` and `a2`, over the base grid or, with
    /// the extended domain, over the extended grid.
    pub angles: [Vec<f64>; 2],
    /// Realised `(a1, a2)` per mode (first index fastest); equal to the exact
    /// coefficients for lookup encoding.
    pub realised: [Vec<f64>; 2],
    /// Largest deviation of the realised coefficients from the exact ones,
    /// zero mode excluded.
    pub fit_residual: f64,
}

impl GammaTables {
    pub fn new(n: usize, mu0: f64, encoding: &GammaEncoding) -> Result<Self> {
        let scale = gamma_scale(mu0, encoding);
        let exact = coefficient_tables(n, mu0);
        let mut realised = exact.clone();
        let mut residual = 0.0f64;
        let mut angles: Vec<Vec<f64>> = Vec::new();
        match encoding {
            GammaEncoding::Lookup => {
                for t in &exact {
                    angles.push(EncodedFunction::with_scale(t, &[n, n], &FunctionEncoding::Lookup, scale)?.angles);
                }
            }
            GammaEncoding::Polynomial { alpha1, alpha2, coordinates } => {
                for (slot, (which, deg)) in [(1, *alpha1), (2, *alpha2)].into_iter().enumerate() {
                    let (a, values, res) = fit_coefficient(which, deg, *coordinates, n, mu0, scale)?;
                    residual = residual.max(res);
                    realised[slot] = values;
                    angles.push(a);
                }
            }
        }
        let [a1, a2]: [Vec<f64>; 2] = angles.try_into().expect("two tables");
        Ok(Self { n, mu0, encoding: encoding.clone(), scale, angles: [a1, a2], realised, fit_residual: residual })
    }

    /// `U_prep^dag . U_select . U_prep` on the given qubits.
    pub fn block(&self, q: &GammaQubits) -> Result<CircuitBlock> {
        let n = self.n;
        if 1usize << q.k0.len() != n || 1usize << q.k1.len() != n {
            return Err(Error::Shape("frequency registers do not match the grid".into()));
        }
        if self.encoding.needs_extension() && q.ext.is_none() {
            return Err(Error::Config("extended-domain encoding needs extension qubits".into()));
        }
        let l = [q.l0, q.l1];
        let branch = |v: usize| {
            let mut c = Control::pattern(&l, v);
            c.extend(q.controls.iter().copied());
            c
        };
        let mut select = CircuitBlock::new("U_select");
        select.push(Gate::ry(q.p0, 2.0 * (-0.5 / (self.mu0 * self.scale)).asin()).with_controls(&branch(0)));
        for (v, (angles, pauli)) in self.angles.iter().zip([Gate::x(q.c), Gate::z(q.c)]).enumerate() {
            let ctrl = branch(v + 1);
            let rot = match (self.encoding.needs_extension(), q.ext) {
                (true, Some((e0, e1))) => build_extended_rotation(
                    "U_poly",
                    &[(q.k0.clone(), e0), (q.k1.clone(), e1)],
                    angles.clone(),
                    q.p0,
                    &ctrl,
                )?,
                _ => {
                    let t = EncodingTarget::new(vec![q.k0.clone(), q.k1.clone()], q.p0).with_controls(ctrl.clone());
                    build_angle_rotation("U_poly", angles.clone(), &t)?
                }
            };
            select.push_block(rot.named(format!("U_poly_alpha{}", v + 1)));
            select.push(pauli.with_controls(&ctrl));
        }
        let prep = build_u_prep(q.l0, q.l1);
        let mut block = CircuitBlock::new("U_gamma");
        block.push_block(prep.clone()).push_block(select).push_block(prep.inverse().named("U_prep_dag"));
        Ok(block)
    }

    /// Selected-branch operator `(1/3) Gamma_realised / scale` at one mode.
    pub fn selected_matrix(&self, k0: usize, k1: usize) -> [[f64; 2]; 2] {
        let i = k0 + self.n * k1;
        let (a0, a1, a2) = (-0.5 / self.mu0, self.realised[0][i], self.realised[1][i]);
        let f = 1.0 / (3.0 * self.scale);
        [[f * (a0 + a2), f * a1], [f * a1, f * (a0 - a2)]]
    }
}

/// Amplitude scale of the 2D coefficients, which are bounded by `1/(2 mu0)`.
pub fn gamma_scale(mu0: f64, encoding: &GammaEncoding) -> f64 {
    encoding_scale(LcuDecomposition::new(2, mu0).bound(), &encoding.function_encoding())
}

/// Amplitude scale of the 1D operator `-1/mu0`.
pub fn gamma_scale_1d(mu0: f64) -> f64 {
    (1.0 / mu0).max(1.0)
}

fn coefficient_tables(n: usize, mu0: f64) -> [Vec<f64>; 2] {
    let mut t = [Vec::with_capacity(n * n), Vec::with_capacity(n * n)];
    for k1 in 0..n {
        for k0 in 0..n {
            let a = lcu_coefficients(k0, k1, n, mu0);
            t[0].push(a[1]);
            t[1].push(a[2]);
        }
    }
    t
}

/// Angle-domain fit of one coefficient and the rotation realising it.
fn fit_coefficient(
    which: usize,
    degrees: [usize; 2],
    coords: AlphaCoordinates,
    n: usize,
    mu0: f64,
    scale: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    // the zero mode takes the value 0, which keeps the fitted surface smooth
    let coef = |r0: i64, r1: i64| {
        let den = (r0 * r0 + r1 * r1) as f64;
        if den == 0.0 {
            return 0.0;
        }
        if which == 1 && (2 * r0.abs() as usize == n || 2 * r1.abs() as usize == n) {
            return 0.0;
        }
        let (r0, r1) = (r0 as f64, r1 as f64);
        if which == 1 {
            -(r0 * r1) / (mu0 * den)
        } else {
            -0.5 * (r0 * r0 - r1 * r1) / (mu0 * den)
        }
    };
    match coords {
        AlphaCoordinates::Extended => {
            let ext = ExtendedDomainSpec::new(n)?;
            let m = ext.extended_size;
            let mut samples = Vec::new();
            for t1 in 0..m {
                for t0 in 0..m {
                    if let (Some(r0), Some(r1)) = (ext.relabel_extended(t0), ext.relabel_extended(t1)) {
                        samples.push((vec![t0, t1], coef(r0, r1)));
                    }
                }
            }
            let enc = encode_samples(&samples, &[m, m], &degrees, scale)?;
            let realised = (0..n * n)
                .map(|i| enc.values[ext.extended_index(i % n) + m * ext.extended_index(i / n)])
                .collect();
            Ok((enc.angles, realised, enc.fit_residual))
        }
        AlphaCoordinates::Relabelled => {
            // fit in signed coordinates shifted to [0, 1): v = (r + N/2) / N
            let half = (n / 2) as i64;
            let mut samples = Vec::new();
            for k1 in 0..n {
                for k0 in 0..n {
                    let (r0, r1) = (relabel(k0, n), relabel(k1, n));
                    samples.push((vec![(r0 + half) as usize, (r1 + half) as usize], coef(r0, r1)));
                }
            }
            let enc = encode_samples(&samples, &[n, n], &degrees, scale)?;
            // the shifted coordinate (r + N/2) mod N flips the index MSB
            let shift = |k: usize| ((relabel(k, n) + half) as usize) % n;
            let angles: Vec<f64> = (0..n * n).map(|i| enc.angles[shift(i % n) + n * shift(i / n)]).collect();
            let realised: Vec<f64> = (0..n * n).map(|i| enc.values[shift(i % n) + n * shift(i / n)]).collect();
            Ok((angles, realised, enc.fit_residual))
        }
    }
}

/// Full 2D operator encoding `U_prep^dag . U_select . U_prep`, returning the
/// block with the tables it was built from.
pub fn build_u_gamma(n: usize, mu0: f64, q: &GammaQubits, encoding: &GammaEncoding) -> Result<(CircuitBlock, GammaTables)> {
    let tables = GammaTables::new(n, mu0, encoding)?;
    Ok((tables.block(q)?, tables))
}

/// 1D operator encoding: the flag `p0` receives amplitude `-1/(mu0 scale)`
/// on every mode. Returns the block and the scale.
pub fn build_u_gamma_1d(mu0: f64, p0: usize, controls: &[Control]) -> (CircuitBlock, f64) {
    let scale = gamma_scale_1d(mu0);
    let mut b = CircuitBlock::new("U_gamma");
    b.push(Gate::ry(p0, 2.0 * (-1.0 / (mu0 * scale)).asin()).with_controls(controls));
    (b, scale)
}
