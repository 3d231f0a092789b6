//! Least-squares polynomial fits of grid functions and their encoding into
//! the amplitude of an ancilla qubit.
//!
//! Two encodings exist:
//! * amplitude domain: the ancilla amplitude equals a given value table
//!   (exact lookup values or an amplitude polynomial) through a multiplexed RY
//!   with angles `2 asin(v)`. Exact, but the Walsh spectrum of the angles is
//!   generally dense, so the gate cost grows with the grid size.
//! * angle domain: a polynomial `P` is fitted to `2 asin(f / scale)`, and
//!   the multiplexed RY uses the angles `P(k)` directly, so the ancilla
//!   amplitude is `sin(P(k) / 2)`. A degree-D polynomial in the index is a
//!   polynomial of degree D in its bits. Its Walsh spectrum therefore only
//!   holds terms of order <= D, and the rotation network has polylogarithmic
//!   size.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::circuit::CircuitBlock;
use crate::error::{Error, Result};
use crate::gate::{Control, Gate};

/// Signed frequency of grid index `k`: `k` below `N/2`, else `k - N`.
pub fn relabel(k: usize, n: usize) -> Result<i64> {
    if k >= n || n % 2 != 0 {
        return Err(Error::IndexOutOfRange { k, n });
    }
    Ok(relabel_unchecked(k, n))
}

pub(crate) fn relabel_unchecked(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Polynomial in normalised index coordinates `u_v = k_v / grid_v`, tensor
/// monomial basis with per-variable maximum degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub variables: usize,
    pub degrees: Vec<usize>,
    /// Coefficient of `u_0^i u_1^j` at `i + (degrees[0] + 1) * j`.
    pub coefficients: Vec<f64>,
    /// Largest absolute error over the fitted points.
    pub fit_residual: f64,
    /// Grid size per variable defining the normalisation.
    pub grid: Vec<usize>,
}

impl PolyFit {
    /// Polynomial with given coefficients and zero residual.
    pub fn from_coefficients(degrees: Vec<usize>, grid: Vec<usize>, coefficients: Vec<f64>) -> Result<Self> {
        let want: usize = degrees.iter().map(|d| d + 1).product();
        if coefficients.len() != want || degrees.len() != grid.len() || degrees.is_empty() || degrees.len() > 2 {
            return Err(Error::Fit("coefficient count does not match degrees".into()));
        }
        Ok(Self { variables: degrees.len(), degrees, coefficients, fit_residual: 0.0, grid })
    }

    /// Constant polynomial over a grid.
    pub fn constant(value: f64, grid: Vec<usize>) -> Self {
        let degrees = vec![0; grid.len()];
        Self { variables: grid.len(), degrees, coefficients: vec![value], fit_residual: 0.0, grid }
    }

    pub fn num_monomials(&self) -> usize {
        self.coefficients.len()
    }

    /// Value at normalised coordinates.
    pub fn eval_normalised(&self, u: &[f64]) -> f64 {
        let d0 = self.degrees[0] + 1;
        let mut acc = 0.0;
        for (idx, c) in self.coefficients.iter().enumerate() {
            let i = idx % d0;
            let mut term = c * u[0].powi(i as i32);
            if self.variables == 2 {
                term *= u[1].powi((idx / d0) as i32);
            }
            acc += term;
        }
        acc
    }

    /// Value at integer grid indices.
    pub fn eval(&self, k: &[usize]) -> f64 {
        let u: Vec<f64> = k.iter().zip(&self.grid).map(|(k, g)| *k as f64 / *g as f64).collect();
        self.eval_normalised(&u)
    }

    /// Values over the whole grid, first variable fastest.
    pub fn table(&self) -> Vec<f64> {
        let total: usize = self.grid.iter().product();
        (0..total).map(|i| self.eval(&unflatten(i, &self.grid))).collect()
    }

    /// The same polynomial multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coefficients.iter_mut().for_each(|v| *v *= c);
        out.fit_residual *= c.abs();
        out
    }
}

fn unflatten(i: usize, grid: &[usize]) -> Vec<usize> {
    let mut rest = i;
    grid.iter()
        .map(|g| {
            let v = rest % g;
            rest /= g;
            v
        })
        .collect()
}

/// Least-squares fit of `samples` (index tuple, value) with the given maximum
/// degree per variable, solved by SVD of the design matrix.
pub fn fit_polynomial(samples: &[(Vec<usize>, f64)], degrees: &[usize], grid: &[usize]) -> Result<PolyFit> {
    let vars = degrees.len();
    if vars == 0 || vars > 2 || grid.len() != vars {
        return Err(Error::Fit("one or two variables required".into()));
    }
    let d0 = degrees[0] + 1;
    let cols: usize = degrees.iter().map(|d| d + 1).product();
    if samples.len() < cols {
        return Err(Error::Fit(format!("{} samples for {cols} monomials", samples.len())));
    }
    let row = |k: &[usize]| -> Vec<f64> {
        let u: Vec<f64> = k.iter().zip(grid).map(|(k, g)| *k as f64 / *g as f64).collect();
        (0..cols)
            .map(|idx| {
                let mut t = u[0].powi((idx % d0) as i32);
                if vars == 2 {
                    t *= u[1].powi((idx / d0) as i32);
                }
                t
            })
            .collect()
    };
    let a = DMatrix::from_fn(samples.len(), cols, |r, c| row(&samples[r].0)[c]);
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin / smax < 1e-13 {
        return Err(Error::Fit(format!("rank-deficient design matrix (condition {:.3e})", smax / smin)));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let resid = (&a * &x - &b).amax();
    Ok(PolyFit {
        variables: vars,
        degrees: degrees.to_vec(),
        coefficients: x.iter().copied().collect(),
        fit_residual: resid,
        grid: grid.to_vec(),
    })
}

/// Fits a full grid table (first variable fastest).
pub fn fit_table(values: &[f64], grid: &[usize], degrees: &[usize]) -> Result<PolyFit> {
    let samples: Vec<(Vec<usize>, f64)> = values.iter().enumerate().map(|(i, v)| (unflatten(i, grid), *v)).collect();
    fit_polynomial(&samples, degrees, grid)
}

/// Requested degrees capped by the number of distinct coordinates per variable.
pub fn supported_degrees(samples: &[(Vec<usize>, f64)], degrees: &[usize]) -> Vec<usize> {
    degrees
        .iter()
        .enumerate()
        .map(|(v, &d)| {
            let distinct: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.0[v]).collect();
            d.min(distinct.len().saturating_sub(1))
        })
        .collect()
}

/// Rotation angles `2 asin(v)` realising amplitudes `v` on ancilla |1>.
pub fn amplitude_angles(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v.abs() > 1.0 + 1e-12 {
                Err(Error::Encoding(format!("value {v} outside [-1, 1]; rescale first")))
            } else {
                Ok(2.0 * v.clamp(-1.0, 1.0).asin())
            }
        })
        .collect()
}

/// Where an encoding acts: index registers (one per variable, little-endian),
/// the ancilla receiving the amplitude and optional controls.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingTarget {
    pub registers: Vec<Vec<usize>>,
    pub ancilla: usize,
    pub controls: Vec<Control>,
}

impl EncodingTarget {
    pub fn new(registers: Vec<Vec<usize>>, ancilla: usize) -> Self {
        Self { registers, ancilla, controls: Vec::new() }
    }

    pub fn with_controls(mut self, controls: Vec<Control>) -> Self {
        self.controls = controls;
        self
    }

    fn selectors(&self) -> Vec<usize> {
        self.registers.iter().flatten().copied().collect()
    }
}

/// Multiplexed RY with the given angle table (index = packed register values).
pub fn build_angle_rotation(name: &str, angles: Vec<f64>, target: &EncodingTarget) -> Result<CircuitBlock> {
    let sel = target.selectors();
    if angles.len() != 1usize << sel.len() {
        return Err(Error::Encoding(format!("{} angles for {} selector qubits", angles.len(), sel.len())));
    }
    let mut b = CircuitBlock::new(name);
    if angles.iter().all(|a| *a == 0.0) {
        return Ok(b);
    }
    if angles.iter().all(|a| *a == angles[0]) {
        b.push(Gate::ry(target.ancilla, angles[0]).with_controls(&target.controls));
    } else {
        b.push(Gate::multiplexed_ry(sel, target.ancilla, angles).with_controls(&target.controls));
    }
    Ok(b)
}

/// Amplitude encoding of a value table: ancilla |1> amplitude equals `values[k]`.
pub fn build_u_table(values: &[f64], target: &EncodingTarget) -> Result<CircuitBlock> {
    build_angle_rotation("U_poly", amplitude_angles(values)?, target)
}

/// Amplitude encoding of a polynomial: ancilla |1> amplitude equals `fit(k)`
/// at every grid point of the fit.
pub fn build_u_poly(fit: &PolyFit, target: &EncodingTarget) -> Result<CircuitBlock> {
    check_grid(fit, target)?;
    build_u_table(&fit.table(), target)
}

/// Angle-domain encoding: ancilla |1> amplitude equals `sin(angle_fit(k) / 2)`.
pub fn build_u_poly_angle(angle_fit: &PolyFit, target: &EncodingTarget) -> Result<CircuitBlock> {
    check_grid(angle_fit, target)?;
    build_angle_rotation("U_poly", angle_fit.table(), target)
}

fn check_grid(fit: &PolyFit, target: &EncodingTarget) -> Result<()> {
    if fit.grid.len() != target.registers.len()
        || fit.grid.iter().zip(&target.registers).any(|(g, r)| *g != 1usize << r.len())
    {
        return Err(Error::Encoding("fit grid does not match register sizes".into()));
    }
    Ok(())
}

/// How a real grid function is loaded into an ancilla amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionEncoding {
    /// Exact per-index rotations.
    Lookup,
    /// Angle-domain polynomial with the given degree per variable.
    Polynomial { degrees: Vec<usize> },
}

/// Headroom kept below |1| when an angle-domain target is rescaled, so that
/// `asin` stays away from its branch points where fits degrade.
pub const ANGLE_HEADROOM: f64 = 0.9;

/// A function prepared for encoding: the realised values, the scale that was
/// divided out and the rotation angles.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFunction {
    /// Function values actually realised (amplitude times scale).
    pub values: Vec<f64>,
    /// Amplitudes are `values / scale`.
    pub scale: f64,
    pub angles: Vec<f64>,
    /// Largest deviation between realised and requested values.
    pub fit_residual: f64,
    pub fit: Option<PolyFit>,
}

impl EncodedFunction {
    /// Prepares `target` (grid table, first variable fastest) for encoding
    /// with the scale picked by [`encoding_scale`] from the data bound.
    pub fn new(target: &[f64], grid: &[usize], encoding: &FunctionEncoding) -> Result<Self> {
        let fmax = target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self::with_scale(target, grid, encoding, encoding_scale(fmax, encoding))
    }

    /// As [`EncodedFunction::new`] with a caller-chosen scale, which the
    /// caller must record in its normalisation ledger.
    pub fn with_scale(target: &[f64], grid: &[usize], encoding: &FunctionEncoding, scale: f64) -> Result<Self> {
        match encoding {
            FunctionEncoding::Lookup => {
                let amps: Vec<f64> = target.iter().map(|v| v / scale).collect();
                Ok(Self { values: target.to_vec(), scale, angles: amplitude_angles(&amps)?, fit_residual: 0.0, fit: None })
            }
            FunctionEncoding::Polynomial { degrees } => {
                let samples: Vec<(Vec<usize>, f64)> =
                    target.iter().enumerate().map(|(i, v)| (unflatten(i, grid), *v)).collect();
                encode_samples(&samples, grid, degrees, scale)
            }
        }
    }

    /// Rotation block realising the amplitudes `values / scale`.
    pub fn block(&self, name: &str, target: &EncodingTarget) -> Result<CircuitBlock> {
        build_angle_rotation(name, self.angles.clone(), target)
    }
}

/// Amplitude scale for a function with `|f| <= bound`: at least 1, and for
/// angle-domain polynomials large enough to keep [`ANGLE_HEADROOM`].
pub fn encoding_scale(bound: f64, encoding: &FunctionEncoding) -> f64 {
    match encoding {
        FunctionEncoding::Lookup => bound.max(1.0),
        FunctionEncoding::Polynomial { .. } => (bound / ANGLE_HEADROOM).max(1.0),
    }
}

/// Angle-domain fit through a subset of grid points. The angle table covers
/// the whole grid, and `values` holds the realised function everywhere, but
/// `fit_residual` only measures the sampled points.
///
/// A degree larger than the number of distinct sampled coordinates minus one
/// cannot be determined and is lowered to that value.
pub fn encode_samples(samples: &[(Vec<usize>, f64)], grid: &[usize], degrees: &[usize], scale: f64) -> Result<EncodedFunction> {
    let degrees = supported_degrees(samples, degrees);
    let mut theta = Vec::with_capacity(samples.len());
    for (k, v) in samples {
        let a = v / scale;
        if a.abs() > 1.0 + 1e-12 {
            return Err(Error::Encoding(format!("value {v} exceeds scale {scale}")));
        }
        theta.push((k.clone(), 2.0 * a.clamp(-1.0, 1.0).asin()));
    }
    let fit = fit_polynomial(&theta, &degrees, grid)?;
    let angles = fit.table();
    let values: Vec<f64> = angles.iter().map(|a| scale * (a / 2.0).sin()).collect();
    let fit_residual = samples.iter().fold(0.0f64, |m, (k, v)| m.max((scale * (fit.eval(k) / 2.0).sin() - v).abs()));
    Ok(EncodedFunction { values, scale, angles, fit_residual, fit: Some(fit) })
}

/// Description of the extended-domain construction for a function with a
/// jump at `N/2`: the base grid of size `N` is embedded into a grid of size
/// `2N` whose extra most significant bit is set from the base register's
/// most significant bit, so that base indices `k >= N/2` are read at `k + N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDomainSpec {
    pub base_size: usize,
    pub extended_size: usize,
    /// Extended indices where the target is specified.
    pub defined_ranges: Vec<Range<usize>>,
    /// (flipped bit, controlling bit) in extended index bit positions.
    pub bit_correction: (usize, usize),
}

impl ExtendedDomainSpec {
    pub fn new(base_size: usize) -> Result<Self> {
        if !base_size.is_power_of_two() || base_size < 2 {
            return Err(Error::Config(format!("base size {base_size} is not a power of two >= 2")));
        }
        let n = base_size;
        let bits = n.trailing_zeros() as usize;
        Ok(Self {
            base_size: n,
            extended_size: 2 * n,
            defined_ranges: vec![0..n / 2, 3 * n / 2..2 * n],
            bit_correction: (bits, bits - 1),
        })
    }

    /// Extended index addressed by base index `k`.
    pub fn extended_index(&self, k: usize) -> usize {
        let (flip, ctrl) = self.bit_correction;
        k ^ (((k >> ctrl) & 1) << flip)
    }

    pub fn is_defined(&self, kt: usize) -> bool {
        self.defined_ranges.iter().any(|r| r.contains(&kt))
    }

    /// The relabelling function continued to the defined extended indices:
    /// `kt` on the low range and `kt - 2N` on the high range.
    pub fn relabel_extended(&self, kt: usize) -> Option<i64> {
        if !self.is_defined(kt) {
            return None;
        }
        Some(if kt < self.base_size { kt as i64 } else { kt as i64 - self.extended_size as i64 })
    }

    /// Samples of `f(r)` on the defined extended indices.
    pub fn samples(&self, f: impl Fn(i64) -> f64) -> Vec<(Vec<usize>, f64)> {
        (0..self.extended_size)
            .filter_map(|kt| self.relabel_extended(kt).map(|r| (vec![kt], f(r))))
            .collect()
    }
}

/// Extended-domain encoding on one index register plus one extension qubit
/// (initially and finally |0>): CNOT from the base MSB into the extension,
/// the polynomial rotation over the extended index, then the CNOT again.
///
/// `fit` must be built on the extended grid (size `2N`). The ancilla |1>
/// amplitude at base index `k` is `fit(extended_index(k))`.
pub fn build_extended_encoding(
    spec: &ExtendedDomainSpec,
    fit: &PolyFit,
    register: &[usize],
    extension: usize,
    ancilla: usize,
    controls: &[Control],
) -> Result<CircuitBlock> {
    if fit.grid != vec![spec.extended_size] || 1usize << register.len() != spec.base_size {
        return Err(Error::Encoding("extended fit or register size mismatch".into()));
    }
    let angles = amplitude_angles(&fit.table())?;
    build_extended_rotation("U_poly_ext", &[(register.to_vec(), extension)], angles, ancilla, controls)
}

/// Multiplexed rotation over extended indices: each (register, extension)
/// pair is widened by one most significant bit copied from the register's
/// own MSB, the rotation reads the widened registers, and the copies are
/// undone. `angles` covers the product of the extended grids.
pub fn build_extended_rotation(
    name: &str,
    registers: &[(Vec<usize>, usize)],
    angles: Vec<f64>,
    ancilla: usize,
    controls: &[Control],
) -> Result<CircuitBlock> {
    let mut b = CircuitBlock::new(name);
    let copies: Vec<Gate> = registers
        .iter()
        .map(|(reg, ext)| reg.last().map(|msb| Gate::cnot(*msb, *ext)).ok_or_else(|| Error::Encoding("empty register".into())))
        .collect::<Result<_>>()?;
    b.extend_gates(copies.iter().cloned());
    let wide: Vec<Vec<usize>> = registers
        .iter()
        .map(|(reg, ext)| {
            let mut w = reg.clone();
            w.push(*ext);
            w
        })
        .collect();
    let target = EncodingTarget::new(wide, ancilla).with_controls(controls.to_vec());
    b.push_block(build_angle_rotation("U_poly", angles, &target)?);
    b.extend_gates(copies);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_examples() {
        assert_eq!(relabel(0, 8).unwrap(), 0);
        assert_eq!(relabel(3, 8).unwrap(), 3);
        assert_eq!(relabel(5, 8).unwrap(), -3);
        assert_eq!(relabel(4, 8).unwrap(), -4);
        assert!(relabel(8, 8).is_err());
    }

    #[test]
    fn linear_fit_is_exact() {
        let vals: Vec<f64> = (0..16).map(|k| k as f64 / 16.0).collect();
        let f = fit_table(&vals, &[16], &[1]).unwrap();
        assert!(f.fit_residual <= 1e-12);
        assert!((f.coefficients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_fit_fails() {
        let vals = vec![0.0; 4];
        assert!(fit_table(&vals, &[4], &[5]).is_err());
    }

    #[test]
    fn extended_index_moves_upper_half() {
        let s = ExtendedDomainSpec::new(8).unwrap();
        assert_eq!(s.defined_ranges, vec![0..4, 12..16]);
        assert_eq!(s.extended_index(3), 3);
        assert_eq!(s.extended_index(5), 13);
        assert_eq!(s.relabel_extended(13), Some(-3));
        assert_eq!(s.relabel_extended(7), None);
    }
}
