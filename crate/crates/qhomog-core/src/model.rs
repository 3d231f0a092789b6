//! Cell geometry, material data and strain fields shared by the oracle and
//! the circuit builders.
//!
//! Grid values are stored with the first coordinate fastest: point
//! `(k0, k1)` sits at `k0 + N * k1`, matching the qubit layout where the `k0`
//! register occupies lower qubits than `k1`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Periodic cell of edge `l` sampled on `n` points per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RveSpec<T: Real = f64> {
    pub dims: usize,
    pub n: usize,
    pub l: T,
    /// Shear modulus at every grid point (`n` or `n * n` values).
    pub mu: Vec<T>,
    /// Reference modulus of the fixed-point scheme.
    pub mu0: T,
}

impl<T: Real> RveSpec<T> {
    pub fn new(dims: usize, n: usize, l: T, mu: Vec<T>, mu0: T) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return Err(Error::Config(format!("dims must be 1 or 2, got {dims}")));
        }
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::Config(format!("grid size {n} is not a power of two >= 2")));
        }
        if mu.len() != n.pow(dims as u32) {
            return Err(Error::Shape(format!("mu has {} values, expected {}", mu.len(), n.pow(dims as u32))));
        }
        if mu.iter().any(|m| !(*m > T::zero())) || !(mu0 > T::zero()) {
            return Err(Error::Config("shear moduli must be positive".into()));
        }
        Ok(Self { dims, n, l, mu, mu0 })
    }

    /// Builds the modulus field by sampling `f` at the grid coordinates.
    pub fn from_fn(dims: usize, n: usize, l: T, mu0: T, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let h = l / T::from_usize(n).unwrap();
        let mu = (0..n.pow(dims as u32))
            .map(|i| {
                let x: Vec<T> = (0..dims).map(|d| T::from_usize((i / n.pow(d as u32)) % n).unwrap() * h).collect();
                f(&x)
            })
            .collect();
        Self::new(dims, n, l, mu, mu0)
    }

    pub fn num_points(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn log2_n(&self) -> usize {
        self.n.trailing_zeros() as usize
    }

    /// Coordinates of grid point `i`.
    pub fn coords(&self, i: usize) -> Vec<T> {
        let h = self.l / T::from_usize(self.n).unwrap();
        (0..self.dims).map(|d| T::from_usize((i / self.n.pow(d as u32)) % self.n).unwrap() * h).collect()
    }

    /// Reference modulus minimising the contraction factor of the scheme.
    pub fn suggested_mu0(&self) -> T {
        let lo = self.mu.iter().copied().fold(T::infinity(), T::min);
        let hi = self.mu.iter().copied().fold(T::neg_infinity(), T::max);
        (lo + hi) / T::from_f64_lossy(2.0)
    }

    pub fn with_mu0(mut self, mu0: T) -> Self {
        self.mu0 = mu0;
        self
    }
}

/// Scalar factors applied between a classical field and its amplitudes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalisationLedger {
    pub factors: Vec<(String, f64)>,
}

impl NormalisationLedger {
    pub fn push(&mut self, label: impl Into<String>, factor: f64) {
        self.factors.push((label.into(), factor));
    }

    pub fn product(&self) -> f64 {
        self.factors.iter().map(|f| f.1).product()
    }

    /// A zero factor marks a branch that carries no physical content.
    pub fn is_zero_load(&self) -> bool {
        self.factors.iter().any(|f| f.1 == 0.0)
    }
}

/// A strain field: `dims` components over the grid plus the ledger that
/// relates it to raw amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField<T: Real = f64> {
    pub components: Vec<Vec<T>>,
    pub ledger: NormalisationLedger,
}

impl<T: Real> StrainField<T> {
    pub fn new(components: Vec<Vec<T>>) -> Self {
        Self { components, ledger: NormalisationLedger::default() }
    }

    /// Constant field equal to `gammabar` everywhere.
    pub fn uniform(gammabar: &[T], num_points: usize) -> Self {
        Self::new(gammabar.iter().map(|g| vec![*g; num_points]).collect())
    }

    /// Classical values from raw amplitudes: amplitude divided by the ledger product.
    pub fn from_amplitudes(raw: Vec<Vec<T>>, ledger: NormalisationLedger) -> Self {
        let p = ledger.product();
        let inv = if p == 0.0 { T::zero() } else { T::from_f64_lossy(1.0 / p) };
        let components = raw.into_iter().map(|c| c.into_iter().map(|v| v * inv).collect()).collect();
        Self { components, ledger }
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    /// Component means.
    pub fn mean(&self) -> Vec<T> {
        self.components
            .iter()
            .map(|c| c.iter().copied().fold(T::zero(), |a, b| a + b) / T::from_usize(c.len()).unwrap())
            .collect()
    }

    /// Euclidean norm over all components and points.
    pub fn l2(&self) -> T {
        self.components.iter().flatten().map(|v| *v * *v).fold(T::zero(), |a, b| a + b).sqrt()
    }

    /// ||self - other|| / ||other||.
    pub fn relative_l2(&self, other: &Self) -> T {
        let mut num = T::zero();
        for (a, b) in self.components.iter().zip(&other.components) {
            for (x, y) in a.iter().zip(b) {
                num += (*x - *y) * (*x - *y);
            }
        }
        num.sqrt() / other.l2()
    }

    /// Largest pointwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (*x - *y).abs()))
            .fold(T::zero(), T::max)
    }
}
