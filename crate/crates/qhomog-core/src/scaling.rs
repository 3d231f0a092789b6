//! Least-squares fits of gate-count scaling laws.

use crate::error::{Error, Result};

/// Fitted law `count = a * shape(x)^c + b` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Coefficient of determination of the fit, computed on the counts themselves.
    pub r_squared: f64,
}

fn r_squared(y: &[f64], pred: impl Fn(usize) -> f64) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().enumerate().map(|(i, v)| (v - pred(i)).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

fn check(points: &[(usize, f64)]) -> Result<()> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("{} points, at least 4 needed", points.len())));
    }
    Ok(())
}

/// Fits `count = a (log2 N)^c` by least squares on the counts themselves.
/// For fixed `c` the best `a` is closed-form; `c` is scanned over `[0, 12]`
/// and refined locally. Needs `N >= 4`.
///
/// Regressing `ln count` on `ln log2 N` would minimise relative error
/// instead, which is not the quantity R^2 scores.
pub fn fit_polylog(points: &[(usize, f64)]) -> Result<ScalingFit> {
    check(points)?;
    if points.iter().any(|(n, y)| *n < 4 || *y <= 0.0) {
        return Err(Error::InsufficientData("power fit needs N >= 4 and positive counts".into()));
    }
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let solve = |c: f64| -> ScalingFit {
        let f: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).log2().powf(c)).collect();
        let a = f.iter().zip(&y).map(|(f, y)| f * y).sum::<f64>() / f.iter().map(|f| f * f).sum::<f64>();
        ScalingFit { a, b: 0.0, c, r_squared: r_squared(&y, |i| a * f[i]) }
    };
    let coarse = best_of(0.0, 12.0, 1200, solve);
    Ok(best_of((coarse.c - 0.01).max(0.0), coarse.c + 0.01, 200, solve))
}

fn best_of(lo: f64, hi: f64, steps: usize, solve: impl Fn(f64) -> ScalingFit) -> ScalingFit {
    (0..=steps)
        .map(|i| solve(lo + (hi - lo) * i as f64 / steps as f64))
        .fold(None::<ScalingFit>, |acc, f| match acc {
            Some(b) if b.r_squared >= f.r_squared => Some(b),
            _ => Some(f),
        })
        .expect("non-empty scan")
}

/// Fits `count = a M (log2 M)^c + b`. For each `c` on a grid over `[0, 4]`
/// the pair `(a, b)` is an ordinary linear least-squares problem; the `c`
/// with the largest R^2 is refined by a finer local scan.
pub fn fit_ensemble(points: &[(usize, f64)]) -> Result<ScalingFit> {
    check(points)?;
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let solve = |c: f64| -> ScalingFit {
        let x: Vec<f64> = points.iter().map(|(m, _)| *m as f64 * (*m as f64).log2().powf(c)).collect();
        let k = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let b = my - a * mx;
        let r2 = r_squared(&y, |i| a * x[i] + b);
        ScalingFit { a, b, c, r_squared: r2 }
    };
    let coarse = best_of(0.0, 4.0, 400, solve);
    Ok(best_of((coarse.c - 0.01).max(0.0), coarse.c + 0.01, 200, solve))
}

/// Ratios `count(2N) / count(N)` for consecutive doublings, keyed by the smaller `N`.
pub fn doubling_ratios(points: &[(usize, f64)]) -> Vec<(usize, f64)> {
    points
        .windows(2)
        .filter(|w| w[1].0 == 2 * w[0].0)
        .map(|w| (w[0].0, w[1].1 / w[0].1))
        .collect()
}
