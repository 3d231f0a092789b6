//! CSV readers and writers for the experiment outputs.
//!
//! Schemas:
//! - strain: `x[,y],component,s,value`
//! - error: `N,s,rel_l2`
//! - counts: `index,cnot,u3,total,depth`
//! - ensemble: `case_id,component,stress,probability`
//! - loads (input): `case_id,gamma0[,gamma1]`
//! - modulus (input): `k0[,k1],mu`

use std::path::Path;

use anyhow::{bail, Context, Result};
use qhomog_core::ensemble::{EnsembleReport, LoadSet};
use qhomog_core::model::StrainField;
use qhomog_core::transpile::{scaling_csv, GateCountReport};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Rows of one strain file: every listed iterate, optionally restricted to
/// the grid line `y = slice` in 2D.
pub fn write_strain(path: &Path, n: usize, length: f64, iterates: &[(usize, &StrainField<f64>)], slice: Option<f64>) -> Result<()> {
    let Some((_, first)) = iterates.first() else { bail!("no iterates to write") };
    let dims = first.dims();
    let h = length / n as f64;
    let mut w = writer(path)?;
    let mut header = vec!["x"];
    if dims == 2 {
        header.push("y");
    }
    header.extend(["component", "s", "value"]);
    w.write_record(&header)?;
    let row_sel = slice.map(|y| ((y / h).round() as usize).min(n - 1));
    for (s, field) in iterates {
        for c in 0..dims {
            for (i, v) in field.components[c].iter().enumerate() {
                let (ix, iy) = (i % n, i / n);
                if dims == 2 && row_sel.is_some_and(|r| r != iy) {
                    continue;
                }
                let mut rec = vec![(ix as f64 * h).to_string()];
                if dims == 2 {
                    rec.push((iy as f64 * h).to_string());
                }
                rec.extend([c.to_string(), s.to_string(), v.to_string()]);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_errors(path: &Path, rows: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["N", "s", "rel_l2"])?;
    for (n, s, e) in rows {
        w.write_record([n.to_string(), s.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_counts(path: &Path, rows: &[(usize, GateCountReport)]) -> Result<()> {
    std::fs::write(path, scaling_csv(rows)).with_context(|| format!("writing {}", path.display()))
}

pub fn write_ensemble(path: &Path, report: &EnsembleReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["case_id", "component", "stress", "probability"])?;
    for (j, label) in report.labels.iter().enumerate() {
        for (c, s) in report.stresses[j].iter().enumerate() {
            w.write_record([label.clone(), c.to_string(), s.to_string(), report.probabilities[j].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load cases from a `case_id,gamma0[,gamma1]` table.
pub fn read_loads(path: &Path, dims: usize) -> Result<LoadSet> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.len() != dims + 1 || &header[0] != "case_id" {
        bail!("{}: expected header case_id,gamma0{}", path.display(), if dims == 2 { ",gamma1" } else { "" });
    }
    let mut labels = Vec::new();
    let mut loads = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        labels.push(rec[0].to_string());
        let vals = (1..=dims)
            .map(|i| rec[i].trim().parse::<f64>().with_context(|| format!("{}: row {}", path.display(), line + 2)))
            .collect::<Result<Vec<_>>>()?;
        loads.push(vals);
    }
    Ok(LoadSet::with_labels(dims, loads, labels)?)
}

/// Modulus table `k0[,k1],mu` covering every grid point exactly once.
pub fn read_modulus(path: &Path, dims: usize, n: usize) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let np = n.pow(dims as u32);
    let mut mu = vec![None; np];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dims + 1 {
            bail!("{}: row {} needs {} columns", path.display(), line + 2, dims + 1);
        }
        let mut idx = 0;
        for d in 0..dims {
            let k: usize = rec[d].trim().parse().with_context(|| format!("{}: row {}", path.display(), line + 2))?;
            if k >= n {
                bail!("{}: index {k} outside a grid of {n}", path.display());
            }
            idx += k * n.pow(d as u32);
        }
        let v: f64 = rec[dims].trim().parse().with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        if mu[idx].replace(v).is_some() {
            bail!("{}: grid point {idx} listed twice", path.display());
        }
    }
    mu.into_iter()
        .enumerate()
        .map(|(i, v)| v.with_context(|| format!("{}: grid point {i} missing", path.display())))
        .collect()
}

/// `(index, total)` pairs of a counts table.
pub fn read_counts(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).with_context(|| format!("{}: no '{name}' column", path.display()));
    let (ix, tot) = (col("index")?, col("total")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push((rec[ix].trim().parse()?, rec[tot].trim().parse()?));
    }
    out.sort_by_key(|p| p.0);
    Ok(out)
}
