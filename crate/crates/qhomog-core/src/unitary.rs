//! Brute-force unitary checks for small circuits (a handful of qubits).

use num_complex::Complex64;

use crate::circuit::CircuitBlock;
use crate::error::Result;
use crate::statevector::StateVector;
use crate::transpile::{lower, LowerOptions};

/// Columns of the block's unitary: the block applied to every basis state.
pub fn columns(block: &CircuitBlock, num_qubits: usize) -> Result<Vec<StateVector<f64>>> {
    (0..1usize << num_qubits)
        .map(|i| {
            let mut s = StateVector::basis(num_qubits, i);
            s.apply_block(block)?;
            Ok(s)
        })
        .collect()
}

/// Largest deviation of the column Gram matrix from the identity.
pub fn unitarity_defect(block: &CircuitBlock, num_qubits: usize) -> Result<f64> {
    let cols = columns(block, num_qubits)?;
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for j in i..cols.len() {
            let ip = cols[i].inner(&cols[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ip - Complex64::new(want, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Largest elementwise difference between the block and its lowering.
///
/// With a work qubit only inputs where it is |0> are compared, since the
/// lowering is only promised to act correctly on that subspace.
pub fn lowering_deviation(block: &CircuitBlock, num_qubits: usize, opts: LowerOptions) -> Result<f64> {
    let lowered = lower(block, LowerOptions { num_qubits, ..opts })?;
    let lb = lowered.to_block();
    let phase = Complex64::from_polar(1.0, lowered.global_phase);
    let mut worst = 0.0f64;
    for i in 0..1usize << num_qubits {
        if let Some(w) = opts.work_qubit {
            if i >> w & 1 == 1 {
                continue;
            }
        }
        let mut a = StateVector::<f64>::basis(num_qubits, i);
        a.apply_block(block)?;
        let mut b = StateVector::<f64>::basis(num_qubits, i);
        b.apply_block(&lb)?;
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            worst = worst.max((x - y * phase).norm());
        }
    }
    Ok(worst)
}
