use num_complex::Complex64;
use qhomog_core::greens::*;
use qhomog_core::{StateVector, Projector};

const N4_QUBITS: usize = 8;

/// k0 = qubits 0..2, k1 = 2..4, l0 = 4, l1 = 5, p0 = 6, c = 7.
fn n4_qubits() -> GammaQubits {
    GammaQubits { k0: vec![0, 1], k1: vec![2, 3], l0: 4, l1: 5, p0: 6, c: 7, ext: None, controls: vec![] }
}

#[test]
fn coefficient_examples() {
    assert_eq!(lcu_coefficients(1, 1, 8, 1.0), [-0.5, -0.5, 0.0]);
    assert_eq!(lcu_coefficients(1, 0, 8, 1.0), [-0.5, 0.0, -0.5]);
    assert_eq!(lcu_coefficients(0, 0, 8, 1.0), [-0.5, 0.0, 0.0]);
    let a = lcu_coefficients(1, 1, 8, 2.0);
    assert!((a[0] + 0.25).abs() < 1e-15 && (a[1] + 0.25).abs() < 1e-15);
}

#[test]
fn green_matrix_examples() {
    assert_eq!(green_matrix(&[3], 8, 1.0).unwrap(), vec![vec![-1.0]]);
    assert_eq!(green_matrix(&[1, 0], 8, 1.0).unwrap(), vec![vec![-1.0, 0.0], vec![0.0, 0.0]]);
    assert!(green_matrix(&[0, 0], 8, 1.0).is_err());
    assert!(green_matrix(&[0], 8, 1.0).is_err());
}

#[test]
fn reconstruction_matches_operator_everywhere() {
    for mu0 in [1.0, 0.7, 3.0] {
        let lcu = LcuDecomposition::new(8, mu0);
        for k1 in 0..8 {
            for k0 in 0..8 {
                if k0 == 0 && k1 == 0 {
                    continue;
                }
                let g = green_matrix(&[k0, k1], 8, mu0).unwrap();
                let r = lcu.reconstruct(k0, k1);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((g[i][j] - r[i][j]).abs() <= 1e-12, "({k0},{k1})");
                    }
                }
            }
        }
    }
}

#[test]
fn nyquist_lines_keep_real_fields_real() {
    // Gamma(-k) must equal Gamma(k) so that a real input gives a real output
    let n = 8;
    for k1 in 0..n {
        for k0 in 0..n {
            if k0 == 0 && k1 == 0 {
                continue;
            }
            let a = green_matrix(&[k0, k1], n, 1.0).unwrap();
            let b = green_matrix(&[(n - k0) % n, (n - k1) % n], n, 1.0).unwrap();
            assert_eq!(a, b, "({k0},{k1})");
        }
    }
    assert!(nyquist_line(4, 1, 8) && nyquist_line(2, 4, 8) && !nyquist_line(3, 5, 8));
}

#[test]
fn coefficient_symmetry() {
    for k1 in 0..16 {
        for k0 in 0..16 {
            let a = lcu_coefficients(k0, k1, 16, 1.3);
            let b = lcu_coefficients(k1, k0, 16, 1.3);
            assert!((a[1] - b[1]).abs() < 1e-15);
            assert!((a[2] + b[2]).abs() < 1e-15);
        }
    }
}

#[test]
fn prep_amplitudes() {
    let mut s = StateVector::zero(2);
    s.apply_block(&build_u_prep(0, 1)).unwrap();
    let third = (1.0f64 / 3.0).sqrt();
    for l in 0..3 {
        assert!((s.amplitude(l).re - third).abs() < 1e-15);
    }
    assert!(s.amplitude(3).norm() < 1e-14);
    s.apply_block(&build_u_prep(0, 1).inverse()).unwrap();
    assert!((s.amplitude(0).re - 1.0).abs() < 1e-14);
}

/// Selected output `(l = 00, p0 = 1)` for input `|k>` with stress `tau` on `c`.
fn selected(block: &qhomog_core::CircuitBlock, k0: usize, k1: usize, tau: [f64; 2]) -> [f64; 2] {
    let q = n4_qubits();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << N4_QUBITS];
    let base = k0 | k1 << 2;
    amps[base] = Complex64::new(tau[0], 0.0);
    amps[base | 1 << q.c] = Complex64::new(tau[1], 0.0);
    let mut s = StateVector::from_amplitudes(amps).unwrap();
    s.apply_block(block).unwrap();
    let p = Projector::new().with_value(&[0, 1, 2, 3], base).with(q.l0, false).with(q.l1, false).with(q.p0, true);
    let a = s.read_amplitudes(&p);
    [a[&0].re, a[&1].re]
}

#[test]
fn selected_block_equals_operator_n4_exhaustive() {
    let (block, tables) = build_u_gamma(4, 1.0, &n4_qubits(), &GammaEncoding::Lookup).unwrap();
    assert_eq!(tables.scale, 1.0);
    let out = selected(&block, 1, 0, [1.0, 0.0]);
    assert!((out[0] + 1.0 / 3.0).abs() < 1e-12 && out[1].abs() < 1e-12);
    assert_eq!(selected(&block, 2, 3, [0.0, 0.0]), [0.0, 0.0]);

    let tau = [0.6, -0.8];
    for k1 in 0..4 {
        for k0 in 0..4 {
            if k0 == 0 && k1 == 0 {
                continue;
            }
            let g = green_matrix(&[k0, k1], 4, 1.0).unwrap();
            let out = selected(&block, k0, k1, tau);
            for i in 0..2 {
                let want = (g[i][0] * tau[0] + g[i][1] * tau[1]) / 3.0;
                assert!((out[i] - want).abs() <= 1e-10, "({k0},{k1}) comp {i}");
            }
        }
    }
}

#[test]
fn success_probability_is_a_ninth_of_the_image_norm() {
    let mu0 = 1.0;
    let (block, _) = build_u_gamma(4, mu0, &n4_qubits(), &GammaEncoding::Lookup).unwrap();
    let q = n4_qubits();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << N4_QUBITS];
    let mut taus = Vec::new();
    for k in 1..16 {
        let t = [((k * 7) % 5) as f64 - 2.0, ((k * 3) % 4) as f64 - 1.5];
        amps[k] = Complex64::new(t[0], 0.0);
        amps[k | 1 << q.c] = Complex64::new(t[1], 0.0);
        taus.push((k, t));
    }
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    let mut s = StateVector::from_amplitudes(amps).unwrap();
    s.apply_block(&block).unwrap();
    let p = s.probability(&Projector::new().with(q.l0, false).with(q.l1, false).with(q.p0, true));
    let want: f64 = taus
        .iter()
        .map(|(k, t)| {
            let g = green_matrix(&[k % 4, k / 4], 4, mu0).unwrap();
            let v = [g[0][0] * t[0] + g[0][1] * t[1], g[1][0] * t[0] + g[1][1] * t[1]];
            (v[0] * v[0] + v[1] * v[1]) / (norm * norm)
        })
        .sum::<f64>()
        / 9.0;
    assert!((p - want).abs() <= 1e-10, "{p} vs {want}");
}

#[test]
fn polynomial_encodings_track_their_realised_tables() {
    for enc in [GammaEncoding::plain_default(), GammaEncoding::extended_default()] {
        let mut q = n4_qubits();
        let width = if enc.needs_extension() {
            q.ext = Some((8, 9));
            10
        } else {
            N4_QUBITS
        };
        let (block, tables) = build_u_gamma(4, 1.0, &q, &enc).unwrap();
        for k in 1..16 {
            let (k0, k1) = (k % 4, k / 4);
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
            amps[k] = Complex64::new(1.0, 0.0);
            let mut s = StateVector::from_amplitudes(amps).unwrap();
            s.apply_block(&block).unwrap();
            let mut p = Projector::new().with_value(&[0, 1, 2, 3], k).with(q.l0, false).with(q.l1, false).with(q.p0, true);
            if let Some((a, b)) = q.ext {
                p = p.with(a, false).with(b, false);
            }
            let a = s.read_amplitudes(&p);
            let m = tables.selected_matrix(k0, k1);
            assert!((a[&0].re - m[0][0]).abs() < 1e-10 && (a[&1].re - m[1][0]).abs() < 1e-10);
        }
        assert!(tables.fit_residual < 0.05, "{enc:?}: {}", tables.fit_residual);
    }
}

#[test]
fn one_dimensional_operator() {
    let (b, scale) = build_u_gamma_1d(1.0, 0, &[]);
    let mut s = StateVector::zero(1);
    s.apply_block(&b).unwrap();
    assert_eq!(scale, 1.0);
    assert!((s.amplitude(1).re + 1.0).abs() < 1e-12);
    let (_, scale) = build_u_gamma_1d(0.5, 0, &[]);
    assert_eq!(scale, 2.0);
}
