mod common;

use common::local_profiles;
use diskfem::fem::{raising_operator_annulus, raising_operator_disk, RadialMesh};
use diskfem::jacobi::*;
use diskfem::semiclassical::*;
use diskfem::zernike::*;
use proptest::prelude::*;

fn legendre(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let c = ((2 * k + 1) as f64 * x * b - k as f64 * a) / (k + 1) as f64;
        a = b;
        b = c;
    }
    b
}

#[test]
fn legendre_case_matches_classical_recurrence() {
    let p = JacobiParams::new(0.0, 0.0).unwrap();
    for &x in &[-0.93, -0.2, 0.0, 0.41, 0.999] {
        let got = eval_jacobi_all(p, 12, x);
        for (n, g) in got.iter().enumerate() {
            let want = legendre(n, x) * ((2 * n + 1) as f64 / 2.0).sqrt();
            assert!((g - want).abs() < 1e-13, "n={n} x={x}: {g} vs {want}");
        }
    }
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    let rule = gauss_legendre(8, -1.0, 1.0);
    for k in 0..8 {
        let want = 2.0 / (2 * k + 1) as f64;
        assert!((rule.integrate(|x| x.powi(2 * k as i32)) - want).abs() < 1e-14);
    }
    let mapped = gauss_legendre(5, 0.5, 2.0);
    assert!((mapped.integrate(|x| x * x) - (8.0 - 0.125) / 3.0).abs() < 1e-14);
}

#[test]
fn normalization_q_routes_agree_with_direct_quadrature() {
    let direct = |t: f64, a: i32, b: i32, c: f64| gauss_legendre(200, 0.0, 1.0).integrate(|x| x.powi(a) * (1.0 - x).powi(b) * (t - x).powf(c));
    // |1/t| < 0.9, non-terminating: hypergeometric series
    let (v, path) = normalization_q(3.0, 1.0, 2.0, 2.5).unwrap();
    assert_eq!(path, QPath::Hypergeometric);
    assert!((v - direct(3.0, 1, 2, 2.5)).abs() < 1e-13 * v);
    // t close to 1 with non-integer c: quadrature fallback
    let (v, path) = normalization_q(1.05, 0.0, 1.0, 7.5).unwrap();
    assert_eq!(path, QPath::Quadrature);
    assert!((v - direct(1.05, 0, 1, 7.5)).abs() < 1e-12 * v);
    // near t = 1 the terminating series cancels badly; whichever route is taken must agree
    let (v, _) = normalization_q(1.01, 1.0, 1.0, 12.0).unwrap();
    assert!((v - direct(1.01, 1, 1, 12.0)).abs() < 1e-12 * v);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(JacobiParams::new(-1.0, 0.0).is_err());
    assert!(SemiParams::new(1.0, 0.0, 0.0, 1.0).is_err());
    assert!(normalization_q(0.5, 0.0, 0.0, 1.0).is_err());
    assert!(ModeIndex::new(0, 0).is_err());
}

#[test]
fn jacobi_raising_reconstructs_pointwise() {
    for m in [0, 3, 9] {
        let n = 8;
        let r = raising_jacobi_a(m, n);
        let lo = JacobiParams::new(0.0, m as f64).unwrap();
        let hi = JacobiParams::new(1.0, m as f64).unwrap();
        for &x in &[-0.8, 0.1, 0.77] {
            let (a, b) = (eval_jacobi_all(lo, n, x), eval_jacobi_all(hi, n - 1, x));
            for k in 0..n {
                let sum: f64 = (0..=n).map(|i| a[i] * r[(i, k)]).sum();
                assert!((sum - (1.0 - x) * b[k]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn semiclassical_raising_reconstructs_pointwise() {
    let (t, m, n) = (1.6, 4, 7);
    let q00 = build_semibasis(SemiParams::new(t, 0.0, 0.0, m as f64).unwrap(), n + 2).unwrap();
    let q11 = build_semibasis(SemiParams::new(t, 1.0, 1.0, m as f64).unwrap(), n).unwrap();
    let q10 = build_semibasis(SemiParams::new(t, 1.0, 0.0, m as f64).unwrap(), n).unwrap();
    let q01 = build_semibasis(SemiParams::new(t, 0.0, 1.0, m as f64).unwrap(), n).unwrap();
    let (rab, ra, rb) = (raising_ab(t, m, n).unwrap(), raising_a(t, m, n).unwrap(), raising_b(t, m, n).unwrap());
    for &x in &[0.05, 0.5, 0.93] {
        let base = q00.eval_all(x, n + 2);
        let combine = |r: &nalgebra::DMatrix<f64>, k: usize| (0..r.nrows()).map(|i| base[i] * r[(i, k)]).sum::<f64>();
        let (v11, v10, v01) = (q11.eval_all(x, n), q10.eval_all(x, n), q01.eval_all(x, n));
        for k in 0..n {
            assert!((combine(&rab, k) - x * (1.0 - x) * v11[k]).abs() < 1e-11);
            assert!((combine(&ra, k) - x * v10[k]).abs() < 1e-11);
            assert!((combine(&rb, k) - (1.0 - x) * v01[k]).abs() < 1e-11);
        }
    }
}

#[test]
fn raising_c_is_upper_bidiagonal() {
    let p = SemiParams::new(1.3, 1.0, 0.0, 2.0).unwrap();
    let r = raising_c(p, 9).unwrap();
    for i in 0..9 {
        for j in 0..9 {
            if i > j || j > i + 1 {
                assert_eq!(r[(i, j)], 0.0);
            } else {
                assert!(r[(i, j)].abs() > 1e-6);
            }
        }
    }
}

#[test]
fn disk_laplacian_is_diagonal_with_closed_form() {
    for m in [0, 1, 6] {
        let d = laplacian_disk(m, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { -4.0 * (i + 1) as f64 * (i + m + 1) as f64 } else { 0.0 };
                assert!((d[(i, j)] - want).abs() < 1e-10 * want.abs().max(1.0), "m={m} ({i},{j})");
            }
        }
    }
}

/// Local hat/bubble profiles equal `Σ_k Z_k R[k,i]` at sample radii.
#[test]
fn local_functions_are_zernike_times_raising() {
    for m in [0, 1, 5, 12] {
        let n = 7;
        let disk = RadialMesh::new(vec![0.0, 1.0]).unwrap();
        let r = raising_operator_disk(m, n);
        let md = ModeIndex::new(m, 1).unwrap();
        for &x in &[0.07, 0.5, 0.96] {
            let (g, _) = local_profiles(&disk, 0, m, n, x);
            let z: Vec<f64> = (0..n).map(|k| eval_zernike(0.0, ZernikeIndex::new(m + 2 * k, md).unwrap(), x, 0.0).unwrap()).collect();
            for i in 0..n {
                let sum: f64 = (0..n).map(|k| z[k] * r[(k, i)]).sum();
                assert!((sum - g[i]).abs() < 1e-12 * (1.0 + g[i].abs()), "disk m={m} i={i}");
            }
        }
        for rho in [0.1, 0.5, 0.9] {
            let p = AnnulusParams::new(rho).unwrap();
            let ann = RadialMesh::new(vec![rho, 1.0]).unwrap();
            let r = raising_operator_annulus(p, m, n).unwrap();
            for s in [0.02, 0.5, 0.97] {
                let x = rho + s * (1.0 - rho);
                let (g, _) = local_profiles(&ann, 0, m, n, x);
                let z: Vec<f64> = (0..n).map(|k| eval_zernike_annular(p, 0.0, 0.0, ZernikeIndex::new(m + 2 * k, md).unwrap(), x, 0.0).unwrap()).collect();
                for i in 0..n {
                    let sum: f64 = (0..n).map(|k| z[k] * r[(k, i)]).sum();
                    assert!((sum - g[i]).abs() < 1e-11 * (1.0 + g[i].abs()), "annulus ρ={rho} m={m} i={i}: {sum} vs {}", g[i]);
                }
            }
        }
    }
}

/// Upper bandwidth two, and the only entry below the diagonal is `r₂₁`.
#[test]
fn annulus_raising_is_almost_upper_triangular() {
    let r = raising_operator_annulus(AnnulusParams::new(0.4).unwrap(), 3, 9).unwrap();
    for i in 0..9 {
        for j in 0..9 {
            let structural = j <= i + 2 && (i <= j || (i, j) == (1, 0));
            if !structural {
                assert_eq!(r[(i, j)], 0.0, "({i},{j})");
            }
        }
    }
    assert!(r[(1, 0)].abs() > 1e-3);
}

#[test]
fn mode_ordering_round_trips() {
    for (pos, md) in ModeIndex::all(9).iter().enumerate() {
        assert_eq!(md.position(), pos);
    }
    assert_eq!(ModeIndex::all(3).len(), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jacobi_family_is_orthonormal(a in -0.9f64..4.0, b in -0.9f64..6.0, n in 1usize..14) {
        let p = JacobiParams::new(a, b).unwrap();
        let rule = gauss_rule(p, n + 2).unwrap();
        let vals: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| eval_jacobi_all(p, n, x)).collect();
        for i in 0..=n {
            for j in 0..=i {
                let g: f64 = vals.iter().zip(&rule.weights).map(|(v, w)| w * v[i] * v[j]).sum();
                prop_assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-11, "a={a} b={b} ({i},{j}): {g}");
            }
        }
    }

    /// Orthonormality under an independent Gauss–Legendre rule (integer exponents make
    /// the integrand a polynomial).
    #[test]
    fn semiclassical_family_is_orthonormal(t in 1.02f64..4.0, a in 0i32..2, b in 0i32..2, c in 0i32..8, n in 1usize..12) {
        let basis = build_semibasis(SemiParams::new(t, a as f64, b as f64, c as f64).unwrap(), n).unwrap();
        let rule = gauss_legendre(n + 12, 0.0, 1.0);
        for i in 0..n {
            for j in 0..=i {
                let g = rule.integrate(|x| {
                    let q = basis.eval_all(x, n);
                    x.powi(a) * (1.0 - x).powi(b) * (t - x).powi(c) * q[i] * q[j]
                });
                prop_assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10, "({i},{j}): {g}");
            }
        }
    }

    #[test]
    fn p_normalization_matches_beta(a in -0.5f64..5.0, b in -0.5f64..5.0) {
        let got = normalization_p(JacobiParams::new(a, b).unwrap());
        let rule = gauss_rule(JacobiParams::new(a, b).unwrap(), 4).unwrap();
        let w: f64 = rule.weights.iter().sum();
        prop_assert!((got - w).abs() < 1e-12 * got);
    }
}
