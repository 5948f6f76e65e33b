use diskfem::assembly::assemble_global;
use diskfem::banded::BandMatrix;
use diskfem::error::Error;
use diskfem::experiments::solve_anisotropic;
use diskfem::fem::RadialMesh;
use diskfem::linalg::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn helmholtz(np: usize, k2: f64) -> (B3Arrowhead<f64>, B3Arrowhead<f64>) {
    let mesh = RadialMesh::new(vec![0.0, 0.35, 0.7, 1.0]).unwrap();
    let sys = assemble_global(&mesh, np, None, true).unwrap();
    let md = sys.layout.modes()[3];
    let a = sys.stiffness.block(md).combine(1.0, sys.mass.block(md), -k2).unwrap();
    (a, sys.mass.block(md).clone())
}

fn rhs(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 13 % 7) as f64 - 3.0) / 3.0).collect()
}

#[test]
fn ul_reconstructs_indefinite_block_and_matches_dense_solve() {
    let (a, _) = helmholtz(24, 900.0);
    let f = ul_factorize(&a).unwrap();
    let (u, l) = f.to_dense();
    let dense = a.to_dense();
    assert!((&u * &l - &dense).amax() < 1e-12 * dense.amax());
    // U unit upper, L lower
    for i in 0..u.nrows() {
        assert_eq!(u[(i, i)], 1.0);
        for j in 0..i {
            assert_eq!(u[(i, j)], 0.0);
            assert_eq!(l[(j, i)], 0.0);
        }
    }
    let b = rhs(a.dim());
    let x = f.solve(&b).unwrap();
    let want = dense.clone().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
    let err = x.iter().zip(want.iter()).map(|(p, q)| (p - q).abs()).fold(0.0f64, f64::max);
    assert!(err < 1e-10 * want.amax(), "{err:e}");
}

/// Crank–Nicolson block `M + i(δt/2)H` in complex arithmetic against a dense solve.
#[test]
fn complex_block_solve() {
    let (h, m) = (helmholtz(16, 0.0).0, helmholtz(16, 0.0).1);
    let dt = 0.01;
    let a = m.map(|v| Complex64::new(v, 0.0)).combine(Complex64::new(1.0, 0.0), &h.map(|v| Complex64::new(v, 0.0)), Complex64::new(0.0, dt / 2.0)).unwrap();
    let f = ul_factorize(&a).unwrap();
    let b: Vec<Complex64> = rhs(a.dim()).iter().enumerate().map(|(i, &v)| Complex64::new(v, 0.1 * i as f64)).collect();
    let x = f.solve(&b).unwrap();
    let ax = a.matvec(&x);
    let res = ax.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0f64, f64::max);
    assert!(res < 1e-12, "{res:e}");
}

#[test]
fn cholesky_triangular_solves_are_consistent() {
    let (_, m) = helmholtz(20, 0.0);
    let c = reverse_cholesky(&m).unwrap();
    let b = rhs(m.dim());
    let y = c.solve_lower(&b).unwrap();
    let back = c.mul_lower(&y);
    assert!(back.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    let y = c.solve_upper(&b).unwrap();
    let back = c.mul_upper(&y);
    assert!(back.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    let x = c.solve(&b).unwrap();
    let r = m.matvec(&x);
    assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-11));
}

#[test]
fn indefinite_block_is_rejected_by_cholesky() {
    let (a, _) = helmholtz(12, 900.0);
    let err = reverse_cholesky(&a).unwrap_err();
    assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    assert!(err.is_numerical());
}

#[test]
fn zero_block_has_no_ul() {
    let z = B3Arrowhead::<f64>::zeros(2, vec![vec![0, 1]], 3, 1, 1);
    assert!(matches!(ul_factorize(&z), Err(Error::TinyPivot { .. })));
}

#[test]
fn pattern_violations_are_structure_errors() {
    let mut z = B3Arrowhead::<f64>::zeros(2, vec![vec![0], vec![1]], 3, 1, 1);
    // bubble of cell 0 against bubble of cell 1
    let (i, j) = (z.bubble_index(0, 0), z.bubble_index(0, 1));
    assert!(matches!(z.add(i, j, 1.0), Err(Error::Structure(_))));
    assert!(z.add(i, j, 0.0).is_ok());
}

#[test]
fn distant_hat_coupling_widens_the_corner_band() {
    let mut z = B3Arrowhead::<f64>::zeros(4, vec![vec![0, 1], vec![1, 2], vec![2, 3]], 2, 1, 1);
    for i in 0..z.dim() {
        z.add(i, i, 4.0).unwrap();
    }
    z.add(0, 3, 0.5).unwrap();
    z.add(3, 0, 0.5).unwrap();
    let d = z.to_dense();
    assert_eq!(d[(0, 3)], 0.5);
    assert_eq!(d[(1, 1)], 4.0);
    let c = reverse_cholesky(&z).unwrap().factor_dense();
    assert!((c.transpose() * &c - &d).amax() < 1e-14);
}

#[test]
fn sparse_lu_on_diagonal_and_dense_small() {
    let d = SparseMatrix::from_triplets(3, &[(0, 0, 2.0), (1, 1, -4.0), (2, 2, 0.5)]);
    let x = sparse_lu_general(&d).unwrap().solve(&[2.0, 4.0, 1.0]).unwrap();
    assert_eq!(x, vec![1.0, -1.0, 2.0]);
    let singular = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
    assert!(sparse_lu_general(&singular).is_err());
}

#[test]
fn anisotropic_residual_is_small() {
    let mesh = RadialMesh::new(vec![0.2, 0.6, 1.0]).unwrap();
    let (_, res) = solve_anisotropic(&mesh, 12, -100.0, &|x, y| (3.0 * x).cos() + y).unwrap();
    assert!(res < 1e-9, "{res:e}");
}

#[test]
fn rcm_is_a_permutation_that_narrows_a_shuffled_band() {
    let n = 60;
    // tridiagonal matrix under a scrambling permutation
    let perm: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
    let mut t = Vec::new();
    for i in 0..n {
        t.push((perm[i], perm[i], 4.0));
        if i + 1 < n {
            t.push((perm[i], perm[i + 1], -1.0));
            t.push((perm[i + 1], perm[i], -1.0));
        }
    }
    let a = SparseMatrix::from_triplets(n, &t);
    let p = reverse_cuthill_mckee(&a);
    let mut seen = p.clone();
    seen.sort_unstable();
    assert_eq!(seen, (0..n).collect::<Vec<_>>());
    let lu = sparse_lu_general(&a).unwrap();
    let (l, u) = lu.bandwidths();
    assert!(l <= 2 && u <= 4, "bandwidths {l}, {u}");
}

#[test]
fn band_matmul_matches_dense() {
    let mut a = BandMatrix::zeros(7, 1, 2);
    let mut b = BandMatrix::zeros(7, 2, 0);
    for i in 0..7 {
        for j in 0..7 {
            if a.in_band(i, j) {
                a.set(i, j, (i + 2 * j) as f64 - 4.0);
            }
            if b.in_band(i, j) {
                b.set(i, j, 1.0 / (1 + i + j) as f64);
            }
        }
    }
    let got = a.matmul(&b).to_dense();
    let want = a.to_dense() * b.to_dense();
    assert!((got - want).amax() < 1e-14);
}

/// Random symmetric diagonally dominant matrices on a B3 skeleton.
fn random_b3(cells: usize, levels: usize, vals: &[f64]) -> B3Arrowhead<f64> {
    let s = cells + 1;
    let cell_hats: Vec<Vec<usize>> = (0..cells).map(|c| vec![c, c + 1]).collect();
    let mut a = B3Arrowhead::zeros(s, cell_hats, levels, 2, 2);
    let n = a.dim();
    let mut it = vals.iter().cycle();
    let mut row_sum = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            if a.in_pattern(i, j) && (i >= s || j + 1 >= i) {
                let v = *it.next().unwrap();
                a.add(i, j, v).unwrap();
                a.add(j, i, v).unwrap();
                row_sum[i] += v.abs();
                row_sum[j] += v.abs();
            }
        }
    }
    for (i, r) in row_sum.iter().enumerate() {
        a.add(i, i, r + 1.0).unwrap();
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cholesky_and_ul_solve_random_b3(cells in 1usize..6, levels in 1usize..7, vals in proptest::collection::vec(-1.0f64..1.0, 50)) {
        let a = random_b3(cells, levels, &vals);
        let b = rhs(a.dim());
        let dense = a.to_dense();
        let c = reverse_cholesky(&a).unwrap();
        let l = c.factor_dense();
        prop_assert!((l.transpose() * &l - &dense).amax() < 1e-12 * dense.amax());
        let x = c.solve(&b).unwrap();
        let r = a.matvec(&x);
        prop_assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-11));
        let y = ul_factorize(&a).unwrap().solve(&b).unwrap();
        prop_assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-11));
    }

    #[test]
    fn sparse_lu_matches_dense(n in 2usize..40, vals in proptest::collection::vec(-1.0f64..1.0, 120), seed in 0usize..1000) {
        let mut t = Vec::new();
        let mut it = vals.iter().cycle();
        for i in 0..n {
            t.push((i, i, 5.0 + it.next().unwrap()));
            for k in 1..4 {
                let j = (i * 7 + k * 11 + seed) % n;
                if j != i {
                    t.push((i, j, *it.next().unwrap()));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, &t);
        let b = rhs(n);
        let x = sparse_lu_general(&a).unwrap().solve(&b).unwrap();
        let want = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        prop_assert!(x.iter().zip(want.iter()).all(|(p, q)| (p - q).abs() < 1e-10 * (1.0 + q.abs())));
    }

    #[test]
    fn ul_matches_dense_for_nonsymmetric_blocks(shift in -50.0f64..50.0) {
        let (a, m) = helmholtz(10, 0.0);
        // nonsymmetric perturbation inside the skeleton
        let mut p = a.combine(1.0, &m, shift).unwrap();
        let (i, j) = (p.bubble_index(1, 0), p.bubble_index(0, 0));
        p.add(i, j, 0.3).unwrap();
        let dense: DMatrix<f64> = p.to_dense();
        if let Ok(f) = ul_factorize(&p) {
            let (u, l) = f.to_dense();
            prop_assert!((&u * &l - &dense).amax() < 1e-10 * dense.amax());
        }
    }
}
