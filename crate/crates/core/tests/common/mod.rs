//! Dense quadrature oracles: Gauss–Legendre in r times the trapezoid rule in θ, applied
//! to basis functions evaluated from their defining products (no raising matrices).
#![allow(dead_code)]

use diskfem::fem::RadialMesh;
use diskfem::jacobi::{eval_orthonormal_all_with_derivative, gauss_legendre, jacobi_matrix, normalization_p, normalization_q, JacobiParams};
use diskfem::semiclassical::build_semibasis;
use diskfem::zernike::ModeIndex;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Radial profiles `g_i(r)` and `g_i'(r)` of the unscaled local functions of `cell` for
/// mode `m`; the functions are `g_i(r)·cos(mθ)` or `g_i(r)·sin(mθ)`.
pub fn local_profiles(mesh: &RadialMesh, cell: usize, m: usize, n: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = mesh.cell(cell);
    let s = r / hi;
    let mf = m as f64;
    // r̂^m and its r-derivative
    let pw = s.powi(m as i32);
    let dpw = if m == 0 { 0.0 } else { mf * s.powi(m as i32 - 1) / hi };
    let mut g = Vec::with_capacity(n);
    let mut dg = Vec::with_capacity(n);
    let s2 = s * s;
    let ds2 = 2.0 * s / hi;
    if lo == 0.0 {
        let p0 = normalization_p(JacobiParams { a: 0.0, b: mf }).sqrt();
        g.push(pw / p0);
        dg.push(dpw / p0);
        if n > 1 {
            let params = JacobiParams { a: 1.0, b: mf };
            let rec = jacobi_matrix(params, n).unwrap();
            let (p, dp) = eval_orthonormal_all_with_derivative(&rec, normalization_p(params), 2.0 * s2 - 1.0, n - 1);
            for k in 0..n - 1 {
                let w = 1.0 - s2;
                g.push(w * pw * p[k]);
                dg.push(-ds2 * pw * p[k] + w * dpw * p[k] + w * pw * dp[k] * 2.0 * ds2);
            }
        }
    } else {
        let rho = lo / hi;
        let t = 1.0 / (1.0 - rho * rho);
        let q10 = normalization_q(t, 1.0, 0.0, mf).unwrap().0.sqrt();
        let q01 = normalization_q(t, 0.0, 1.0, mf).unwrap().0.sqrt();
        g.push((1.0 - s2) * pw / q10);
        dg.push((-ds2 * pw + (1.0 - s2) * dpw) / q10);
        g.push((s2 - rho * rho) * pw / q01);
        dg.push((ds2 * pw + (s2 - rho * rho) * dpw) / q01);
        if n > 2 {
            let b = build_semibasis(diskfem::semiclassical::SemiParams::new(t, 1.0, 1.0, mf).unwrap(), n - 2).unwrap();
            let tau = t * (1.0 - s2);
            let dtau = -t * ds2;
            let (q, dq) = b.eval_all_with_derivative(tau, n - 2);
            let w = (1.0 - s2) * (s2 - rho * rho);
            let dw = -ds2 * (s2 - rho * rho) + (1.0 - s2) * ds2;
            for k in 0..n - 2 {
                g.push(w * pw * q[k]);
                dg.push(dw * pw * q[k] + w * dpw * q[k] + w * pw * dq[k] * dtau);
            }
        }
    }
    (g, dg)
}

fn angular(mode: ModeIndex, th: f64) -> (f64, f64) {
    let mf = mode.m as f64;
    if mode.j == 1 {
        ((mf * th).cos(), -mf * (mf * th).sin())
    } else {
        ((mf * th).sin(), mf * (mf * th).cos())
    }
}

/// What the oracle integrates.
pub enum OracleKind<'a> {
    Mass,
    Stiffness,
    /// `λ(r²)` weight.
    Weighted(&'a dyn Fn(f64) -> f64),
    /// Weight `x = r cos θ`.
    X,
}

/// `∫ φ_i^{(a)} w φ_j^{(b)}` (or the gradient form) over `cell`, rows from mode `a` with
/// `na` functions, columns from mode `b` with `nb` functions.
pub fn oracle_block(mesh: &RadialMesh, cell: usize, a: ModeIndex, na: usize, b: ModeIndex, nb: usize, kind: OracleKind) -> DMatrix<f64> {
    let (lo, hi) = mesh.cell(cell);
    let nr = 24 + 2 * (na.max(nb) + a.m.max(b.m));
    let rule = gauss_legendre(nr, lo, hi);
    let nth = 4 * (a.m + b.m) + 16;
    let h = 2.0 * PI / nth as f64;
    let mut out = DMatrix::zeros(na, nb);
    for (&r, &wr) in rule.nodes.iter().zip(&rule.weights) {
        let (ga, dga) = local_profiles(mesh, cell, a.m, na, r);
        let (gb, dgb) = local_profiles(mesh, cell, b.m, nb, r);
        for p in 0..nth {
            let th = p as f64 * h;
            let (ca, dca) = angular(a, th);
            let (cb, dcb) = angular(b, th);
            let w = wr * h * r;
            for i in 0..na {
                for j in 0..nb {
                    let v = match kind {
                        OracleKind::Mass => ga[i] * ca * gb[j] * cb,
                        OracleKind::Weighted(f) => f(r * r) * ga[i] * ca * gb[j] * cb,
                        OracleKind::X => r * th.cos() * ga[i] * ca * gb[j] * cb,
                        OracleKind::Stiffness => dga[i] * ca * dgb[j] * cb + ga[i] * dca * gb[j] * dcb / (r * r),
                    };
                    out[(i, j)] += w * v;
                }
            }
        }
    }
    out
}

/// `max|A - B| / max|B|`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}
