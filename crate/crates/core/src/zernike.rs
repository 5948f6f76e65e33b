//! Generalized Zernike polynomials on the unit disk and Zernike annular polynomials on
//! `Ω_ρ = {ρ < r < 1}`.
//!
//! `Z^{(a)}_{n,m,j} = Y_{m,j} P^{(a,m)}_{(n-m)/2}(2r²-1)` and
//! `Z^{ρ,(a,b)}_{n,m,j} = Y_{m,j} Q^{t,(a,b,m)}_{(n-m)/2}(τ)` with `τ = t(1-r²)`,
//! `t = 1/(1-ρ²)`. Their squared norms are `π_m/2^{m+a+2}` and `π_m/(2t^{a+b+m+1})`
//! under the weights `(1-r²)^a` and `(1-r²)^a (r²-ρ²)^b`.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::jacobi::{eval_jacobi_all, gauss_legendre, gauss_rule, jacobi_matrix, JacobiParams};
use crate::semiclassical::{build_semibasis, raising_c, SemiParams};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Fourier mode `m` and sign `j` (1 for cosine, 0 for sine).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub m: usize,
    pub j: u8,
}

impl ModeIndex {
    pub fn new(m: usize, j: u8) -> Result<Self> {
        if j > 1 || (m == 0 && j != 1) {
            return Err(Error::InvalidParameter(format!("invalid Fourier mode (m={m}, j={j})")));
        }
        Ok(ModeIndex { m, j })
    }

    /// `π_m = ∫ Y_{m,j}(cos θ, sin θ)² dθ`: 2π for m = 0, π otherwise.
    pub fn pi_m(&self) -> f64 {
        pi_m(self.m)
    }

    /// Modes ordered `(0,1), (1,0), (1,1), (2,0), (2,1), …` up to `max_m`.
    pub fn all(max_m: usize) -> Vec<ModeIndex> {
        let mut v = vec![ModeIndex { m: 0, j: 1 }];
        for m in 1..=max_m {
            v.push(ModeIndex { m, j: 0 });
            v.push(ModeIndex { m, j: 1 });
        }
        v
    }

    /// Position in the ordering of [`ModeIndex::all`].
    pub fn position(&self) -> usize {
        if self.m == 0 {
            0
        } else {
            2 * self.m - 1 + self.j as usize
        }
    }
}

pub fn pi_m(m: usize) -> f64 {
    if m == 0 {
        2.0 * PI
    } else {
        PI
    }
}

/// Degree `n` and mode; the radial index is `(n-m)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ZernikeIndex {
    pub n: usize,
    pub mode: ModeIndex,
}

impl ZernikeIndex {
    pub fn new(n: usize, mode: ModeIndex) -> Result<Self> {
        if n < mode.m || (n - mode.m) % 2 != 0 {
            return Err(Error::InvalidParameter(format!("degree {n} incompatible with mode {}", mode.m)));
        }
        Ok(ZernikeIndex { n, mode })
    }

    pub fn radial_index(&self) -> usize {
        (self.n - self.mode.m) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusParams {
    pub rho: f64,
    pub t: f64,
}

impl AnnulusParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("annulus inner radius must lie in (0,1), got {rho}")));
        }
        Ok(AnnulusParams { rho, t: 1.0 / (1.0 - rho * rho) })
    }

    pub fn tau(&self, r: f64) -> f64 {
        self.t * (1.0 - r * r)
    }

    pub fn semi(&self, a: f64, b: f64, m: usize) -> SemiParams {
        SemiParams { t: self.t, a, b, c: m as f64 }
    }
}

/// `(Re, Im)` of `(x+iy)^m`.
pub fn complex_power(x: f64, y: f64, m: usize) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m {
        let t = re * x - im * y;
        im = re * y + im * x;
        re = t;
    }
    (re, im)
}

/// `Y_{m,j}(x,y)`: `r^m cos(mθ)` for j = 1 and `r^m sin(mθ)` for j = 0.
pub fn eval_harmonic(mode: ModeIndex, x: f64, y: f64) -> f64 {
    let (re, im) = complex_power(x, y, mode.m);
    if mode.j == 1 {
        re
    } else {
        im
    }
}

/// Gradient of `Y_{m,j}`: `∇ Re z^m = m (Re z^{m-1}, -Im z^{m-1})` and
/// `∇ Im z^m = m (Im z^{m-1}, Re z^{m-1})`.
pub fn harmonic_gradient(mode: ModeIndex, x: f64, y: f64) -> (f64, f64) {
    if mode.m == 0 {
        return (0.0, 0.0);
    }
    let (re, im) = complex_power(x, y, mode.m - 1);
    let mf = mode.m as f64;
    if mode.j == 1 {
        (mf * re, -mf * im)
    } else {
        (mf * im, mf * re)
    }
}

const BOUNDARY_SLACK: f64 = 1e-12;

/// `Z^{(a)}_{n,m,j}(x,y)` on the closed unit disk.
pub fn eval_zernike(a: f64, idx: ZernikeIndex, x: f64, y: f64) -> Result<f64> {
    let r2 = x * x + y * y;
    if r2 > 1.0 + BOUNDARY_SLACK {
        return Err(Error::InvalidParameter(format!("({x},{y}) lies outside the unit disk")));
    }
    let p = eval_jacobi_all(JacobiParams::new(a, idx.mode.m as f64)?, idx.radial_index(), 2.0 * r2 - 1.0);
    Ok(eval_harmonic(idx.mode, x, y) * p[idx.radial_index()])
}

/// `Z^{ρ,(a,b)}_{n,m,j}(x,y)` on the closed annulus `ρ ≤ r ≤ 1`.
pub fn eval_zernike_annular(params: AnnulusParams, a: f64, b: f64, idx: ZernikeIndex, x: f64, y: f64) -> Result<f64> {
    let r2 = x * x + y * y;
    let rho2 = params.rho * params.rho;
    if r2 > 1.0 + BOUNDARY_SLACK || r2 < rho2 * (1.0 - BOUNDARY_SLACK) {
        return Err(Error::InvalidParameter(format!("({x},{y}) lies outside the annulus with ρ={}", params.rho)));
    }
    let k = idx.radial_index();
    let basis = build_semibasis(params.semi(a, b, idx.mode.m), k + 1)?;
    let q = basis.eval_all(params.t * (1.0 - r2), k + 1);
    Ok(eval_harmonic(idx.mode, x, y) * q[k])
}

/// Radial profile `r^m g(s)` helper: values of `g_k` and `dg_k/ds` at one node.
type Profile<'a> = &'a dyn Fn(f64) -> (Vec<f64>, Vec<f64>);

/// `S_ik = ∫ r^{2m-2} {(m g_i + 2 s g_i')(m g_k + 2 s g_k') + m² g_i g_k} s' ds`-type radial
/// stiffness integrals, generic over the radial coordinate. `jac(u)` returns
/// `(r², dr²/du, measure)` where `measure` converts `du` into `r dr`.
fn radial_stiffness(
    n: usize,
    m: usize,
    rule_nodes: &[f64],
    rule_weights: &[f64],
    profile: Profile,
    jac: &dyn Fn(f64) -> (f64, f64, f64),
    rpow: &dyn Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mf = m as f64;
    let mut s = DMatrix::zeros(n, n);
    for (&u, &w) in rule_nodes.iter().zip(rule_weights) {
        let (g, dg) = profile(u);
        let (r2, dr2du, measure) = jac(u);
        // d/dr [r^m g(u)] = r^{m-1} (m g + 2 r² g_u / (dr²/du)).
        let d: Vec<f64> = (0..n).map(|k| mf * g[k] + 2.0 * r2 * dg[k] / dr2du).collect();
        let scale = w * rpow(u) * measure;
        for i in 0..n {
            for k in 0..=i {
                let v = scale * (d[i] * d[k] + mf * mf * g[i] * g[k]);
                s[(i, k)] += v;
                if i != k {
                    s[(k, i)] += v;
                }
            }
        }
    }
    s
}

/// `⟨∇B_i, ∇B_k⟩` over the unit disk for the disk bubbles `B_k = (1-r²) Z^{(1)}_{m+2k,m,j}`.
pub fn bubble_stiffness_disk(m: usize, n: usize) -> DMatrix<f64> {
    let mf = m as f64;
    let params = JacobiParams { a: 1.0, b: mf };
    let count = n + m / 2 + 6;
    // η = 2r²-1; weight ((1+η)/2)^{m-1} absorbed into Gauss–Jacobi(0, m-1) when m ≥ 1.
    let (rule, rpow): (_, Box<dyn Fn(f64) -> f64>) = if m >= 1 {
        let r = gauss_rule(JacobiParams { a: 0.0, b: mf - 1.0 }, count).unwrap();
        (r, Box::new(move |_| 0.5f64.powf(mf - 1.0)))
    } else {
        (gauss_legendre(count, -1.0, 1.0), Box::new(|eta: f64| 2.0 / (1.0 + eta)))
    };
    let rec = jacobi_matrix(params, n.max(1) + 1).unwrap();
    let mass = crate::jacobi::normalization_p(params);
    let profile = move |eta: f64| {
        let (p, dp) = crate::jacobi::eval_orthonormal_all_with_derivative(&rec, mass, eta, n);
        let g = p.iter().map(|v| 0.5 * (1.0 - eta) * v).collect();
        let dg = p.iter().zip(&dp).map(|(v, dv)| -0.5 * v + 0.5 * (1.0 - eta) * dv).collect();
        (g, dg)
    };
    let jac = |eta: f64| (0.5 * (1.0 + eta), 0.5, 0.25);
    let mut s = radial_stiffness(n, m, &rule.nodes, &rule.weights, &profile, &jac, &*rpow);
    s *= pi_m(m);
    s
}

/// `⟨∇B_i, ∇B_k⟩` over `Ω_ρ` for `B_k = (1-r²)(r²-ρ²) Z^{ρ,(1,1)}_{m+2k,m,j}`.
pub fn bubble_stiffness_annulus(params: AnnulusParams, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let t = params.t;
    let basis = build_semibasis(params.semi(1.0, 1.0, m), n.max(1))?;
    let rule = gauss_legendre(n + m / 2 + 8, 0.0, 1.0);
    let profile = |tau: f64| {
        let (q, dq) = basis.eval_all_with_derivative(tau, n);
        let s = tau * (1.0 - tau) / (t * t);
        let ds = (1.0 - 2.0 * tau) / (t * t);
        let g = q.iter().map(|v| s * v).collect();
        let dg = q.iter().zip(&dq).map(|(v, dv)| ds * v + s * dv).collect();
        (g, dg)
    };
    // r² = (t-τ)/t, dr²/dτ = -1/t, r dr = dτ/(2t) once orientation is accounted for.
    let jac = |tau: f64| ((t - tau) / t, -1.0 / t, 1.0 / (2.0 * t));
    let mi = m as i32;
    let rpow = |tau: f64| ((t - tau) / t).powi(mi - 1);
    let mut s = radial_stiffness(n, m, &rule.nodes, &rule.weights, &profile, &jac, &rpow);
    s *= pi_m(m);
    Ok(s)
}

fn check_band(a: &DMatrix<f64>, half: usize, what: &str) -> Result<DMatrix<f64>> {
    let scale = a.amax();
    let mut out = a.clone();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i.abs_diff(j) > half {
                if a[(i, j)].abs() > 1e-11 * scale {
                    return Err(Error::Structure(format!("{what}: entry ({i},{j}) = {:.3e} off band", a[(i, j)])));
                }
                out[(i, j)] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Diagonal `D_m` with `Δ[(1-r²) Z^{(1)}_{m,j}] = Z^{(1)}_{m,j} D_m`, built variationally:
/// `D_m = -(2^{m+3}/π_m) ⟨∇B, ∇B⟩`. The result is `N×N` with the diagonality checked.
pub fn laplacian_disk(m: usize, n: usize) -> Result<DMatrix<f64>> {
    let s = bubble_stiffness_disk(m, n);
    let d = s * (-(2f64.powi(m as i32 + 3)) / pi_m(m));
    check_band(&d, 0, "laplacian_disk")
}

/// Tridiagonal `D^ρ_m` with `Δ[(1-r²)(r²-ρ²) Z^{ρ,(1,1)}_{m,j}] = Z^{ρ,(1,1)}_{m,j} D^ρ_m`.
pub fn laplacian_annulus(params: AnnulusParams, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let s = bubble_stiffness_annulus(params, m, n)?;
    let d = s * (-2.0 * params.t.powi(m as i32 + 3) / pi_m(m));
    check_band(&d, 1, "laplacian_annulus")
}

/// `(ρ²/2)(I + X_{(a,m)})`: multiplication by r² in the `Z^{(a)}` basis of a disk of radius ρ.
pub fn r2_matrix_disk(a: f64, m: usize, n: usize, rho: f64) -> Result<BandMatrix> {
    let x = jacobi_matrix(JacobiParams::new(a, m as f64)?, n)?;
    let mut b = x.to_band();
    b.add_identity(1.0);
    b.scale(0.5 * rho * rho);
    Ok(b)
}

/// `ρ₂²(I - t⁻¹ X_{t,(a,b,m)})`: multiplication by r² in the `Z^{K,(a,b)}` basis of the
/// cell `ρ₁ < r < ρ₂`.
pub fn r2_matrix_annulus(rho1: f64, rho2: f64, a: f64, b: f64, m: usize, n: usize) -> Result<BandMatrix> {
    let p = AnnulusParams::new(rho1 / rho2)?;
    let basis = build_semibasis(p.semi(a, b, m), n)?;
    let mut x = basis.recurrence.to_band();
    x.scale(-1.0 / p.t);
    x.add_identity(1.0);
    x.scale(rho2 * rho2);
    Ok(x)
}

/// Blocks of the annular x-Jacobi operator: `x Z_{src}[:,k] = Σ_i Z_{dst}[:,i] block[i,k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoupling {
    /// `(destination, source, block)`; block shape is `rows[dst.m] × rows[src.m]`.
    pub blocks: Vec<(ModeIndex, ModeIndex, DMatrix<f64>)>,
}

impl ModeCoupling {
    pub fn block(&self, dst: ModeIndex, src: ModeIndex) -> Option<&DMatrix<f64>> {
        self.blocks.iter().find(|(d, s, _)| *d == dst && *s == src).map(|(_, _, b)| b)
    }
}

/// Multiplication by `x` in the `Z^{ρ,(0,0)}` basis: the raising matrices between
/// `Q^{t,(0,0,m)}` and `Q^{t,(0,0,m+1)}` couple mode `m` to `m±1` with equal sign `j`.
/// `rows[m]` is the number of radial coefficients kept in mode `m` (for `m ≤ max_m`).
pub fn xjacobi_annulus(params: AnnulusParams, rows: &[usize]) -> Result<ModeCoupling> {
    let max_m = rows.len().saturating_sub(1);
    let mut blocks = Vec::new();
    for m in 0..=max_m {
        for mode in ModeIndex::all(max_m).into_iter().filter(|md| md.m == m) {
            if rows[m] == 0 {
                continue;
            }
            if m < max_m && rows[m + 1] > 0 {
                // Y_{m+1} Q^{(m)}_k = Y_{m+1} Q^{(m+1)} R[:,k]
                let n = rows[m].max(rows[m + 1]);
                let r = raising_c(params.semi(0.0, 0.0, m), n)?;
                let factor = if m == 0 { 1.0 } else { 0.5 };
                let b = DMatrix::from_fn(rows[m + 1], rows[m], |i, k| factor * r[(i, k)]);
                blocks.push((ModeIndex { m: m + 1, j: mode.j }, mode, b));
            }
            if m >= 1 && !(m == 1 && mode.j == 0) && rows[m - 1] > 0 {
                // r² Y_{m-1} Q^{(m)}_k = t⁻¹ Y_{m-1} (t-τ) Q^{(m)}_k = t⁻¹ Y_{m-1} Q^{(m-1)} Rᵀ[:,k]
                let n = rows[m].max(rows[m - 1]);
                let r = raising_c(params.semi(0.0, 0.0, m - 1), n)?;
                let b = DMatrix::from_fn(rows[m - 1], rows[m], |i, k| 0.5 / params.t * r[(k, i)]);
                blocks.push((ModeIndex { m: m - 1, j: mode.j }, mode, b));
            }
        }
    }
    Ok(ModeCoupling { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_cartesian_forms() {
        let x1 = ModeIndex::new(1, 1).unwrap();
        let y1 = ModeIndex::new(1, 0).unwrap();
        assert_eq!(eval_harmonic(x1, 0.3, -0.7), 0.3);
        assert_eq!(eval_harmonic(y1, 0.3, -0.7), -0.7);
    }

    #[test]
    fn mode_positions() {
        for (i, md) in ModeIndex::all(5).iter().enumerate() {
            assert_eq!(md.position(), i);
        }
    }

    #[test]
    fn disk_laplacian_closed_form() {
        for m in [0, 1, 4] {
            let d = laplacian_disk(m, 6).unwrap();
            for k in 0..6 {
                let want = -4.0 * (k as f64 + 1.0) * ((k + m) as f64 + 1.0);
                assert!((d[(k, k)] - want).abs() < 1e-10 * want.abs(), "m={m} k={k}: {} vs {want}", d[(k, k)]);
            }
        }
    }
}
