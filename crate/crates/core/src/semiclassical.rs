//! Semiclassical Jacobi polynomials `Q^{t,(a,b,c)}` on (0,1), orthonormal under
//! `x^a (1-x)^b (t-x)^c`, and the raising matrices connecting neighbouring families.
//!
//! Recurrences come from a Lanczos run over a Gauss–Jacobi rule for `x^a (1-x)^b`
//! reweighted by `(t-x)^c`. Connection coefficients are weighted inner products
//! evaluated by quadrature; their band structure is checked, not assumed.

use crate::error::{Error, Result};
use crate::jacobi::{eval_orthonormal_all, eval_orthonormal_all_with_derivative, gauss_jacobi_unit, lanczos_recurrence, QuadRule, TridiagonalSym};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiParams {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SemiParams {
    pub fn new(t: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(t > 1.0) || !(a > -1.0) || !(b > -1.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("semiclassical parameters need t>1, a,b>-1: t={t}, a={a}, b={b}, c={c}")));
        }
        Ok(SemiParams { t, a, b, c })
    }

    /// `x^a (1-x)^b (t-x)^c`.
    pub fn weight(&self, x: f64) -> f64 {
        x.powf(self.a) * (1.0 - x).powf(self.b) * (self.t - x).powf(self.c)
    }

    fn key(&self) -> [u64; 4] {
        [self.t.to_bits(), self.a.to_bits(), self.b.to_bits(), self.c.to_bits()]
    }
}

/// First `size` members of an orthonormal semiclassical family.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiBasis {
    pub params: SemiParams,
    /// `size`×`size` truncation of the Jacobi matrix `X_{t,(a,b,c)}`.
    pub recurrence: TridiagonalSym,
    pub size: usize,
    /// Total mass `q_{t,(a,b,c)}` of the weight.
    pub mass: f64,
}

const GRAM_TOLERANCE: f64 = 1e-9;

fn weighted_rule(params: SemiParams, order: usize) -> Result<QuadRule> {
    let mut rule = gauss_jacobi_unit(params.a, params.b, order)?;
    for (w, &x) in rule.weights.iter_mut().zip(&rule.nodes) {
        *w *= (params.t - x).powf(params.c);
    }
    Ok(rule)
}

fn gram_deviation(basis: &SemiBasis, rule: &QuadRule) -> f64 {
    let n = basis.size;
    let mut g = DMatrix::<f64>::zeros(n, n);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let q = eval_orthonormal_all(&basis.recurrence, basis.mass, x, n);
        for i in 0..n {
            for j in 0..=i {
                g[(i, j)] += w * q[i] * q[j];
            }
        }
    }
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

fn construct(params: SemiParams, n: usize) -> Result<SemiBasis> {
    let base_order = 2 * n + params.c.abs().ceil() as usize + 8;
    let mut last = 0.0;
    for order in [base_order, 2 * base_order] {
        let rule = weighted_rule(params, order)?;
        let (recurrence, mass) = lanczos_recurrence(&rule.nodes, &rule.weights, n)?;
        let basis = SemiBasis { params, recurrence, size: n, mass };
        let check = weighted_rule(params, 2 * order)?;
        last = gram_deviation(&basis, &check);
        if last <= GRAM_TOLERANCE {
            return Ok(basis);
        }
    }
    Err(Error::Orthogonality { deviation: last, tolerance: GRAM_TOLERANCE })
}

type Cache = Mutex<HashMap<[u64; 4], Arc<SemiBasis>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Orthonormal family of size `n`; results are cached per parameter set, and a cached
/// larger family is truncated rather than rebuilt.
pub fn build_semibasis(params: SemiParams, n: usize) -> Result<SemiBasis> {
    if n == 0 {
        return Err(Error::InvalidParameter("build_semibasis needs n >= 1".into()));
    }
    let params = SemiParams::new(params.t, params.a, params.b, params.c)?;
    if let Some(b) = cache().lock().unwrap().get(&params.key()) {
        if b.size >= n {
            return Ok(b.truncated(n));
        }
    }
    let basis = construct(params, n)?;
    let mut guard = cache().lock().unwrap();
    let replace = guard.get(&params.key()).is_none_or(|b| b.size < n);
    if replace {
        guard.insert(params.key(), Arc::new(basis.clone()));
    }
    Ok(basis)
}

impl SemiBasis {
    pub fn truncated(&self, n: usize) -> SemiBasis {
        assert!(n <= self.size);
        SemiBasis { params: self.params, recurrence: self.recurrence.leading(n), size: n, mass: self.mass }
    }

    /// `Q_0, …, Q_{count-1}` at `x`.
    pub fn eval_all(&self, x: f64, count: usize) -> Vec<f64> {
        eval_orthonormal_all(&self.recurrence, self.mass, x, count)
    }

    /// Values and derivatives of `Q_0, …, Q_{count-1}` at `x`.
    pub fn eval_all_with_derivative(&self, x: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
        eval_orthonormal_all_with_derivative(&self.recurrence, self.mass, x, count)
    }
}

/// `Q^{t,(a,b,c)}_n(x)` by forward recurrence.
pub fn eval_semi(basis: &SemiBasis, n: usize, x: f64) -> Result<f64> {
    if n >= basis.size {
        return Err(Error::InvalidParameter(format!("degree {n} out of range for a basis of size {}", basis.size)));
    }
    Ok(basis.eval_all(x, n + 1)[n])
}

/// Raw connection coefficients `R_ij = ∫ Q^{lo}_i f(x) Q^{src}_j w_lo dx`, `rows × cols`,
/// where `f` is a polynomial of degree `fdeg`. No band structure is imposed.
pub fn connection_raw(
    lo: SemiParams,
    src: SemiParams,
    rows: usize,
    cols: usize,
    f: impl Fn(f64) -> f64,
    fdeg: usize,
) -> Result<DMatrix<f64>> {
    let qlo = build_semibasis(lo, rows)?;
    let qsrc = build_semibasis(src, cols)?;
    let order = (rows + cols + fdeg + lo.c.abs().ceil() as usize) / 2 + 8;
    let rule = weighted_rule(lo, order)?;
    let mut r = DMatrix::zeros(rows, cols);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let a = qlo.eval_all(x, rows);
        let b = qsrc.eval_all(x, cols);
        let fx = w * f(x);
        for j in 0..cols {
            let bj = fx * b[j];
            for i in 0..rows {
                r[(i, j)] += a[i] * bj;
            }
        }
    }
    Ok(r)
}

/// Zeroes entries outside `[j-upper, j+lower]` in column `j` after checking they are
/// negligible relative to the largest entry.
fn enforce_band(mut r: DMatrix<f64>, lower: usize, upper: usize, what: &str) -> Result<DMatrix<f64>> {
    let scale = r.amax().max(f64::MIN_POSITIVE);
    for j in 0..r.ncols() {
        for i in 0..r.nrows() {
            if i > j + lower || i + upper < j {
                if r[(i, j)].abs() > 1e-11 * scale {
                    return Err(Error::Structure(format!(
                        "{what}: entry ({i},{j}) = {:.3e} outside bandwidths (lower {lower}, upper {upper})",
                        r[(i, j)]
                    )));
                }
                r[(i, j)] = 0.0;
            }
        }
    }
    Ok(r)
}

fn family(t: f64, a: f64, b: f64, m: usize) -> Result<SemiParams> {
    SemiParams::new(t, a, b, m as f64)
}

/// `R^{t,(0,0,m)}_{ab,(1,1,m)}` with `x(1-x) Q^{t,(1,1,m)} = Q^{t,(0,0,m)} R`, shape `(n+2)×n`,
/// lower bandwidth 2.
pub fn raising_ab(t: f64, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let r = connection_raw(family(t, 0.0, 0.0, m)?, family(t, 1.0, 1.0, m)?, n + 2, n, |x| x * (1.0 - x), 2)?;
    enforce_band(r, 2, 0, "raising_ab")
}

/// `R^{t,(0,0,m)}_{a,(1,0,m)}` with `x Q^{t,(1,0,m)} = Q^{t,(0,0,m)} R`, shape `(n+1)×n`.
pub fn raising_a(t: f64, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let r = connection_raw(family(t, 0.0, 0.0, m)?, family(t, 1.0, 0.0, m)?, n + 1, n, |x| x, 1)?;
    enforce_band(r, 1, 0, "raising_a")
}

/// `R^{t,(0,0,m)}_{b,(0,1,m)}` with `(1-x) Q^{t,(0,1,m)} = Q^{t,(0,0,m)} R`, shape `(n+1)×n`.
pub fn raising_b(t: f64, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let r = connection_raw(family(t, 0.0, 0.0, m)?, family(t, 0.0, 1.0, m)?, n + 1, n, |x| 1.0 - x, 1)?;
    enforce_band(r, 1, 0, "raising_b")
}

/// `R^{t,(a,b,c+1)}_{(a,b,c)}` with `Q^{t,(a,b,c)} = Q^{t,(a,b,c+1)} R`, shape `n×n`.
/// Degree preservation makes it upper triangular and `(t-x)`-orthogonality makes it
/// upper bidiagonal; both are checked.
pub fn raising_c(params: SemiParams, n: usize) -> Result<DMatrix<f64>> {
    let up = SemiParams { c: params.c + 1.0, ..params };
    let r = connection_raw(up, params, n, n, |_| 1.0, 0)?;
    enforce_band(r, 0, 1, "raising_c")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_inverse_sqrt_mass() {
        let p = SemiParams::new(2.0, 1.0, 0.0, 3.0).unwrap();
        let b = build_semibasis(p, 4).unwrap();
        let (q, _) = crate::jacobi::normalization_q(2.0, 1.0, 0.0, 3.0).unwrap();
        assert!((eval_semi(&b, 0, 0.3).unwrap() - q.powf(-0.5)).abs() < 1e-13);
    }

    #[test]
    fn cache_truncates_larger_family() {
        let p = SemiParams::new(1.7, 0.0, 1.0, 2.0).unwrap();
        let big = build_semibasis(p, 12).unwrap();
        let small = build_semibasis(p, 5).unwrap();
        assert_eq!(small.recurrence, big.recurrence.leading(5));
    }
}
