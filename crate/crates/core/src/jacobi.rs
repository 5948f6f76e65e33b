//! Orthonormal Jacobi polynomials, Gauss rules and Chebyshev expansions.
//!
//! Everything is in the orthonormal convention: `P^{(a,b)}_n` has unit norm under
//! `(1-x)^a (1+x)^b` on (-1,1), and the Jacobi matrix `X` is symmetric with
//! `x P(x) = P(x) X`.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use statrs::function::beta::ln_beta;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiParams {
    pub a: f64,
    pub b: f64,
}

impl JacobiParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) {
            return Err(Error::InvalidParameter(format!("Jacobi parameters must exceed -1, got a={a}, b={b}")));
        }
        Ok(JacobiParams { a, b })
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSym {
    pub diagonal: Vec<f64>,
    pub offdiagonal: Vec<f64>,
}

impl TridiagonalSym {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// Leading `n`×`n` truncation.
    pub fn leading(&self, n: usize) -> TridiagonalSym {
        assert!(n <= self.len());
        TridiagonalSym {
            diagonal: self.diagonal[..n].to_vec(),
            offdiagonal: self.offdiagonal[..n.saturating_sub(1)].to_vec(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diagonal[i]
            } else if i + 1 == j {
                self.offdiagonal[i]
            } else if j + 1 == i {
                self.offdiagonal[j]
            } else {
                0.0
            }
        })
    }

    pub fn to_band(&self) -> BandMatrix {
        BandMatrix::from_tridiagonal(&self.diagonal, &self.offdiagonal)
    }

    /// Eigenvalues in ascending order (implicit QL with Wilkinson shifts, no vectors).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut d = self.diagonal.clone();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(&self.offdiagonal[..n.saturating_sub(1)]);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(Error::EigenFailure(format!("QL iteration stalled at index {l} of {n}")));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Ok(d)
    }
}

/// Nodes and strictly positive weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affine image of a rule on (-1,1) onto (lo,hi), weights scaled by the Jacobian.
    pub fn mapped(&self, lo: f64, hi: f64) -> QuadRule {
        let h = 0.5 * (hi - lo);
        QuadRule {
            nodes: self.nodes.iter().map(|x| lo + h * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|w| w * h).collect(),
        }
    }
}

/// `p_{(a,b)} = 2^{a+b+1} B(a+1, b+1)`, the mass of `(1-x)^a (1+x)^b` on (-1,1).
pub fn normalization_p(params: JacobiParams) -> f64 {
    let JacobiParams { a, b } = params;
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_beta(a + 1.0, b + 1.0)).exp()
}

/// Which evaluation route produced a semiclassical normalization constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QPath {
    Hypergeometric,
    Quadrature,
}

/// `q_{t,(a,b,c)} = ∫₀¹ x^a (1-x)^b (t-x)^c dx` together with the route that computed it.
pub fn normalization_q(t: f64, a: f64, b: f64, c: f64) -> Result<(f64, QPath)> {
    if !(t > 1.0) || !(a > -1.0 && b > -1.0) {
        return Err(Error::InvalidParameter(format!("q_(t,(a,b,c)) needs t>1, a,b>-1; got t={t}, a={a}, b={b}")));
    }
    let z = 1.0 / t;
    let terminating = c >= 0.0 && c.fract() == 0.0;
    if z < 0.9 || terminating {
        // t^c B(1+a,1+b) 2F1(1+a, -c; 2+a+b; 1/t)
        let (p, q, r) = (1.0 + a, -c, 2.0 + a + b);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut biggest = 1.0f64;
        let mut converged = false;
        for k in 0..500 {
            let kf = k as f64;
            term *= (p + kf) * (q + kf) / ((r + kf) * (kf + 1.0)) * z;
            sum += term;
            biggest = biggest.max(term.abs());
            if term == 0.0 || term.abs() <= 1e-17 * sum.abs() {
                converged = true;
                break;
            }
        }
        // An alternating series that cancels by more than three digits is not trusted.
        if converged && biggest <= 1e3 * sum.abs() {
            let v = (c * t.ln() + ln_beta(1.0 + a, 1.0 + b)).exp() * sum;
            return Ok((v, QPath::Hypergeometric));
        }
    }
    let n = 60 + c.abs().ceil() as usize;
    let rule = gauss_jacobi_unit(a, b, n)?;
    Ok((rule.integrate(|x| (t - x).powf(c)), QPath::Quadrature))
}

/// Analytic orthonormal recurrence for `P^{(a,b)}`: `n` diagonal and `n-1` off-diagonal entries.
pub fn jacobi_matrix(params: JacobiParams, n: usize) -> Result<TridiagonalSym> {
    if n == 0 {
        return Err(Error::InvalidParameter("jacobi_matrix needs n >= 1".into()));
    }
    let JacobiParams { a, b } = JacobiParams::new(params.a, params.b)?;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        diag.push(if k == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) });
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + a + b;
            let beta = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + a + b) / (s * s * (s + 1.0) * (s - 1.0))
            };
            off.push(beta.sqrt());
        }
    }
    Ok(TridiagonalSym { diagonal: diag, offdiagonal: off })
}

/// Values of the orthonormal family defined by `rec` (with total mass `mass`) at `x`,
/// degrees `0..count`. Requires `count <= rec.len()`.
pub fn eval_orthonormal_all(rec: &TridiagonalSym, mass: f64, x: f64, count: usize) -> Vec<f64> {
    assert!(count <= rec.len(), "degree {count} beyond recurrence length {}", rec.len());
    let mut p = Vec::with_capacity(count);
    if count == 0 {
        return p;
    }
    p.push(1.0 / mass.sqrt());
    for k in 0..count.saturating_sub(1) {
        let prev = if k > 0 { rec.offdiagonal[k - 1] * p[k - 1] } else { 0.0 };
        p.push(((x - rec.diagonal[k]) * p[k] - prev) / rec.offdiagonal[k]);
    }
    p
}

/// Values and first derivatives of the orthonormal family at `x`, degrees `0..count`.
pub fn eval_orthonormal_all_with_derivative(
    rec: &TridiagonalSym,
    mass: f64,
    x: f64,
    count: usize,
) -> (Vec<f64>, Vec<f64>) {
    assert!(count <= rec.len());
    let mut p = Vec::with_capacity(count);
    let mut dp = Vec::with_capacity(count);
    if count == 0 {
        return (p, dp);
    }
    p.push(1.0 / mass.sqrt());
    dp.push(0.0);
    for k in 0..count.saturating_sub(1) {
        let (prev, dprev) = if k > 0 {
            (rec.offdiagonal[k - 1] * p[k - 1], rec.offdiagonal[k - 1] * dp[k - 1])
        } else {
            (0.0, 0.0)
        };
        let beta = rec.offdiagonal[k];
        p.push(((x - rec.diagonal[k]) * p[k] - prev) / beta);
        dp.push((p[k] + (x - rec.diagonal[k]) * dp[k] - dprev) / beta);
    }
    (p, dp)
}

/// Orthonormal `P^{(a,b)}_n(x)`.
pub fn eval_jacobi(params: JacobiParams, n: usize, x: f64) -> f64 {
    *eval_jacobi_all(params, n, x).last().unwrap()
}

/// Orthonormal `P^{(a,b)}_k(x)` for `k = 0..=n`.
pub fn eval_jacobi_all(params: JacobiParams, n: usize, x: f64) -> Vec<f64> {
    let rec = jacobi_matrix(params, n + 1).expect("invalid Jacobi parameters");
    eval_orthonormal_all(&rec, normalization_p(params), x, n + 1)
}

/// Gauss rule from an orthonormal recurrence: nodes are the eigenvalues of the
/// truncation and weights follow from the Christoffel function `1/Σ P_k(x)²`.
pub fn gauss_rule_from_recurrence(rec: &TridiagonalSym, mass: f64) -> Result<QuadRule> {
    let n = rec.len();
    let nodes = rec.eigenvalues()?;
    let weights = nodes
        .iter()
        .map(|&x| 1.0 / eval_orthonormal_all(rec, mass, x, n).iter().map(|v| v * v).sum::<f64>())
        .collect();
    Ok(QuadRule { nodes, weights })
}

/// `n`-point Gauss–Jacobi rule for `(1-x)^a (1+x)^b` on (-1,1).
pub fn gauss_rule(params: JacobiParams, n: usize) -> Result<QuadRule> {
    let rec = jacobi_matrix(params, n)?;
    gauss_rule_from_recurrence(&rec, normalization_p(params))
}

/// Gauss–Legendre rule on (lo,hi).
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> QuadRule {
    gauss_rule(JacobiParams { a: 0.0, b: 0.0 }, n).expect("Legendre rule").mapped(lo, hi)
}

/// Gauss rule on (0,1) for the weight `x^a (1-x)^b`.
pub fn gauss_jacobi_unit(a: f64, b: f64, n: usize) -> Result<QuadRule> {
    // x = (1-y)/2 turns x^a (1-x)^b dx into 2^{-(a+b+1)} (1-y)^a (1+y)^b dy.
    let rule = gauss_rule(JacobiParams::new(a, b)?, n)?;
    let scale = 0.5f64.powf(a + b + 1.0);
    let mut pts: Vec<(f64, f64)> =
        rule.nodes.iter().zip(&rule.weights).map(|(&y, &w)| (0.5 * (1.0 - y), w * scale)).collect();
    pts.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Ok(QuadRule { nodes: pts.iter().map(|p| p.0).collect(), weights: pts.iter().map(|p| p.1).collect() })
}

/// Stieltjes/Lanczos procedure with full reorthogonalisation: the first `n` orthonormal
/// recurrence coefficients of the discrete measure `Σ w_i δ(x - x_i)`, plus its mass.
pub fn lanczos_recurrence(nodes: &[f64], weights: &[f64], n: usize) -> Result<(TridiagonalSym, f64)> {
    let k = nodes.len();
    if n > k {
        return Err(Error::InvalidParameter(format!("{n} recurrence terms need at least {n} nodes, got {k}")));
    }
    let mass: f64 = weights.iter().sum();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    q.push(weights.iter().map(|w| (w / mass).sqrt()).collect());
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for j in 0..n {
        let qj = &q[j];
        let alpha: f64 = qj.iter().zip(nodes).map(|(v, x)| v * v * x).sum();
        diag.push(alpha);
        if j + 1 == n {
            break;
        }
        let mut r: Vec<f64> = qj.iter().zip(nodes).map(|(v, x)| v * x).collect();
        for _ in 0..2 {
            for qi in &q {
                let h: f64 = qi.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(qi).for_each(|(ri, &v)| *ri -= h * v);
            }
        }
        let beta = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(beta > 0.0) {
            return Err(Error::Orthogonality { deviation: 1.0, tolerance: 0.0 });
        }
        off.push(beta);
        q.push(r.into_iter().map(|v| v / beta).collect());
    }
    Ok((TridiagonalSym { diagonal: diag, offdiagonal: off }, mass))
}

/// Lower-bidiagonal `R` with `(1-x) P^{(1,m)}(x) = P^{(0,m)}(x) R`, shape `(n+1)×n`.
pub fn raising_jacobi_a(m: usize, n: usize) -> DMatrix<f64> {
    let mf = m as f64;
    let lo = JacobiParams { a: 0.0, b: mf };
    let hi = JacobiParams { a: 1.0, b: mf };
    let rule = gauss_rule(lo, n + 2).expect("Gauss-Jacobi rule");
    let rec_lo = jacobi_matrix(lo, n + 1).unwrap();
    let rec_hi = jacobi_matrix(hi, n.max(1)).unwrap();
    let (plo, phi) = (normalization_p(lo), normalization_p(hi));
    let mut r = DMatrix::zeros(n + 1, n);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let a = eval_orthonormal_all(&rec_lo, plo, x, n + 1);
        let b = eval_orthonormal_all(&rec_hi, phi, x, n);
        for j in 0..n {
            for i in j..(j + 2).min(n + 1) {
                r[(i, j)] += w * a[i] * (1.0 - x) * b[j];
            }
        }
    }
    r
}

/// Coefficients of `Σ λ_n T_n^{[lo,hi]}`, Chebyshev polynomials mapped to `[lo,hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl ChebCoeffs {
    pub fn constant(c: f64, lo: f64, hi: f64) -> Self {
        ChebCoeffs { lo, hi, coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b = c + 2.0 * s * b1 - b2;
            b2 = b1;
            b1 = b;
        }
        self.coeffs.first().copied().unwrap_or(0.0) + s * b1 - b2
    }
}

/// Interpolant of `f` at the `n+1` Chebyshev points of the second kind on `[lo,hi]`.
pub fn cheb_expand(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> ChebCoeffs {
    assert!(lo < hi, "empty Chebyshev interval");
    if n == 0 {
        return ChebCoeffs { lo, hi, coeffs: vec![f(0.5 * (lo + hi))] };
    }
    let nf = n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|k| {
            let x = (std::f64::consts::PI * k as f64 / nf).cos();
            f(lo + 0.5 * (hi - lo) * (x + 1.0))
        })
        .collect();
    let coeffs = (0..=n)
        .map(|j| {
            let mut s = 0.0;
            for (k, v) in vals.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * v * (std::f64::consts::PI * (j * k) as f64 / nf).cos();
            }
            let c = 2.0 * s / nf;
            if j == 0 || j == n {
                0.5 * c
            } else {
                c
            }
        })
        .collect();
    ChebCoeffs { lo, hi, coeffs }
}

/// Doubles the degree until the trailing coefficients fall below `tol · max|λ|`, then
/// chops the tail. Returns the expansion and whether the tolerance was met within `cap`.
pub fn cheb_expand_adaptive(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64, cap: usize) -> (ChebCoeffs, bool) {
    let mut n = 8.min(cap.max(1));
    loop {
        let mut c = cheb_expand(&f, lo, hi, n);
        let scale = c.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = c.coeffs[c.coeffs.len().saturating_sub(3)..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if tail <= tol * scale || scale == 0.0 {
            while c.coeffs.len() > 1 && c.coeffs.last().unwrap().abs() <= tol * scale {
                c.coeffs.pop();
            }
            return (c, true);
        }
        if n >= cap {
            return (c, false);
        }
        n = (2 * n).min(cap);
    }
}

/// `Σ λ_n T_n^{[lo,hi]}(J)` by the matrix Clenshaw recurrence. The spectrum of `J` must
/// lie in `[lo,hi]`; otherwise the result is still a polynomial in `J` but no longer
/// approximates the intended function of it.
pub fn clenshaw_matrix(coeffs: &ChebCoeffs, j: &BandMatrix) -> BandMatrix {
    let n = j.n();
    let mut a = j.clone();
    a.scale(2.0 / (coeffs.hi - coeffs.lo));
    a.add_identity(-(coeffs.hi + coeffs.lo) / (coeffs.hi - coeffs.lo));
    let mut b1 = BandMatrix::zeros(n, 0, 0);
    let mut b2 = BandMatrix::zeros(n, 0, 0);
    for &c in coeffs.coeffs.iter().skip(1).rev() {
        let mut b = a.matmul(&b1).axpby(2.0, &b2, -1.0);
        b.add_identity(c);
        b2 = b1;
        b1 = b;
    }
    let mut out = a.matmul(&b1).axpby(1.0, &b2, -1.0);
    out.add_identity(coeffs.coeffs.first().copied().unwrap_or(0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_two_by_two() {
        let j = jacobi_matrix(JacobiParams { a: 0.0, b: 0.0 }, 2).unwrap();
        assert_eq!(j.diagonal, vec![0.0, 0.0]);
        assert!((j.offdiagonal[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn midpoint_rule() {
        let r = gauss_rule(JacobiParams { a: 0.0, b: 0.0 }, 1).unwrap();
        assert!(r.nodes[0].abs() < 1e-14 && (r.weights[0] - 2.0).abs() < 1e-14, "{:?}", r);
    }

    #[test]
    fn q_closed_forms() {
        assert!((normalization_q(3.0, 0.0, 0.0, 1.0).unwrap().0 - 2.5).abs() < 1e-14);
        let (v, path) = normalization_q(1.05, 0.5, 0.0, -2.5).unwrap();
        assert_eq!(path, QPath::Quadrature);
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn chebyshev_of_x() {
        let c = cheb_expand(|x| x, 0.0, 1.0, 4);
        assert!((c.coeffs[0] - 0.5).abs() < 1e-15 && (c.coeffs[1] - 0.5).abs() < 1e-15);
        assert!(c.coeffs[2..].iter().all(|v| v.abs() < 1e-15));
    }
}
