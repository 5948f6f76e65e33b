//! Screened Poisson on the cylinder `Ω₀ × (-1, 1)`.
//!
//! The 3D basis is the tensor product of the disk basis `Φ` with a hierarchical p-FEM
//! basis `Q` on the interval (hats plus weighted Legendre-type bubbles). The discrete
//! problem `(M_λ + A) U M^Q + M^Φ U A^Q = H` decouples per Fourier mode into generalized
//! Sylvester equations, each solved by ADI with elliptic-function shifts.

use crate::assembly::{assemble_load, assemble_mass, assemble_stiffness, assemble_weighted_mass, RadialCoefficient};
use crate::error::{Error, Result};
use crate::fem::{analyze_rhs, build_layout, AnalysisOptions, CoefficientField, DiscontinuousField, DofLayout, RadialMesh};
use crate::jacobi::{eval_orthonormal_all_with_derivative, gauss_legendre, jacobi_matrix, normalization_p, JacobiParams, TridiagonalSym};
use crate::linalg::{reverse_cholesky, B3Arrowhead, ReverseCholesky};
use crate::zernike::ModeIndex;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Continuous hierarchical basis on an interval mesh with homogeneous Dirichlet ends.
///
/// Order: interior hats, then bubbles level-major (`s + level·cells + cell`). Bubble `k` of
/// a cell is `(1-ξ²)P^{(1,1)}_k(ξ)` (orthonormal Jacobi) in the affine cell coordinate ξ.
#[derive(Debug, Clone)]
pub struct IntervalBasis {
    breakpoints: Vec<f64>,
    np: usize,
    pub mass: B3Arrowhead<f64>,
    pub stiffness: B3Arrowhead<f64>,
    /// `⟨Q_i, P_{c,k}⟩` with `P_{c,k}` the Legendre polynomial `P_k` on cell `c`, column `c(N_p+1)+k`.
    pub gram: DMatrix<f64>,
}

impl IntervalBasis {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn hats(&self) -> usize {
        self.breakpoints.len() - 2
    }

    /// Bubble levels per cell (degrees 2..=N_p).
    pub fn levels(&self) -> usize {
        self.np - 1
    }

    pub fn dim(&self) -> usize {
        self.hats() + self.cells() * self.levels()
    }

    /// Number of discontinuous Legendre coefficients.
    pub fn legendre_dim(&self) -> usize {
        self.cells() * (self.np + 1)
    }

    /// Cell containing `z` (the left one at a breakpoint).
    pub fn locate(&self, z: f64) -> Option<usize> {
        let b = &self.breakpoints;
        if z < b[0] - 1e-14 || z > b[b.len() - 1] + 1e-14 {
            return None;
        }
        Some((1..b.len()).find(|&i| z <= b[i]).unwrap_or(b.len() - 1) - 1)
    }

    /// Values of all basis functions at `z`.
    pub fn eval(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let Some(c) = self.locate(z) else { return out };
        let (vals, _) = local_functions(self, c, z);
        for (g, v) in local_indices(self, c).into_iter().zip(vals) {
            if let Some(g) = g {
                out[g] += v;
            }
        }
        out
    }
}

fn bubble_recurrence(np: usize) -> (TridiagonalSym, f64) {
    let p = JacobiParams { a: 1.0, b: 1.0 };
    (jacobi_matrix(p, np.max(2)).expect("valid Jacobi parameters"), normalization_p(p))
}

/// Global indices of the local functions of cell `c`: left hat, right hat, bubbles.
fn local_indices(basis: &IntervalBasis, c: usize) -> Vec<Option<usize>> {
    let nb = basis.breakpoints.len();
    let hat = |b: usize| if b == 0 || b == nb - 1 { None } else { Some(b - 1) };
    let mut v = vec![hat(c), hat(c + 1)];
    v.extend((0..basis.levels()).map(|k| Some(basis.hats() + k * basis.cells() + c)));
    v
}

/// Local function values and z-derivatives at `z` inside cell `c`.
fn local_functions(basis: &IntervalBasis, c: usize, z: f64) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (basis.breakpoints[c], basis.breakpoints[c + 1]);
    let h = hi - lo;
    let xi = (2.0 * z - lo - hi) / h;
    let mut v = vec![(1.0 - xi) / 2.0, (1.0 + xi) / 2.0];
    let mut d = vec![-1.0 / h, 1.0 / h];
    let levels = basis.levels();
    if levels > 0 {
        let (rec, mass) = bubble_recurrence(levels);
        let (p, dp) = eval_orthonormal_all_with_derivative(&rec, mass, xi, levels);
        for k in 0..levels {
            v.push((1.0 - xi * xi) * p[k]);
            d.push((-2.0 * xi * p[k] + (1.0 - xi * xi) * dp[k]) * 2.0 / h);
        }
    }
    (v, d)
}

/// Builds `M^Q`, `A^Q` and `G_{Q,P}` by Gauss–Legendre quadrature exact for the polynomial integrands.
pub fn build_interval_basis(breakpoints: &[f64], np: usize) -> Result<IntervalBasis> {
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidMesh("interval breakpoints must be strictly increasing".into()));
    }
    if np < 2 {
        return Err(Error::InvalidParameter("interval degree must be at least 2".into()));
    }
    let cells = breakpoints.len() - 1;
    let s = breakpoints.len() - 2;
    let cell_hats: Vec<Vec<usize>> = (0..cells)
        .map(|c| [c, c + 1].iter().filter(|&&b| b > 0 && b < cells).map(|&b| b - 1).collect())
        .collect();
    let skeleton = B3Arrowhead::zeros(s, cell_hats, np - 1, 2, 2);
    let mut basis = IntervalBasis { breakpoints: breakpoints.to_vec(), np, mass: skeleton.clone(), stiffness: skeleton, gram: DMatrix::zeros(0, 0) };
    basis.gram = DMatrix::zeros(basis.dim(), basis.legendre_dim());
    let nq = np + 4;
    let legendre = |n: usize, x: f64| -> Vec<f64> {
        let mut p = vec![1.0; n + 1];
        if n >= 1 {
            p[1] = x;
        }
        for k in 1..n {
            p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        }
        p
    };
    for c in 0..cells {
        let (lo, hi) = (breakpoints[c], breakpoints[c + 1]);
        let rule = gauss_legendre(nq, lo, hi);
        let idx = local_indices(&basis, c);
        let n = idx.len();
        let mut lm = DMatrix::<f64>::zeros(n, n);
        let mut ls = DMatrix::<f64>::zeros(n, n);
        let mut lg = DMatrix::<f64>::zeros(n, np + 1);
        for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (v, d) = local_functions(&basis, c, z);
            let p = legendre(np, (2.0 * z - lo - hi) / (hi - lo));
            for i in 0..n {
                for j in 0..n {
                    lm[(i, j)] += w * v[i] * v[j];
                    ls[(i, j)] += w * d[i] * d[j];
                }
                for k in 0..=np {
                    lg[(i, k)] += w * v[i] * p[k];
                }
            }
        }
        let scale = lm.amax().max(ls.amax());
        for i in 0..n {
            let Some(gi) = idx[i] else { continue };
            for j in 0..n {
                let Some(gj) = idx[j] else { continue };
                for (mat, local) in [(&mut basis.mass, &lm), (&mut basis.stiffness, &ls)] {
                    let v = local[(i, j)];
                    if mat.in_pattern(gi, gj) {
                        mat.add(gi, gj, v)?;
                    } else if v.abs() > 1e-12 * scale {
                        return Err(Error::Structure(format!("interval entry ({gi},{gj}) = {v:e} outside the B³ pattern")));
                    }
                }
            }
            for k in 0..=np {
                basis.gram[(gi, c * (np + 1) + k)] += lg[(i, k)];
            }
        }
    }
    Ok(basis)
}

/// Enclosing intervals for the two spectra entering ADI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Encloses `σ(V^{-ᵀ} M^Φ V^{-1})`, `VᵀV = K^Φ` (positive).
    pub disk: (f64, f64),
    /// Encloses `σ(-L^{-ᵀ} M^Q L^{-1})`, `LᵀL = A^Q` (negative).
    pub interval: (f64, f64),
}

/// Safety margin applied to the Lanczos extremes.
pub const BOUND_WIDENING: f64 = 0.05;
const LANCZOS_MAX: usize = 500;

/// Extreme eigenvalues of the symmetric operator `x ↦ L^{-ᵀ} B L^{-1} x` by Lanczos with full
/// reorthogonalization, `LᵀL` given by a reverse Cholesky factor.
pub fn extreme_eigenvalues(chol: &ReverseCholesky, b: &B3Arrowhead<f64>) -> Result<(f64, f64)> {
    let n = chol.dim();
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let y = chol.solve_lower(x)?;
        chol.solve_upper(&b.matvec(&y))
    };
    let steps = n.min(LANCZOS_MAX);
    // deterministic start vector with components in every direction
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * std::f64::consts::FRAC_PI_4).sin()).collect();
    let nrm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for k in 0..steps {
        let mut w = apply(&basis[k])?;
        let a: f64 = w.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let proj: f64 = w.iter().zip(v).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let bnorm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if k + 1 == steps || bnorm < 1e-13 * a.abs().max(1e-300) {
            break;
        }
        beta.push(bnorm);
        basis.push(w.into_iter().map(|v| v / bnorm).collect());
    }
    let t = TridiagonalSym { diagonal: alpha, offdiagonal: beta };
    let ev = t.eigenvalues()?;
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NoConvergence("Lanczos produced non-finite Ritz values".into()));
    }
    Ok((lo, hi))
}

/// `[μ_min, μ_max]` of `σ(L^{-ᵀ} M^Q L^{-1})` (unwidened).
pub fn interval_spectrum(basis: &IntervalBasis) -> Result<(f64, f64)> {
    extreme_eigenvalues(&reverse_cholesky(&basis.stiffness)?, &basis.mass)
}

/// Widened enclosing intervals for one mode.
pub fn estimate_bounds(k_phi: &B3Arrowhead<f64>, m_phi: &B3Arrowhead<f64>, basis: &IntervalBasis) -> Result<SpectralBounds> {
    let (a, b) = extreme_eigenvalues(&reverse_cholesky(k_phi)?, m_phi)?;
    let (c, d) = interval_spectrum(basis)?;
    let w = 1.0 + BOUND_WIDENING;
    Ok(SpectralBounds { disk: (a / w, b * w), interval: (-d * w, -c / w) })
}

/// Shift construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftStrategy {
    /// Optimal shifts from the Zolotarev problem (elliptic functions).
    #[default]
    Elliptic,
    /// Log-spaced shifts over each interval; same iteration count.
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiPlan {
    pub bounds: SpectralBounds,
    pub gamma: f64,
    pub epsilon: f64,
    pub l_max: usize,
    /// In the disk interval (positive).
    pub p: Vec<f64>,
    /// In the interval-basis interval (negative).
    pub q: Vec<f64>,
}

/// `⌈ln(16γ) ln(4/ε)/π²⌉`.
pub fn l_max(gamma: f64, epsilon: f64) -> usize {
    ((16.0 * gamma).ln() * (4.0 / epsilon).ln() / (PI * PI)).ceil().max(1.0) as usize
}

/// Cross-ratio `γ = |c-a||d-b| / (|c-b||d-a|)` of the intervals `[a,b]`, `[c,d]`.
pub fn cross_ratio(a: f64, b: f64, c: f64, d: f64) -> f64 {
    ((c - a).abs() * (d - b).abs()) / ((c - b).abs() * (d - a).abs())
}

/// Complete elliptic integral `K` from the complementary modulus `k' = √(1-k²)`, by AGM.
pub fn elliptic_k(kp: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, kp);
    for _ in 0..64 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        (a, b) = ((a + b) / 2.0, (a * b).sqrt());
    }
    PI / (2.0 * a)
}

/// Jacobi elliptic `dn(u, k)` by the descending Landen (AGM) scheme; `kp = √(1-k²)`.
pub fn elliptic_dn(u: f64, k: f64, kp: f64) -> f64 {
    let mut a = vec![1.0f64];
    let mut c = vec![k];
    let mut b = kp;
    while c.last().unwrap().abs() > 1e-16 && a.len() < 64 {
        let an = *a.last().unwrap();
        a.push((an + b) / 2.0);
        c.push((an - b) / 2.0);
        b = (an * b).sqrt();
    }
    let n = a.len() - 1;
    let mut phi = vec![0.0; n + 1];
    phi[n] = 2f64.powi(n as i32) * a[n] * u;
    for i in (1..=n).rev() {
        phi[i - 1] = (phi[i] + (c[i] / a[i] * phi[i].sin()).asin()) / 2.0;
    }
    // dn² = k'² + k² cn², which avoids the 0/0 of cos φ₀ / cos(φ₁ - φ₀) at u = K
    (kp * kp + k * k * phi[0].cos().powi(2)).sqrt()
}

/// Real Möbius map sending `z1, z2, z3` to `w1, w2, w3`.
fn mobius(z: [f64; 3], w: [f64; 3]) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        if x == z[2] {
            return w[2];
        }
        let cr = (x - z[0]) * (z[1] - z[2]) / ((x - z[2]) * (z[1] - z[0]));
        let kappa = (w[1] - w[2]) / (w[1] - w[0]);
        (kappa * w[0] - cr * w[2]) / (kappa - cr)
    }
}

/// ADI shifts for `σ(A) ⊂ [a,b]`, `σ(B) ⊂ [c,d]`: the intervals are mapped by a Möbius
/// transform to `[-α,-1] ∪ [1,α]`, where the optimal shifts are `∓α·dn((2j-1)K/(2J), k)`.
pub fn adi_shifts(bounds: SpectralBounds, epsilon: f64, strategy: ShiftStrategy) -> Result<AdiPlan> {
    let (a, b) = bounds.disk;
    let (c, d) = bounds.interval;
    if !(a < b && c < d) || (a <= d && c <= b) {
        return Err(Error::OverlappingSpectra(a, b, c, d));
    }
    let gamma = cross_ratio(a, b, c, d);
    let j = l_max(gamma, epsilon);
    let (p, q) = match strategy {
        ShiftStrategy::Elliptic => {
            let alpha = -1.0 + 2.0 * gamma + 2.0 * (gamma * gamma - gamma).sqrt();
            let kp = 1.0 / alpha;
            let k = (1.0 - kp * kp).sqrt();
            let big_k = elliptic_k(kp);
            let t = mobius([-alpha, -1.0, 1.0], [a, b, c]);
            let mut p = Vec::with_capacity(j);
            let mut q = Vec::with_capacity(j);
            for l in 1..=j {
                let dn = elliptic_dn((2 * l - 1) as f64 * big_k / (2 * j) as f64, k, kp);
                p.push(t(-alpha * dn));
                q.push(t(alpha * dn));
            }
            (p, q)
        }
        ShiftStrategy::Geometric => {
            let geo = |lo: f64, hi: f64, l: usize| if j == 1 { (lo * hi).sqrt() } else { lo * (hi / lo).powf(l as f64 / (j - 1) as f64) };
            ((0..j).map(|l| geo(a, b, l)).collect(), (0..j).map(|l| -geo(-d, -c, l)).collect())
        }
    };
    if p.iter().any(|&x| !(x > 0.0)) || q.iter().any(|&x| !(x < 0.0)) {
        return Err(Error::InvalidParameter("ADI shifts violate the sign conditions; check the spectral bounds".into()));
    }
    Ok(AdiPlan { bounds, gamma, epsilon, l_max: j, p, q })
}

/// One decoupled Sylvester problem `K U M^Q + M^Φ U A^Q = H`.
#[derive(Debug, Clone)]
pub struct SylvesterProblem {
    pub mode: ModeIndex,
    pub k_phi: B3Arrowhead<f64>,
    pub m_phi: B3Arrowhead<f64>,
    pub rhs: DMatrix<f64>,
}

impl SylvesterProblem {
    /// `K U M^Q + M^Φ U A^Q`.
    pub fn apply(&self, basis: &IntervalBasis, u: &DMatrix<f64>) -> DMatrix<f64> {
        let ku = map_columns(u, |c| self.k_phi.matvec(c));
        let mu = map_columns(u, |c| self.m_phi.matvec(c));
        map_rows(&ku, |r| basis.mass.matvec(r)) + map_rows(&mu, |r| basis.stiffness.matvec(r))
    }
}

fn map_columns(x: &DMatrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| f(x.column(j).as_slice())).collect();
    let n = cols.first().map_or(x.nrows(), |c| c.len());
    DMatrix::from_fn(n, x.ncols(), |i, j| cols[j][i])
}

fn map_rows(x: &DMatrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| f(&x.row(i).iter().cloned().collect::<Vec<_>>())).collect();
    let n = rows.first().map_or(x.ncols(), |r| r.len());
    DMatrix::from_fn(x.nrows(), n, |i, j| rows[i][j])
}

fn try_map_columns(x: &DMatrix<f64>, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<DMatrix<f64>> {
    let cols = (0..x.ncols()).map(|j| f(x.column(j).as_slice())).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| cols[j][i]))
}

fn try_map_rows(x: &DMatrix<f64>, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<DMatrix<f64>> {
    let rows = (0..x.nrows()).map(|i| f(&x.row(i).iter().cloned().collect::<Vec<_>>())).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| rows[i][j]))
}

/// ADI iteration. The half step carries `K U`, the full step `U A^Q`:
///
/// `W_{ℓ-½} = [H - (M^Φ - p_ℓ K) W_{ℓ-1}] (-M^Q - p_ℓ A^Q)^{-1}`,
/// `W_ℓ = (M^Φ - q_ℓ K)^{-1} [H - W_{ℓ-½} (-M^Q - q_ℓ A^Q)]`, and `U = W_{ℓmax} (A^Q)^{-1}`.
pub fn adi_solve(problem: &SylvesterProblem, basis: &IntervalBasis, plan: &AdiPlan) -> Result<DMatrix<f64>> {
    let h = &problem.rhs;
    let mut w = DMatrix::zeros(h.nrows(), h.ncols());
    for l in 0..plan.l_max {
        let (p, q) = (plan.p[l], plan.q[l]);
        // (M^Q + p A^Q) is SPD for p > 0
        let right = reverse_cholesky(&basis.mass.combine(1.0, &basis.stiffness, p)?)?;
        let left_op = problem.m_phi.combine(1.0, &problem.k_phi, -p)?;
        let t = h - map_columns(&w, |c| left_op.matvec(c));
        let half = -try_map_rows(&t, |r| right.solve(r))?;
        // (M^Φ - q K) is SPD for q < 0
        let left = reverse_cholesky(&problem.m_phi.combine(1.0, &problem.k_phi, -q)?)?;
        let shifted = basis.mass.combine(-1.0, &basis.stiffness, -q)?;
        let t = h - map_rows(&half, |r| shifted.matvec(r));
        w = try_map_columns(&t, |c| left.solve(c))?;
    }
    let a = reverse_cholesky(&basis.stiffness)?;
    try_map_rows(&w, |r| a.solve(r))
}

/// Dense reference solution via the Kronecker form `(M^Q ⊗ K + A^Q ⊗ M^Φ) vec U = vec H`.
pub fn dense_sylvester(problem: &SylvesterProblem, basis: &IntervalBasis) -> Result<DMatrix<f64>> {
    let k = problem.k_phi.to_dense();
    let m = problem.m_phi.to_dense();
    let mq = basis.mass.to_dense();
    let aq = basis.stiffness.to_dense();
    let big = mq.kronecker(&k) + aq.kronecker(&m);
    let rhs = DMatrix::from_column_slice(problem.rhs.len(), 1, problem.rhs.as_slice());
    let sol = big.lu().solve(&rhs).ok_or(Error::Singular(0))?;
    Ok(DMatrix::from_column_slice(problem.rhs.nrows(), problem.rhs.ncols(), sol.as_slice()))
}

/// `‖V (U - Ũ) Lᵀ‖₂ / ‖V U Lᵀ‖₂` with `VᵀV = K`, `LᵀL = A^Q`.
pub fn adi_error_ratio(problem: &SylvesterProblem, basis: &IntervalBasis, exact: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<f64> {
    let v = reverse_cholesky(&problem.k_phi)?;
    let l = reverse_cholesky(&basis.stiffness)?;
    let weigh = |x: &DMatrix<f64>| map_rows(&map_columns(x, |c| v.mul_lower(c)), |r| l.mul_lower(r));
    let num = weigh(&(exact - approx)).singular_values().max();
    let den = weigh(exact).singular_values().max();
    Ok(num / den)
}

/// Tensor-product coefficients: one `U_{m,j}` (disk DOFs × interval DOFs) per mode.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub layout: DofLayout,
    pub interval: IntervalBasis,
    pub modes: Vec<DMatrix<f64>>,
}

impl TensorField {
    /// Disk coefficients of the slice at height `z`.
    pub fn slice(&self, z: f64) -> Result<CoefficientField<f64>> {
        let qz = nalgebra::DVector::from_vec(self.interval.eval(z));
        CoefficientField::new(&self.layout, self.modes.iter().map(|u| (u * &qz).as_slice().to_vec()).collect())
    }

    pub fn eval(&self, points: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
        points.iter().map(|&(x, y, z)| Ok(self.slice(z)?.synthesize(&[(x, y)])?[0])).collect()
    }
}

/// Diagnostics of a cylinder solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderReport {
    pub l_max: Vec<(ModeIndex, usize)>,
    pub warnings: Vec<String>,
}

impl CylinderReport {
    pub fn mean_l_max(&self) -> f64 {
        self.l_max.iter().map(|(_, l)| *l as f64).sum::<f64>() / self.l_max.len().max(1) as f64
    }
}

/// Inputs of [`solve_cylinder`].
pub struct CylinderProblem<'a> {
    pub mesh: &'a RadialMesh,
    pub z_breakpoints: &'a [f64],
    pub lambda: &'a RadialCoefficient,
    pub rhs: &'a (dyn Fn(f64, f64, f64) -> f64 + Sync),
    pub np: usize,
    pub epsilon: f64,
    pub strategy: ShiftStrategy,
}

/// Per-mode Sylvester problems with `H = G_{Φ,Ψ} F G_{Q,P}ᵀ`. `F` holds, for each z-cell and
/// Legendre degree, the disk analysis of `((2k+1)/2)∫ f(·,·,z) P_k(ξ) dξ` by tensor quadrature.
pub fn assemble_sylvester(layout: &DofLayout, basis: &IntervalBasis, lambda: &RadialCoefficient, rhs: &(dyn Fn(f64, f64, f64) -> f64 + Sync)) -> Result<Vec<SylvesterProblem>> {
    if let RadialCoefficient::Constant(c) = lambda {
        if *c < 0.0 {
            return Err(Error::InvalidParameter("the ADI path requires λ ≥ 0".into()));
        }
    }
    let mesh = layout.mesh();
    let np = basis.np();
    let nq = np + 16;
    let mut f_cols: Vec<DiscontinuousField<f64>> = Vec::with_capacity(basis.legendre_dim());
    for c in 0..basis.cells() {
        let (lo, hi) = (basis.breakpoints()[c], basis.breakpoints()[c + 1]);
        let rule = gauss_legendre(nq, -1.0, 1.0);
        let slices: Vec<DiscontinuousField<f64>> = rule
            .nodes
            .iter()
            .map(|&xi| {
                let z = lo + (hi - lo) * (xi + 1.0) / 2.0;
                analyze_rhs(|x, y| rhs(x, y, z), mesh, layout.np(), AnalysisOptions::default())
            })
            .collect::<Result<_>>()?;
        for k in 0..=np {
            let mut acc = slices[0].clone();
            for cell in acc.cells.iter_mut() {
                for v in cell.iter_mut() {
                    v.iter_mut().for_each(|x| *x = 0.0);
                }
            }
            for (s, (&xi, &w)) in slices.iter().zip(rule.nodes.iter().zip(&rule.weights)) {
                let weight = w * (2 * k + 1) as f64 / 2.0 * legendre_value(k, xi);
                for (a, b) in acc.cells.iter_mut().zip(&s.cells) {
                    for (va, vb) in a.iter_mut().zip(b) {
                        va.iter_mut().zip(vb).for_each(|(x, y)| *x += weight * y);
                    }
                }
            }
            f_cols.push(acc);
        }
    }
    // G_{Φ,Ψ} F: one disk load per Legendre column
    let loads: Vec<CoefficientField<f64>> = f_cols.iter().map(|f| assemble_load(layout, f)).collect::<Result<_>>()?;
    let mass = assemble_mass(layout)?;
    let stiff = assemble_stiffness(layout)?;
    let wmass = assemble_weighted_mass(layout, lambda)?;
    let k_op = stiff.combine(1.0, &wmass, 1.0)?;
    let gt = basis.gram.transpose();
    let mut out = Vec::new();
    for (pos, md) in layout.modes().iter().enumerate() {
        let n = layout.mode_len(md.m);
        let gf = DMatrix::from_fn(n, loads.len(), |i, j| loads[j].modes[pos][i]);
        out.push(SylvesterProblem { mode: *md, k_phi: k_op.block(*md).clone(), m_phi: mass.block(*md).clone(), rhs: gf * &gt });
    }
    Ok(out)
}

fn legendre_value(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Full cylinder solve: assemble, plan and run ADI for each Fourier mode.
pub fn solve_cylinder(problem: &CylinderProblem) -> Result<(TensorField, CylinderReport)> {
    let layout = build_layout(problem.mesh, problem.np, true)?;
    let basis = build_interval_basis(problem.z_breakpoints, problem.np)?;
    let mut warnings: Vec<String> = problem.mesh.conditioning_warning(problem.np).into_iter().collect();
    let probs = assemble_sylvester(&layout, &basis, problem.lambda, problem.rhs)?;
    let (ic, id) = interval_spectrum(&basis)?;
    let w = 1.0 + BOUND_WIDENING;
    let mut modes = Vec::with_capacity(probs.len());
    let mut l_max = Vec::with_capacity(probs.len());
    for p in &probs {
        if p.rhs.iter().all(|v| *v == 0.0) {
            modes.push(DMatrix::zeros(p.rhs.nrows(), p.rhs.ncols()));
            continue;
        }
        let (a, b) = extreme_eigenvalues(&reverse_cholesky(&p.k_phi)?, &p.m_phi)?;
        let bounds = SpectralBounds { disk: (a / w, b * w), interval: (-id * w, -ic / w) };
        let plan = adi_shifts(bounds, problem.epsilon, problem.strategy)?;
        l_max.push((p.mode, plan.l_max));
        modes.push(adi_solve(p, &basis, &plan)?);
    }
    if l_max.is_empty() {
        warnings.push("right-hand side vanished in every mode".into());
    }
    Ok((TensorField { layout, interval: basis, modes }, CylinderReport { l_max, warnings }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_max_example() {
        assert_eq!(l_max(10.0, 1e-12), 15);
    }

    #[test]
    fn mobius_maps_fourth_point() {
        let (a, b, c, d) = (0.1, 2.0, -5.0, -0.01);
        let g = cross_ratio(a, b, c, d);
        let alpha = -1.0 + 2.0 * g + 2.0 * (g * g - g).sqrt();
        let t = mobius([-alpha, -1.0, 1.0], [a, b, c]);
        assert!((t(alpha) - d).abs() < 1e-10 * d.abs().max(1.0), "{} vs {d}", t(alpha));
    }

    #[test]
    fn dn_limits() {
        // dn(0) = 1; dn(K) = k'
        let kp = 0.3;
        let k = (1.0 - kp * kp as f64).sqrt();
        assert!((elliptic_dn(0.0, k, kp) - 1.0).abs() < 1e-15);
        assert!((elliptic_dn(elliptic_k(kp), k, kp) - kp).abs() < 1e-12);
    }
}
