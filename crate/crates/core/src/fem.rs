//! Continuous hp-FEM space on concentric meshes of disks and annuli.
//!
//! Per Fourier mode the space has one hat per hat-carrying breakpoint and `K_m` bubbles
//! per cell. On a disk mesh the breakpoints `ρ₁…ρ_{N_h}` carry hats; a pure annulus mesh
//! adds a hat at its inner radius. Bubbles of degree `n = m, m+2, …, N_p-2` exist for
//! `m ≤ N_p-2`, so `K_m = ⌊(N_p-2-m)/2⌋+1`.
//!
//! Global order within a mode: hats by radius, then bubbles level-major
//! (`hats + level·N_h + cell`). Cell-local order: the disk cell has its hat piece
//! `Z^{(0)}_{m,m}` then bubbles; an annulus cell has the inner-edge hat piece
//! `(1-r̂²) Z^{(1,0)}`, the outer-edge piece `(r̂²-ρ̂²) Z^{(0,1)}`, then bubbles.
//! The piece in the cell outside a breakpoint is unscaled; the piece inside is scaled
//! for continuity.

use crate::error::{Error, Result};
use crate::jacobi::{
    eval_jacobi_all, gauss_legendre, gauss_rule, jacobi_matrix, normalization_p, normalization_q,
    raising_jacobi_a, JacobiParams,
};
use crate::linalg::Scalar;
use crate::semiclassical::{build_semibasis, raising_a, raising_ab, raising_b, SemiBasis};
use crate::zernike::{complex_power, pi_m, AnnulusParams, ModeIndex, ZernikeIndex};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Conditioning guidance: keep `ratio^{N_p}` above this.
pub const CONDITIONING_FLOOR: f64 = 1e-8;

/// Concentric mesh `ρ₀ < ρ₁ < … < ρ_{N_h}`; `ρ₀ = 0` makes the first cell a disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh {
    breakpoints: Vec<f64>,
}

impl RadialMesh {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidMesh("a mesh needs at least two breakpoints".into()));
        }
        if breakpoints[0] < 0.0 || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidMesh("breakpoints must be finite and nonnegative".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMesh(format!("breakpoints must increase strictly: {} then {}", w[0], w[1])));
        }
        Ok(RadialMesh { breakpoints })
    }

    /// `n` equal cells of the unit disk.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMesh("uniform mesh needs n >= 1".into()));
        }
        Self::new((0..=n).map(|k| k as f64 / n as f64).collect())
    }

    /// `0, q^{n-1}, …, q, 1`: `n` cells shrinking geometrically towards the origin.
    pub fn geometric(ratio: f64, n: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) || n == 0 {
            return Err(Error::InvalidMesh(format!("geometric mesh needs 0 < ratio < 1 and n >= 1, got {ratio}, {n}")));
        }
        let mut b = vec![0.0];
        b.extend((0..n).rev().map(|k| ratio.powi(k as i32)));
        Self::new(b)
    }

    /// `{r ≤ 2^{-2N}} ∪ {2^{-n} ≤ r ≤ 2^{-(n-1)}}_{n=1..2N}`: `2N+1` cells graded towards 0.
    pub fn graded(big_n: usize) -> Result<Self> {
        if big_n == 0 {
            return Err(Error::InvalidMesh("graded mesh needs N >= 1".into()));
        }
        let mut b = vec![0.0];
        b.extend((0..=2 * big_n).rev().map(|k| 0.5f64.powi(k as i32)));
        Self::new(b)
    }

    /// Parses `0,0.5,1`, `uniform:{n}`, `geometric:{ratio},{n}` or `graded:{N}`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |what: &str| Error::Config(format!("cannot parse mesh spec '{spec}': {what}"));
        let spec = spec.trim();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("'{s}' is not a number")));
        let count = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(&format!("'{s}' is not a count")));
        let mesh = if let Some(rest) = spec.strip_prefix("uniform:") {
            Self::uniform(count(rest)?)
        } else if let Some(rest) = spec.strip_prefix("geometric:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(bad("expected geometric:{ratio},{n}"));
            }
            Self::geometric(num(parts[0])?, count(parts[1])?)
        } else if let Some(rest) = spec.strip_prefix("graded:") {
            Self::graded(count(rest)?)
        } else {
            Self::new(spec.split(',').map(num).collect::<Result<Vec<_>>>()?)
        };
        mesh.map_err(|e| match e {
            Error::InvalidMesh(m) => Error::Config(m),
            other => other,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cell(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    pub fn is_disk(&self) -> bool {
        self.breakpoints[0] == 0.0
    }

    pub fn outer_radius(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn inner_radius(&self) -> f64 {
        self.breakpoints[0]
    }

    /// Annulus parameters of cell `k` rescaled to unit outer radius; `None` for the disk cell.
    pub fn cell_params(&self, k: usize) -> Option<AnnulusParams> {
        let (lo, hi) = self.cell(k);
        (lo > 0.0).then(|| AnnulusParams::new(lo / hi).expect("valid cell"))
    }

    /// `min ρ_k/ρ_{k+1}` over the cells whose inner edge is an interior breakpoint (1 for a
    /// single cell). Those cells carry the inner hat pieces that lose independence as `m` grows.
    pub fn ratio(&self) -> f64 {
        (1..self.n_cells()).map(|k| self.breakpoints[k] / self.breakpoints[k + 1]).fold(1.0, f64::min)
    }

    /// A message when `ratio^{N_p}` drops below [`CONDITIONING_FLOOR`].
    pub fn conditioning_warning(&self, np: usize) -> Option<String> {
        let r = self.ratio();
        (r.powi(np as i32) < CONDITIONING_FLOOR).then(|| {
            format!("mesh ratio {r:.4} gives ratio^N_p = {:.2e} < 1e-8 at N_p = {np}; refine the mesh to keep the blocks well conditioned", r.powi(np as i32))
        })
    }

    /// Cell containing radius `r` (interfaces go to the inner cell).
    pub fn locate(&self, r: f64) -> Option<usize> {
        let tol = 1e-12 * self.outer_radius();
        if r < self.inner_radius() - tol || r > self.outer_radius() + tol {
            return None;
        }
        Some((0..self.n_cells()).find(|&k| r <= self.breakpoints[k + 1] + tol).unwrap_or(self.n_cells() - 1))
    }

    /// Breakpoint indices that carry hats.
    pub fn hat_breakpoints(&self) -> Vec<usize> {
        let first = if self.is_disk() { 1 } else { 0 };
        (first..self.breakpoints.len()).collect()
    }
}

/// Value of the unscaled hat piece in the cell outside breakpoint `b` at `r = ρ_b`
/// (per unit angular factor), or of the piece inside when that is the only one.
fn inner_piece_edge_value(mesh: &RadialMesh, cell: usize, m: usize) -> f64 {
    match mesh.cell_params(cell) {
        None => 1.0 / normalization_p(JacobiParams { a: 0.0, b: m as f64 }).sqrt(),
        Some(p) => (1.0 - p.rho * p.rho) / normalization_q(p.t, 0.0, 1.0, m as f64).unwrap().0.sqrt(),
    }
}

fn outer_piece_edge_value(mesh: &RadialMesh, cell: usize, m: usize) -> f64 {
    let p = mesh.cell_params(cell).expect("outer piece lives on an annulus");
    (1.0 - p.rho * p.rho) * p.rho.powi(m as i32) / normalization_q(p.t, 1.0, 0.0, m as f64).unwrap().0.sqrt()
}

/// Continuity factor for the piece of the hat at breakpoint `b` inside `ρ_b` (cell `b-1`).
/// It is the printed geometric factor (κ_m or γ_m) times a ratio of normalization constants.
pub fn hat_inner_scale(mesh: &RadialMesh, b: usize, m: usize) -> f64 {
    if b + 1 >= mesh.breakpoints.len() || b == 0 {
        return 1.0;
    }
    outer_piece_edge_value(mesh, b, m) / inner_piece_edge_value(mesh, b - 1, m)
}

/// The printed geometric continuity coefficient: `κ_m` next to the disk cell, `γ_m` between annuli.
pub fn geometric_hat_coefficient(mesh: &RadialMesh, b: usize, m: usize) -> f64 {
    let (r1, r2) = mesh.cell(b - 1);
    let r3 = mesh.breakpoints[b + 1];
    let outer = (1.0 - (r2 / r3).powi(2)) * (r2 / r3).powi(m as i32);
    if r1 == 0.0 {
        outer
    } else {
        outer / (1.0 - (r1 / r2).powi(2))
    }
}

fn polar(x: f64, y: f64) -> (f64, f64) {
    ((x * x + y * y).sqrt(), y.atan2(x))
}

/// Harmonic of the scaled point `(x,y)/s`.
fn scaled_harmonic(mode: ModeIndex, x: f64, y: f64, s: f64) -> f64 {
    let (re, im) = complex_power(x / s, y / s, mode.m);
    if mode.j == 1 {
        re
    } else {
        im
    }
}

/// Hat at breakpoint index `b`, evaluated from its piecewise definition. Zero outside its support.
pub fn eval_hat(mesh: &RadialMesh, b: usize, mode: ModeIndex, x: f64, y: f64) -> f64 {
    let (r, _) = polar(x, y);
    let m = mode.m;
    let bp = mesh.breakpoints();
    let tol = 1e-14 * mesh.outer_radius();
    // piece in the cell outside the breakpoint (cell b): unscaled inner-edge piece
    if b + 1 < bp.len() && r >= bp[b] - tol && r <= bp[b + 1] + tol {
        let p = mesh.cell_params(b).unwrap();
        let hi = bp[b + 1];
        let rh2 = (r / hi).powi(2);
        let q10 = normalization_q(p.t, 1.0, 0.0, m as f64).unwrap().0;
        return (1.0 - rh2) * scaled_harmonic(mode, x, y, hi) / q10.sqrt();
    }
    if b >= 1 && r >= bp[b - 1] - tol && r <= bp[b] + tol {
        let scale = hat_inner_scale(mesh, b, m);
        let hi = bp[b];
        return scale
            * match mesh.cell_params(b - 1) {
                None => scaled_harmonic(mode, x, y, hi) / normalization_p(JacobiParams { a: 0.0, b: m as f64 }).sqrt(),
                Some(p) => {
                    let q01 = normalization_q(p.t, 0.0, 1.0, m as f64).unwrap().0;
                    ((r / hi).powi(2) - p.rho * p.rho) * scaled_harmonic(mode, x, y, hi) / q01.sqrt()
                }
            };
    }
    0.0
}

/// Bubble `(1-r̂²) Z^{(1)}_{n,m,j}` (disk cell) or `(1-r̂²)(r̂²-ρ̂²) Z^{ρ̂,(1,1)}_{n,m,j}` (annulus
/// cell) in scaled coordinates `r̂ = r/ρ_out`; zero outside cell `k`.
pub fn eval_bubble(mesh: &RadialMesh, k: usize, idx: ZernikeIndex, x: f64, y: f64) -> Result<f64> {
    let (r, _) = polar(x, y);
    let (lo, hi) = mesh.cell(k);
    let tol = 1e-14 * hi;
    if r < lo - tol || r > hi + tol {
        return Ok(0.0);
    }
    let rh2 = (r / hi).powi(2);
    let n = idx.radial_index();
    let m = idx.mode.m;
    let h = scaled_harmonic(idx.mode, x, y, hi);
    Ok(match mesh.cell_params(k) {
        None => {
            let p = eval_jacobi_all(JacobiParams::new(1.0, m as f64)?, n, 2.0 * rh2 - 1.0);
            (1.0 - rh2) * h * p[n]
        }
        Some(p) => {
            let basis = build_semibasis(p.semi(1.0, 1.0, m), n + 1)?;
            let q = basis.eval_all(p.t * (1.0 - rh2), n + 1);
            (1.0 - rh2) * (rh2 - p.rho * p.rho) * h * q[n]
        }
    })
}

/// `R^{Ω₀}_m` for `n` local functions (hat then `n-1` bubbles): `n×n`, first column `e₁`,
/// remaining columns `½R_a` with `(1-x)P^{(1,m)} = P^{(0,m)} R_a`.
pub fn raising_operator_disk(m: usize, n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(n, n);
    if n == 0 {
        return r;
    }
    r[(0, 0)] = 1.0;
    if n > 1 {
        let ra = raising_jacobi_a(m, n - 1);
        for k in 0..n - 1 {
            r[(k, k + 1)] = 0.5 * ra[(k, k)];
            r[(k + 1, k + 1)] = 0.5 * ra[(k + 1, k)];
        }
    }
    r
}

/// `R^{Ωρ}_m` for `n ≥ 2` local functions (two hat pieces then `n-2` bubbles): `n×n` with
/// columns `(1/t)R_a[:,0]`, `(1/t)R_b[:,0]` and `(1/t²)R_ab`.
pub fn raising_operator_annulus(params: AnnulusParams, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter("an annulus cell carries at least its two hat pieces".into()));
    }
    let t = params.t;
    let mut r = DMatrix::zeros(n, n);
    let ra = raising_a(t, m, 1)?;
    let rb = raising_b(t, m, 1)?;
    for i in 0..2 {
        r[(i, 0)] = ra[(i, 0)] / t;
        r[(i, 1)] = rb[(i, 0)] / t;
    }
    if n > 2 {
        let rab = raising_ab(t, m, n - 2)?;
        for k in 0..n - 2 {
            for i in k..k + 3 {
                r[(i, k + 2)] = rab[(i, k)] / (t * t);
            }
        }
    }
    Ok(r)
}

/// One local function of a cell and where it lands globally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDof {
    pub local: usize,
    pub global: usize,
    pub scale: f64,
}

/// Degree-of-freedom bookkeeping for a mesh and maximal degree `N_p` (even).
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    mesh: RadialMesh,
    np: usize,
    dirichlet: bool,
    /// Breakpoint index of each retained hat, in radial order.
    hats: Vec<usize>,
}

pub fn build_layout(mesh: &RadialMesh, np: usize, dirichlet: bool) -> Result<DofLayout> {
    if np % 2 != 0 || np == 0 {
        return Err(Error::Config(format!("N_p must be even and positive (got {np}); use {} instead", np + 1)));
    }
    let last = mesh.breakpoints().len() - 1;
    let hats = mesh.hat_breakpoints().into_iter().filter(|&b| !dirichlet || (b != last && (mesh.is_disk() || b != 0))).collect();
    Ok(DofLayout { mesh: mesh.clone(), np, dirichlet, hats })
}

impl DofLayout {
    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    /// All modes `m ≤ N_p` in block order.
    pub fn modes(&self) -> Vec<ModeIndex> {
        ModeIndex::all(self.np)
    }

    /// Bubble levels `K_m`.
    pub fn levels(&self, m: usize) -> usize {
        if m + 2 <= self.np {
            (self.np - 2 - m) / 2 + 1
        } else {
            0
        }
    }

    pub fn hat_count(&self) -> usize {
        self.hats.len()
    }

    pub fn hat_breakpoints(&self) -> &[usize] {
        &self.hats
    }

    pub fn mode_len(&self, m: usize) -> usize {
        self.hats.len() + self.n_cells() * self.levels(m)
    }

    pub fn total_len(&self) -> usize {
        self.modes().iter().map(|md| self.mode_len(md.m)).sum()
    }

    /// Start of each mode block in the concatenated vector.
    pub fn mode_offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for md in self.modes() {
            off.push(off.last().unwrap() + self.mode_len(md.m));
        }
        off
    }

    /// Retained hats adjacent to each cell (global hat indices).
    pub fn cell_hats(&self) -> Vec<Vec<usize>> {
        (0..self.n_cells())
            .map(|c| self.hats.iter().enumerate().filter(|(_, &b)| b == c || b == c + 1).map(|(i, _)| i).collect())
            .collect()
    }

    pub fn bubble_index(&self, level: usize, cell: usize) -> usize {
        self.hats.len() + level * self.n_cells() + cell
    }

    /// Number of local functions on `cell` for mode `m` (hat pieces plus bubbles).
    pub fn local_len(&self, m: usize, cell: usize) -> usize {
        let pieces = if self.mesh.cell_params(cell).is_some() { 2 } else { 1 };
        pieces + self.levels(m)
    }

    /// Local-to-global map on `cell` for mode `m`; dropped hats are omitted.
    pub fn cell_map(&self, m: usize, cell: usize) -> Vec<CellDof> {
        let mut v = Vec::new();
        let annulus = self.mesh.cell_params(cell).is_some();
        let hat_of = |b: usize| self.hats.iter().position(|&x| x == b);
        if annulus {
            if let Some(g) = hat_of(cell) {
                v.push(CellDof { local: 0, global: g, scale: 1.0 });
            }
            if let Some(g) = hat_of(cell + 1) {
                v.push(CellDof { local: 1, global: g, scale: hat_inner_scale(&self.mesh, cell + 1, m) });
            }
        } else if let Some(g) = hat_of(cell + 1) {
            v.push(CellDof { local: 0, global: g, scale: hat_inner_scale(&self.mesh, cell + 1, m) });
        }
        let first = if annulus { 2 } else { 1 };
        for level in 0..self.levels(m) {
            v.push(CellDof { local: first + level, global: self.bubble_index(level, cell), scale: 1.0 });
        }
        v
    }

    /// `R` of `cell` for mode `m` in unit-scaled coordinates.
    pub fn local_raising(&self, m: usize, cell: usize) -> Result<DMatrix<f64>> {
        let n = self.local_len(m, cell);
        match self.mesh.cell_params(cell) {
            None => Ok(raising_operator_disk(m, n)),
            Some(p) => raising_operator_annulus(p, m, n),
        }
    }

    /// Number of discontinuous coefficients per cell and mode: degrees `m, m+2, …, ≤ N_p`.
    pub fn analysis_len(&self, m: usize) -> usize {
        if m <= self.np {
            (self.np - m) / 2 + 1
        } else {
            0
        }
    }
}

/// Coefficients in the continuous basis, one vector per mode in [`DofLayout::modes`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField<T: Scalar> {
    pub layout: DofLayout,
    pub modes: Vec<Vec<T>>,
}

impl<T: Scalar> CoefficientField<T> {
    pub fn zeros(layout: &DofLayout) -> Self {
        let modes = layout.modes().iter().map(|md| vec![T::nil(); layout.mode_len(md.m)]).collect();
        CoefficientField { layout: layout.clone(), modes }
    }

    pub fn new(layout: &DofLayout, modes: Vec<Vec<T>>) -> Result<Self> {
        let want = layout.modes();
        if modes.len() != want.len() {
            return Err(Error::Dimension { expected: want.len(), found: modes.len() });
        }
        for (md, v) in want.iter().zip(&modes) {
            if v.len() != layout.mode_len(md.m) {
                return Err(Error::Dimension { expected: layout.mode_len(md.m), found: v.len() });
            }
        }
        Ok(CoefficientField { layout: layout.clone(), modes })
    }

    /// Per-cell Zernike (annular) coefficients of the same function.
    pub fn to_discontinuous(&self) -> Result<DiscontinuousField<T>> {
        let layout = &self.layout;
        let modes = layout.modes();
        let mut cells = Vec::with_capacity(layout.n_cells());
        for c in 0..layout.n_cells() {
            let mut per_mode = Vec::with_capacity(modes.len());
            for (pos, md) in modes.iter().enumerate() {
                let r = layout.local_raising(md.m, c)?;
                let mut local = vec![T::nil(); r.ncols()];
                for d in layout.cell_map(md.m, c) {
                    local[d.local] += self.modes[pos][d.global] * T::of(d.scale);
                }
                let z: Vec<T> = (0..r.nrows())
                    .map(|i| {
                        let mut acc = T::nil();
                        for (k, &lk) in local.iter().enumerate() {
                            let rik = r[(i, k)];
                            if rik != 0.0 {
                                acc += lk * T::of(rik);
                            }
                        }
                        acc
                    })
                    .collect();
                per_mode.push(z);
            }
            cells.push(per_mode);
        }
        Ok(DiscontinuousField { mesh: layout.mesh.clone(), np: layout.np, modes, cells })
    }

    /// Point values; see [`DiscontinuousField::eval`].
    pub fn synthesize(&self, points: &[(f64, f64)]) -> Result<Vec<T>> {
        self.to_discontinuous()?.eval(points)
    }
}

/// Per-cell coefficients in `Z^{(0)}` (disk cell) or `Z^{ρ̂,(0,0)}` (annulus cells),
/// in unit-scaled cell coordinates. `cells[c][mode position][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscontinuousField<T: Scalar> {
    pub mesh: RadialMesh,
    pub np: usize,
    pub modes: Vec<ModeIndex>,
    pub cells: Vec<Vec<Vec<T>>>,
}

/// Radial factors `r̂^m × (orthonormal radial family)` of a cell for one mode.
struct CellRadial {
    disk: Option<(crate::jacobi::TridiagonalSym, f64)>,
    annulus: Option<(AnnulusParams, SemiBasis)>,
    m: usize,
}

impl CellRadial {
    fn new(mesh: &RadialMesh, cell: usize, m: usize, count: usize) -> Result<Self> {
        let count = count.max(1);
        Ok(match mesh.cell_params(cell) {
            None => {
                let p = JacobiParams { a: 0.0, b: m as f64 };
                CellRadial { disk: Some((jacobi_matrix(p, count)?, normalization_p(p))), annulus: None, m }
            }
            Some(ap) => CellRadial { disk: None, annulus: Some((ap, build_semibasis(ap.semi(0.0, 0.0, m), count)?)), m },
        })
    }

    /// Values at scaled radius squared `rh2`, degrees `0..count`, including `r̂^m`.
    fn values(&self, rh2: f64, count: usize) -> Vec<f64> {
        let rm = rh2.sqrt().powi(self.m as i32);
        let mut v = if let Some((rec, mass)) = &self.disk {
            crate::jacobi::eval_orthonormal_all(rec, *mass, 2.0 * rh2 - 1.0, count)
        } else {
            let (p, b) = self.annulus.as_ref().unwrap();
            b.eval_all(p.t * (1.0 - rh2), count)
        };
        v.iter_mut().for_each(|x| *x *= rm);
        v
    }
}

impl<T: Scalar> DiscontinuousField<T> {
    pub fn zeros(mesh: &RadialMesh, np: usize, len: impl Fn(usize, usize) -> usize) -> Self {
        let modes = ModeIndex::all(np);
        let cells = (0..mesh.n_cells()).map(|c| modes.iter().map(|md| vec![T::nil(); len(md.m, c)]).collect()).collect();
        DiscontinuousField { mesh: mesh.clone(), np, modes, cells }
    }

    /// Values along the polar grid `radii × thetas` of one cell: `out[i][j] = u(r_i, θ_j)`.
    pub fn eval_polar_grid(&self, cell: usize, radii: &[f64], thetas: &[f64]) -> Result<Vec<Vec<T>>> {
        let (_, hi) = self.mesh.cell(cell);
        let mut out = vec![vec![T::nil(); thetas.len()]; radii.len()];
        for (pos, md) in self.modes.iter().enumerate() {
            let coeffs = &self.cells[cell][pos];
            if coeffs.iter().all(|c| *c == T::nil()) {
                continue;
            }
            let rad = CellRadial::new(&self.mesh, cell, md.m, coeffs.len())?;
            let ang: Vec<f64> = thetas.iter().map(|&th| if md.j == 1 { (md.m as f64 * th).cos() } else { (md.m as f64 * th).sin() }).collect();
            for (i, &r) in radii.iter().enumerate() {
                let vals = rad.values((r / hi).powi(2), coeffs.len());
                let mut radial = T::nil();
                for (c, v) in coeffs.iter().zip(&vals) {
                    radial += *c * T::of(*v);
                }
                for (j, a) in ang.iter().enumerate() {
                    out[i][j] += radial * T::of(*a);
                }
            }
        }
        Ok(out)
    }

    /// Point values; every point must lie in the meshed region.
    pub fn eval(&self, points: &[(f64, f64)]) -> Result<Vec<T>> {
        points
            .iter()
            .map(|&(x, y)| {
                let (r, th) = polar(x, y);
                let cell = self.mesh.locate(r).ok_or_else(|| Error::InvalidParameter(format!("point ({x},{y}) lies outside the mesh")))?;
                Ok(self.eval_polar_grid(cell, &[r], &[th])?[0][0])
            })
            .collect()
    }
}

/// Quadrature sizes for [`analyze_rhs`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    /// Equispaced angular nodes; default `max(2N_p+32, 128)`.
    pub k_theta: Option<usize>,
    /// Radial nodes per cell; default `max(N_p+24, 40)`.
    pub k_r: Option<usize>,
    /// `α` when `f ~ r^{-α}` near the origin; the disk cell then uses a Gauss–Jacobi rule
    /// carrying the singular factor.
    pub origin_exponent: Option<f64>,
}

/// Angular Fourier coefficients `∫ f(r,θ) Y_{m,j}(θ) dθ` at one radius for all modes.
fn angular_coefficients(f: &dyn Fn(f64, f64) -> f64, r: f64, modes: &[ModeIndex], k_theta: usize) -> Vec<f64> {
    let h = 2.0 * PI / k_theta as f64;
    let samples: Vec<(f64, f64)> = (0..k_theta)
        .map(|i| {
            let th = i as f64 * h;
            (th, f(r * th.cos(), r * th.sin()))
        })
        .collect();
    let max_m = modes.iter().map(|m| m.m).max().unwrap_or(0);
    let mut cosines = vec![0.0; max_m + 1];
    let mut sines = vec![0.0; max_m + 1];
    for &(th, v) in &samples {
        // cos(mθ), sin(mθ) by rotation
        let (c1, s1) = (th.cos(), th.sin());
        let (mut c, mut s) = (1.0, 0.0);
        for m in 0..=max_m {
            cosines[m] += h * v * c;
            sines[m] += h * v * s;
            let t = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = t;
        }
    }
    modes.iter().map(|md| if md.j == 1 { cosines[md.m] } else { sines[md.m] }).collect()
}

/// Projects `f` onto the discontinuous Zernike (annular) basis of each cell up to degree `N_p`.
pub fn analyze_rhs(f: impl Fn(f64, f64) -> f64, mesh: &RadialMesh, np: usize, opts: AnalysisOptions) -> Result<DiscontinuousField<f64>> {
    let len = |m: usize, _c: usize| if m <= np { (np - m) / 2 + 1 } else { 0 };
    analyze_with_len(&f, mesh, np, opts, &len)
}

/// As [`analyze_rhs`] with a custom per-(mode, cell) coefficient count.
pub fn analyze_with_len(
    f: &dyn Fn(f64, f64) -> f64,
    mesh: &RadialMesh,
    np: usize,
    opts: AnalysisOptions,
    len: &dyn Fn(usize, usize) -> usize,
) -> Result<DiscontinuousField<f64>> {
    let k_theta = opts.k_theta.unwrap_or((2 * np + 32).max(128));
    let k_r = opts.k_r.unwrap_or((np + 24).max(40));
    let mut field = DiscontinuousField::<f64>::zeros(mesh, np, len);
    let modes = field.modes.clone();
    for c in 0..mesh.n_cells() {
        let (_, hi) = mesh.cell(c);
        // nodes in r̂², weights for ∫ g(r̂) dμ with dμ the radial measure of the normalised basis
        let (rh2s, weights): (Vec<f64>, Vec<f64>) = match mesh.cell_params(c) {
            None => {
                let (nodes, w): (Vec<f64>, Vec<f64>) = match opts.origin_exponent {
                    Some(alpha) if alpha != 0.0 => {
                        // (1+η)^{-α/2} absorbed into the rule on η ∈ (-1,1)
                        let rule = gauss_rule(JacobiParams::new(0.0, -alpha / 2.0)?, k_r)?;
                        let w = rule.nodes.iter().zip(&rule.weights).map(|(e, w)| w * (1.0 + e).powf(alpha / 2.0)).collect();
                        (rule.nodes, w)
                    }
                    _ => {
                        let rule = gauss_legendre(k_r, -1.0, 1.0);
                        (rule.nodes, rule.weights)
                    }
                };
                (nodes.iter().map(|e| 0.5 * (1.0 + e)).collect(), w)
            }
            Some(p) => {
                let rule = gauss_legendre(k_r, 0.0, 1.0);
                (rule.nodes.iter().map(|tau| (p.t - tau) / p.t).collect(), rule.weights)
            }
        };
        let mut radial: Vec<Option<CellRadial>> = (0..modes.len()).map(|_| None).collect();
        for (&rh2, &w) in rh2s.iter().zip(&weights) {
            let r = hi * rh2.sqrt();
            let fhat = angular_coefficients(f, r, &modes, k_theta);
            for (pos, md) in modes.iter().enumerate() {
                let n = field.cells[c][pos].len();
                if n == 0 {
                    continue;
                }
                if radial[pos].is_none() {
                    radial[pos] = Some(CellRadial::new(mesh, c, md.m, n)?);
                }
                let vals = radial[pos].as_ref().unwrap().values(rh2, n);
                // Disk: ⟨f,Z_k⟩/‖Z_k‖² = Σ f̂ r̂^m P_k w (ρ²/4) / (ρ² π_m / 2^{m+2}).
                // Annulus: Σ f̂ r̂^m Q_k w (ρ²/(2t)) / (ρ² π_m / (2t^{m+1})).
                let norm = match mesh.cell_params(c) {
                    None => 2f64.powi(md.m as i32) / pi_m(md.m),
                    Some(p) => p.t.powi(md.m as i32) / pi_m(md.m),
                };
                for k in 0..n {
                    field.cells[c][pos][k] += w * fhat[pos] * vals[k] * norm;
                }
            }
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_generators() {
        let g = RadialMesh::graded(2).unwrap();
        assert_eq!(g.breakpoints(), &[0.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0]);
        let q = RadialMesh::geometric(0.5, 3).unwrap();
        assert_eq!(q.breakpoints(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(RadialMesh::parse("uniform:4").unwrap().n_cells(), 4);
        assert_eq!(RadialMesh::parse("0,0.5,1").unwrap().ratio(), 0.5);
        assert!(RadialMesh::parse("0,0.5,0.4").is_err());
        assert!(RadialMesh::parse("graded:x").is_err());
    }

    #[test]
    fn kappa_example() {
        let mesh = RadialMesh::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert!((geometric_hat_coefficient(&mesh, 1, 0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn disk_raising_first_mode() {
        assert_eq!(raising_operator_disk(0, 1), DMatrix::from_element(1, 1, 1.0));
    }
}
