//! Mass, stiffness, weighted-mass and load blocks without quadrature over the 2D cells.
//!
//! Cell-local blocks live in unit-scaled coordinates: mass-type blocks pick up a factor
//! `ρ_out²` on a cell of outer radius `ρ_out`, the stiffness is scale invariant, and the
//! `x`-weighted block scales with `ρ_out³`.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::fem::{CoefficientField, DiscontinuousField, DofLayout, RadialMesh};
use crate::jacobi::{cheb_expand_adaptive, clenshaw_matrix, jacobi_matrix, normalization_p, normalization_q, ChebCoeffs, JacobiParams};
use crate::linalg::{B3Arrowhead, Scalar};
use crate::semiclassical::build_semibasis;
use crate::zernike::{bubble_stiffness_annulus, pi_m, xjacobi_annulus, AnnulusParams, ModeIndex};
use nalgebra::DMatrix;

/// Chebyshev expansion tolerance and degree cap for `λ(r²)`.
pub const LAMBDA_TOL: f64 = 1e-14;
pub const LAMBDA_CAP: usize = 200;

fn norm_disk(m: usize) -> f64 {
    pi_m(m) / 2f64.powi(m as i32 + 2)
}

fn norm_annulus(p: AnnulusParams, m: usize) -> f64 {
    pi_m(m) / (2.0 * p.t.powi(m as i32 + 1))
}

/// `(π_m/2^{m+2}) Rᵀ R` for `n` local functions of the unit disk.
pub fn mass_disk(m: usize, n: usize) -> DMatrix<f64> {
    let r = crate::fem::raising_operator_disk(m, n);
    r.transpose() * &r * norm_disk(m)
}

/// `(π_m/(2t^{m+1})) Rᵀ R` for `n ≥ 2` local functions of `Ω_ρ`.
pub fn mass_annulus(params: AnnulusParams, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let r = crate::fem::raising_operator_annulus(params, m, n)?;
    Ok(r.transpose() * &r * norm_annulus(params, m))
}

/// Unit-disk stiffness: `mπ/p_{(0,m)}` for the hat, `4(k+1)(k+m+1)π_m/2^{m+3}` on the
/// bubble diagonal, no hat–bubble coupling.
pub fn stiffness_disk(m: usize, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    if n == 0 {
        return a;
    }
    let mf = m as f64;
    a[(0, 0)] = mf * std::f64::consts::PI / normalization_p(JacobiParams { a: 0.0, b: mf });
    for k in 0..n - 1 {
        let kf = k as f64;
        a[(k + 1, k + 1)] = 4.0 * (kf + 1.0) * (kf + mf + 1.0) * pi_m(m) / 2f64.powi(m as i32 + 3);
    }
    a
}

/// Hat-hat and hat-bubble stiffness entries `(a_m, b_m, c_m, d_m, e_m)` on `Ω_ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrowEntries {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

pub fn stiffness_arrow_entries(params: AnnulusParams, m: usize) -> Result<ArrowEntries> {
    let (rho, t) = (params.rho, params.t);
    let mf = m as f64;
    let pm = pi_m(m);
    let q10 = normalization_q(t, 1.0, 0.0, mf)?.0;
    let q01 = normalization_q(t, 0.0, 1.0, mf)?.0;
    let q11 = normalization_q(t, 1.0, 1.0, mf)?.0;
    let r2m = rho.powi(2 * m as i32);
    let mm = mf * (2.0 + mf);
    let a = pm * (2.0 - r2m * (mm - 2.0 * mm * rho * rho + (2.0 + mm) * rho.powi(4))) / ((2.0 + mf) * q10);
    let b = -2.0 * pm * (1.0 - r2m * rho.powi(4)) / ((2.0 + mf) * (q10 * q01).sqrt());
    let c = pm * (2.0 - 2.0 * r2m * rho.powi(4) + mm / (t * t)) / ((2.0 + mf) * q01);
    let tm3 = t.powi(m as i32 + 3);
    let d = 2.0 * pm * (mf + 1.0) * (q11 / q10).sqrt() / tm3;
    let e = -2.0 * pm * (mf + 1.0) * (q11 / q01).sqrt() / tm3;
    Ok(ArrowEntries { a, b, c, d, e })
}

/// Stiffness on `Ω_ρ` for `n ≥ 2` local functions: the `(a,b,c,d,e)` arrowhead and the
/// tridiagonal bubble block `-(π_m/(2t^{m+3})) D^ρ_m`.
pub fn stiffness_annulus(params: AnnulusParams, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter("annulus blocks need n >= 2".into()));
    }
    let e = stiffness_arrow_entries(params, m)?;
    let mut s = DMatrix::zeros(n, n);
    s[(0, 0)] = e.a;
    s[(0, 1)] = e.b;
    s[(1, 0)] = e.b;
    s[(1, 1)] = e.c;
    if n > 2 {
        s[(0, 2)] = e.d;
        s[(2, 0)] = e.d;
        s[(1, 2)] = e.e;
        s[(2, 1)] = e.e;
        let bubbles = bubble_stiffness_annulus(params, m, n - 2)?;
        for i in 0..n - 2 {
            for k in i.saturating_sub(1)..(i + 2).min(n - 2) {
                s[(i + 2, k + 2)] = bubbles[(i, k)];
            }
        }
    }
    Ok(s)
}

/// Function of `r²` per cell, used for the weighted mass `⟨Φ, λ(r²) Φ⟩`.
#[derive(Clone)]
pub enum RadialCoefficient {
    Constant(f64),
    /// One constant per cell (jumps aligned with the mesh).
    PerCell(Vec<f64>),
    /// A smooth function of `s = r²` on each cell.
    Function(std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// A smooth function of `s = r²` per cell, for jumps aligned with the mesh.
    PerCellFunction(Vec<std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>>),
}

impl std::fmt::Debug for RadialCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadialCoefficient::Constant(c) => write!(f, "Constant({c})"),
            RadialCoefficient::PerCell(v) => write!(f, "PerCell({v:?})"),
            RadialCoefficient::Function(_) => write!(f, "Function(..)"),
            RadialCoefficient::PerCellFunction(v) => write!(f, "PerCellFunction({} cells)", v.len()),
        }
    }
}

impl RadialCoefficient {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RadialCoefficient::Function(std::sync::Arc::new(f))
    }

    /// Chebyshev expansion in the scaled variable `r̂² ∈ [lo, 1]` of the cell `[ρ₁, ρ₂]`,
    /// plus whether the adaptive expansion converged within [`LAMBDA_CAP`].
    pub fn cell_expansion(&self, mesh: &RadialMesh, cell: usize) -> (ChebCoeffs, bool) {
        let (r1, r2) = mesh.cell(cell);
        let lo = (r1 / r2).powi(2);
        match self {
            RadialCoefficient::Constant(c) => (ChebCoeffs::constant(*c, lo, 1.0), true),
            RadialCoefficient::PerCell(v) => (ChebCoeffs::constant(v[cell], lo, 1.0), true),
            RadialCoefficient::Function(f) => cheb_expand_adaptive(|s| f(s * r2 * r2), lo, 1.0, LAMBDA_TOL, LAMBDA_CAP),
            RadialCoefficient::PerCellFunction(v) => cheb_expand_adaptive(|s| v[cell](s * r2 * r2), lo, 1.0, LAMBDA_TOL, LAMBDA_CAP),
        }
    }
}

fn weighted_from_lambda(lambda: &ChebCoeffs, r: &DMatrix<f64>, norm: f64, jac: impl Fn(usize) -> Result<BandMatrix>) -> Result<DMatrix<f64>> {
    if lambda.coeffs.len() <= 1 {
        let c = lambda.coeffs.first().copied().unwrap_or(0.0);
        return Ok(r.transpose() * r * (c * norm));
    }
    let rows = r.nrows();
    // Extend the operator so the leading rows×rows block of λ(J) is exact.
    let j = jac(rows + lambda.coeffs.len())?;
    let lam = clenshaw_matrix(lambda, &j).leading(rows).to_dense();
    Ok(r.transpose() * lam * r * norm)
}

/// `(π_m/2^{m+2}) Rᵀ Λ_m R` with `Λ_m = Σ λ_n T_n((I+X_{(0,m)})/2)`, `λ` expanded in `r²` on [0,1].
pub fn weighted_mass_disk(lambda: &ChebCoeffs, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let r = crate::fem::raising_operator_disk(m, n);
    weighted_from_lambda(lambda, &r, norm_disk(m), |size| crate::zernike::r2_matrix_disk(0.0, m, size, 1.0))
}

/// `(π_m/(2t^{m+1})) Rᵀ Λ_m R` with `Λ_m = Σ λ_n T_n(I - t⁻¹X_{t,(0,0,m)})`, `λ` expanded in
/// `r²` on `[ρ², 1]`.
pub fn weighted_mass_annulus(params: AnnulusParams, lambda: &ChebCoeffs, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let r = crate::fem::raising_operator_annulus(params, m, n)?;
    weighted_from_lambda(lambda, &r, norm_annulus(params, m), |size| {
        let basis = build_semibasis(params.semi(0.0, 0.0, m), size)?;
        let mut x = basis.recurrence.to_band();
        x.scale(-1.0 / params.t);
        x.add_identity(1.0);
        Ok(x)
    })
}

/// `⟨Φ_iᵀ, Z_k⟩` on the unit disk: `(π_m/2^{m+2}) Rᵀ` restricted to `nz` Zernike columns.
pub fn gram_load_disk(m: usize, n: usize, nz: usize) -> DMatrix<f64> {
    let r = crate::fem::raising_operator_disk(m, n);
    DMatrix::from_fn(n, nz, |i, k| if k < r.nrows() { r[(k, i)] * norm_disk(m) } else { 0.0 })
}

/// `⟨Φ_iᵀ, Z^{ρ,(0,0)}_k⟩` on `Ω_ρ`: `(π_m/(2t^{m+1})) Rᵀ` restricted to `nz` columns.
pub fn gram_load_annulus(params: AnnulusParams, m: usize, n: usize, nz: usize) -> Result<DMatrix<f64>> {
    let r = crate::fem::raising_operator_annulus(params, m, n)?;
    let w = norm_annulus(params, m);
    Ok(DMatrix::from_fn(n, nz, |i, k| if k < r.nrows() { r[(k, i)] * w } else { 0.0 }))
}

/// Which operator a [`BlockDiagonalOperator`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Mass,
    Stiffness,
    WeightedMass,
    Combination,
}

/// One B3-arrowhead block per Fourier mode, in [`DofLayout::modes`] order.
#[derive(Debug, Clone)]
pub struct BlockDiagonalOperator<T: Scalar> {
    pub layout: DofLayout,
    pub kind: BlockKind,
    pub blocks: Vec<(ModeIndex, B3Arrowhead<T>)>,
}

impl<T: Scalar> BlockDiagonalOperator<T> {
    pub fn block(&self, mode: ModeIndex) -> &B3Arrowhead<T> {
        &self.blocks[mode.position()].1
    }

    pub fn apply(&self, field: &CoefficientField<T>) -> CoefficientField<T> {
        let modes = self.blocks.iter().zip(&field.modes).map(|((_, b), v)| b.matvec(v)).collect();
        CoefficientField { layout: field.layout.clone(), modes }
    }

    /// `α·self + β·other`, block by block.
    pub fn combine(&self, alpha: T, other: &BlockDiagonalOperator<T>, beta: T) -> Result<BlockDiagonalOperator<T>> {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|((md, a), (_, b))| Ok((*md, a.combine(alpha, b, beta)?)))
            .collect::<Result<_>>()?;
        Ok(BlockDiagonalOperator { layout: self.layout.clone(), kind: BlockKind::Combination, blocks })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> BlockDiagonalOperator<U> {
        BlockDiagonalOperator { layout: self.layout.clone(), kind: self.kind, blocks: self.blocks.iter().map(|(m, b)| (*m, b.map(f))).collect() }
    }

    /// Triplets of the whole operator in the concatenated mode ordering.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let offsets = self.layout.mode_offsets();
        let mut out = Vec::new();
        for (pos, (_, b)) in self.blocks.iter().enumerate() {
            let d = b.to_dense();
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    if d[(i, j)] != T::nil() {
                        out.push((offsets[pos] + i, offsets[pos] + j, d[(i, j)]));
                    }
                }
            }
        }
        out
    }
}

/// Stitches cell-local blocks of mode `m` into the global B3-arrowhead block.
/// `local(cell)` returns the unit-scaled local block already multiplied by its cell scale.
fn stitch(layout: &DofLayout, m: usize, local: impl Fn(usize) -> Result<DMatrix<f64>>) -> Result<B3Arrowhead<f64>> {
    let cells = layout.n_cells();
    let blocks: Vec<DMatrix<f64>> = (0..cells).map(&local).collect::<Result<_>>()?;
    let maps: Vec<_> = (0..cells).map(|c| layout.cell_map(m, c)).collect();
    let (mut bw, mut border) = (0usize, 0usize);
    let hats = layout.hat_count();
    let level_of = |g: usize| (g >= hats).then(|| (g - hats) / cells);
    for (blk, map) in blocks.iter().zip(&maps) {
        for di in map {
            for dj in map {
                if blk[(di.local, dj.local)] == 0.0 {
                    continue;
                }
                match (level_of(di.global), level_of(dj.global)) {
                    (Some(a), Some(b)) => bw = bw.max(a.abs_diff(b)),
                    (None, Some(l)) | (Some(l), None) => border = border.max(l + 1),
                    _ => {}
                }
            }
        }
    }
    let mut out = B3Arrowhead::zeros(hats, layout.cell_hats(), layout.levels(m), bw, border);
    for (blk, map) in blocks.iter().zip(&maps) {
        for di in map {
            for dj in map {
                let v = blk[(di.local, dj.local)];
                if v != 0.0 {
                    out.add(di.global, dj.global, v * di.scale * dj.scale)?;
                }
            }
        }
    }
    Ok(out)
}

fn per_mode(layout: &DofLayout, kind: BlockKind, build: impl Fn(usize) -> Result<B3Arrowhead<f64>>) -> Result<BlockDiagonalOperator<f64>> {
    let mut cache: Vec<Option<B3Arrowhead<f64>>> = vec![None; layout.np() + 1];
    let mut blocks = Vec::new();
    for md in layout.modes() {
        if cache[md.m].is_none() {
            cache[md.m] = Some(build(md.m)?);
        }
        blocks.push((md, cache[md.m].clone().unwrap()));
    }
    Ok(BlockDiagonalOperator { layout: layout.clone(), kind, blocks })
}

/// Cell-local mass of mode `m` including the `ρ_out²` scale.
pub fn cell_mass(layout: &DofLayout, m: usize, cell: usize) -> Result<DMatrix<f64>> {
    let n = layout.local_len(m, cell);
    let (_, hi) = layout.mesh().cell(cell);
    Ok(match layout.mesh().cell_params(cell) {
        None => mass_disk(m, n),
        Some(p) => mass_annulus(p, m, n)?,
    } * (hi * hi))
}

pub fn cell_stiffness(layout: &DofLayout, m: usize, cell: usize) -> Result<DMatrix<f64>> {
    let n = layout.local_len(m, cell);
    match layout.mesh().cell_params(cell) {
        None => Ok(stiffness_disk(m, n)),
        Some(p) => stiffness_annulus(p, m, n),
    }
}

pub fn cell_weighted_mass(layout: &DofLayout, lambda: &RadialCoefficient, m: usize, cell: usize) -> Result<DMatrix<f64>> {
    let n = layout.local_len(m, cell);
    let (_, hi) = layout.mesh().cell(cell);
    let (coeffs, _) = lambda.cell_expansion(layout.mesh(), cell);
    Ok(match layout.mesh().cell_params(cell) {
        None => weighted_mass_disk(&coeffs, m, n)?,
        Some(p) => weighted_mass_annulus(p, &coeffs, m, n)?,
    } * (hi * hi))
}

pub fn assemble_mass(layout: &DofLayout) -> Result<BlockDiagonalOperator<f64>> {
    per_mode(layout, BlockKind::Mass, |m| stitch(layout, m, |c| cell_mass(layout, m, c)))
}

pub fn assemble_stiffness(layout: &DofLayout) -> Result<BlockDiagonalOperator<f64>> {
    per_mode(layout, BlockKind::Stiffness, |m| stitch(layout, m, |c| cell_stiffness(layout, m, c)))
}

pub fn assemble_weighted_mass(layout: &DofLayout, lambda: &RadialCoefficient) -> Result<BlockDiagonalOperator<f64>> {
    per_mode(layout, BlockKind::WeightedMass, |m| stitch(layout, m, |c| cell_weighted_mass(layout, lambda, m, c)))
}

/// Load vector `⟨Φ, f⟩` from the discontinuous expansion of `f`.
pub fn assemble_load<T: Scalar>(layout: &DofLayout, f: &DiscontinuousField<T>) -> Result<CoefficientField<T>> {
    let mut out = CoefficientField::<T>::zeros(layout);
    for (pos, md) in layout.modes().iter().enumerate() {
        for c in 0..layout.n_cells() {
            let coeffs = &f.cells[c][pos];
            let n = layout.local_len(md.m, c);
            let (_, hi) = layout.mesh().cell(c);
            let g = match layout.mesh().cell_params(c) {
                None => gram_load_disk(md.m, n, coeffs.len()),
                Some(p) => gram_load_annulus(p, md.m, n, coeffs.len())?,
            } * (hi * hi);
            for d in layout.cell_map(md.m, c) {
                let mut acc = T::nil();
                for (k, &ck) in coeffs.iter().enumerate() {
                    acc += ck * T::of(g[(d.local, k)]);
                }
                out.modes[pos][d.global] += acc * T::of(d.scale);
            }
        }
    }
    Ok(out)
}

/// Global operators of a mesh: mass, stiffness and (optionally) a weighted mass.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub layout: DofLayout,
    pub mass: BlockDiagonalOperator<f64>,
    pub stiffness: BlockDiagonalOperator<f64>,
    pub weighted_mass: Option<BlockDiagonalOperator<f64>>,
    pub warnings: Vec<String>,
}

pub fn assemble_global(mesh: &RadialMesh, np: usize, lambda: Option<&RadialCoefficient>, dirichlet: bool) -> Result<GlobalSystem> {
    let layout = crate::fem::build_layout(mesh, np, dirichlet)?;
    let mut warnings: Vec<String> = mesh.conditioning_warning(np).into_iter().collect();
    if let Some(l) = lambda {
        for c in 0..mesh.n_cells() {
            if !l.cell_expansion(mesh, c).1 {
                warnings.push(format!("λ(r²) expansion on cell {c} did not reach 1e-14 within {LAMBDA_CAP} terms"));
            }
        }
    }
    Ok(GlobalSystem {
        mass: assemble_mass(&layout)?,
        stiffness: assemble_stiffness(&layout)?,
        weighted_mass: lambda.map(|l| assemble_weighted_mass(&layout, l)).transpose()?,
        layout,
        warnings,
    })
}

impl GlobalSystem {
    /// `a·A + b·M + c·M_λ`.
    pub fn operator(&self, a: f64, b: f64, c: f64) -> Result<BlockDiagonalOperator<f64>> {
        let mut op = self.stiffness.combine(a, &self.mass, b)?;
        if c != 0.0 {
            let w = self.weighted_mass.as_ref().ok_or_else(|| Error::InvalidParameter("no weighted mass assembled".into()))?;
            op = op.combine(1.0, w, c)?;
        }
        Ok(op)
    }
}

/// Unit-scaled `⟨Φ_{m'}ᵀ, x Φ_m⟩` blocks on `Ω_ρ`: `R_{m'}ᵀ D_{m'} X_{m'←m} R_m`.
pub fn weighted_mass_anisotropic_x(params: AnnulusParams, max_m: usize, n: &dyn Fn(usize) -> usize) -> Result<Vec<(ModeIndex, ModeIndex, DMatrix<f64>)>> {
    let rows: Vec<usize> = (0..=max_m).map(n).collect();
    let x = xjacobi_annulus(params, &rows)?;
    let mut rs = Vec::new();
    for m in 0..=max_m {
        rs.push(crate::fem::raising_operator_annulus(params, m, rows[m])?);
    }
    Ok(x.blocks
        .into_iter()
        .map(|(dst, src, xb)| {
            let d = norm_annulus(params, dst.m);
            (dst, src, rs[dst.m].transpose() * xb * &rs[src.m] * d)
        })
        .collect())
}

/// Global triplets of `⟨Φᵀ, xΦ⟩` in the concatenated mode ordering (annulus meshes only).
pub fn assemble_x_coupling(layout: &DofLayout) -> Result<Vec<(usize, usize, f64)>> {
    let mesh = layout.mesh();
    if mesh.is_disk() {
        return Err(Error::InvalidMesh("x-weighted coupling is implemented for annulus meshes only".into()));
    }
    let offsets = layout.mode_offsets();
    let mut out = Vec::new();
    for c in 0..layout.n_cells() {
        let p = mesh.cell_params(c).unwrap();
        let (_, hi) = mesh.cell(c);
        let blocks = weighted_mass_anisotropic_x(p, layout.np(), &|m| layout.local_len(m, c))?;
        for (dst, src, b) in blocks {
            let (md, ms) = (layout.cell_map(dst.m, c), layout.cell_map(src.m, c));
            for di in &md {
                for dj in &ms {
                    let v = b[(di.local, dj.local)];
                    if v != 0.0 {
                        out.push((offsets[dst.position()] + di.global, offsets[src.position()] + dj.global, v * hi.powi(3) * di.scale * dj.scale));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Multiplication by `r²` in the `Z^{(0)}` basis of the unit disk: `(I + X_{(0,m)})/2`.
pub fn r2_operator_disk(m: usize, n: usize) -> Result<BandMatrix> {
    let mut x = jacobi_matrix(JacobiParams { a: 0.0, b: m as f64 }, n)?.to_band();
    x.add_identity(1.0);
    x.scale(0.5);
    Ok(x)
}
