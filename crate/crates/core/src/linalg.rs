//! Sparse linear algebra for the FEM blocks.
//!
//! [`B3Arrowhead`] stores a per-mode block: a banded corner of hat DOFs, a thin border
//! coupling each cell's hats to its lowest bubble levels, and one banded tail per cell
//! over bubble levels. Elimination runs from the bottom-right corner, so every update
//! lands inside the stored pattern and the factors need no extra storage.
//!
//! The anisotropic path produces a general sparse matrix that is solved with a reverse
//! Cuthill–McKee ordering followed by a banded LU with partial pivoting.

use crate::error::{Error, Result};
use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use std::collections::VecDeque;
use std::fmt::Debug;
use std::io::Write;

/// Field scalars used by the solvers: `f64` and `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Debug {
    fn of(v: f64) -> Self {
        Self::from_real(v)
    }
    fn nil() -> Self {
        Self::from_real(0.0)
    }
}

impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Position of a global index inside a [`B3Arrowhead`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Hat(usize),
    Bubble { level: usize, cell: usize },
}

/// Banded-block-banded arrowhead matrix.
///
/// Global order: hats `0..s`, then bubbles level-major, index `s + level·cells + cell`.
/// A bubble couples to bubbles of its own cell within `bw` levels and, for
/// `level < border_levels`, to the hats adjacent to its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct B3Arrowhead<T: Scalar> {
    s: usize,
    cells: usize,
    levels: usize,
    bw: usize,
    border_levels: usize,
    /// Hat-hat entries within `corner_bw` of the diagonal, row-major. Elimination only
    /// couples hats that share a cell or are already coupled, so the band never grows.
    corner: Vec<T>,
    corner_bw: usize,
    cell_hats: Vec<Vec<usize>>,
    hat_cells: Vec<Vec<usize>>,
    border_row: Vec<Vec<T>>,
    border_col: Vec<Vec<T>>,
    tails: Vec<Vec<T>>,
}

impl<T: Scalar> B3Arrowhead<T> {
    /// Zero matrix with the given skeleton. `cell_hats[c]` lists the hats adjacent to cell `c`.
    pub fn zeros(s: usize, cell_hats: Vec<Vec<usize>>, levels: usize, bw: usize, border_levels: usize) -> Self {
        let cells = cell_hats.len();
        let border_levels = border_levels.min(levels);
        for hats in &cell_hats {
            assert!(hats.iter().all(|&h| h < s), "hat index out of range");
        }
        let border_row = cell_hats.iter().map(|h| vec![T::nil(); h.len() * border_levels]).collect();
        let border_col = cell_hats.iter().map(|h| vec![T::nil(); h.len() * border_levels]).collect();
        let tails = (0..cells).map(|_| vec![T::nil(); levels * (2 * bw + 1)]).collect();
        let corner_bw = cell_hats.iter().map(|h| h.iter().max().zip(h.iter().min()).map_or(0, |(a, b)| a - b)).max().unwrap_or(0);
        let mut hat_cells = vec![Vec::new(); s];
        for (c, hats) in cell_hats.iter().enumerate() {
            for &h in hats {
                hat_cells[h].push(c);
            }
        }
        B3Arrowhead { s, cells, levels, bw, border_levels, corner: vec![T::nil(); s * (2 * corner_bw + 1)], corner_bw, cell_hats, hat_cells, border_row, border_col, tails }
    }

    pub fn dim(&self) -> usize {
        self.s + self.cells * self.levels
    }

    pub fn hats(&self) -> usize {
        self.s
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Half-bandwidth of each cell tail, in levels.
    pub fn tail_bandwidth(&self) -> usize {
        self.bw
    }

    pub fn border_levels(&self) -> usize {
        self.border_levels
    }

    pub fn cell_hats(&self, cell: usize) -> &[usize] {
        &self.cell_hats[cell]
    }

    pub fn slot(&self, i: usize) -> Slot {
        if i < self.s {
            Slot::Hat(i)
        } else {
            let k = i - self.s;
            Slot::Bubble { level: k / self.cells, cell: k % self.cells }
        }
    }

    pub fn bubble_index(&self, level: usize, cell: usize) -> usize {
        self.s + level * self.cells + cell
    }

    fn locate(&self, i: usize, j: usize) -> Option<(u8, usize, usize)> {
        match (self.slot(i), self.slot(j)) {
            (Slot::Hat(a), Slot::Hat(b)) => (a.abs_diff(b) <= self.corner_bw).then_some((0, 0, a * (2 * self.corner_bw + 1) + b + self.corner_bw - a)),
            (Slot::Hat(h), Slot::Bubble { level, cell }) => {
                let pos = self.cell_hats[cell].iter().position(|&x| x == h)?;
                (level < self.border_levels).then_some((1, cell, pos * self.border_levels + level))
            }
            (Slot::Bubble { level, cell }, Slot::Hat(h)) => {
                let pos = self.cell_hats[cell].iter().position(|&x| x == h)?;
                (level < self.border_levels).then_some((2, cell, level * self.cell_hats[cell].len() + pos))
            }
            (Slot::Bubble { level: l1, cell: c1 }, Slot::Bubble { level: l2, cell: c2 }) => {
                (c1 == c2 && l1.abs_diff(l2) <= self.bw).then_some((3, c1, l1 * (2 * self.bw + 1) + l2 + self.bw - l1))
            }
        }
    }

    fn slot_ref(&self, i: usize, j: usize) -> Option<&T> {
        let (kind, c, k) = self.locate(i, j)?;
        Some(match kind {
            0 => &self.corner[k],
            1 => &self.border_row[c][k],
            2 => &self.border_col[c][k],
            _ => &self.tails[c][k],
        })
    }

    fn slot_mut(&mut self, i: usize, j: usize) -> Option<&mut T> {
        let (kind, c, k) = self.locate(i, j)?;
        Some(match kind {
            0 => &mut self.corner[k],
            1 => &mut self.border_row[c][k],
            2 => &mut self.border_col[c][k],
            _ => &mut self.tails[c][k],
        })
    }

    /// Whether `(i,j)` is inside the stored pattern.
    pub fn in_pattern(&self, i: usize, j: usize) -> bool {
        self.locate(i, j).is_some()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot_ref(i, j).copied().unwrap_or_else(T::nil)
    }

    /// Adds `v` at `(i,j)`; a nonzero outside the pattern is a structural error.
    pub fn add(&mut self, i: usize, j: usize, v: T) -> Result<()> {
        if i < self.s && j < self.s && i.abs_diff(j) > self.corner_bw && v != T::nil() {
            self.widen_corner(i.abs_diff(j));
        }
        match self.slot_mut(i, j) {
            Some(x) => {
                *x += v;
                Ok(())
            }
            None if v == T::nil() => Ok(()),
            None => Err(Error::Structure(format!("entry ({i},{j}) lies outside the B3-arrowhead pattern"))),
        }
    }

    /// Indices `j < p` that may be nonzero in row and column `p`.
    fn lower_neighbours(&self, p: usize, out: &mut Vec<usize>) {
        out.clear();
        match self.slot(p) {
            Slot::Hat(h) => out.extend(h.saturating_sub(self.corner_bw)..h),
            Slot::Bubble { level, cell } => {
                if level < self.border_levels {
                    out.extend(self.cell_hats[cell].iter().copied());
                }
                for l in level.saturating_sub(self.bw)..level {
                    out.push(self.bubble_index(l, cell));
                }
            }
        }
    }

    fn widen_corner(&mut self, bw: usize) {
        let (old, w) = (std::mem::take(&mut self.corner), 2 * self.corner_bw + 1);
        let nw = 2 * bw + 1;
        self.corner = vec![T::nil(); self.s * nw];
        for i in 0..self.s {
            for k in 0..w {
                let j = (i + k) as isize - self.corner_bw as isize;
                if (0..self.s as isize).contains(&j) {
                    self.corner[i * nw + (j as usize + bw - i)] = old[i * w + k];
                }
            }
        }
        self.corner_bw = bw;
    }

    /// Entries `(i, j)` of row `i` that may be nonzero.
    fn row_pattern(&self, i: usize) -> Vec<usize> {
        let mut v = Vec::new();
        match self.slot(i) {
            Slot::Hat(h) => {
                v.extend(h.saturating_sub(self.corner_bw)..(h + self.corner_bw + 1).min(self.s));
                for &c in &self.hat_cells[h] {
                    for l in 0..self.border_levels {
                        v.push(self.bubble_index(l, c));
                    }
                }
            }
            Slot::Bubble { level, cell } => {
                if level < self.border_levels {
                    v.extend(self.cell_hats[cell].iter().copied());
                }
                for l in level.saturating_sub(self.bw)..(level + self.bw + 1).min(self.levels) {
                    v.push(self.bubble_index(l, cell));
                }
            }
        }
        v
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim());
        (0..self.dim())
            .map(|i| {
                let mut acc = T::nil();
                for j in self.row_pattern(i) {
                    acc += self.get(i, j) * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.dim();
        let mut d = DMatrix::from_element(n, n, T::nil());
        for i in 0..n {
            for j in self.row_pattern(i) {
                d[(i, j)] = self.get(i, j);
            }
        }
        d
    }

    /// Number of stored slots (the pattern size).
    pub fn pattern_len(&self) -> usize {
        self.corner.len()
            + self.border_row.iter().map(Vec::len).sum::<usize>()
            + self.border_col.iter().map(Vec::len).sum::<usize>()
            + self.tails.iter().map(Vec::len).sum::<usize>()
    }

    pub fn max_abs(&self) -> f64 {
        self.corner
            .iter()
            .chain(self.border_row.iter().flatten())
            .chain(self.border_col.iter().flatten())
            .chain(self.tails.iter().flatten())
            .fold(0.0, |m, v| m.max(v.modulus()))
    }

    /// `alpha·self + beta·other` for matrices with the same hats and cells; the result
    /// uses the wider of the two skeletons.
    pub fn combine(&self, alpha: T, other: &B3Arrowhead<T>, beta: T) -> Result<B3Arrowhead<T>> {
        if self.s != other.s || self.cells != other.cells || self.levels != other.levels || self.cell_hats != other.cell_hats {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        let mut out = B3Arrowhead::zeros(
            self.s,
            self.cell_hats.clone(),
            self.levels,
            self.bw.max(other.bw),
            self.border_levels.max(other.border_levels),
        );
        for (m, w) in [(self, alpha), (other, beta)] {
            for i in 0..m.dim() {
                for j in m.row_pattern(i) {
                    out.add(i, j, w * m.get(i, j))?;
                }
            }
        }
        Ok(out)
    }

    /// Converts a real matrix into the complex field.
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> B3Arrowhead<U> {
        let conv = |v: &Vec<T>| v.iter().map(|&x| f(x)).collect::<Vec<U>>();
        B3Arrowhead {
            s: self.s,
            cells: self.cells,
            levels: self.levels,
            bw: self.bw,
            border_levels: self.border_levels,
            corner: conv(&self.corner),
            corner_bw: self.corner_bw,
            cell_hats: self.cell_hats.clone(),
            hat_cells: self.hat_cells.clone(),
            border_row: self.border_row.iter().map(conv).collect(),
            border_col: self.border_col.iter().map(conv).collect(),
            tails: self.tails.iter().map(conv).collect(),
        }
    }

    /// Deletes the given hats (Dirichlet rows and columns), renumbering the rest.
    pub fn without_hats(&self, drop: &[usize]) -> B3Arrowhead<T> {
        let keep: Vec<usize> = (0..self.s).filter(|h| !drop.contains(h)).collect();
        let new_index = |h: usize| keep.iter().position(|&k| k == h);
        let cell_hats: Vec<Vec<usize>> = self.cell_hats.iter().map(|hs| hs.iter().filter_map(|&h| new_index(h)).collect()).collect();
        let mut out = B3Arrowhead::zeros(keep.len(), cell_hats, self.levels, self.bw, self.border_levels);
        let map = |i: usize| -> Option<usize> {
            match self.slot(i) {
                Slot::Hat(h) => new_index(h),
                Slot::Bubble { level, cell } => Some(keep.len() + level * self.cells + cell),
            }
        };
        for i in 0..self.dim() {
            for j in self.row_pattern(i) {
                if let (Some(a), Some(b)) = (map(i), map(j)) {
                    out.add(a, b, self.get(i, j)).expect("pattern preserved");
                }
            }
        }
        out
    }

    /// Structural check: every nonzero of `dense` lies inside the pattern.
    pub fn pattern_contains(&self, dense: &DMatrix<T>, tol: f64) -> bool {
        (0..dense.nrows()).all(|i| (0..dense.ncols()).all(|j| dense[(i, j)].modulus() <= tol || self.in_pattern(i, j)))
    }

    /// Bottom-up elimination in place. Returns the pivots. `accept(p, pivot)` vets each pivot.
    fn eliminate(&mut self, accept: impl Fn(usize, T) -> Result<()>) -> Result<Vec<T>> {
        let n = self.dim();
        let mut pivots = vec![T::nil(); n];
        let mut nb = Vec::new();
        let mut mult = Vec::new();
        let mut rowp = Vec::new();
        for p in (0..n).rev() {
            let d = self.get(p, p);
            accept(p, d)?;
            pivots[p] = d;
            self.lower_neighbours(p, &mut nb);
            mult.clear();
            rowp.clear();
            for &i in &nb {
                let u = self.get(i, p) / d;
                *self.slot_mut(i, p).unwrap() = u;
                mult.push(u);
                rowp.push(self.get(p, i));
            }
            for (a, &i) in nb.iter().enumerate() {
                let u = mult[a];
                if u == T::nil() {
                    continue;
                }
                for (b, &j) in nb.iter().enumerate() {
                    let slot = self.slot_mut(i, j).expect("fill-in outside the B3 pattern");
                    *slot -= u * rowp[b];
                }
            }
        }
        Ok(pivots)
    }
}

/// `A = U L` with `U` unit upper triangular and `L` lower triangular, both stored in the
/// skeleton of `A` (multipliers above the diagonal, `L` on and below it).
#[derive(Debug, Clone)]
pub struct UlFactors<T: Scalar> {
    packed: B3Arrowhead<T>,
}

/// Relative pivot threshold for UL without pivoting.
pub const UL_PIVOT_TOLERANCE: f64 = 1e-14;

/// UL factorization without pivoting. A pivot below `1e-14·|A_pp|` is an error (the row
/// maximum stands in for a zero diagonal). Elimination without pivoting commutes with
/// diagonal scaling, and so does this test, so badly scaled high-`m` hats are not rejected.
pub fn ul_factorize<T: Scalar>(a: &B3Arrowhead<T>) -> Result<UlFactors<T>> {
    let row_scale: Vec<f64> = (0..a.dim())
        .map(|i| {
            let d = a.get(i, i).modulus();
            if d > 0.0 {
                d
            } else {
                a.row_pattern(i).into_iter().fold(0.0f64, |m, j| m.max(a.get(i, j).modulus()))
            }
        })
        .collect();
    let mut packed = a.clone();
    packed.eliminate(|p, d| {
        let mag = d.modulus();
        let threshold = UL_PIVOT_TOLERANCE * row_scale[p];
        if mag <= threshold || !mag.is_finite() {
            Err(Error::TinyPivot { index: p, magnitude: mag, threshold })
        } else {
            Ok(())
        }
    })?;
    Ok(UlFactors { packed })
}

impl<T: Scalar> UlFactors<T> {
    pub fn dim(&self) -> usize {
        self.packed.dim()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        solve_packed(&self.packed, b, |_, d| d)
    }

    /// Dense `U` (unit upper) and `L` (lower), for inspection.
    pub fn to_dense(&self) -> (DMatrix<T>, DMatrix<T>) {
        split_packed(&self.packed, |_, v| v)
    }

    /// Whether the packed factors stay inside the input's pattern: true by construction,
    /// exposed so tests can confirm the skeleton was not widened.
    pub fn skeleton(&self) -> &B3Arrowhead<T> {
        &self.packed
    }
}

fn split_packed<T: Scalar>(p: &B3Arrowhead<T>, lower_scale: impl Fn(usize, T) -> T) -> (DMatrix<T>, DMatrix<T>) {
    let n = p.dim();
    let mut u = DMatrix::from_element(n, n, T::nil());
    let mut l = DMatrix::from_element(n, n, T::nil());
    for i in 0..n {
        u[(i, i)] = T::of(1.0);
        for j in p.row_pattern(i) {
            let v = p.get(i, j);
            if j > i {
                u[(i, j)] = v;
            } else {
                l[(i, j)] = lower_scale(i, v);
            }
        }
    }
    (u, l)
}

fn solve_packed<T: Scalar>(p: &B3Arrowhead<T>, b: &[T], diag: impl Fn(usize, T) -> T) -> Result<Vec<T>> {
    let n = p.dim();
    if b.len() != n {
        return Err(Error::Dimension { expected: n, found: b.len() });
    }
    let mut y = b.to_vec();
    let mut nb = Vec::new();
    // U y = b, bottom-up, column oriented.
    for q in (0..n).rev() {
        p.lower_neighbours(q, &mut nb);
        let yq = y[q];
        for &i in &nb {
            y[i] -= p.get(i, q) * yq;
        }
    }
    // L x = y, top-down.
    for q in 0..n {
        p.lower_neighbours(q, &mut nb);
        let mut acc = y[q];
        for &j in &nb {
            acc -= p.get(q, j) * y[j];
        }
        y[q] = acc / diag(q, p.get(q, q));
    }
    Ok(y)
}

/// Reverse Cholesky factor `L` (lower triangular) with `A = Lᵀ L`, sharing the skeleton of `A`.
#[derive(Debug, Clone)]
pub struct ReverseCholesky {
    packed: B3Arrowhead<f64>,
}

/// Cholesky elimination started from the bottom-right corner; fails on a non-positive pivot.
pub fn reverse_cholesky(a: &B3Arrowhead<f64>) -> Result<ReverseCholesky> {
    let mut packed = a.clone();
    packed.eliminate(|p, d| if d > 0.0 && d.is_finite() { Ok(()) } else { Err(Error::NotPositiveDefinite { index: p, pivot: d }) })?;
    Ok(ReverseCholesky { packed })
}

impl ReverseCholesky {
    pub fn dim(&self) -> usize {
        self.packed.dim()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        solve_packed(&self.packed, b, |_, d| d)
    }

    /// Solves `L x = b` for the Cholesky factor `L`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension { expected: n, found: b.len() });
        }
        let mut x = b.to_vec();
        let mut nb = Vec::new();
        for q in 0..n {
            self.packed.lower_neighbours(q, &mut nb);
            let d = self.packed.get(q, q);
            let mut acc = x[q];
            for &j in &nb {
                acc -= self.packed.get(q, j) / d.sqrt() * x[j];
            }
            x[q] = acc / d.sqrt();
        }
        Ok(x)
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension { expected: n, found: b.len() });
        }
        let mut x = b.to_vec();
        let mut nb = Vec::new();
        for q in (0..n).rev() {
            let d = self.packed.get(q, q);
            x[q] /= d.sqrt();
            self.packed.lower_neighbours(q, &mut nb);
            let xq = x[q];
            for &j in &nb {
                x[j] -= self.packed.get(q, j) / d.sqrt() * xq;
            }
        }
        Ok(x)
    }

    /// `y = L x`.
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut nb = Vec::new();
        (0..n)
            .map(|q| {
                self.packed.lower_neighbours(q, &mut nb);
                let d = self.packed.get(q, q).sqrt();
                let mut acc = d * x[q];
                for &j in &nb {
                    acc += self.packed.get(q, j) / d * x[j];
                }
                acc
            })
            .collect()
    }

    /// `y = Lᵀ x`.
    pub fn mul_upper(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        let mut nb = Vec::new();
        for q in 0..n {
            self.packed.lower_neighbours(q, &mut nb);
            let d = self.packed.get(q, q).sqrt();
            y[q] += d * x[q];
            for &j in &nb {
                y[j] += self.packed.get(q, j) / d * x[q];
            }
        }
        y
    }

    /// Dense Cholesky factor `L`.
    pub fn factor_dense(&self) -> DMatrix<f64> {
        let p = &self.packed;
        split_packed(p, |i, v| v / p.get(i, i).sqrt()).1
    }

    pub fn skeleton(&self) -> &B3Arrowhead<f64> {
        &self.packed
    }
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries; exact zeros are kept out.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) out of range");
            rows[i].push((j, v));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let j = r[k].0;
                let mut v = 0.0;
                while k < r.len() && r[k].0 == j {
                    v += r[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix { n, indptr, indices, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Coordinate-list dump, one `row col value` line per nonzero.
    pub fn write_coo(&self, w: &mut impl Write) -> std::io::Result<()> {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Coordinate-list dump of a B3-arrowhead block (pattern entries that are nonzero).
pub fn write_coo_b3<T: Scalar + std::fmt::Display>(a: &B3Arrowhead<T>, w: &mut impl Write) -> std::io::Result<()> {
    for i in 0..a.dim() {
        for j in a.row_pattern(i) {
            let v = a.get(i, j);
            if v != T::nil() {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
    }
    Ok(())
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern. `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for v in adj.iter_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU with partial pivoting of a permuted sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    l: usize,
    u: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
    /// Symmetric equilibration `D`, factorized matrix is `D A D`.
    scaling: Vec<f64>,
}

/// General sparse LU: symmetric diagonal equilibration, RCM ordering, then banded Gaussian
/// elimination with row pivoting.
pub fn sparse_lu_general(a: &SparseMatrix) -> Result<SparseLu> {
    let n = a.n();
    let mut diag = vec![0.0f64; n];
    let mut rowmax = vec![0.0f64; n];
    for (i, (d, rm)) in diag.iter_mut().zip(rowmax.iter_mut()).enumerate() {
        for (j, v) in a.row(i) {
            *rm = rm.max(v.abs());
            if j == i {
                *d = v.abs();
            }
        }
    }
    let scaling: Vec<f64> = diag.iter().zip(&rowmax).map(|(&d, &r)| if d > 0.0 { 1.0 / d.sqrt() } else if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 }).collect();
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut l, mut u) = (0usize, 0usize);
    for i in 0..n {
        for (j, _) in a.row(i) {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                l = l.max(pi - pj);
            } else {
                u = u.max(pj - pi);
            }
        }
    }
    let width = 2 * l + u + 1;
    let mut data = vec![0.0; n * width];
    let at = |i: usize, j: usize| i * width + j + l - i;
    for i in 0..n {
        for (j, v) in a.row(i) {
            data[at(inv[i], inv[j])] = scaling[i] * v * scaling[j];
        }
    }
    let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut pivots = vec![0; n];
    for k in 0..n {
        let last = (k + l).min(n - 1);
        let mut p = k;
        for i in k..=last {
            if data[at(i, k)].abs() > data[at(p, k)].abs() {
                p = i;
            }
        }
        pivots[k] = p;
        let d = data[at(p, k)];
        // Only exact breakdown is fatal: near-null directions from ratio^m ill-conditioning
        // carry functions of negligible norm and are harmless after pivoting.
        if d == 0.0 || !d.is_finite() || scale == 0.0 {
            return Err(Error::Singular(k));
        }
        let jend = (k + l + u).min(n - 1);
        if p != k {
            for j in k..=jend {
                data.swap(at(k, j), at(p, j));
            }
        }
        for i in k + 1..=last {
            let m = data[at(i, k)] / d;
            data[at(i, k)] = m;
            if m != 0.0 {
                for j in k + 1..=jend {
                    data[at(i, j)] -= m * data[at(k, j)];
                }
            }
        }
    }
    Ok(SparseLu { n, l, u, width, data, pivots, perm, scaling })
}

impl SparseLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Bandwidths `(l, u)` after reordering.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.l, self.u)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Dimension { expected: n, found: b.len() });
        }
        let (l, u, w) = (self.l, self.u, self.width);
        let at = |i: usize, j: usize| i * w + j + l - i;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| self.scaling[old] * b[old]).collect();
        for k in 0..n {
            y.swap(k, self.pivots[k]);
            let yk = y[k];
            for i in k + 1..=(k + l).min(n - 1) {
                y[i] -= self.data[at(i, k)] * yk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = y[k];
            for j in k + 1..=(k + l + u).min(n - 1) {
                acc -= self.data[at(k, j)] * y[j];
            }
            y[k] = acc / self.data[at(k, k)];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = self.scaling[old] * y[new];
        }
        Ok(x)
    }
}
