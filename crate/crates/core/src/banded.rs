//! Square banded matrices with dense band storage.

use nalgebra::DMatrix;

/// Square matrix with `l` subdiagonals and `u` superdiagonals stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    l: usize,
    u: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, l: usize, u: usize) -> Self {
        BandMatrix { n, l, u, data: vec![0.0; n * (l + u + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n, 0, 0);
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        a
    }

    /// Symmetric tridiagonal matrix from its diagonal and off-diagonal.
    pub fn from_tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut a = Self::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, diag[i]);
            if i + 1 < n {
                a.set(i, i + 1, off[i]);
                a.set(i + 1, i, off[i]);
            }
        }
        a
    }

    /// Copies the band of `d` (entries outside it are ignored).
    pub fn from_dense(d: &DMatrix<f64>, l: usize, u: usize) -> Self {
        assert_eq!(d.nrows(), d.ncols());
        let n = d.nrows();
        let mut a = Self::zeros(n, l, u);
        for i in 0..n {
            for j in i.saturating_sub(l)..(i + u + 1).min(n) {
                a.set(i, j, d[(i, j)]);
            }
        }
        a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.l
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.u
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.l >= i && j <= i + self.u
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * (self.l + self.u + 1) + j + self.l - i]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band ({},{})", self.l, self.u);
        let w = self.l + self.u + 1;
        self.data[i * w + j + self.l - i] = v;
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Leading `k`×`k` block.
    pub fn leading(&self, k: usize) -> Self {
        let mut a = Self::zeros(k, self.l, self.u);
        for i in 0..k {
            for j in i.saturating_sub(self.l)..(i + self.u + 1).min(k) {
                a.set(i, j, self.get(i, j));
            }
        }
        a
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (i.saturating_sub(self.l)..(i + self.u + 1).min(self.n))
                    .map(|j| self.get(i, j) * x[j])
                    .sum()
            })
            .collect()
    }

    /// `alpha*self + beta*other`, widening the band as needed.
    pub fn axpby(&self, alpha: f64, other: &BandMatrix, beta: f64) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let l = self.l.max(other.l);
        let u = self.u.max(other.u);
        let mut c = Self::zeros(self.n, l, u);
        for i in 0..self.n {
            for j in i.saturating_sub(l)..(i + u + 1).min(self.n) {
                c.set(i, j, alpha * self.get(i, j) + beta * other.get(i, j));
            }
        }
        c
    }

    pub fn add_identity(&mut self, s: f64) {
        for i in 0..self.n {
            let v = self.get(i, i);
            self.set(i, i, v + s);
        }
    }

    /// Product of two band matrices; the result has bandwidths `(l1+l2, u1+u2)`.
    pub fn matmul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let l = self.l + other.l;
        let u = self.u + other.u;
        let mut c = Self::zeros(n, l, u);
        for i in 0..n {
            for k in i.saturating_sub(self.l)..(i + self.u + 1).min(n) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in k.saturating_sub(other.l)..(k + other.u + 1).min(n) {
                    let idx = i * (l + u + 1) + j + l - i;
                    c.data[idx] += a * other.get(k, j);
                }
            }
        }
        c
    }

    /// Largest `|i-j|` over entries with magnitude above `tol`, as `(lower, upper)`.
    pub fn measured_bandwidths(&self, tol: f64) -> (usize, usize) {
        let (mut lo, mut up) = (0, 0);
        for i in 0..self.n {
            for j in i.saturating_sub(self.l)..(i + self.u + 1).min(self.n) {
                if self.get(i, j).abs() > tol {
                    if i > j {
                        lo = lo.max(i - j);
                    } else {
                        up = up.max(j - i);
                    }
                }
            }
        }
        (lo, up)
    }
}

/// Largest `(lower, upper)` distance from the diagonal among entries above `tol` in a dense matrix.
pub fn dense_bandwidths(a: &DMatrix<f64>, tol: f64) -> (usize, usize) {
    let (mut lo, mut up) = (0, 0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if a[(i, j)].abs() > tol {
                if i > j {
                    lo = lo.max(i - j);
                } else {
                    up = up.max(j - i);
                }
            }
        }
    }
    (lo, up)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_dense() {
        let a = BandMatrix::from_tridiagonal(&[1.0, 2.0, 3.0, 4.0], &[0.5, -1.0, 2.0]);
        let b = a.matmul(&a);
        let d = a.to_dense() * a.to_dense();
        assert!((b.to_dense() - d).amax() < 1e-14);
        assert_eq!(b.measured_bandwidths(0.0), (2, 2));
    }

    #[test]
    fn leading_block_truncates() {
        let a = BandMatrix::from_tridiagonal(&[1.0, 2.0, 3.0], &[4.0, 5.0]);
        let b = a.leading(2);
        assert_eq!(b.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 4.0, 2.0]));
    }
}
