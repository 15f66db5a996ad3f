//! Small dense linear algebra: column-major matrices and a pivoted
//! Householder QR.
//!
//! Every least-squares, Gram and minimum-norm solve in the crate goes through
//! the QR factorization rather than normal equations; the Gram matrices of
//! nearly collocated kernel columns have condition numbers growing like
//! h^-6, while the column matrices themselves only grow like h^-3.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, &x| if libm::fabs(x) > m { libm::fabs(x) } else { m })
}

/// Index of the entry with largest absolute value (smallest index wins ties).
pub fn argmax_abs(a: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &x) in a.iter().enumerate() {
        let v = libm::fabs(x);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        assert!(!columns.is_empty());
        let rows = columns[0].len();
        let mut m = Mat::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows);
            m.col_mut(j).copy_from_slice(c);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn push_col(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.rows);
        self.data.extend_from_slice(c);
        self.cols += 1;
    }

    /// `A x`, length `rows`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for j in 0..self.cols {
            axpy(x[j], self.col(j), &mut y);
        }
        y
    }

    /// `A^T y`, length `cols`.
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        (0..self.cols).map(|j| dot(self.col(j), y)).collect()
    }

    /// Submatrix made of the listed columns, in order.
    pub fn gather(&self, idx: &[usize]) -> Mat {
        let mut m = Mat::zeros(self.rows, idx.len());
        for (k, &j) in idx.iter().enumerate() {
            m.col_mut(k).copy_from_slice(self.col(j));
        }
        m
    }

    /// Largest eigenvalue of `A^T A` by power iteration.
    pub fn gram_spectral_norm(&self, iters: usize) -> f64 {
        if self.cols == 0 {
            return 0.0;
        }
        // deterministic start: alternating signs avoids orthogonality traps
        let mut z: Vec<f64> = (0..self.cols)
            .map(|j| if j % 2 == 0 { 1.0 } else { -0.5 } + 1e-3 * (j as f64))
            .collect();
        let mut lam = 0.0;
        for _ in 0..iters {
            let w = self.tr_matvec(&self.matvec(&z));
            lam = norm2(&w);
            if lam == 0.0 {
                return 0.0;
            }
            for (zi, wi) in z.iter_mut().zip(&w) {
                *zi = wi / lam;
            }
        }
        lam
    }
}

/// Column-pivoted Householder QR of an `m x n` matrix with `m >= n` intended
/// full column rank: `A P = Q R`.
pub struct Qr {
    rows: usize,
    cols: usize,
    /// Reflectors below the diagonal (v, with v[k]=1 implicit), R on and above.
    fac: Mat,
    tau: Vec<f64>,
    /// perm[k] = original column index factored at position k.
    perm: Vec<usize>,
}

impl Qr {
    pub fn new(a: &Mat) -> Qr {
        let rows = a.rows();
        let cols = a.cols();
        assert!(rows >= cols, "QR expects at least as many rows as columns");
        let mut fac = a.clone();
        let mut tau = vec![0.0; cols];
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut col_sq: Vec<f64> = (0..cols).map(|j| dot(fac.col(j), fac.col(j))).collect();

        for k in 0..cols {
            // pivot: remaining column with largest residual norm
            let mut p = k;
            for j in k + 1..cols {
                if col_sq[j] > col_sq[p] {
                    p = j;
                }
            }
            if p != k {
                for i in 0..rows {
                    let t = fac.get(i, k);
                    fac.set(i, k, fac.get(i, p));
                    fac.set(i, p, t);
                }
                col_sq.swap(k, p);
                perm.swap(k, p);
            }

            // Householder vector for column k, rows k..
            let alpha = {
                let c = fac.col(k);
                let mut s = 0.0;
                for i in k..rows {
                    s += c[i] * c[i];
                }
                libm::sqrt(s)
            };
            if alpha == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let akk = fac.get(k, k);
            let beta = if akk >= 0.0 { -alpha } else { alpha };
            // v = x - beta e_k, normalized so v[k] = 1
            let v0 = akk - beta;
            tau[k] = -v0 / beta;
            for i in k + 1..rows {
                let t = fac.get(i, k) / v0;
                fac.set(i, k, t);
            }
            fac.set(k, k, beta);

            // apply reflector to trailing columns
            for j in k + 1..cols {
                let mut w = fac.get(k, j);
                for i in k + 1..rows {
                    w += fac.get(i, k) * fac.get(i, j);
                }
                w *= tau[k];
                let t = fac.get(k, j) - w;
                fac.set(k, j, t);
                for i in k + 1..rows {
                    let t = fac.get(i, j) - w * fac.get(i, k);
                    fac.set(i, j, t);
                }
                col_sq[j] -= t_sq(fac.get(k, j));
                if col_sq[j] < 0.0 {
                    col_sq[j] = 0.0;
                }
            }
        }
        Qr { rows, cols, fac, tau, perm }
    }

    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.cols).map(|k| self.fac.get(k, k)).collect()
    }

    /// Numerical rank relative to the largest diagonal of R.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let d = self.r_diag();
        if d.is_empty() {
            return 0;
        }
        let d0 = libm::fabs(d[0]);
        if d0 == 0.0 {
            return 0;
        }
        d.iter().take_while(|&&x| libm::fabs(x) > rel_tol * d0).count()
    }

    pub fn require_full_rank(&self, rel_tol: f64, context: &str) -> Result<()> {
        if self.rank(rel_tol) < self.cols {
            let mut s = String::new();
            s.push_str(context);
            Err(Error::RankDeficient(s))
        } else {
            Ok(())
        }
    }

    /// `Q^T y` (full length `rows`).
    fn apply_qt(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        for k in 0..self.cols {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut w = z[k];
            for i in k + 1..self.rows {
                w += self.fac.get(i, k) * z[i];
            }
            w *= self.tau[k];
            z[k] -= w;
            for i in k + 1..self.rows {
                z[i] -= w * self.fac.get(i, k);
            }
        }
        z
    }

    /// `Q v` for a full-length vector.
    fn apply_q_full(&self, v: &[f64]) -> Vec<f64> {
        let mut z = v.to_vec();
        for k in (0..self.cols).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut w = z[k];
            for i in k + 1..self.rows {
                w += self.fac.get(i, k) * z[i];
            }
            w *= self.tau[k];
            z[k] -= w;
            for i in k + 1..self.rows {
                z[i] -= w * self.fac.get(i, k);
            }
        }
        z
    }

    /// `Q c` where `c` has length `cols` (padded with zeros to `rows`).
    fn apply_q(&self, c: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.rows];
        z[..self.cols].copy_from_slice(c);
        for k in (0..self.cols).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut w = z[k];
            for i in k + 1..self.rows {
                w += self.fac.get(i, k) * z[i];
            }
            w *= self.tau[k];
            z[k] -= w;
            for i in k + 1..self.rows {
                z[i] -= w * self.fac.get(i, k);
            }
        }
        z
    }

    /// Back-substitution `R x = b` on the leading `cols` block.
    fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols;
        let mut x = b.to_vec();
        for k in (0..n).rev() {
            for j in k + 1..n {
                x[k] -= self.fac.get(k, j) * x[j];
            }
            x[k] /= self.fac.get(k, k);
        }
        x
    }

    /// Forward substitution `R^T x = b`.
    fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols;
        let mut x = b.to_vec();
        for k in 0..n {
            for j in 0..k {
                x[k] -= self.fac.get(j, k) * x[j];
            }
            x[k] /= self.fac.get(k, k);
        }
        x
    }

    fn unpermute(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (k, &j) in self.perm.iter().enumerate() {
            out[j] = x[k];
        }
        out
    }

    fn permute(&self, s: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&j| s[j]).collect()
    }

    /// Least-squares solution `argmin_x ||A x - y||`.
    pub fn solve_ls(&self, y: &[f64]) -> Vec<f64> {
        let z = self.apply_qt(y);
        let x = self.solve_r(&z[..self.cols]);
        self.unpermute(&x)
    }

    /// `(A^T A)^{-1} s` via two triangular solves.
    pub fn solve_gram(&self, s: &[f64]) -> Vec<f64> {
        let t = self.permute(s);
        let w = self.solve_rt(&t);
        let x = self.solve_r(&w);
        self.unpermute(&x)
    }

    /// Minimum-norm solution of the underdetermined system `A^T q = v`,
    /// i.e. `q = A (A^T A)^{-1} v`.
    pub fn min_norm_transpose_solve(&self, v: &[f64]) -> Vec<f64> {
        let t = self.permute(v);
        let w = self.solve_rt(&t);
        self.apply_q(&w)
    }

    /// One stable pass of the augmented system `r + A x = b`, `A^T r = c`
    /// through the orthogonal factor: never touches the Gram matrix.
    fn augmented_pass(&self, b: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.cols;
        let z = self.apply_qt(b);
        let w = self.solve_rt(&self.permute(c));
        let mut zw = vec![0.0; k];
        for i in 0..k {
            zw[i] = z[i] - w[i];
        }
        let x = self.unpermute(&self.solve_r(&zw));
        let mut rz = z;
        rz[..k].copy_from_slice(&w);
        let r = self.apply_q_full(&rz);
        (r, x)
    }

    /// Solve the augmented system `r + A x = b`, `A^T r = c` with iterative
    /// refinement. Component accuracy of `x` is then governed by κ(A) rather
    /// than κ(A)², which matters on nearly collocated kernel columns.
    /// `a` must be the matrix this QR was built from.
    pub fn solve_augmented(
        &self,
        a: &Mat,
        b: &[f64],
        c: &[f64],
        passes: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let (mut r, mut x) = self.augmented_pass(b, c);
        for _ in 0..passes {
            let mut f = b.to_vec(); // f = b − r − A x
            axpy(-1.0, &r, &mut f);
            axpy(-1.0, &a.matvec(&x), &mut f);
            let mut g = a.tr_matvec(&r); // g = c − A^T r
            for (gi, ci) in g.iter_mut().zip(c) {
                *gi = ci - *gi;
            }
            let (dr, dx) = self.augmented_pass(&f, &g);
            axpy(1.0, &dx, &mut x);
            axpy(1.0, &dr, &mut r);
        }
        (r, x)
    }
}

#[inline]
fn t_sq(x: f64) -> f64 {
    x * x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_mat() -> Mat {
        // 4x3, well conditioned
        Mat::from_columns(&[
            vec![1.0, 2.0, 0.0, -1.0],
            vec![0.5, -1.0, 3.0, 2.0],
            vec![2.0, 0.0, 1.0, 1.0],
        ])
    }

    #[test]
    fn matvec_roundtrip() {
        let a = simple_mat();
        let x = [1.0, -2.0, 0.5];
        let y = a.matvec(&x);
        assert_eq!(y.len(), 4);
        let z = a.tr_matvec(&y);
        // z = A^T A x, check against manual Gram
        let mut expect = [0.0; 3];
        for j in 0..3 {
            for k in 0..3 {
                expect[j] += dot(a.col(j), a.col(k)) * x[k];
            }
        }
        for j in 0..3 {
            assert!((z[j] - expect[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn qr_least_squares_matches_normal_equations() {
        let a = simple_mat();
        let y = [1.0, 0.0, -2.0, 3.0];
        let qr = Qr::new(&a);
        assert_eq!(qr.rank(1e-12), 3);
        let x = qr.solve_ls(&y);
        // residual orthogonal to columns
        let mut r = y.to_vec();
        axpy(-1.0, &a.matvec(&x), &mut r);
        for j in 0..3 {
            assert!(dot(a.col(j), &r).abs() < 1e-10, "residual not orthogonal");
        }
    }

    #[test]
    fn qr_gram_solve() {
        let a = simple_mat();
        let qr = Qr::new(&a);
        let s = [1.0, -1.0, 0.5];
        let v = qr.solve_gram(&s);
        // check A^T A v = s
        let got = a.tr_matvec(&a.matvec(&v));
        for j in 0..3 {
            assert!((got[j] - s[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn qr_min_norm_transpose() {
        let a = simple_mat();
        let qr = Qr::new(&a);
        let v = [2.0, 1.0, -1.0];
        let q = qr.min_norm_transpose_solve(&v);
        let got = a.tr_matvec(&q);
        for j in 0..3 {
            assert!((got[j] - v[j]).abs() < 1e-10);
        }
        // minimality: q must lie in the span of the columns: projecting onto
        // the orthogonal complement of span(A) must vanish.
        let ls = qr.solve_ls(&q);
        let mut r = q.clone();
        axpy(-1.0, &a.matvec(&ls), &mut r);
        assert!(norm2(&r) < 1e-10);
    }

    #[test]
    fn rank_detects_deficiency() {
        let a = Mat::from_columns(&[
            vec![1.0, 1.0, 1.0],
            vec![2.0, 2.0, 2.0],
            vec![0.0, 1.0, -1.0],
        ]);
        let qr = Qr::new(&a);
        assert_eq!(qr.rank(1e-10), 2);
        assert!(qr.require_full_rank(1e-10, "test").is_err());
    }

    #[test]
    fn spectral_norm_power_iteration() {
        let a = Mat::from_columns(&[vec![3.0, 0.0], vec![0.0, 2.0]]);
        let lam = a.gram_spectral_norm(100);
        assert!((lam - 9.0).abs() < 1e-8);
    }
}
