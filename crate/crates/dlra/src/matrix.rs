//! Dense matrices over a generic scalar, plus the two factorization kernels
//! the low-rank integrators are built on: a rank-revealing orthonormalization
//! (column-pivoted Householder QR) and a singular value decomposition
//! (one-sided Jacobi, chosen for accuracy at small singular values and for
//! bitwise determinism).

use num_traits::{Float, One, Zero};
use crate::error::{Error, Result};
use crate::scalar::{RealScalar, Scalar};
use std::ops::{Index, IndexMut};

/// Default relative drop tolerance for [`ortho`]: a pivot column whose
/// remaining norm is at most `1e-12` times the leading pivot is discarded.
pub const ORTHO_DROP_TOL: f64 = 1e-12;

/// Dense matrix with row-major storage (`data[i * cols + j]`).
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "DenseMatrix::new",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// `self += alpha * other`
    pub fn add_assign_scaled(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign_scaled")?;
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        let mut out = self.clone();
        for (x, &y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        let mut out = self.clone();
        for (x, &y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        Ok(out)
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "hadamard")?;
        let mut out = self.clone();
        for (x, &y) in out.data.iter_mut().zip(&other.data) {
            *x *= y;
        }
        Ok(out)
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch {
                context: "matmul",
                expected: (self.cols, self.cols),
                got: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            let arow = &self.data[i * self.cols..(i + 1) * self.cols];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (l, &a_il) in arow.iter().enumerate() {
                let brow = &rhs.data[l * n..(l + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a_il * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^H * rhs`
    pub fn conj_t_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::ShapeMismatch {
                context: "conj_t_matmul",
                expected: (self.rows, self.rows),
                got: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.cols, rhs.cols);
        let n = rhs.cols;
        for l in 0..self.rows {
            let arow = &self.data[l * self.cols..(l + 1) * self.cols];
            let brow = &rhs.data[l * n..(l + 1) * n];
            for (i, &a_li) in arow.iter().enumerate() {
                let c = a_li.conj();
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += c * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * rhs^H`
    pub fn matmul_conj_t(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::ShapeMismatch {
                context: "matmul_conj_t",
                expected: (self.cols, self.cols),
                got: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let arow = &self.data[i * self.cols..(i + 1) * self.cols];
            let orow = &mut out.data[i * rhs.rows..(i + 1) * rhs.rows];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &rhs.data[j * rhs.cols..(j + 1) * rhs.cols];
                let mut acc = T::zero();
                for (&a, &b) in arow.iter().zip(brow) {
                    acc += a * b.conj();
                }
                *o = acc;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T::Real {
        let mut acc = T::Real::zero();
        for &x in &self.data {
            acc += x.abs_sq();
        }
        acc.sqrt()
    }

    /// Frobenius inner product `<self, other> = sum conj(self_ij) * other_ij`.
    pub fn frobenius_inner(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other, "frobenius_inner")?;
        let mut acc = T::zero();
        for (&x, &y) in self.data.iter().zip(&other.data) {
            acc += x.conj() * y;
        }
        Ok(acc)
    }

    pub fn max_abs(&self) -> T::Real {
        let mut m = T::Real::zero();
        for &x in &self.data {
            let a = x.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Horizontal concatenation `[a | b | ...]`.
    pub fn hcat(blocks: &[&Self]) -> Result<Self> {
        let first = blocks.first().ok_or(Error::EmptyMatrix)?;
        let rows = first.rows;
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::ShapeMismatch {
                context: "hcat",
                expected: (rows, 0),
                got: (0, 0),
            });
        }
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            let orow = &mut out.data[i * cols..(i + 1) * cols];
            let mut off = 0;
            for b in blocks {
                orow[off..off + b.cols].copy_from_slice(b.row(i));
                off += b.cols;
            }
        }
        Ok(out)
    }

    /// Copy of columns `lo..hi`.
    pub fn columns(&self, lo: usize, hi: usize) -> Self {
        Self::from_fn(self.rows, hi - lo, |i, j| self[(i, lo + j)])
    }

    fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                context,
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }

    /// Disjoint mutable views of rows `p` and `q` (requires `p < q`).
    fn rows_pair_mut(&mut self, p: usize, q: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(p < q && q < self.rows);
        let w = self.cols;
        let (head, tail) = self.data.split_at_mut(q * w);
        (&mut head[p * w..(p + 1) * w], &mut tail[..w])
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{} ", self[(i, j)])?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

/// Thin singular value decomposition `M = left * diag(sigma) * right^H`,
/// singular values sorted in descending order.
#[derive(Clone, Debug)]
pub struct SvdResult<T: Scalar> {
    pub left: DenseMatrix<T>,
    pub singular_values: Vec<T::Real>,
    pub right: DenseMatrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let k = self.singular_values.len();
        let mut scaled = self.left.clone();
        for i in 0..scaled.rows() {
            for j in 0..k {
                let s = T::from_real(self.singular_values[j]);
                scaled[(i, j)] = scaled[(i, j)] * s;
            }
        }
        scaled.matmul_conj_t(&self.right).expect("factor shapes agree")
    }
}

/// Orthonormal basis for the numerical range of `m`, via column-pivoted
/// Householder QR. Pivot columns whose remaining norm is at most
/// `drop_tol` times the leading pivot norm are dropped; if every column is
/// dropped (zero input) the first canonical basis vector is returned.
pub fn ortho<T: Scalar>(m: &DenseMatrix<T>, drop_tol: T::Real) -> Result<DenseMatrix<T>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !m.all_finite() {
        return Err(Error::NonFiniteInput);
    }
    let rows = m.rows();
    let cols = m.cols();
    let kmax = rows.min(cols);
    // Work on the transpose so every column operation below runs over a
    // contiguous row slice; the arithmetic is unchanged.
    let mut at = DenseMatrix::from_fn(cols, rows, |j, i| m[(i, j)]);
    let mut reflectors: Vec<(Vec<T>, T::Real)> = Vec::with_capacity(kmax);
    let mut leading = T::Real::zero();

    for k in 0..kmax {
        // Fresh residual norms of the trailing columns keep the pivot order
        // deterministic and immune to downdating drift.
        let mut piv = k;
        let mut piv_norm_sq = T::Real::zero();
        for j in k..cols {
            let mut nrm = T::Real::zero();
            for &x in &at.row(j)[k..] {
                nrm += x.abs_sq();
            }
            if nrm > piv_norm_sq {
                piv_norm_sq = nrm;
                piv = j;
            }
        }
        let piv_norm = piv_norm_sq.sqrt();
        if k == 0 {
            leading = piv_norm;
        }
        if piv_norm <= drop_tol * leading || piv_norm == T::Real::zero() {
            break;
        }
        if piv != k {
            let (rk, rp) = at.rows_pair_mut(k, piv);
            rk.swap_with_slice(rp);
        }
        // Householder reflector sending the pivot column to beta * e_k.
        let alpha = at[(k, k)];
        let sign = if alpha == T::zero() {
            T::one()
        } else {
            alpha / T::from_real(alpha.abs())
        };
        let beta = -(sign * T::from_real(piv_norm));
        let mut v: Vec<T> = at.row(k)[k..].to_vec();
        v[0] -= beta;
        let vnorm_sq: T::Real = v.iter().map(|x| x.abs_sq()).sum();
        let tau = if vnorm_sq > T::Real::zero() {
            T::Real::from_f64_lossy(2.0) / vnorm_sq
        } else {
            T::Real::zero()
        };
        for j in k + 1..cols {
            let tail = &mut at.row_mut(j)[k..];
            let mut w = T::zero();
            for (vi, &x) in v.iter().zip(tail.iter()) {
                w += vi.conj() * x;
            }
            w = w * T::from_real(tau);
            for (vi, x) in v.iter().zip(tail.iter_mut()) {
                let delta = *vi * w;
                *x -= delta;
            }
        }
        at[(k, k)] = beta;
        for x in &mut at.row_mut(k)[k + 1..] {
            *x = T::zero();
        }
        reflectors.push((v, tau));
    }

    let rank = reflectors.len();
    if rank == 0 {
        let mut e = DenseMatrix::zeros(rows, 1);
        e[(0, 0)] = T::one();
        return Ok(e);
    }
    // Accumulate Q (transposed, rows contiguous) by applying the reflectors
    // to the leading identity block in reverse order.
    let mut qt = DenseMatrix::<T>::zeros(rank, rows);
    for j in 0..rank {
        qt[(j, j)] = T::one();
    }
    for k in (0..rank).rev() {
        let (v, tau) = &reflectors[k];
        for j in 0..rank {
            let tail = &mut qt.row_mut(j)[k..k + v.len()];
            let mut w = T::zero();
            for (vi, &x) in v.iter().zip(tail.iter()) {
                w += vi.conj() * x;
            }
            w = w * T::from_real(*tau);
            for (vi, x) in v.iter().zip(tail.iter_mut()) {
                let delta = *vi * w;
                *x -= delta;
            }
        }
    }
    Ok(DenseMatrix::from_fn(rows, rank, |i, j| qt[(j, i)]))
}

/// Thin SVD by one-sided Jacobi rotations. Deterministic (fixed cyclic
/// sweep order) and accurate for small singular values; zero singular
/// directions get an orthonormal completion so the factors always have
/// exactly `min(rows, cols)` orthonormal columns.
pub fn svd<T: Scalar>(m: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !m.all_finite() {
        return Err(Error::NonFiniteInput);
    }
    if m.rows() < m.cols() {
        let t = svd(&m.conj_transpose())?;
        return Ok(SvdResult {
            left: t.right,
            singular_values: t.singular_values,
            right: t.left,
        });
    }

    let rows = m.rows();
    let cols = m.cols();
    // Rotations act on column pairs; keep both factors transposed so each
    // pair lives in two contiguous row slices. Same arithmetic, better layout.
    let mut at = DenseMatrix::from_fn(cols, rows, |j, i| m[(i, j)]);
    let mut vt = DenseMatrix::<T>::identity(cols);
    let eps = T::Real::epsilon();
    let tol = eps * T::Real::from_usize_lossy(rows.max(cols));
    let two = T::Real::from_f64_lossy(2.0);
    let max_sweeps = 64;

    for _sweep in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in p + 1..cols {
                let (ap_row, aq_row) = at.rows_pair_mut(p, q);
                let mut alpha = T::Real::zero();
                let mut beta = T::Real::zero();
                let mut gamma = T::zero();
                for (&ap, &aq) in ap_row.iter().zip(aq_row.iter()) {
                    alpha += ap.abs_sq();
                    beta += aq.abs_sq();
                    gamma += ap.conj() * aq;
                }
                let g = gamma.abs();
                if alpha == T::Real::zero()
                    || beta == T::Real::zero()
                    || g <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                // Absorb the phase of gamma into column q, then apply the
                // real 2x2 rotation that annihilates the Gram off-diagonal.
                let u = gamma.conj() / T::from_real(g);
                let tau = (beta - alpha) / (two * g);
                let t = {
                    let denom = tau.abs() + (T::Real::one() + tau * tau).sqrt();
                    let mag = T::Real::one() / denom;
                    if tau < T::Real::zero() {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = T::Real::one() / (T::Real::one() + t * t).sqrt();
                let s = c * t;
                let (cs, ss) = (T::from_real(c), T::from_real(s));
                for (x, y) in ap_row.iter_mut().zip(aq_row.iter_mut()) {
                    let ap = *x;
                    let aq = u * *y;
                    *x = cs * ap - ss * aq;
                    *y = ss * ap + cs * aq;
                }
                let (vp_row, vq_row) = vt.rows_pair_mut(p, q);
                for (x, y) in vp_row.iter_mut().zip(vq_row.iter_mut()) {
                    let vp = *x;
                    let vq = u * *y;
                    *x = cs * vp - ss * vq;
                    *y = ss * vp + cs * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending (stable on ties).
    let mut order: Vec<(T::Real, usize)> = (0..cols)
        .map(|j| {
            let mut nrm = T::Real::zero();
            for &x in at.row(j) {
                nrm += x.abs_sq();
            }
            (nrm.sqrt(), j)
        })
        .collect();
    order.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.1.cmp(&y.1))
    });

    let sigma_max = order.first().map(|&(s, _)| s).unwrap_or(T::Real::zero());
    let tiny = sigma_max * eps * T::Real::from_usize_lossy(rows.max(cols));
    let mut left = DenseMatrix::<T>::zeros(rows, cols);
    let mut right = DenseMatrix::<T>::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    let mut completions: Vec<usize> = Vec::new();

    for (slot, &(s, j)) in order.iter().enumerate() {
        singular_values.push(s);
        for i in 0..cols {
            right[(i, slot)] = vt[(j, i)];
        }
        if s > tiny && s > T::Real::zero() {
            let inv = T::from_real(T::Real::one() / s);
            for i in 0..rows {
                left[(i, slot)] = at[(j, i)] * inv;
            }
        } else {
            completions.push(slot);
        }
    }

    // Orthonormal completion for (numerically) zero singular directions:
    // pick the canonical basis vector with the largest residual against the
    // columns built so far, then orthogonalize twice for safety.
    for &slot in &completions {
        let mut best_k = 0;
        let mut best_res = -T::Real::one();
        for k in 0..rows {
            let mut overlap = T::Real::zero();
            for j in 0..cols {
                if j == slot || (completions.contains(&j) && j > slot) {
                    continue;
                }
                overlap += left[(k, j)].abs_sq();
            }
            let res = T::Real::one() - overlap;
            if res > best_res {
                best_res = res;
                best_k = k;
            }
        }
        let mut col = vec![T::zero(); rows];
        col[best_k] = T::one();
        for _pass in 0..2 {
            for j in 0..cols {
                if j == slot || (completions.contains(&j) && j > slot) {
                    continue;
                }
                let mut proj = T::zero();
                for i in 0..rows {
                    proj += left[(i, j)].conj() * col[i];
                }
                for i in 0..rows {
                    let delta = left[(i, j)] * proj;
                    col[i] -= delta;
                }
            }
            let nrm: T::Real = col.iter().map(|x| x.abs_sq()).sum::<T::Real>().sqrt();
            if nrm > T::Real::zero() {
                let inv = T::from_real(T::Real::one() / nrm);
                for x in col.iter_mut() {
                    *x = *x * inv;
                }
            }
        }
        for i in 0..rows {
            left[(i, slot)] = col[i];
        }
    }

    Ok(SvdResult { left, singular_values, right })
}

/// Frobenius norm as a free function, mirroring the kernel vocabulary.
pub fn frobenius_norm<T: Scalar>(m: &DenseMatrix<T>) -> T::Real {
    m.frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn frobenius_hand_value() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        approx(m.frobenius_norm(), 5.0, 1e-15);
    }

    #[test]
    fn matmul_shapes_and_values() {
        let a = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DenseMatrix::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (2, 2));
        approx(c[(0, 0)], 58.0, 0.0);
        approx(c[(1, 1)], 154.0, 0.0);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn conj_transpose_products_agree_with_explicit() {
        let a = DenseMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 0.5));
        let b = DenseMatrix::from_fn(3, 4, |i, j| Complex64::new(j as f64, i as f64 * 0.3));
        let fast = a.conj_t_matmul(&b).unwrap();
        let slow = a.conj_transpose().matmul(&b).unwrap();
        assert!(fast.sub(&slow).unwrap().frobenius_norm() < 1e-14);

        let c = DenseMatrix::from_fn(2, 3, |i, j| Complex64::new(i as f64, j as f64 + 0.25));
        let d = DenseMatrix::from_fn(4, 3, |i, j| Complex64::new(j as f64 - 1.0, i as f64));
        let fast = c.matmul_conj_t(&d).unwrap();
        let slow = c.matmul(&d.conj_transpose()).unwrap();
        assert!(fast.sub(&slow).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn ortho_identity_passes_through() {
        let q = ortho(&DenseMatrix::<f64>::identity(3), 1e-12).unwrap();
        assert_eq!(q.shape(), (3, 3));
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                approx(q[(i, j)].abs(), expect, 1e-14);
            }
        }
    }

    #[test]
    fn ortho_drops_duplicate_column() {
        let m = DenseMatrix::new(3, 2, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let q = ortho(&m, 1e-12).unwrap();
        assert_eq!(q.shape(), (3, 1));
        approx(q[(0, 0)].abs(), 1.0, 1e-14);
    }

    #[test]
    fn ortho_zero_matrix_returns_canonical_vector() {
        let q = ortho(&DenseMatrix::<f64>::zeros(4, 3), 1e-12).unwrap();
        assert_eq!(q.shape(), (4, 1));
        assert_eq!(q[(0, 0)], 1.0);
    }

    #[test]
    fn ortho_rejects_empty_and_non_finite() {
        assert!(matches!(
            ortho(&DenseMatrix::<f64> { rows: 0, cols: 1, data: vec![] }, 1e-12),
            Err(Error::EmptyMatrix)
        ));
        let mut m = DenseMatrix::<f64>::identity(2);
        m[(0, 0)] = f64::NAN;
        assert!(matches!(ortho(&m, 1e-12), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn svd_diagonal_and_zero() {
        let m = DenseMatrix::new(3, 3, vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let r = svd(&m).unwrap();
        approx(r.singular_values[0], 3.0, 1e-14);
        approx(r.singular_values[1], 2.0, 1e-14);
        approx(r.singular_values[2], 1.0, 1e-14);

        let z = svd(&DenseMatrix::<f64>::zeros(4, 4)).unwrap();
        assert_eq!(z.singular_values, vec![0.0; 4]);
        // factors stay orthonormal even for the zero matrix
        let g = z.left.conj_t_matmul(&z.left).unwrap();
        assert!(g.sub(&DenseMatrix::identity(4)).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = DenseMatrix::<f64>::identity(2);
        m[(1, 1)] = f64::INFINITY;
        assert!(matches!(svd(&m), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn svd_wide_matrix_reconstructs() {
        let m = DenseMatrix::from_fn(3, 5, |i, j| ((i * 5 + j) as f64 * 0.37).sin());
        let r = svd(&m).unwrap();
        assert_eq!(r.left.shape(), (3, 3));
        assert_eq!(r.right.shape(), (5, 3));
        let err = r.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(err < 1e-12 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn hcat_stacks_columns() {
        let a = DenseMatrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        let b = DenseMatrix::new(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = DenseMatrix::hcat(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), (2, 3));
        assert_eq!(c[(1, 2)], 6.0);
    }
}
