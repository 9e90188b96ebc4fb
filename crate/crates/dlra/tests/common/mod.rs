//! Shared helpers for the oracle tests: conversions between this crate's
//! row-major matrices and nalgebra's, plus seeded random inputs.

#![allow(dead_code)]

use dlra::{Complex64, DenseMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn to_na_f64(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn to_na_c64(m: &DenseMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_na_f64(m: &DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn from_na_c64(m: &DMatrix<Complex64>) -> DenseMatrix<Complex64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_real(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

pub fn rand_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<Complex64> {
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| Complex64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0))
        .collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// Singular values via nalgebra, sorted descending.
pub fn na_singular_values_f64(m: &DenseMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = to_na_f64(m).singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

pub fn na_singular_values_c64(m: &DenseMatrix<Complex64>) -> Vec<f64> {
    let mut sv: Vec<f64> = to_na_c64(m).singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Best rank-r approximation computed entirely inside nalgebra.
pub fn na_truncate_f64(m: &DenseMatrix<f64>, r: usize) -> DenseMatrix<f64> {
    let svd = to_na_f64(m).svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let k = svd.singular_values.len();
    let mut out = DMatrix::<f64>::zeros(m.rows(), m.cols());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap()
    });
    for &j in order.iter().take(r.min(k)) {
        let uj = u.column(j);
        let vj = vt.row(j);
        let s = svd.singular_values[j];
        for c in 0..m.cols() {
            for rr in 0..m.rows() {
                out[(rr, c)] += s * uj[rr] * vj[c];
            }
        }
    }
    from_na_f64(&out)
}

pub fn na_truncate_c64(m: &DenseMatrix<Complex64>, r: usize) -> DenseMatrix<Complex64> {
    let svd = to_na_c64(m).svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let k = svd.singular_values.len();
    let mut out = DMatrix::<Complex64>::zeros(m.rows(), m.cols());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap()
    });
    for &j in order.iter().take(r.min(k)) {
        let uj = u.column(j);
        let vj = vt.row(j);
        let s = svd.singular_values[j];
        for c in 0..m.cols() {
            for rr in 0..m.rows() {
                out[(rr, c)] += Complex64::new(s, 0.0) * uj[rr] * vj[c];
            }
        }
    }
    from_na_c64(&out)
}
