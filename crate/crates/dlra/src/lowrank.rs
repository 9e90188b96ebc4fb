//! Rank-r factored representation `Y = U * S * V^H` with orthonormal outer
//! factors, plus the truncation and tangent-space operations shared by all
//! the integrators.

use num_traits::{Float, Zero};
use crate::error::{Error, Result};
use crate::matrix::{svd, DenseMatrix};
use crate::scalar::Scalar;

/// `Y = U * S * V^H` with `U` (n x r) and `V` (m x r) orthonormal and `S`
/// (r x r) a general square core; `S` may be singular.
#[derive(Clone, Debug)]
pub struct LowRankMatrix<T: Scalar> {
    pub u: DenseMatrix<T>,
    pub s: DenseMatrix<T>,
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> LowRankMatrix<T> {
    pub fn new(u: DenseMatrix<T>, s: DenseMatrix<T>, v: DenseMatrix<T>) -> Result<Self> {
        if s.rows() != s.cols() {
            return Err(Error::ShapeMismatch {
                context: "LowRankMatrix core must be square",
                expected: (s.rows(), s.rows()),
                got: s.shape(),
            });
        }
        if u.cols() != s.rows() || v.cols() != s.cols() {
            return Err(Error::ShapeMismatch {
                context: "LowRankMatrix factor ranks must agree",
                expected: (u.cols(), v.cols()),
                got: s.shape(),
            });
        }
        Ok(Self { u, s, v })
    }

    /// Number of rows of the represented matrix.
    pub fn nrows(&self) -> usize {
        self.u.rows()
    }

    /// Number of columns of the represented matrix.
    pub fn ncols(&self) -> usize {
        self.v.rows()
    }

    /// Rank of the representation (columns of `U`).
    pub fn rank(&self) -> usize {
        self.s.rows()
    }

    /// Materialize the full matrix `U * S * V^H`.
    pub fn densify(&self) -> DenseMatrix<T> {
        let us = self.u.matmul(&self.s).expect("factor shapes agree");
        us.matmul_conj_t(&self.v).expect("factor shapes agree")
    }

    pub fn frobenius_norm(&self) -> T::Real {
        // With orthonormal outer factors the norm lives entirely in the core.
        self.s.frobenius_norm()
    }

    pub fn all_finite(&self) -> bool {
        self.u.all_finite() && self.s.all_finite() && self.v.all_finite()
    }

    /// How far the outer factors are from orthonormal, as
    /// `max(||U^H U - I||_F, ||V^H V - I||_F)`.
    pub fn orthonormality_defect(&self) -> T::Real {
        let defect = |f: &DenseMatrix<T>| -> T::Real {
            let g = f.conj_t_matmul(f).expect("square gram");
            g.sub(&DenseMatrix::identity(f.cols()))
                .expect("same shape")
                .frobenius_norm()
        };
        let du = defect(&self.u);
        let dv = defect(&self.v);
        if du > dv {
            du
        } else {
            dv
        }
    }
}

/// Best rank-`r` approximation of a dense matrix, together with the
/// Frobenius norm of what was cut (the tail of the singular spectrum).
pub fn truncate<T: Scalar>(m: &DenseMatrix<T>, r: usize) -> Result<(LowRankMatrix<T>, T::Real)> {
    if r == 0 {
        return Err(Error::ZeroRank);
    }
    let maxr = m.rows().min(m.cols());
    if r > maxr {
        return Err(Error::RankExceedsDimensions { r, rows: m.rows(), cols: m.cols() });
    }
    let f = svd(m)?;
    let (lr, tail_sq) = keep_leading(&f.left, &f.singular_values, &f.right, r);
    Ok((lr, tail_sq.sqrt()))
}

/// Truncation of a factored matrix `U_hat * S_hat * V_hat^H` back to rank
/// `r` without ever forming the full product: the SVD is taken on the small
/// core only and the outer factors are rotated by its singular vectors.
/// `U_hat`, `V_hat` must have orthonormal columns; the core may be
/// rectangular (its sides matching the factors' column counts).
///
/// Returns the truncated representation and the Frobenius norm of the
/// discarded part.
pub fn truncate_core<T: Scalar>(
    u_hat: &DenseMatrix<T>,
    s_hat: &DenseMatrix<T>,
    v_hat: &DenseMatrix<T>,
    r: usize,
) -> Result<(LowRankMatrix<T>, T::Real)> {
    if r == 0 {
        return Err(Error::ZeroRank);
    }
    if u_hat.cols() != s_hat.rows() || v_hat.cols() != s_hat.cols() {
        return Err(Error::ShapeMismatch {
            context: "truncate_core factor ranks must agree",
            expected: (u_hat.cols(), v_hat.cols()),
            got: s_hat.shape(),
        });
    }
    let f = svd(s_hat)?;
    let keep = r.min(f.singular_values.len());
    let u = u_hat.matmul(&f.left.columns(0, keep))?;
    let v = v_hat.matmul(&f.right.columns(0, keep))?;
    let mut s = DenseMatrix::zeros(keep, keep);
    let mut tail_sq = T::Real::zero();
    for (j, &sv) in f.singular_values.iter().enumerate() {
        if j < keep {
            s[(j, j)] = T::from_real(sv);
        } else {
            tail_sq += sv * sv;
        }
    }
    Ok((LowRankMatrix::new(u, s, v)?, tail_sq.sqrt()))
}

fn keep_leading<T: Scalar>(
    left: &DenseMatrix<T>,
    sigma: &[T::Real],
    right: &DenseMatrix<T>,
    r: usize,
) -> (LowRankMatrix<T>, T::Real) {
    let keep = r.min(sigma.len());
    let u = left.columns(0, keep);
    let v = right.columns(0, keep);
    let mut s = DenseMatrix::zeros(keep, keep);
    let mut tail_sq = T::Real::zero();
    for (j, &sv) in sigma.iter().enumerate() {
        if j < keep {
            s[(j, j)] = T::from_real(sv);
        } else {
            tail_sq += sv * sv;
        }
    }
    (LowRankMatrix { u, s, v }, tail_sq)
}

/// Orthogonal projection of `z` onto the tangent space of the rank-r
/// manifold at `y`:
///
/// `P(y) z = U U^H z - U U^H z V V^H + z V V^H`
pub fn tangent_project<T: Scalar>(
    y: &LowRankMatrix<T>,
    z: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if z.shape() != (y.nrows(), y.ncols()) {
        return Err(Error::ShapeMismatch {
            context: "tangent_project",
            expected: (y.nrows(), y.ncols()),
            got: z.shape(),
        });
    }
    let uhz = y.u.conj_t_matmul(z)?; // r x m
    let zv = z.matmul(&y.v)?; // n x r
    let uhzv = uhz.matmul(&y.v)?; // r x r

    let mut out = y.u.matmul(&uhz)?;
    out.add_assign_scaled(T::one(), &zv.matmul_conj_t(&y.v)?)?;
    let middle = y.u.matmul(&uhzv)?.matmul_conj_t(&y.v)?;
    out.add_assign_scaled(-T::one(), &middle)?;
    Ok(out)
}
