//! Benchmark problems: three matrix ODEs on n×n grids (a reaction-diffusion
//! equation with a cubic term, a forced Lyapunov equation, and a cubic
//! Schrödinger equation), plus a trivial zero-derivative problem for
//! harness smoke tests.
//!
//! All linear parts are pure tridiagonal stencils (no periodic wrap); the
//! right-hand sides apply them as O(n²) stencil sweeps while dense copies of
//! the operators are kept on the `ProblemSpec` for inspection.

use num_traits::One;
use crate::error::{Error, Result};
use crate::integrate::RhsOperator;
use crate::lowrank::{truncate, LowRankMatrix};
use crate::matrix::DenseMatrix;
use crate::scalar::{ComplexScalar, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "allen-cahn")]
    AllenCahn,
    #[serde(rename = "lyapunov")]
    Lyapunov,
    #[serde(rename = "schrodinger")]
    Schrodinger,
    #[serde(rename = "zero")]
    Zero,
}

impl ProblemKind {
    pub fn parse(name: &str) -> Result<ProblemKind> {
        match name {
            "allen-cahn" | "allen_cahn" | "allencahn" => Ok(ProblemKind::AllenCahn),
            "lyapunov" => Ok(ProblemKind::Lyapunov),
            "schrodinger" => Ok(ProblemKind::Schrodinger),
            "zero" => Ok(ProblemKind::Zero),
            _ => Err(Error::InvalidConfig(format!(
                "unknown problem '{name}'; available: allen-cahn, lyapunov, schrodinger, zero"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::AllenCahn => "allen-cahn",
            ProblemKind::Lyapunov => "lyapunov",
            ProblemKind::Schrodinger => "schrodinger",
            ProblemKind::Zero => "zero",
        }
    }

    /// Whether the trajectory is intrinsically complex-valued.
    pub fn is_complex(&self) -> bool {
        matches!(self, ProblemKind::Schrodinger)
    }

    pub fn default_theta(&self) -> f64 {
        match self {
            ProblemKind::AllenCahn => 1e-2,
            ProblemKind::Lyapunov => 1e-5,
            ProblemKind::Schrodinger => 0.1,
            ProblemKind::Zero => 0.0,
        }
    }

    pub fn default_t_final(&self) -> f64 {
        match self {
            ProblemKind::AllenCahn => 10.0,
            ProblemKind::Lyapunov => 1.0,
            ProblemKind::Schrodinger => 5.0,
            ProblemKind::Zero => 1.0,
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully constructed benchmark problem: parameters, initial condition,
/// and the dense image of the tridiagonal operator for inspection. The RHS
/// applies the operator as a stencil and never touches the dense copy.
pub struct ProblemSpec<T: Scalar> {
    pub kind: ProblemKind,
    pub n: usize,
    pub theta: f64,
    pub t_final: f64,
    pub a0: DenseMatrix<T>,
    /// Dense copy of the tridiagonal stencil operator (Laplacian-scaled for
    /// the diffusion problems, the 1,0,1 stencil for the Schrödinger one).
    pub stencil: Option<DenseMatrix<T>>,
    /// Constant forcing term, already normalized (Lyapunov only).
    pub forcing: Option<DenseMatrix<T>>,
}

/// `L · A` for the tridiagonal stencil `L` with constant off-diagonal and
/// diagonal entries; out-of-range neighbors contribute nothing.
pub fn tridiag_left<T: Scalar>(off: T, diag: T, a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (n, m) = a.shape();
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let row = a.row(i);
        let orow = out.row_mut(i);
        for (o, &x) in orow.iter_mut().zip(row) {
            *o = diag * x;
        }
        if i > 0 {
            for (o, &x) in orow.iter_mut().zip(a.row(i - 1)) {
                *o += off * x;
            }
        }
        if i + 1 < n {
            for (o, &x) in orow.iter_mut().zip(a.row(i + 1)) {
                *o += off * x;
            }
        }
    }
    out
}

/// `A · L` for the same stencil applied from the right (acts on columns).
pub fn tridiag_right<T: Scalar>(off: T, diag: T, a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (n, m) = a.shape();
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let row = a.row(i);
        let orow = out.row_mut(i);
        for j in 0..m {
            let mut v = diag * row[j];
            if j > 0 {
                v += off * row[j - 1];
            }
            if j + 1 < m {
                v += off * row[j + 1];
            }
            orow[j] = v;
        }
    }
    out
}

fn tridiag_matrix<T: Scalar>(n: usize, off: f64, diag: f64) -> DenseMatrix<T> {
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            T::from_f64(diag)
        } else if i.abs_diff(j) == 1 {
            T::from_f64(off)
        } else {
            T::zero()
        }
    })
}

fn check_mesh(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::MeshTooSmall(n));
    }
    Ok(())
}

/// Equidistant grid `x_i = a + i·(b−a)/n` for `i = 0..n` (periodic-style
/// spacing, right endpoint excluded).
pub fn grid(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

fn laplacian_scale(n: usize) -> f64 {
    (n * n) as f64 / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
}

/// Reaction-diffusion problem on `[0,2π)²`:
/// `Ȧ = θ(LA + AL) + A − A⊙A⊙A` with the scaled Laplacian stencil `L`.
/// Initial-condition entries whose formula degenerates (poles of tan/csc at
/// special grid nodes) take their limiting value 0.
pub fn make_allen_cahn<T: Scalar>(n: usize, theta: f64) -> Result<ProblemSpec<T>> {
    check_mesh(n)?;
    let xs = grid(n, 0.0, 2.0 * std::f64::consts::PI);
    let a0 = DenseMatrix::from_fn(n, n, |i, j| {
        let (x, y) = (xs[i], xs[j]);
        let num = ((-x.tan().powi(2)).exp() + (-y.tan().powi(2)).exp()) * x.sin() * y.sin();
        let den = 1.0 + (1.0 / (-x / 2.0).sin()).abs().exp() + (1.0 / (-y / 2.0).sin()).abs().exp();
        let v = num / den;
        T::from_f64(if v.is_finite() { v } else { 0.0 })
    });
    let scale = laplacian_scale(n);
    Ok(ProblemSpec {
        kind: ProblemKind::AllenCahn,
        n,
        theta,
        t_final: ProblemKind::AllenCahn.default_t_final(),
        a0,
        stencil: Some(tridiag_matrix(n, scale, -2.0 * scale)),
        forcing: None,
    })
}

/// Forced Lyapunov problem on `[−π,π)²`: `Ȧ = LA + AL + θ·C/‖C‖_F` with a
/// rank-1 product-of-sines initial state and a sum-of-Gaussians forcing.
pub fn make_lyapunov<T: Scalar>(n: usize, theta: f64) -> Result<ProblemSpec<T>> {
    check_mesh(n)?;
    let xs = grid(n, -std::f64::consts::PI, std::f64::consts::PI);
    let a0 = DenseMatrix::from_fn(n, n, |i, j| T::from_f64(xs[i].sin() * xs[j].sin()));
    let c = DenseMatrix::from_fn(n, n, |i, j| {
        let rsq = xs[i] * xs[i] + xs[j] * xs[j];
        let mut acc = 0.0;
        for l in 1..=11u32 {
            acc += 10f64.powi(1 - l as i32) * (-(l as f64) * rsq).exp();
        }
        T::from_f64(acc)
    });
    let nrm = c.frobenius_norm();
    let forcing = c.scale(T::from_real(T::Real::one() / nrm));
    let scale = laplacian_scale(n);
    Ok(ProblemSpec {
        kind: ProblemKind::Lyapunov,
        n,
        theta,
        t_final: ProblemKind::Lyapunov.default_t_final(),
        a0,
        stencil: Some(tridiag_matrix(n, scale, -2.0 * scale)),
        forcing: Some(forcing),
    })
}

/// Cubic Schrödinger problem: `Ȧ = 0.5i(DA + AD) + θ·i·|A|²⊙A` with the
/// 1,0,1 stencil `D` and a two-bump Gaussian initial state indexed by the
/// 1-based integer coordinates of the entries (no spatial mesh).
pub fn make_schrodinger<T: ComplexScalar>(n: usize, theta: f64) -> Result<ProblemSpec<T>> {
    check_mesh(n)?;
    let a0 = DenseMatrix::from_fn(n, n, |i, j| {
        let (jj, ll) = ((i + 1) as f64, (j + 1) as f64);
        let b1 = (-(jj - 60.0).powi(2) / 100.0 - (ll - 50.0).powi(2) / 100.0).exp();
        let b2 = (-(jj - 50.0).powi(2) / 100.0 - (ll - 40.0).powi(2) / 100.0).exp();
        T::from_f64(b1 + b2)
    });
    Ok(ProblemSpec {
        kind: ProblemKind::Schrodinger,
        n,
        theta,
        t_final: ProblemKind::Schrodinger.default_t_final(),
        a0,
        stencil: Some(tridiag_matrix(n, 1.0, 0.0)),
        forcing: None,
    })
}

/// `Ȧ = 0` with a rank-1 product-of-sines initial state; exists so the
/// study harness has an exactly solvable smoke-test problem.
pub fn make_zero<T: Scalar>(n: usize) -> Result<ProblemSpec<T>> {
    check_mesh(n)?;
    let xs = grid(n, -std::f64::consts::PI, std::f64::consts::PI);
    let a0 = DenseMatrix::from_fn(n, n, |i, j| T::from_f64(xs[i].sin() * xs[j].sin()));
    Ok(ProblemSpec {
        kind: ProblemKind::Zero,
        n,
        theta: 0.0,
        t_final: ProblemKind::Zero.default_t_final(),
        a0,
        stencil: None,
        forcing: None,
    })
}

impl<T: Scalar> ProblemSpec<T> {
    /// Best rank-r starting state for the low-rank integrators.
    pub fn initial_lowrank(&self, r: usize) -> Result<LowRankMatrix<T>> {
        Ok(truncate(&self.a0, r)?.0)
    }

    /// The problem's right-hand side as an evaluation operator. All four
    /// RHS are autonomous; the time argument is ignored.
    pub fn rhs(&self) -> RhsOperator<T> {
        let n = self.n;
        match self.kind {
            ProblemKind::Zero => RhsOperator::new("zero", n, n, move |_, a| {
                DenseMatrix::zeros(a.rows(), a.cols())
            }),
            ProblemKind::AllenCahn => {
                let s = laplacian_scale(n);
                let (off, diag) = (T::from_f64(s), T::from_f64(-2.0 * s));
                let theta = T::from_f64(self.theta);
                RhsOperator::new("allen-cahn", n, n, move |_, a| {
                    let lin = tridiag_left(off, diag, a)
                        .add(&tridiag_right(off, diag, a))
                        .expect("same shape");
                    let mut out = lin.scale(theta);
                    for (o, &x) in out.data_mut().iter_mut().zip(a.data()) {
                        *o += x - x * x * x;
                    }
                    out
                })
            }
            ProblemKind::Lyapunov => {
                let s = laplacian_scale(n);
                let (off, diag) = (T::from_f64(s), T::from_f64(-2.0 * s));
                let theta = T::from_f64(self.theta);
                let forcing = self.forcing.clone().expect("lyapunov forcing");
                RhsOperator::new("lyapunov", n, n, move |_, a| {
                    let mut out = tridiag_left(off, diag, a)
                        .add(&tridiag_right(off, diag, a))
                        .expect("same shape");
                    out.add_assign_scaled(theta, &forcing).expect("same shape");
                    out
                })
            }
            ProblemKind::Schrodinger => {
                let (off, diag) = (T::one(), T::zero());
                let half_i = T::unit_im() * T::from_f64(0.5);
                let theta_i = T::unit_im() * T::from_f64(self.theta);
                RhsOperator::new("schrodinger", n, n, move |_, a| {
                    let mut out = tridiag_left(off, diag, a)
                        .add(&tridiag_right(off, diag, a))
                        .expect("same shape")
                        .scale(half_i);
                    for (o, &x) in out.data_mut().iter_mut().zip(a.data()) {
                        *o += theta_i * T::from_real(x.abs_sq()) * x;
                    }
                    out
                })
            }
        }
    }
}
