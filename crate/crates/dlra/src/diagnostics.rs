//! Runtime diagnostics for the augmented-basis integrator: a randomized
//! sweep comparing the two-sided basis projection of stage derivatives
//! against the tangent-space projection, and a step-halving ladder that
//! measures how the final truncation residual decays with h.

use num_traits::{One, Zero};
use crate::error::Result;
use crate::integrate::{rk_bug_step, rk_bug_step_traced, RhsOperator};
use crate::lowrank::{tangent_project, LowRankMatrix};
use crate::matrix::{ortho, DenseMatrix, ORTHO_DROP_TOL};
use crate::scalar::{RealScalar, Scalar};
use crate::tableau::ButcherTableau;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_scalar<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let re = T::from_f64(2.0 * rng.random::<f64>() - 1.0);
    if T::IS_COMPLEX {
        re + T::unit_im() * T::from_f64(2.0 * rng.random::<f64>() - 1.0)
    } else {
        re
    }
}

/// A random rank-r state with orthonormal factors and a geometrically
/// decaying core spectrum, scaled so its largest singular value is `scale`.
pub fn random_lowrank<T: Scalar>(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    r: usize,
    scale: T::Real,
) -> Result<LowRankMatrix<T>> {
    let tol = T::Real::from_f64_lossy(ORTHO_DROP_TOL);
    let u = ortho(&DenseMatrix::from_fn(rows, r, |_, _| random_scalar::<T>(rng)), tol)?;
    let v = ortho(&DenseMatrix::from_fn(cols, r, |_, _| random_scalar::<T>(rng)), tol)?;
    let q1 = ortho(&DenseMatrix::from_fn(r, r, |_, _| random_scalar::<T>(rng)), tol)?;
    let q2 = ortho(&DenseMatrix::from_fn(r, r, |_, _| random_scalar::<T>(rng)), tol)?;
    let d = DenseMatrix::from_fn(r, r, |i, j| {
        if i == j {
            T::from_real(scale) * T::from_f64(0.5f64.powi(i as i32))
        } else {
            T::zero()
        }
    });
    LowRankMatrix::new(u, q1.matmul(&d)?.matmul_conj_t(&q2)?, v)
}

/// One projection comparison: a stage derivative F projected onto the
/// augmented bases versus onto the tangent space at the stage value.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionSample {
    /// Index of the random state the step started from.
    pub sample: usize,
    /// Which augmented basis of the step (internal stages first, then the
    /// final assembly basis).
    pub basis: usize,
    /// Stage whose derivative was projected.
    pub stage: usize,
    /// ‖F − Û Û^H F V̂ V̂^H‖_F.
    pub galerkin: f64,
    /// ‖F − P(Y) F‖_F for the tangent projection P at the stage value.
    pub tangent: f64,
}

impl ProjectionSample {
    /// How much worse the basis projection is than the tangent projection;
    /// expected ≤ 0 up to orthogonalization round-off.
    pub fn violation(&self) -> f64 {
        self.galerkin - self.tangent
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Number of (basis, stage) pairs compared.
    pub checked: usize,
    /// Largest galerkin − tangent gap observed.
    pub max_violation: f64,
    /// The comparison attaining `max_violation`.
    pub worst: Option<ProjectionSample>,
}

/// Take one traced step from each of `samples` random rank-r states and
/// compare, for every augmented basis and every stage it covers, the basis
/// projection error of the stage derivative against the tangent-space
/// projection error. The basis projection should never lose: positive
/// violations beyond round-off indicate a basis-assembly defect.
pub fn galerkin_vs_tangent_sweep<T: Scalar>(
    f: &RhsOperator<T>,
    tab: &ButcherTableau,
    rows: usize,
    cols: usize,
    r: usize,
    scale: T::Real,
    h: T::Real,
    samples: usize,
    seed: u64,
) -> Result<SweepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out =
        SweepOutcome { checked: 0, max_violation: f64::NEG_INFINITY, worst: None };
    for k in 0..samples {
        let y = random_lowrank::<T>(&mut rng, rows, cols, r, scale)?;
        let (_, _, trace) = rk_bug_step_traced(f, T::Real::zero(), &y, h, tab)?;
        for (bi, basis) in trace.bases.iter().enumerate() {
            for &j in &basis.covered {
                let st = &trace.stages[j];
                let core = basis.u_hat.conj_t_matmul(&st.f)?.matmul(&basis.v_hat)?;
                let proj = basis.u_hat.matmul(&core)?.matmul_conj_t(&basis.v_hat)?;
                let galerkin = st.f.sub(&proj)?.frobenius_norm().to_f64_lossy();
                let tangent = st
                    .f
                    .sub(&tangent_project(&st.value, &st.f)?)?
                    .frobenius_norm()
                    .to_f64_lossy();
                let cmp = ProjectionSample { sample: k, basis: bi, stage: j, galerkin, tangent };
                out.checked += 1;
                if cmp.violation() > out.max_violation {
                    out.max_violation = cmp.violation();
                    out.worst = Some(cmp);
                }
            }
        }
    }
    Ok(out)
}

/// Advance `steps` steps of size h from `y0` to land on a generic state
/// away from the (often special) initial condition.
pub fn warm_state<T: Scalar>(
    f: &RhsOperator<T>,
    tab: &ButcherTableau,
    t0: T::Real,
    y0: &LowRankMatrix<T>,
    h: T::Real,
    steps: usize,
) -> Result<(T::Real, LowRankMatrix<T>)> {
    let mut y = y0.clone();
    for k in 0..steps {
        let t = t0 + T::Real::from_usize_lossy(k) * h;
        y = rk_bug_step(f, t, &y, h, tab)?.0;
    }
    Ok((t0 + T::Real::from_usize_lossy(steps) * h, y))
}

#[derive(Clone, Debug)]
pub struct LadderReport {
    /// Step sizes, halved from rung to rung.
    pub h_values: Vec<f64>,
    /// Final truncation residual of a single step of that size from the
    /// same starting state.
    pub residuals: Vec<f64>,
    /// residual[i+1] / residual[i]; linear-in-h decay gives ≈ 0.5.
    pub ratios: Vec<f64>,
}

impl LadderReport {
    /// Largest ratio beyond the first rung pair (the first may still sit in
    /// the pre-asymptotic regime). NaN when fewer than 3 rungs.
    pub fn max_ratio_after_first(&self) -> f64 {
        self.ratios.iter().skip(1).copied().fold(f64::NAN, f64::max)
    }
}

/// Measure the final truncation residual of single steps of sizes
/// h_max, h_max/2, …, h_max/2^(rungs−1), all taken from the same state.
pub fn truncation_residual_ladder<T: Scalar>(
    f: &RhsOperator<T>,
    tab: &ButcherTableau,
    t: T::Real,
    y: &LowRankMatrix<T>,
    h_max: T::Real,
    rungs: usize,
) -> Result<LadderReport> {
    let two = T::Real::one() + T::Real::one();
    let mut h = h_max;
    let mut h_values = Vec::with_capacity(rungs);
    let mut residuals = Vec::with_capacity(rungs);
    for _ in 0..rungs {
        let (_, info) = rk_bug_step(f, t, y, h, tab)?;
        h_values.push(h.to_f64_lossy());
        residuals.push(info.truncation_residual.to_f64_lossy());
        h = h / two;
    }
    let ratios = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(LadderReport { h_values, residuals, ratios })
}
