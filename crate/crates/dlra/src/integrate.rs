//! Time steppers: dense explicit Runge-Kutta, the basis-update & Galerkin
//! (BUG) step, its Runge-Kutta extension with augmented stage bases, the
//! projected-RK comparator, the fixed-step high-order reference solver, and
//! a uniform trajectory driver.

use num_traits::{Float, One, Zero};
use crate::error::{Error, Result};
use crate::lowrank::{tangent_project, truncate, truncate_core, LowRankMatrix};
use crate::matrix::{ortho, DenseMatrix, ORTHO_DROP_TOL};
use crate::scalar::{RealScalar, Scalar};
use crate::tableau::{builtin, ButcherTableau};
use serde::{Deserialize, Serialize};

/// Right-hand side F(t, Y) of the matrix ODE, evaluated on dense states.
/// The benchmark problems carry Hadamard nonlinearities, so evaluation on
/// the densified state is the honest general interface; the low-rank
/// steppers only ever consume products of F with thin factors.
pub struct RhsOperator<T: Scalar> {
    name: String,
    rows: usize,
    cols: usize,
    f: Box<dyn Fn(T::Real, &DenseMatrix<T>) -> DenseMatrix<T> + Send + Sync>,
}

impl<T: Scalar> RhsOperator<T> {
    pub fn new(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        f: impl Fn(T::Real, &DenseMatrix<T>) -> DenseMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), rows, cols, f: Box::new(f) }
    }

    pub fn eval(&self, t: T::Real, y: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(y.shape(), (self.rows, self.cols), "rhs input shape");
        let out = (self.f)(t, y);
        assert_eq!(out.shape(), (self.rows, self.cols), "rhs output shape");
        out
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Stepper selector for the trajectory driver and the study harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dense")]
    Dense,
    #[serde(rename = "bug-euler")]
    BugEuler,
    #[serde(rename = "rk-bug")]
    RkBug,
    #[serde(rename = "prk")]
    ProjectedRk,
}

impl Method {
    pub fn parse(name: &str) -> Result<Method> {
        match name {
            "dense" => Ok(Method::Dense),
            "bug" | "bug-euler" | "bug_euler" => Ok(Method::BugEuler),
            "rk-bug" | "rk_bug" | "rkbug" => Ok(Method::RkBug),
            "prk" | "projected-rk" | "projected_rk" => Ok(Method::ProjectedRk),
            _ => Err(Error::InvalidConfig(format!(
                "unknown method '{name}'; available: dense, bug-euler, rk-bug, prk"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::BugEuler => "bug-euler",
            Method::RkBug => "rk-bug",
            Method::ProjectedRk => "prk",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either representation of the evolving state.
#[derive(Clone, Debug)]
pub enum State<T: Scalar> {
    LowRank(LowRankMatrix<T>),
    Dense(DenseMatrix<T>),
}

impl<T: Scalar> State<T> {
    pub fn to_dense(&self) -> DenseMatrix<T> {
        match self {
            State::LowRank(y) => y.densify(),
            State::Dense(a) => a.clone(),
        }
    }

    pub fn frobenius_norm(&self) -> T::Real {
        match self {
            State::LowRank(y) => y.frobenius_norm(),
            State::Dense(a) => a.frobenius_norm(),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            State::LowRank(y) => y.all_finite(),
            State::Dense(a) => a.all_finite(),
        }
    }
}

/// Per-step diagnostics returned by every low-rank stepper.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo<R> {
    /// Column count of the widest augmented basis used by the final
    /// assembly of the step (bounded by 2·r·s).
    pub augmented_rank_used: usize,
    /// Frobenius norm of the part discarded by the step's final truncation.
    pub truncation_residual: R,
}

impl<R: RealScalar> StepInfo<R> {
    fn none() -> Self {
        Self { augmented_rank_used: 0, truncation_residual: R::zero() }
    }
}

/// One entry of a recorded trajectory.
#[derive(Clone, Debug)]
pub struct StepRecord<T: Scalar> {
    pub t: T::Real,
    pub state: State<T>,
    pub augmented_rank_used: usize,
    pub truncation_residual: T::Real,
}

/// Number of steps of size `h` from `t0` to `t_final`, required to be a
/// positive integer within 1e-9 relative.
pub fn integer_steps<R: RealScalar>(t0: R, t_final: R, h: R) -> Result<usize> {
    let err = || Error::NonIntegerStepCount {
        t0: t0.to_f64_lossy(),
        t_final: t_final.to_f64_lossy(),
        h: h.to_f64_lossy(),
    };
    if !(h > R::zero()) || !(t_final > t0) {
        return Err(err());
    }
    let ratio = ((t_final - t0) / h).to_f64_lossy();
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(err());
    }
    Ok(n as usize)
}

fn with_step(e: Error, k: usize) -> Error {
    match e {
        Error::BlowUp { stage, step: None } => Error::BlowUp { stage, step: Some(k) },
        other => other,
    }
}

fn stage_time<R: RealScalar>(t: R, h: R, c: f64) -> R {
    t + R::from_f64_lossy(c) * h
}

/// One explicit Runge-Kutta step on a dense state.
pub fn dense_rk_step<T: Scalar>(
    f: &RhsOperator<T>,
    t: T::Real,
    z: &DenseMatrix<T>,
    h: T::Real,
    tab: &ButcherTableau,
) -> Result<DenseMatrix<T>> {
    let s = tab.stages();
    let hh = T::from_real(h);
    let mut ks: Vec<DenseMatrix<T>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut zi = z.clone();
        for (j, k) in ks.iter().enumerate() {
            let aij = tab.a[i][j];
            if aij != 0.0 {
                zi.add_assign_scaled(T::from_f64(aij) * hh, k)?;
            }
        }
        if !zi.all_finite() {
            return Err(Error::BlowUp { stage: i, step: None });
        }
        let ki = f.eval(stage_time(t, h, tab.c[i]), &zi);
        if !ki.all_finite() {
            return Err(Error::BlowUp { stage: i, step: None });
        }
        ks.push(ki);
    }
    let mut out = z.clone();
    for (i, k) in ks.iter().enumerate() {
        let bi = tab.b[i];
        if bi != 0.0 {
            out.add_assign_scaled(T::from_f64(bi) * hh, k)?;
        }
    }
    if !out.all_finite() {
        return Err(Error::BlowUp { stage: s, step: None });
    }
    Ok(out)
}

/// High-accuracy dense reference trajectory: fixed-step integration with the
/// 5th-order Fehlberg weights at step `h_ref`, recorded at every multiple of
/// `h_out` (the coarse comparison grid). `h_ref` must divide `h_out`. Times
/// are computed by index arithmetic, never by accumulation.
pub fn reference_solve<T: Scalar>(
    f: &RhsOperator<T>,
    t0: T::Real,
    a0: &DenseMatrix<T>,
    t_final: T::Real,
    h_ref: T::Real,
    h_out: T::Real,
) -> Result<Vec<StepRecord<T>>> {
    let n_out = integer_steps(t0, t_final, h_out)?;
    let stride = integer_steps(T::Real::zero(), h_out, h_ref)?;
    let tab = builtin("rkf45-high").expect("registry tableau");
    let h_step = h_out / T::Real::from_usize_lossy(stride);

    let mut records = Vec::with_capacity(n_out + 1);
    records.push(StepRecord {
        t: t0,
        state: State::Dense(a0.clone()),
        augmented_rank_used: 0,
        truncation_residual: T::Real::zero(),
    });
    let mut state = a0.clone();
    for k in 0..n_out {
        let t_base = t0 + h_out * T::Real::from_usize_lossy(k);
        for q in 0..stride {
            let t = t_base + h_step * T::Real::from_usize_lossy(q);
            state = dense_rk_step(f, t, &state, h_step, &tab)
                .map_err(|e| with_step(e, k * stride + q))?;
        }
        records.push(StepRecord {
            t: t0 + h_out * T::Real::from_usize_lossy(k + 1),
            state: State::Dense(state.clone()),
            augmented_rank_used: 0,
            truncation_residual: T::Real::zero(),
        });
    }
    Ok(records)
}

/// Scale every nonzero column to unit norm. Spans are unchanged; this keeps
/// the pivoted-QR drop rule scale-free when basis blocks of very different
/// magnitudes (orthonormal factors next to raw F·V products) are stacked.
fn unit_columns<T: Scalar>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut out = m.clone();
    for j in 0..out.cols() {
        let mut nrm_sq = T::Real::zero();
        for i in 0..out.rows() {
            nrm_sq += out[(i, j)].abs_sq();
        }
        let nrm = nrm_sq.sqrt();
        if nrm > T::Real::zero() {
            let inv = T::from_real(T::Real::one() / nrm);
            for i in 0..out.rows() {
                out[(i, j)] = out[(i, j)] * inv;
            }
        }
    }
    out
}

fn drop_tol<T: Scalar>() -> T::Real {
    T::Real::from_f64_lossy(ORTHO_DROP_TOL)
}

/// Galerkin core `Û^H [Y + Σ w_q F_q] V̂` assembled from factors: the state
/// contributes `(Û^H U) S (V^H V̂)` so Y itself is never densified here.
fn galerkin_core<T: Scalar>(
    u_hat: &DenseMatrix<T>,
    y: &LowRankMatrix<T>,
    v_hat: &DenseMatrix<T>,
    weighted_f: &[(T, &DenseMatrix<T>)],
) -> Result<DenseMatrix<T>> {
    let mu = u_hat.conj_t_matmul(&y.u)?;
    let mv = y.v.conj_t_matmul(v_hat)?;
    let mut core = mu.matmul(&y.s)?.matmul(&mv)?;
    for &(w, fm) in weighted_f {
        if w != T::zero() {
            let proj = u_hat.conj_t_matmul(fm)?.matmul(v_hat)?;
            core.add_assign_scaled(w, &proj)?;
        }
    }
    Ok(core)
}

/// One first-order BUG step: augment both bases with the ranges of F·V and
/// F^H·U, solve the small Galerkin system for the core, truncate back to
/// rank r.
pub fn bug_euler_step<T: Scalar>(
    f: &RhsOperator<T>,
    t: T::Real,
    y: &LowRankMatrix<T>,
    h: T::Real,
) -> Result<(LowRankMatrix<T>, StepInfo<T::Real>)> {
    let r = y.rank();
    let fk = f.eval(t, &y.densify());
    if !fk.all_finite() {
        return Err(Error::BlowUp { stage: 0, step: None });
    }
    let fv = fk.matmul(&y.v)?;
    let fhu = fk.conj_t_matmul(&y.u)?;
    let tol = drop_tol::<T>();
    let u_hat = ortho(&unit_columns(&DenseMatrix::hcat(&[&y.u, &fv])?), tol)?;
    let v_hat = ortho(&unit_columns(&DenseMatrix::hcat(&[&y.v, &fhu])?), tol)?;
    assert!(
        u_hat.cols() <= 2 * r && v_hat.cols() <= 2 * r,
        "augmented basis exceeded 2r columns"
    );
    let s_hat = galerkin_core(&u_hat, y, &v_hat, &[(T::from_real(h), &fk)])?;
    let (y_next, residual) = truncate_core(&u_hat, &s_hat, &v_hat, r)?;
    if !y_next.all_finite() {
        return Err(Error::BlowUp { stage: 0, step: None });
    }
    let info = StepInfo {
        augmented_rank_used: u_hat.cols().max(v_hat.cols()),
        truncation_residual: residual,
    };
    Ok((y_next, info))
}

/// Everything a Runge-Kutta BUG step computed, for property checks: the
/// truncated stage values with their F evaluations, and every augmented
/// basis pair with the stage indices whose blocks fed it.
pub struct RkBugTrace<T: Scalar> {
    pub stages: Vec<RkBugStageTrace<T>>,
    pub bases: Vec<RkBugBasisTrace<T>>,
}

pub struct RkBugStageTrace<T: Scalar> {
    pub value: LowRankMatrix<T>,
    pub f: DenseMatrix<T>,
}

pub struct RkBugBasisTrace<T: Scalar> {
    pub u_hat: DenseMatrix<T>,
    pub v_hat: DenseMatrix<T>,
    /// Stage indices whose `{U, F·V}` blocks were stacked into this basis.
    pub covered: Vec<usize>,
}

fn augmented_bases<T: Scalar>(
    y: &LowRankMatrix<T>,
    values: &[LowRankMatrix<T>],
    fvs: &[DenseMatrix<T>],
    fhus: &[DenseMatrix<T>],
    active: &[usize],
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let mut ublocks: Vec<&DenseMatrix<T>> = vec![&y.u];
    let mut vblocks: Vec<&DenseMatrix<T>> = vec![&y.v];
    for &j in active {
        // the first stage equals the step's starting state, so its basis
        // block is already present
        if j > 0 {
            ublocks.push(&values[j].u);
            vblocks.push(&values[j].v);
        }
        ublocks.push(&fvs[j]);
        vblocks.push(&fhus[j]);
    }
    let tol = drop_tol::<T>();
    let u_hat = ortho(&unit_columns(&DenseMatrix::hcat(&ublocks)?), tol)?;
    let v_hat = ortho(&unit_columns(&DenseMatrix::hcat(&vblocks)?), tol)?;
    Ok((u_hat, v_hat))
}

/// One Runge-Kutta BUG step with full trace (see [`rk_bug_step`]).
pub fn rk_bug_step_traced<T: Scalar>(
    f: &RhsOperator<T>,
    t: T::Real,
    y: &LowRankMatrix<T>,
    h: T::Real,
    tab: &ButcherTableau,
) -> Result<(LowRankMatrix<T>, StepInfo<T::Real>, RkBugTrace<T>)> {
    let s = tab.stages();
    let r = y.rank();
    let alpha = tab.alpha_mask();
    let beta = tab.beta_mask();
    let hh = T::from_real(h);

    let mut values: Vec<LowRankMatrix<T>> = Vec::with_capacity(s);
    let mut fs: Vec<DenseMatrix<T>> = Vec::with_capacity(s);
    let mut fvs: Vec<DenseMatrix<T>> = Vec::with_capacity(s);
    let mut fhus: Vec<DenseMatrix<T>> = Vec::with_capacity(s);
    let mut bases: Vec<RkBugBasisTrace<T>> = Vec::with_capacity(s);

    let eval_stage = |i: usize,
                      value: &LowRankMatrix<T>,
                      fs: &mut Vec<DenseMatrix<T>>,
                      fvs: &mut Vec<DenseMatrix<T>>,
                      fhus: &mut Vec<DenseMatrix<T>>|
     -> Result<()> {
        let fd = f.eval(stage_time(t, h, tab.c[i]), &value.densify());
        if !fd.all_finite() {
            return Err(Error::BlowUp { stage: i, step: None });
        }
        fvs.push(fd.matmul(&value.v)?);
        fhus.push(fd.conj_t_matmul(&value.u)?);
        fs.push(fd);
        Ok(())
    };

    values.push(y.clone());
    eval_stage(0, y, &mut fs, &mut fvs, &mut fhus)?;

    for i in 1..s {
        let active: Vec<usize> = (0..i).filter(|&j| alpha[i][j]).collect();
        let (u_hat, v_hat) = augmented_bases(y, &values, &fvs, &fhus, &active)?;
        assert!(
            u_hat.cols() <= 2 * r * i && v_hat.cols() <= 2 * r * i,
            "internal augmented basis exceeded 2·r·i columns at stage {i}"
        );
        let weighted: Vec<(T, &DenseMatrix<T>)> = active
            .iter()
            .map(|&j| (T::from_f64(tab.a[i][j]) * hh, &fs[j]))
            .collect();
        let s_hat = galerkin_core(&u_hat, y, &v_hat, &weighted)?;
        let (yi, _) = truncate_core(&u_hat, &s_hat, &v_hat, r)?;
        if !yi.all_finite() {
            return Err(Error::BlowUp { stage: i, step: None });
        }
        bases.push(RkBugBasisTrace { u_hat, v_hat, covered: active });
        eval_stage(i, &yi, &mut fs, &mut fvs, &mut fhus)?;
        values.push(yi);
    }

    let active: Vec<usize> = (0..s).filter(|&j| beta[j]).collect();
    let (u_hat, v_hat) = augmented_bases(y, &values, &fvs, &fhus, &active)?;
    assert!(
        u_hat.cols() <= 2 * r * s && v_hat.cols() <= 2 * r * s,
        "final augmented basis exceeded 2·r·s columns"
    );
    let weighted: Vec<(T, &DenseMatrix<T>)> = active
        .iter()
        .map(|&j| (T::from_f64(tab.b[j]) * hh, &fs[j]))
        .collect();
    let s_hat = galerkin_core(&u_hat, y, &v_hat, &weighted)?;
    let (y_next, residual) = truncate_core(&u_hat, &s_hat, &v_hat, r)?;
    if !y_next.all_finite() {
        return Err(Error::BlowUp { stage: s, step: None });
    }
    let info = StepInfo {
        augmented_rank_used: u_hat.cols().max(v_hat.cols()),
        truncation_residual: residual,
    };
    bases.push(RkBugBasisTrace { u_hat, v_hat, covered: active });

    let stages = values
        .into_iter()
        .zip(fs)
        .map(|(value, fd)| RkBugStageTrace { value, f: fd })
        .collect();
    Ok((y_next, info, RkBugTrace { stages, bases }))
}

/// One Runge-Kutta BUG step: every stage rebuilds a pair of augmented bases
/// from the starting factors plus the `{U, F·V}` / `{V, F^H·U}` blocks of
/// the stages that actually feed it (nonzero tableau coefficient), solves
/// the Galerkin core system there, and truncates back to rank r; the final
/// combination does the same with the weight vector.
pub fn rk_bug_step<T: Scalar>(
    f: &RhsOperator<T>,
    t: T::Real,
    y: &LowRankMatrix<T>,
    h: T::Real,
    tab: &ButcherTableau,
) -> Result<(LowRankMatrix<T>, StepInfo<T::Real>)> {
    let (y_next, info, _) = rk_bug_step_traced(f, t, y, h, tab)?;
    Ok((y_next, info))
}

/// One projected Runge-Kutta step (comparator): stage derivatives are the
/// tangent-space projections of F at the truncated stage values, combined
/// densely and re-truncated at every stage and at the end.
pub fn projected_rk_step<T: Scalar>(
    f: &RhsOperator<T>,
    t: T::Real,
    y: &LowRankMatrix<T>,
    h: T::Real,
    tab: &ButcherTableau,
) -> Result<(LowRankMatrix<T>, StepInfo<T::Real>)> {
    let s = tab.stages();
    let r = y.rank();
    let hh = T::from_real(h);
    let y_dense = y.densify();
    let mut slopes: Vec<DenseMatrix<T>> = Vec::with_capacity(s);

    for i in 0..s {
        let yi = if i == 0 {
            y.clone()
        } else {
            let mut acc = y_dense.clone();
            for (j, g) in slopes.iter().enumerate() {
                let aij = tab.a[i][j];
                if aij != 0.0 {
                    acc.add_assign_scaled(T::from_f64(aij) * hh, g)?;
                }
            }
            if !acc.all_finite() {
                return Err(Error::BlowUp { stage: i, step: None });
            }
            truncate(&acc, r)?.0
        };
        let fd = f.eval(stage_time(t, h, tab.c[i]), &yi.densify());
        if !fd.all_finite() {
            return Err(Error::BlowUp { stage: i, step: None });
        }
        slopes.push(tangent_project(&yi, &fd)?);
    }

    let mut acc = y_dense;
    for (j, g) in slopes.iter().enumerate() {
        let bj = tab.b[j];
        if bj != 0.0 {
            acc.add_assign_scaled(T::from_f64(bj) * hh, g)?;
        }
    }
    if !acc.all_finite() {
        return Err(Error::BlowUp { stage: s, step: None });
    }
    let (y_next, residual) = truncate(&acc, r)?;

    // Rank actually reachable by the final combination: the base state plus
    // one tangent-projected slope per active stage (the first stage shares
    // the base's column/row spaces, so it only adds r).
    let mut bound = r;
    for (j, &bj) in tab.b.iter().enumerate() {
        if bj != 0.0 {
            bound += if j == 0 { r } else { 2 * r };
        }
    }
    let bound = bound.min(y.nrows().min(y.ncols()));
    assert!(bound <= 2 * r * s, "projected-RK rank bound exceeded 2·r·s");
    let info = StepInfo { augmented_rank_used: bound, truncation_residual: residual };
    Ok((y_next, info))
}

/// Single step of the selected low-rank method.
pub fn lowrank_step<T: Scalar>(
    method: Method,
    f: &RhsOperator<T>,
    t: T::Real,
    y: &LowRankMatrix<T>,
    h: T::Real,
    tab: &ButcherTableau,
) -> Result<(LowRankMatrix<T>, StepInfo<T::Real>)> {
    match method {
        Method::BugEuler => bug_euler_step(f, t, y, h),
        Method::RkBug => rk_bug_step(f, t, y, h, tab),
        Method::ProjectedRk => projected_rk_step(f, t, y, h, tab),
        Method::Dense => Err(Error::InvalidConfig(
            "the dense method has no low-rank step; use integrate with a dense state".into(),
        )),
    }
}

/// Drive a trajectory from `t0` to `t_final` in steps of `h`, invoking
/// `on_record` for every record including the initial one (k = 0). Returns
/// the final state.
#[allow(clippy::too_many_arguments)]
pub fn integrate_with<T: Scalar>(
    method: Method,
    f: &RhsOperator<T>,
    tab: &ButcherTableau,
    t0: T::Real,
    y0: State<T>,
    t_final: T::Real,
    h: T::Real,
    mut on_record: impl FnMut(&StepRecord<T>),
) -> Result<State<T>> {
    let n_steps = integer_steps(t0, t_final, h)?;
    match (&method, &y0) {
        (Method::Dense, State::LowRank(_)) => {
            return Err(Error::InvalidConfig(
                "dense method requires a dense initial state".into(),
            ))
        }
        (Method::Dense, State::Dense(_)) | (_, State::LowRank(_)) => {}
        (_, State::Dense(_)) => {
            return Err(Error::InvalidConfig(
                "low-rank methods require a low-rank initial state".into(),
            ))
        }
    }

    let info0 = StepInfo::<T::Real>::none();
    on_record(&StepRecord {
        t: t0,
        state: y0.clone(),
        augmented_rank_used: info0.augmented_rank_used,
        truncation_residual: info0.truncation_residual,
    });

    let mut state = y0;
    for k in 0..n_steps {
        let t = t0 + h * T::Real::from_usize_lossy(k);
        let (next, info) = match (&method, &state) {
            (Method::Dense, State::Dense(a)) => {
                let z = dense_rk_step(f, t, a, h, tab).map_err(|e| with_step(e, k))?;
                (State::Dense(z), StepInfo::none())
            }
            (m, State::LowRank(y)) => {
                let (ylr, info) =
                    lowrank_step(*m, f, t, y, h, tab).map_err(|e| with_step(e, k))?;
                (State::LowRank(ylr), info)
            }
            _ => unreachable!("state kind checked above"),
        };
        state = next;
        on_record(&StepRecord {
            t: t0 + h * T::Real::from_usize_lossy(k + 1),
            state: state.clone(),
            augmented_rank_used: info.augmented_rank_used,
            truncation_residual: info.truncation_residual,
        });
    }
    Ok(state)
}

/// As [`integrate_with`], collecting every record.
pub fn integrate<T: Scalar>(
    method: Method,
    f: &RhsOperator<T>,
    tab: &ButcherTableau,
    t0: T::Real,
    y0: State<T>,
    t_final: T::Real,
    h: T::Real,
) -> Result<Vec<StepRecord<T>>> {
    let mut records = Vec::new();
    integrate_with(method, f, tab, t0, y0, t_final, h, |rec| records.push(rec.clone()))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_rhs(n: usize) -> RhsOperator<f64> {
        RhsOperator::new("zero", n, n, |_, y| DenseMatrix::zeros(y.rows(), y.cols()))
    }

    fn random_lowrank(rng: &mut ChaCha8Rng, n: usize, m: usize, r: usize) -> LowRankMatrix<f64> {
        let a = DenseMatrix::from_fn(n, m, |_, _| rng.random::<f64>() - 0.5);
        truncate(&a, r).unwrap().0
    }

    #[test]
    fn dense_rk4_matches_truncated_exponential() {
        let f = RhsOperator::new("growth", 1, 1, |_, y: &DenseMatrix<f64>| y.clone());
        let z0 = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let tab = builtin("rk4").unwrap();
        let z1 = dense_rk_step(&f, 0.0, &z0, 0.1, &tab).unwrap();
        // 1 + h + h²/2 + h³/6 + h⁴/24 at h = 0.1
        assert!((z1[(0, 0)] - 1.1051708333333333).abs() < 1e-15);
    }

    #[test]
    fn dense_step_zero_rhs_is_identity() {
        let f = zero_rhs(3);
        let z = DenseMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        for name in crate::tableau::builtin_names() {
            let tab = builtin(name).unwrap();
            let z1 = dense_rk_step(&f, 0.0, &z, 0.2, &tab).unwrap();
            assert_eq!(z1.data(), z.data(), "{name} moved a zero-rhs state");
        }
    }

    #[test]
    fn dense_step_reports_blow_up() {
        let f = RhsOperator::new("nan", 2, 2, |_, y: &DenseMatrix<f64>| {
            y.map(|_| f64::NAN)
        });
        let z = DenseMatrix::<f64>::identity(2);
        match dense_rk_step(&f, 0.0, &z, 0.1, &builtin("euler").unwrap()) {
            Err(Error::BlowUp { stage: 0, .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn reference_solve_scalar_decay() {
        let f = RhsOperator::new("decay", 1, 1, |_, y: &DenseMatrix<f64>| y.scale(-1.0));
        let a0 = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let recs = reference_solve(&f, 0.0, &a0, 1.0, 1e-3, 0.1).unwrap();
        assert_eq!(recs.len(), 11);
        let final_val = recs.last().unwrap().state.to_dense()[(0, 0)];
        assert!((final_val - (-1.0f64).exp()).abs() < 1e-12);
        assert!((recs[0].t - 0.0).abs() == 0.0 && (recs[10].t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_solve_zero_rhs_constant() {
        let f = zero_rhs(2);
        let a0 = DenseMatrix::from_fn(2, 2, |i, j| (i + j) as f64);
        let recs = reference_solve(&f, 0.0, &a0, 1.0, 0.01, 0.25).unwrap();
        for rec in &recs {
            assert_eq!(rec.state.to_dense().data(), a0.data());
        }
    }

    #[test]
    fn integer_steps_accepts_and_rejects() {
        assert_eq!(integer_steps(0.0, 1.0, 0.1).unwrap(), 10);
        assert_eq!(integer_steps(0.0, 1.0, 1.0).unwrap(), 1);
        assert!(integer_steps(0.0, 1.0, 0.3).is_err());
        assert!(integer_steps(0.0, 0.0, 0.1).is_err());
        assert!(integer_steps(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn bug_euler_zero_rhs_keeps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = random_lowrank(&mut rng, 6, 5, 2);
        let f = RhsOperator::new("zero", 6, 5, |_, y: &DenseMatrix<f64>| {
            DenseMatrix::zeros(y.rows(), y.cols())
        });
        let (y1, info) = bug_euler_step(&f, 0.0, &y, 0.1).unwrap();
        let err = y1.densify().sub(&y.densify()).unwrap().frobenius_norm();
        assert!(err < 1e-12, "zero rhs moved the state by {err}");
        assert!(info.truncation_residual < 1e-12);
    }

    #[test]
    fn bug_euler_full_rank_is_dense_euler() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let y = random_lowrank(&mut rng, n, n, n);
        let l = DenseMatrix::from_fn(n, n, |i, j| ((i + 2 * j) as f64 * 0.3).sin());
        let f = RhsOperator::new("linear", n, n, move |_, a: &DenseMatrix<f64>| {
            l.matmul(a).unwrap()
        });
        let h = 0.05;
        let (y1, _) = bug_euler_step(&f, 0.0, &y, h).unwrap();
        let mut dense = y.densify();
        let f0 = f.eval(0.0, &dense);
        dense.add_assign_scaled(h, &f0).unwrap();
        let err = y1.densify().sub(&dense).unwrap().frobenius_norm();
        assert!(err < 1e-10 * (1.0 + dense.frobenius_norm()), "err = {err}");
    }

    #[test]
    fn rk_bug_euler_tableau_matches_bug_euler() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_lowrank(&mut rng, 7, 6, 3);
        let q = DenseMatrix::from_fn(7, 6, |i, j| ((i * 6 + j) as f64 * 0.11).cos());
        let f = RhsOperator::new("affine", 7, 6, move |_, a: &DenseMatrix<f64>| {
            a.scale(0.5).add(&q).unwrap()
        });
        let tab = builtin("euler").unwrap();
        let (a, ia) = bug_euler_step(&f, 0.0, &y, 0.02).unwrap();
        let (b, ib) = rk_bug_step(&f, 0.0, &y, 0.02, &tab).unwrap();
        let err = a.densify().sub(&b.densify()).unwrap().frobenius_norm();
        assert!(err < 1e-12, "specialization gap {err}");
        assert_eq!(ia.augmented_rank_used, ib.augmented_rank_used);
    }

    #[test]
    fn rk_bug_full_rank_matches_dense_step_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let a0 = DenseMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let y = truncate(&a0, n).unwrap().0;
        let l = DenseMatrix::from_fn(n, n, |i, j| {
            Complex64::new(((i + j) as f64 * 0.4).sin(), ((i * j) as f64 * 0.2).cos() * 0.3)
        });
        let f = RhsOperator::new("linear", n, n, move |_, a: &DenseMatrix<Complex64>| {
            l.matmul(a).unwrap()
        });
        for name in ["rk2m", "rk3s", "rk4"] {
            let tab = builtin(name).unwrap();
            let (ylr, info) = rk_bug_step(&f, 0.0, &y, 0.03, &tab).unwrap();
            let zd = dense_rk_step(&f, 0.0, &a0, 0.03, &tab).unwrap();
            let err = ylr.densify().sub(&zd).unwrap().frobenius_norm();
            assert!(
                err < 1e-9 * (1.0 + zd.frobenius_norm()),
                "{name}: full-rank gap {err}"
            );
            assert!(info.augmented_rank_used <= 2 * n * tab.stages());
        }
    }

    #[test]
    fn rk_bug_gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let y = random_lowrank(&mut rng, 6, 6, 2);
        let w = DenseMatrix::from_fn(6, 6, |i, j| ((i + 3 * j) as f64 * 0.21).sin());
        let f = RhsOperator::new("linear", 6, 6, move |_, a: &DenseMatrix<f64>| {
            w.matmul(a).unwrap().add(&a.matmul(&w).unwrap()).unwrap()
        });
        let tab = builtin("rk2h").unwrap();
        let (base, _) = rk_bug_step(&f, 0.0, &y, 0.01, &tab).unwrap();

        // rotate the factored representation by random orthogonal Q1, Q2
        let q1 = ortho(&DenseMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5), 1e-12)
            .unwrap();
        let q2 = ortho(&DenseMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5), 1e-12)
            .unwrap();
        let rotated = LowRankMatrix::new(
            y.u.matmul(&q1).unwrap(),
            q1.conj_t_matmul(&y.s).unwrap().matmul(&q2).unwrap(),
            y.v.matmul(&q2).unwrap(),
        )
        .unwrap();
        let (alt, _) = rk_bug_step(&f, 0.0, &rotated, 0.01, &tab).unwrap();
        let err = alt.densify().sub(&base.densify()).unwrap().frobenius_norm();
        assert!(err < 1e-10, "gauge dependence {err}");
    }

    #[test]
    fn projected_rk_zero_rhs_and_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let y = random_lowrank(&mut rng, 5, 5, 2);
        let f = zero_rhs(5);
        let tab = builtin("rk2m").unwrap();
        let (y1, info) = projected_rk_step(&f, 0.0, &y, 0.1, &tab).unwrap();
        let err = y1.densify().sub(&y.densify()).unwrap().frobenius_norm();
        assert!(err < 1e-12);
        assert!(info.augmented_rank_used <= 2 * 2 * tab.stages());

        let yf = random_lowrank(&mut rng, 5, 5, 5);
        let w = DenseMatrix::from_fn(5, 5, |i, j| ((2 * i + j) as f64 * 0.17).cos());
        let flin = RhsOperator::new("linear", 5, 5, move |_, a: &DenseMatrix<f64>| {
            w.matmul(a).unwrap()
        });
        let (ylr, _) = projected_rk_step(&flin, 0.0, &yf, 0.02, &tab).unwrap();
        let zd = dense_rk_step(&flin, 0.0, &yf.densify(), 0.02, &tab).unwrap();
        let err = ylr.densify().sub(&zd).unwrap().frobenius_norm();
        assert!(err < 1e-10 * (1.0 + zd.frobenius_norm()));
    }

    #[test]
    fn integrate_zero_rhs_all_records_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let y = random_lowrank(&mut rng, 4, 4, 2);
        let f = zero_rhs(4);
        let tab = builtin("rk3s").unwrap();
        let y0 = y.densify();
        for method in [Method::BugEuler, Method::RkBug, Method::ProjectedRk] {
            let recs = integrate(method, &f, &tab, 0.0, State::LowRank(y.clone()), 1.0, 0.25)
                .unwrap();
            assert_eq!(recs.len(), 5);
            for rec in &recs {
                let err = rec.state.to_dense().sub(&y0).unwrap().frobenius_norm();
                assert!(err < 1e-12, "{method}: state drifted by {err}");
            }
        }
        let recs =
            integrate(Method::Dense, &f, &tab, 0.0, State::Dense(y0.clone()), 1.0, 0.25).unwrap();
        assert_eq!(recs.len(), 5);
    }

    #[test]
    fn integrate_rejects_bad_grids_and_state_kinds() {
        let f = zero_rhs(3);
        let tab = builtin("euler").unwrap();
        let y = truncate(&DenseMatrix::<f64>::identity(3), 2).unwrap().0;
        assert!(matches!(
            integrate(Method::RkBug, &f, &tab, 0.0, State::LowRank(y.clone()), 1.0, 0.3),
            Err(Error::NonIntegerStepCount { .. })
        ));
        assert!(matches!(
            integrate(Method::Dense, &f, &tab, 0.0, State::LowRank(y), 1.0, 0.5),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            integrate(
                Method::RkBug,
                &f,
                &tab,
                0.0,
                State::Dense(DenseMatrix::identity(3)),
                1.0,
                0.5
            ),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn integrate_blow_up_carries_step_index() {
        // exponential growth overflows quickly at a huge rate
        let f = RhsOperator::new("explode", 2, 2, |_, y: &DenseMatrix<f64>| y.scale(1e40));
        let y = truncate(&DenseMatrix::<f64>::identity(2), 2).unwrap().0;
        let tab = builtin("euler").unwrap();
        match integrate(Method::BugEuler, &f, &tab, 0.0, State::LowRank(y), 1.0, 0.1) {
            Err(Error::BlowUp { step: Some(k), .. }) => assert!(k > 0),
            other => panic!("expected indexed blow-up, got {other:?}"),
        }
    }

    #[test]
    fn method_parsing_round_trips() {
        for m in [Method::Dense, Method::BugEuler, Method::RkBug, Method::ProjectedRk] {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert_eq!(Method::parse("bug").unwrap(), Method::BugEuler);
        assert_eq!(Method::parse("rk_bug").unwrap(), Method::RkBug);
        assert!(Method::parse("nope").is_err());
    }
}
