//! Convergence-study harness: runs a grid of (method, tableau, h, r) cells
//! against a shared dense reference trajectory, estimates empirical
//! convergence orders from the resulting error curves, and persists records
//! as CSV plus a JSON metadata sidecar.

use crate::error::{Error, Result};
use crate::integrate::{dense_rk_step, integer_steps, lowrank_step, Method, RhsOperator};
use crate::lowrank::LowRankMatrix;
use crate::matrix::DenseMatrix;
use crate::problems::{
    make_allen_cahn, make_lyapunov, make_schrodinger, make_zero, ProblemKind, ProblemSpec,
};
use crate::scalar::{RealScalar, Scalar};
use crate::tableau::{builtin, ButcherTableau};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Successive error ratios (normalized per h-halving) below this value mark
/// a pair of points as h-independent, i.e. sitting on the error plateau.
pub const PLATEAU_RATIO: f64 = 1.3;
/// Relative band around the window's mean ratio accepted by the slope fit.
pub const WINDOW_BAND: f64 = 0.25;
/// Allowed growth factor between plateau levels of successive ranks.
pub const PLATEAU_SLACK: f64 = 2.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub n: usize,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub t_final: Option<f64>,
}

impl ProblemConfig {
    pub fn resolved_theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| self.kind.default_theta())
    }

    pub fn resolved_t_final(&self) -> f64 {
        self.t_final.unwrap_or_else(|| self.kind.default_t_final())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(default)]
    pub tableau: Option<String>,
}

impl MethodSpec {
    /// Tableau this cell runs with. The first-order integrator has a fixed
    /// scheme and ignores any configured tableau.
    pub fn resolve(&self, customs: &[ButcherTableau]) -> Result<ButcherTableau> {
        match self.method {
            Method::BugEuler => builtin("euler"),
            _ => {
                let name = self.tableau.as_deref().ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "method '{}' requires a tableau name",
                        self.method.as_str()
                    ))
                })?;
                resolve_tableau(name, customs)
            }
        }
    }
}

/// Look up `name` among custom tableaux first, then the built-in registry.
pub fn resolve_tableau(name: &str, customs: &[ButcherTableau]) -> Result<ButcherTableau> {
    if let Some(t) = customs.iter().find(|t| t.name == name) {
        return t.clone().validated();
    }
    builtin(name).map_err(|e| match e {
        Error::UnknownTableau { name, mut available } => {
            available.extend(customs.iter().map(|t| t.name.clone()));
            Error::UnknownTableau { name, available }
        }
        other => other,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: ProblemConfig,
    pub methods: Vec<MethodSpec>,
    /// Strictly decreasing step sizes; each must divide t_final and be an
    /// integer multiple of the smallest entry (the co-iteration grid unit).
    pub h_values: Vec<f64>,
    /// Strictly increasing ranks, each ≤ n.
    pub r_values: Vec<usize>,
    /// Reference step size; ≤ min(h)/2 and dividing min(h). Defaults to
    /// min(h)/8.
    #[serde(default)]
    pub h_ref: Option<f64>,
    #[serde(default)]
    pub output: Option<String>,
    /// Seed for randomized diagnostics; the study itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub custom_tableaux: Vec<ButcherTableau>,
}

impl StudyConfig {
    pub fn h_base(&self) -> f64 {
        self.h_values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn resolved_h_ref(&self) -> f64 {
        self.h_ref.unwrap_or_else(|| self.h_base() / 8.0)
    }

    pub fn validate(&self) -> Result<()> {
        let t_final = self.problem.resolved_t_final();
        let theta = self.problem.resolved_theta();
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidConfig(format!("t_final = {t_final} must be positive")));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidConfig(format!("theta = {theta} must be finite")));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods configured".into()));
        }
        for m in &self.methods {
            m.resolve(&self.custom_tableaux)?;
        }
        if self.h_values.is_empty() {
            return Err(Error::InvalidConfig("h_values is empty".into()));
        }
        if !self.h_values.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(Error::InvalidConfig("h_values must be positive and finite".into()));
        }
        if !self.h_values.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("h_values must be strictly decreasing".into()));
        }
        let h_base = self.h_base();
        for &h in &self.h_values {
            integer_steps(0.0, t_final, h)?;
            let stride = (h / h_base).round();
            if stride < 1.0 || (h - stride * h_base).abs() > 1e-9 * h {
                return Err(Error::InvalidConfig(format!(
                    "h = {h} is not an integer multiple of the smallest h = {h_base}"
                )));
            }
        }
        if self.r_values.is_empty() {
            return Err(Error::InvalidConfig("r_values is empty".into()));
        }
        if !self.r_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("r_values must be strictly increasing".into()));
        }
        if self.r_values[0] == 0 {
            return Err(Error::ZeroRank);
        }
        if *self.r_values.last().unwrap() > self.problem.n {
            return Err(Error::InvalidConfig(format!(
                "largest rank {} exceeds n = {}",
                self.r_values.last().unwrap(),
                self.problem.n
            )));
        }
        let h_ref = self.resolved_h_ref();
        if !(h_ref.is_finite() && h_ref > 0.0) {
            return Err(Error::InvalidConfig(format!("h_ref = {h_ref} must be positive")));
        }
        if h_ref > h_base / 2.0 + 1e-15 * h_base {
            return Err(Error::InvalidConfig(format!(
                "h_ref = {h_ref} must be at most min(h)/2 = {}",
                h_base / 2.0
            )));
        }
        let per_tick = (h_base / h_ref).round();
        if per_tick < 1.0 || (h_base - per_tick * h_ref).abs() > 1e-9 * h_base {
            return Err(Error::InvalidConfig(format!(
                "h_ref = {h_ref} must divide the smallest h = {h_base}"
            )));
        }
        Ok(())
    }
}

/// One study cell's outcome. A solver blow-up is recorded as
/// `error = +inf` rather than aborting the study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub problem: String,
    pub theta: f64,
    pub n: usize,
    pub method: String,
    pub tableau: String,
    pub h: f64,
    pub r: usize,
    pub error: f64,
    pub runtime_s: f64,
    pub max_trunc_residual: f64,
    pub plateau: bool,
}

enum CellState<T: Scalar> {
    Dense(DenseMatrix<T>),
    Low(LowRankMatrix<T>),
    Dead,
}

struct Cell<T: Scalar> {
    method: Method,
    tableau: ButcherTableau,
    h: f64,
    r: usize,
    stride: usize,
    group: (usize, usize),
    state: CellState<T>,
    max_err: f64,
    max_resid: f64,
    runtime: f64,
}

impl<T: Scalar> Cell<T> {
    fn observe(&mut self, aref: &DenseMatrix<T>) {
        let err = match &self.state {
            CellState::Dense(z) => {
                z.sub(aref).expect("shape").frobenius_norm().to_f64_lossy()
            }
            CellState::Low(y) => {
                y.densify().sub(aref).expect("shape").frobenius_norm().to_f64_lossy()
            }
            CellState::Dead => return,
        };
        if err.is_finite() {
            self.max_err = self.max_err.max(err);
        } else {
            self.state = CellState::Dead;
            self.max_err = f64::INFINITY;
        }
    }

    fn tick(&mut self, tick: usize, h_base: f64, f: &RhsOperator<T>, aref: &DenseMatrix<T>) {
        if tick % self.stride != 0 || matches!(self.state, CellState::Dead) {
            return;
        }
        let t0 = T::Real::from_f64_lossy((tick - self.stride) as f64 * h_base);
        let h = T::Real::from_f64_lossy(self.h);
        let started = Instant::now();
        let next = match &self.state {
            CellState::Dense(z) => {
                dense_rk_step(f, t0, z, h, &self.tableau).map(|z2| (CellState::Dense(z2), 0.0))
            }
            CellState::Low(y) => {
                lowrank_step(self.method, f, t0, y, h, &self.tableau).map(|(y2, info)| {
                    (CellState::Low(y2), info.truncation_residual.to_f64_lossy())
                })
            }
            CellState::Dead => unreachable!(),
        };
        self.runtime += started.elapsed().as_secs_f64();
        match next {
            Ok((state, resid)) => {
                self.max_resid = self.max_resid.max(resid);
                self.state = state;
                self.observe(aref);
            }
            Err(_) => {
                self.state = CellState::Dead;
                self.max_err = f64::INFINITY;
            }
        }
    }
}

/// Run the full study grid. One dense reference trajectory is advanced
/// serially; all cells march in lock-step against it so only the current
/// reference snapshot is ever held in memory. Cell order (and therefore
/// record order) is methods × h_values × r_values as configured.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    let n = cfg.problem.n;
    let theta = cfg.problem.resolved_theta();
    match cfg.problem.kind {
        ProblemKind::Schrodinger => run_study_on(cfg, &make_schrodinger::<Complex64>(n, theta)?),
        ProblemKind::AllenCahn => run_study_on(cfg, &make_allen_cahn::<f64>(n, theta)?),
        ProblemKind::Lyapunov => run_study_on(cfg, &make_lyapunov::<f64>(n, theta)?),
        ProblemKind::Zero => run_study_on(cfg, &make_zero::<f64>(n)?),
    }
}

fn run_study_on<T: Scalar>(
    cfg: &StudyConfig,
    spec: &ProblemSpec<T>,
) -> Result<Vec<ConvergenceRecord>> {
    let t_final = cfg.problem.resolved_t_final();
    let theta = cfg.problem.resolved_theta();
    let h_base = cfg.h_base();
    let h_ref = cfg.resolved_h_ref();
    let n_ticks = integer_steps(0.0, t_final, h_base)?;
    let ref_per_tick = (h_base / h_ref).round() as usize;
    let f = spec.rhs();

    let mut starts: BTreeMap<usize, LowRankMatrix<T>> = BTreeMap::new();
    for &r in &cfg.r_values {
        starts.insert(r, spec.initial_lowrank(r)?);
    }

    let mut cells: Vec<Cell<T>> = Vec::new();
    for (mi, m) in cfg.methods.iter().enumerate() {
        let tableau = m.resolve(&cfg.custom_tableaux)?;
        for &h in &cfg.h_values {
            let stride = (h / h_base).round() as usize;
            for (ri, &r) in cfg.r_values.iter().enumerate() {
                let state = match m.method {
                    Method::Dense => CellState::Dense(spec.a0.clone()),
                    _ => CellState::Low(starts[&r].clone()),
                };
                cells.push(Cell {
                    method: m.method,
                    tableau: tableau.clone(),
                    h,
                    r,
                    stride,
                    group: (mi, ri),
                    state,
                    max_err: 0.0,
                    max_resid: 0.0,
                    runtime: 0.0,
                });
            }
        }
    }

    let rkf = builtin("rkf45-high")?;
    let h_ref_t = T::Real::from_f64_lossy(h_ref);
    let mut aref = spec.a0.clone();
    for cell in cells.iter_mut() {
        cell.observe(&aref);
    }
    for tick in 1..=n_ticks {
        for q in 0..ref_per_tick {
            let t = T::Real::from_f64_lossy(((tick - 1) * ref_per_tick + q) as f64 * h_ref);
            aref = dense_rk_step(&f, t, &aref, h_ref_t, &rkf)?;
        }
        cells.par_iter_mut().for_each(|c| c.tick(tick, h_base, &f, &aref));
    }

    let mut records: Vec<ConvergenceRecord> = cells
        .iter()
        .map(|c| ConvergenceRecord {
            problem: spec.kind.as_str().to_string(),
            theta,
            n: spec.n,
            method: c.method.as_str().to_string(),
            tableau: c.tableau.name.clone(),
            h: c.h,
            r: c.r,
            error: c.max_err,
            runtime_s: c.runtime,
            max_trunc_residual: c.max_resid,
            plateau: false,
        })
        .collect();

    // flag plateau points per (method, rank) error curve
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, c) in cells.iter().enumerate() {
        groups.entry(c.group).or_default().push(k);
    }
    for idxs in groups.values() {
        let pts: Vec<(f64, f64)> =
            idxs.iter().map(|&k| (records[k].h, records[k].error)).collect();
        if let Ok(est) = estimate_order(&pts) {
            for &k in idxs {
                if let Some(p) = est.points.iter().find(|p| p.h == records[k].h) {
                    records[k].plateau = p.plateau;
                }
            }
        }
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderPoint {
    pub h: f64,
    pub error: f64,
    pub plateau: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderEstimate {
    /// Least-squares slope of log error vs log h over `window`; NaN when no
    /// pre-plateau window of at least two points exists.
    pub slope: f64,
    /// (smallest h, largest h) of the fitted window; NaNs when slope is NaN.
    pub window: (f64, f64),
    /// Median error over plateau-flagged points, if any were detected.
    pub plateau_level: Option<f64>,
    /// Smallest finite positive error seen.
    pub min_error: f64,
    /// All input points, largest h first, with plateau flags.
    pub points: Vec<OrderPoint>,
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Estimate the empirical convergence order of an error curve given as
/// (h, error) points.
///
/// Points with non-finite or non-positive error are displayed but excluded
/// from the analysis. Successive ratios are normalized per h-halving; ratios
/// below [`PLATEAU_RATIO`] flag both endpoints as plateau points, and the
/// plateau level is their median error. The slope is a least-squares fit of
/// log error against log h over the largest contiguous window of
/// non-plateau points (scanning from the largest h) whose per-halving
/// ratios all lie within [`WINDOW_BAND`] of the window's geometric mean;
/// ties prefer the larger-h window.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<OrderEstimate> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.retain(|(h, _)| h.is_finite() && *h > 0.0);
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pts.dedup_by(|a, b| a.0 == b.0);

    let usable: Vec<(f64, f64)> =
        pts.iter().copied().filter(|(h, e)| h.is_finite() && e.is_finite() && *e > 0.0).collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(
            "order estimation needs at least 3 h values with finite positive errors",
        ));
    }

    // per-halving ratios between consecutive usable points
    let k = usable.len();
    let mut ratios = Vec::with_capacity(k - 1);
    for w in usable.windows(2) {
        let ((h0, e0), (h1, e1)) = (w[0], w[1]);
        ratios.push((e0 / e1).powf(1.0 / (h0 / h1).log2()));
    }

    let mut flagged = vec![false; k];
    for (i, &rho) in ratios.iter().enumerate() {
        if rho < PLATEAU_RATIO {
            flagged[i] = true;
            flagged[i + 1] = true;
        }
    }
    let plateau_level = if flagged.iter().any(|&f| f) {
        Some(median(
            usable.iter().zip(&flagged).filter(|(_, &f)| f).map(|((_, e), _)| *e).collect(),
        ))
    } else {
        None
    };

    // slope window: contiguous run of non-plateau points from the large-h
    // side, then the largest sub-window with mutually consistent ratios
    let prefix = flagged.iter().position(|&f| f).unwrap_or(k);
    let mut best: Option<(usize, usize)> = None;
    for i in 0..prefix {
        for j in (i + 1)..prefix {
            let rs = &ratios[i..j];
            let mean = (rs.iter().map(|r| r.ln()).sum::<f64>() / rs.len() as f64).exp();
            let ok = rs
                .iter()
                .all(|&r| r >= (1.0 - WINDOW_BAND) * mean && r <= (1.0 + WINDOW_BAND) * mean);
            if ok {
                let better = match best {
                    None => true,
                    Some((bi, bj)) => j - i > bj - bi,
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
    }
    let (slope, window) = match best {
        Some((i, j)) => {
            let xs: Vec<f64> = usable[i..=j].iter().map(|(h, _)| h.ln()).collect();
            let ys: Vec<f64> = usable[i..=j].iter().map(|(_, e)| e.ln()).collect();
            (least_squares_slope(&xs, &ys), (usable[j].0, usable[i].0))
        }
        None => (f64::NAN, (f64::NAN, f64::NAN)),
    };

    let min_error =
        usable.iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    let points = pts
        .iter()
        .map(|&(h, e)| OrderPoint {
            h,
            error: e,
            plateau: usable
                .iter()
                .position(|&(uh, _)| uh == h)
                .map(|u| flagged[u])
                .unwrap_or(false),
        })
        .collect();
    Ok(OrderEstimate { slope, window, plateau_level, min_error, points })
}

/// Plateau level per rank for records of a single method/tableau. Ranks
/// whose error curve shows no plateau are omitted.
pub fn plateau_vs_rank(records: &[ConvergenceRecord]) -> Vec<(usize, f64)> {
    let mut by_rank: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in records {
        by_rank.entry(rec.r).or_default().push((rec.h, rec.error));
    }
    let mut out = Vec::new();
    for (r, pts) in by_rank {
        if let Ok(est) = estimate_order(&pts) {
            if let Some(level) = est.plateau_level {
                out.push((r, level));
            }
        }
    }
    out
}

/// Check that plateau levels decrease (within a slack factor) as the rank
/// increases, treating levels at or below `floor` as already at the
/// round-off floor.
pub fn plateau_monotone(
    levels: &[(usize, f64)],
    slack: f64,
    floor: f64,
) -> std::result::Result<(), String> {
    for w in levels.windows(2) {
        let ((r0, p0), (r1, p1)) = (w[0], w[1]);
        if r1 <= r0 {
            return Err(format!("ranks not increasing: {r0} then {r1}"));
        }
        if p1 > slack * p0 && p1 > floor {
            return Err(format!(
                "plateau rose from {p0:.3e} (r = {r0}) to {p1:.3e} (r = {r1})"
            ));
        }
    }
    Ok(())
}

pub const CSV_HEADER: &str =
    "problem,theta,n,method,tableau,h,r,error,runtime_s,max_trunc_residual,plateau";

/// Render records as CSV. Runtimes are zeroed unless `include_timing` is
/// set, keeping default outputs bit-identical across machines and thread
/// counts.
pub fn records_to_csv(records: &[ConvergenceRecord], include_timing: bool) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let runtime = if include_timing { r.runtime_s } else { 0.0 };
        s.push_str(&format!(
            "{},{:.16e},{},{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{}\n",
            r.problem,
            r.theta,
            r.n,
            r.method,
            r.tableau,
            r.h,
            r.r,
            r.error,
            runtime,
            r.max_trunc_residual,
            r.plateau
        ));
    }
    s
}

/// Write `contents` to `path` atomically (temp file + rename), creating
/// parent directories as needed.
pub fn atomic_write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_records_csv(
    path: &Path,
    records: &[ConvergenceRecord],
    include_timing: bool,
) -> Result<()> {
    atomic_write_text(path, &records_to_csv(records, include_timing))
}

/// Write the JSON metadata sidecar next to a records CSV: the effective
/// config, record count, crate version, and platform. Content is fully
/// deterministic (no timestamps).
pub fn write_study_metadata(
    csv_path: &Path,
    cfg: &StudyConfig,
    n_records: usize,
) -> Result<PathBuf> {
    let meta = serde_json::json!({
        "config": cfg,
        "records": n_records,
        "version": env!("CARGO_PKG_VERSION"),
        "platform": { "os": std::env::consts::OS, "arch": std::env::consts::ARCH },
    });
    let path = csv_path.with_extension("json");
    atomic_write_text(&path, &serde_json::to_string_pretty(&meta).expect("json"))?;
    Ok(path)
}
