//! Config-file schema and flag merging.
//!
//! Precedence, highest first: command-line flags, then the config file, then
//! built-in defaults (`--full` swaps the desk-scale defaults for full-scale
//! ones but never overrides an explicit setting).

use dlra::{
    ButcherTableau, Error, Method, MethodSpec, ProblemConfig, ProblemKind, Result, StudyConfig,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// On-disk schema. Every key is optional. Scalar keys come first so the
/// serialized form is valid TOML (tables follow values).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    /// Strictly decreasing step sizes, each dividing t_final.
    pub h_values: Option<Vec<f64>>,
    /// Strictly increasing ranks, each at most n.
    pub r_values: Option<Vec<usize>>,
    /// Reference step size; must divide the smallest h.
    pub h_ref: Option<f64>,
    /// Output directory.
    pub output: Option<String>,
    pub seed: Option<u64>,
    /// Include wall-clock runtimes in the CSV (off by default so outputs are
    /// reproducible byte for byte).
    pub timing: Option<bool>,
    pub problem: Option<ProblemTable>,
    pub methods: Option<Vec<MethodSpec>>,
    /// Extra tableaux, looked up by name before the built-in registry.
    pub custom_tableaux: Option<Vec<ButcherTableau>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemTable {
    /// allen-cahn | lyapunov | schrodinger | zero
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub theta: Option<f64>,
    pub t_final: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
        }
    }
}

/// Flag values gathered from clap; `None` means "not given on the command
/// line", letting the file value (or default) through.
#[derive(Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub theta: Option<f64>,
    pub n: Option<usize>,
    pub t_final: Option<f64>,
    pub methods: Option<Vec<MethodSpec>>,
    pub h_values: Option<Vec<f64>>,
    pub r_values: Option<Vec<usize>>,
    pub h_ref: Option<f64>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub timing: bool,
    pub full: bool,
}

/// A fully materialized study: no optional fields left unresolved.
pub struct Effective {
    pub study: StudyConfig,
    pub timing: bool,
    pub output: PathBuf,
}

/// How to fill sweep axes that neither flags nor the file provide.
#[derive(Clone, Copy, PartialEq)]
pub enum SweepDefaults {
    /// Leave h_values empty (single-run mode demands an explicit step size)
    /// and default to a single rank.
    SingleCell,
    /// Fill a stability-derived dyadic ladder and a two-rank sweep.
    Ladder,
}

pub fn parse_method_list(spec: &str) -> Result<Vec<MethodSpec>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|entry| {
            let mut parts = entry.trim().splitn(2, ':');
            let method = Method::parse(parts.next().unwrap_or(""))?;
            let tableau = parts.next().map(|s| s.trim().to_string());
            Ok(MethodSpec { method, tableau })
        })
        .collect()
}

/// Crude bound on the spectral radius of the right-hand side's linearization,
/// used only to pick stable default step sizes.
fn stiffness_bound(kind: ProblemKind, n: usize, theta: f64) -> f64 {
    // the tridiag(1,-2,1) stencil has eigenvalues in [-4, 0]; both-sided
    // application doubles that, and the diffusion problems scale it by
    // n^2 / 4pi^2
    let s = (n as f64).powi(2) / (4.0 * std::f64::consts::PI.powi(2));
    match kind {
        ProblemKind::AllenCahn => 8.0 * theta.abs() * s + 2.0,
        ProblemKind::Lyapunov => 8.0 * s + theta.abs(),
        ProblemKind::Schrodinger => 2.0 + 2.0 * theta.abs(),
        ProblemKind::Zero => 1.0,
    }
}

/// Dyadic ladder h = t_final / 2^q, largest rung chosen so h times the
/// stiffness bound stays at or below one.
pub fn default_h_values(kind: ProblemKind, n: usize, theta: f64, t_final: f64) -> Vec<f64> {
    let lam = stiffness_bound(kind, n, theta);
    let mut q = 2i32;
    while q < 40 && t_final / f64::powi(2.0, q) * lam > 1.0 {
        q += 1;
    }
    (0..4).map(|i| t_final / f64::powi(2.0, q + i)).collect()
}

fn default_r_values(n: usize, defaults: SweepDefaults) -> Vec<usize> {
    let mut rs: Vec<usize> = match defaults {
        SweepDefaults::SingleCell => vec![5],
        SweepDefaults::Ladder => vec![5, 10],
    };
    for r in &mut rs {
        *r = (*r).min(n);
    }
    rs.dedup();
    rs
}

pub fn effective(file: FileConfig, ov: Overrides, defaults: SweepDefaults) -> Result<Effective> {
    let pt = file.problem.unwrap_or_default();

    let kind = match ov.problem.as_deref().or(pt.kind.as_deref()) {
        Some(name) => ProblemKind::parse(name)?,
        None => ProblemKind::Lyapunov,
    };
    let n = ov
        .n
        .or(pt.n)
        .unwrap_or(if ov.full { 128 } else { 64 });
    let theta = ov.theta.or(pt.theta).unwrap_or_else(|| kind.default_theta());
    let t_final = ov.t_final.or(pt.t_final).unwrap_or_else(|| {
        if kind == ProblemKind::AllenCahn && !ov.full {
            2.0 // desk-scale cut of the long default horizon
        } else {
            kind.default_t_final()
        }
    });

    let methods = ov
        .methods
        .or(file.methods)
        .unwrap_or_else(|| {
            vec![MethodSpec {
                method: Method::RkBug,
                tableau: Some("rk2m".into()),
            }]
        });

    let h_values = ov.h_values.or(file.h_values).unwrap_or_else(|| match defaults {
        SweepDefaults::SingleCell => Vec::new(),
        SweepDefaults::Ladder => default_h_values(kind, n, theta, t_final),
    });
    let r_values = ov
        .r_values
        .or(file.r_values)
        .unwrap_or_else(|| default_r_values(n, defaults));

    let output = ov
        .output
        .or_else(|| file.output.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let study = StudyConfig {
        problem: ProblemConfig {
            kind,
            n,
            theta: Some(theta),
            t_final: Some(t_final),
        },
        methods,
        h_values,
        r_values,
        h_ref: ov.h_ref.or(file.h_ref),
        output: Some(output.display().to_string()),
        seed: ov.seed.or(file.seed).unwrap_or(7),
        custom_tableaux: file.custom_tableaux.unwrap_or_default(),
    };
    Ok(Effective {
        timing: ov.timing || file.timing.unwrap_or(false),
        output,
        study,
    })
}

/// Render the effective study as a config file that reproduces it exactly:
/// parsing this text back and re-rendering is idempotent.
pub fn effective_toml(eff: &Effective) -> Result<String> {
    let s = &eff.study;
    let fc = FileConfig {
        h_values: Some(s.h_values.clone()),
        r_values: Some(s.r_values.clone()),
        h_ref: Some(s.resolved_h_ref()),
        output: s.output.clone(),
        seed: Some(s.seed),
        timing: Some(eff.timing),
        problem: Some(ProblemTable {
            kind: Some(s.problem.kind.as_str().to_string()),
            n: Some(s.problem.n),
            theta: Some(s.problem.resolved_theta()),
            t_final: Some(s.problem.resolved_t_final()),
        }),
        methods: Some(s.methods.clone()),
        custom_tableaux: if s.custom_tableaux.is_empty() {
            None
        } else {
            Some(s.custom_tableaux.clone())
        },
    };
    toml::to_string_pretty(&fc).map_err(|e| Error::InvalidConfig(format!("serialize: {e}")))
}
