//! Command-line front end: single trajectory runs, convergence sweeps,
//! structural diagnostics, and tableau listing.
//!
//! Exit codes: 0 success, 1 diagnostic check failure, 2 usage or config
//! error, 3 numerical blow-up.

mod config;
mod plot;

use clap::{Args, Parser, Subcommand};
use config::{Overrides, SweepDefaults};
use dlra::diagnostics::{
    galerkin_vs_tangent_sweep, truncation_residual_ladder, warm_state, LadderReport, SweepOutcome,
};
use dlra::harness::{atomic_write_text, resolve_tableau, write_study_metadata};
use dlra::{
    builtin, builtin_names, estimate_order, integer_steps, lowrank_step, make_allen_cahn,
    make_lyapunov, make_schrodinger, make_zero, reference_solve, run_study, write_records_csv,
    ButcherTableau, Complex64, Method, MethodSpec, ProblemKind, ProblemSpec, RealScalar, Scalar,
    StudyConfig,
};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dlra",
    version,
    about = "Dynamical low-rank integrators for matrix ODEs: runs, convergence studies, diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one (method, tableau, h, r) configuration and write per-step diagnostics
    Run(RunArgs),
    /// Sweep step sizes and ranks; write records, metadata, and a gnuplot script
    Convergence(ConvergenceArgs),
    /// Structural checks: basis-capture sweep, residual-vs-h ladder, full-rank floor
    Diagnostics(DiagnosticsArgs),
    /// List the built-in Butcher tableaux
    Tableaux,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; command-line flags override file values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Problem: allen-cahn, lyapunov, schrodinger, or zero
    #[arg(long)]
    problem: Option<String>,
    /// Problem parameter (diffusion / forcing / nonlinearity strength)
    #[arg(long)]
    theta: Option<f64>,
    /// Grid size; states are n x n matrices
    #[arg(long)]
    n: Option<usize>,
    /// Integration horizon
    #[arg(long, value_name = "T")]
    t_final: Option<f64>,
    /// Output directory (created if missing)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for randomized diagnostics
    #[arg(long)]
    seed: Option<u64>,
    /// Full-scale defaults (n=128, allen-cahn horizon 10) instead of desk scale
    #[arg(long)]
    full: bool,
    /// Worker threads for parallel sweeps (default: all cores)
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Integration method: bug-euler, rk-bug, or prk
    #[arg(long)]
    method: Option<String>,
    /// Tableau name (see `dlra tableaux`)
    #[arg(long)]
    tableau: Option<String>,
    /// Step size; must divide t_final
    #[arg(long)]
    h: Option<f64>,
    /// Approximation rank
    #[arg(long)]
    r: Option<usize>,
    /// Reference step size (default: h/10); must divide h
    #[arg(long)]
    h_ref: Option<f64>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated method[:tableau] list, e.g. rk-bug:rk2m,prk:rk2h,bug-euler
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated step sizes, strictly decreasing
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    /// Comma-separated ranks, strictly increasing
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<usize>>,
    /// Reference step size (default: min(h)/8); must divide min(h)
    #[arg(long)]
    h_ref: Option<f64>,
    /// Record wall-clock runtimes in the CSV (breaks byte-for-byte reproducibility)
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DiagnosticsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Tableau driving the sweep and the ladder steps
    #[arg(long, default_value = "rk3s")]
    tableau: String,
    /// Rank of the random states and of the ladder start state
    #[arg(long, default_value_t = 10)]
    r: usize,
    /// Number of random states for the basis-capture sweep
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Step size used by the sweep
    #[arg(long, default_value_t = 1e-3)]
    sweep_h: f64,
    /// Largest rung of the residual ladder
    #[arg(long, default_value_t = 0.1)]
    ladder_h: f64,
    /// Ladder rungs; each rung halves the step
    #[arg(long, default_value_t = 7)]
    rungs: usize,
    /// Steps taken to move the ladder start state off the initial condition
    #[arg(long, default_value_t = 4)]
    warm_steps: usize,
}

enum CliError {
    Lib(dlra::Error),
    Check(String),
}

impl From<dlra::Error> for CliError {
    fn from(e: dlra::Error) -> Self {
        CliError::Lib(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Check(msg) => write!(f, "check failed: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Lib(dlra::Error::BlowUp { .. }) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Lib(dlra::Error::InvalidConfig(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Convergence(args) => cmd_convergence(args),
        Cmd::Diagnostics(args) => cmd_diagnostics(args),
        Cmd::Tableaux => cmd_tableaux(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn build_problem_f64(
    kind: ProblemKind,
    n: usize,
    theta: f64,
    t_final: f64,
) -> dlra::Result<ProblemSpec<f64>> {
    let mut spec = match kind {
        ProblemKind::AllenCahn => make_allen_cahn::<f64>(n, theta)?,
        ProblemKind::Lyapunov => make_lyapunov::<f64>(n, theta)?,
        ProblemKind::Zero => make_zero::<f64>(n)?,
        ProblemKind::Schrodinger => {
            return Err(dlra::Error::InvalidConfig(
                "schrodinger is complex-valued".into(),
            ))
        }
    };
    spec.t_final = t_final;
    Ok(spec)
}

fn build_problem_c64(
    kind: ProblemKind,
    n: usize,
    theta: f64,
    t_final: f64,
) -> dlra::Result<ProblemSpec<Complex64>> {
    let mut spec = match kind {
        ProblemKind::AllenCahn => make_allen_cahn::<Complex64>(n, theta)?,
        ProblemKind::Lyapunov => make_lyapunov::<Complex64>(n, theta)?,
        ProblemKind::Zero => make_zero::<Complex64>(n)?,
        ProblemKind::Schrodinger => make_schrodinger::<Complex64>(n, theta)?,
    };
    spec.t_final = t_final;
    Ok(spec)
}

// ---------------------------------------------------------------- run

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    init_jobs(args.common.jobs)?;
    let file = config::load(args.common.config.as_deref())?;
    let methods_flag = if args.method.is_some() || args.tableau.is_some() {
        Some(vec![MethodSpec {
            method: Method::parse(args.method.as_deref().unwrap_or("rk-bug"))?,
            tableau: args.tableau.clone(),
        }])
    } else {
        None
    };
    let ov = Overrides {
        problem: args.common.problem,
        theta: args.common.theta,
        n: args.common.n,
        t_final: args.common.t_final,
        methods: methods_flag,
        h_values: args.h.map(|h| vec![h]),
        r_values: args.r.map(|r| vec![r]),
        h_ref: args.h_ref,
        output: args.common.output,
        seed: args.common.seed,
        timing: false,
        full: args.common.full,
    };
    let eff = config::effective(file, ov, SweepDefaults::SingleCell)?;
    let study = &eff.study;

    if study.methods.len() != 1 {
        return Err(usage(format!(
            "run integrates exactly one method; the configuration lists {}",
            study.methods.len()
        )));
    }
    let mspec = &study.methods[0];
    if mspec.method == Method::Dense {
        return Err(usage(
            "run integrates low-rank methods; use bug-euler, rk-bug, or prk",
        ));
    }
    // resolve the tableau before anything else so an unknown name reports the
    // registry regardless of what other flags are missing
    let tab = mspec.resolve(&study.custom_tableaux)?;

    if study.h_values.len() != 1 {
        return Err(usage(
            "run needs exactly one step size: pass --h or a single-entry h_values",
        ));
    }
    let h = study.h_values[0];
    if study.r_values.len() != 1 {
        return Err(usage(
            "run needs exactly one rank: pass --r or a single-entry r_values",
        ));
    }
    let r = study.r_values[0];
    let t_final = study.problem.resolved_t_final();
    let theta = study.problem.resolved_theta();
    let n_steps = integer_steps(0.0, t_final, h)?;
    let h_ref = study.h_ref.unwrap_or(h / 10.0);
    integer_steps(0.0, h, h_ref)?;

    let kind = study.problem.kind;
    if kind.is_complex() {
        let spec = build_problem_c64(kind, study.problem.n, theta, t_final)?;
        run_cell(&spec, mspec.method, &tab, h, r, h_ref, n_steps, &eff.output)
    } else {
        let spec = build_problem_f64(kind, study.problem.n, theta, t_final)?;
        run_cell(&spec, mspec.method, &tab, h, r, h_ref, n_steps, &eff.output)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cell<T: Scalar>(
    spec: &ProblemSpec<T>,
    method: Method,
    tab: &ButcherTableau,
    h: f64,
    r: usize,
    h_ref: f64,
    n_steps: usize,
    out: &Path,
) -> Result<(), CliError> {
    let f = spec.rhs();
    let hh = T::Real::from_f64_lossy(h);
    let zero = T::Real::from_f64_lossy(0.0);
    let y0 = spec.initial_lowrank(r)?;
    let refs = reference_solve(
        &f,
        zero,
        &spec.a0,
        T::Real::from_f64_lossy(spec.t_final),
        T::Real::from_f64_lossy(h_ref),
        hh,
    )?;

    let mut csv = String::from("k,t,error,truncation_residual,augmented_rank\n");
    let row = |csv: &mut String, k: usize, t: f64, err: f64, resid: f64, aug: usize| {
        csv.push_str(&format!("{k},{t:.16e},{err:.16e},{resid:.16e},{aug}\n"));
    };
    let d0 = y0
        .densify()
        .sub(&spec.a0)?
        .frobenius_norm()
        .to_f64_lossy();
    row(&mut csv, 0, 0.0, d0, d0, r);

    let (mut max_err, mut max_resid, mut final_err) = (d0, d0, d0);
    let mut y = y0;
    for k in 1..=n_steps {
        let t_prev = T::Real::from_usize_lossy(k - 1) * hh;
        let (next, info) = lowrank_step(method, &f, t_prev, &y, hh, tab)?;
        y = next;
        let err = y
            .densify()
            .sub(&refs[k].state.to_dense())?
            .frobenius_norm()
            .to_f64_lossy();
        let resid = info.truncation_residual.to_f64_lossy();
        row(&mut csv, k, k as f64 * h, err, resid, info.augmented_rank_used);
        max_err = max_err.max(err);
        max_resid = max_resid.max(resid);
        final_err = err;
    }

    let csv_path = out.join("run.csv");
    atomic_write_text(&csv_path, &csv)?;
    let meta = serde_json::json!({
        "problem": spec.kind.as_str(),
        "theta": spec.theta,
        "n": spec.n,
        "t_final": spec.t_final,
        "method": method.as_str(),
        "tableau": tab.name,
        "h": h,
        "r": r,
        "h_ref": h_ref,
        "steps": n_steps,
        "final_error": final_err,
        "max_error": max_err,
        "max_truncation_residual": max_resid,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let json_path = out.join("run.json");
    atomic_write_text(&json_path, &serde_json::to_string_pretty(&meta).expect("json"))?;

    println!(
        "{} {} / {} h={h:e} r={r}: {} steps, final error {final_err:.3e}, max error {max_err:.3e}, max residual {max_resid:.3e}",
        spec.kind.as_str(),
        method.as_str(),
        tab.name,
        n_steps,
    );
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

// ---------------------------------------------------------- convergence

fn cmd_convergence(args: ConvergenceArgs) -> Result<(), CliError> {
    init_jobs(args.common.jobs)?;
    let file = config::load(args.common.config.as_deref())?;
    let methods = match args.methods.as_deref() {
        Some(list) => Some(config::parse_method_list(list)?),
        None => None,
    };
    let ov = Overrides {
        problem: args.common.problem,
        theta: args.common.theta,
        n: args.common.n,
        t_final: args.common.t_final,
        methods,
        h_values: args.h,
        r_values: args.r,
        h_ref: args.h_ref,
        output: args.common.output,
        seed: args.common.seed,
        timing: args.timing,
        full: args.common.full,
    };
    let eff = config::effective(file, ov, SweepDefaults::Ladder)?;
    eff.study.validate()?;

    let records = run_study(&eff.study)?;

    let csv_path = eff.output.join("convergence.csv");
    write_records_csv(&csv_path, &records, eff.timing)?;
    let meta_path = write_study_metadata(&csv_path, &eff.study, records.len())?;
    let script = plot::gnuplot_script(&eff.study, &records, "convergence.csv");
    let gp_path = eff.output.join("convergence.gp");
    atomic_write_text(&gp_path, &script)?;
    let toml_path = eff.output.join("effective.toml");
    atomic_write_text(&toml_path, &config::effective_toml(&eff)?)?;

    println!(
        "{} records -> {} (metadata {}, plot script {}, config {})",
        records.len(),
        csv_path.display(),
        meta_path.display(),
        gp_path.display(),
        toml_path.display(),
    );
    print_slopes(&eff.study, &records)?;
    Ok(())
}

fn print_slopes(cfg: &StudyConfig, records: &[dlra::ConvergenceRecord]) -> Result<(), CliError> {
    println!("measured orders (pre-plateau least-squares slope):");
    for m in &cfg.methods {
        let tab = m.resolve(&cfg.custom_tableaux)?;
        let mname = m.method.as_str();
        for &r in &cfg.r_values {
            let pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|rec| rec.method == mname && rec.tableau == tab.name && rec.r == r)
                .map(|rec| (rec.h, rec.error))
                .collect();
            let line = match estimate_order(&pts) {
                Ok(est) => {
                    let plateau = est
                        .plateau_level
                        .map(|p| format!("{p:.2e}"))
                        .unwrap_or_else(|| "-".into());
                    if est.slope.is_finite() {
                        format!("slope {:+.2}  plateau {plateau}", est.slope)
                    } else {
                        format!("slope n/a (no pre-plateau window)  plateau {plateau}")
                    }
                }
                Err(_) => "slope n/a (too few usable points)".into(),
            };
            println!("  {mname:>9} / {:<10} r={r:<4} {line}", tab.name);
        }
    }
    Ok(())
}

// ---------------------------------------------------------- diagnostics

struct DiagReport {
    sweep: SweepOutcome,
    ladder: LadderReport,
    /// Norm of the ladder's start state, setting the scale below which
    /// residual decay cannot be measured.
    ladder_state_norm: f64,
    full_rank: LadderReport,
}

#[allow(clippy::too_many_arguments)]
fn diag_cell<T: Scalar>(
    spec: &ProblemSpec<T>,
    tab: &ButcherTableau,
    r: usize,
    samples: usize,
    sweep_h: f64,
    ladder_h: f64,
    rungs: usize,
    warm_steps: usize,
    seed: u64,
) -> dlra::Result<DiagReport> {
    let f = spec.rhs();
    let zero = T::Real::from_f64_lossy(0.0);
    let one = T::Real::from_f64_lossy(1.0);

    let sweep = galerkin_vs_tangent_sweep(
        &f,
        tab,
        spec.n,
        spec.n,
        r,
        one,
        T::Real::from_f64_lossy(sweep_h),
        samples,
        seed,
    )?;

    let h_min = ladder_h / f64::powi(2.0, rungs as i32 - 1);
    let y0 = spec.initial_lowrank(r)?;
    let (t_warm, warmed) = warm_state(&f, tab, zero, &y0, T::Real::from_f64_lossy(h_min), warm_steps)?;
    let ladder_state_norm = warmed.frobenius_norm().to_f64_lossy();
    let ladder = truncation_residual_ladder(
        &f,
        tab,
        t_warm,
        &warmed,
        T::Real::from_f64_lossy(ladder_h),
        rungs,
    )?;

    let y0_full = spec.initial_lowrank(spec.n)?;
    let (t_full, warmed_full) =
        warm_state(&f, tab, zero, &y0_full, T::Real::from_f64_lossy(h_min), warm_steps)?;
    let full_rank = truncation_residual_ladder(
        &f,
        tab,
        t_full,
        &warmed_full,
        T::Real::from_f64_lossy(h_min),
        3,
    )?;

    Ok(DiagReport {
        sweep,
        ladder,
        ladder_state_norm,
        full_rank,
    })
}

fn cmd_diagnostics(args: DiagnosticsArgs) -> Result<(), CliError> {
    init_jobs(args.common.jobs)?;
    if args.rungs < 3 {
        return Err(usage("--rungs must be at least 3"));
    }
    let file = config::load(args.common.config.as_deref())?;
    let pt = file.problem.clone().unwrap_or_default();
    let kind = match args.common.problem.as_deref().or(pt.kind.as_deref()) {
        Some(name) => ProblemKind::parse(name)?,
        None => ProblemKind::Lyapunov,
    };
    // the schrodinger initial data sits at grid indices up to ~60, so its
    // ladder needs a grid that actually contains it
    let n = args.common.n.or(pt.n).unwrap_or(match kind {
        ProblemKind::Schrodinger => 64,
        _ => 32,
    });
    // the default forcing strength on the Lyapunov problem is so small that
    // truncation residuals sit at the roundoff floor; diagnostics need an
    // O(1) inhomogeneity to measure decay against
    let theta = args.common.theta.or(pt.theta).unwrap_or(match kind {
        ProblemKind::Lyapunov => 1.0,
        _ => kind.default_theta(),
    });
    let seed = args.common.seed.or(file.seed).unwrap_or(7);
    let customs = file.custom_tableaux.clone().unwrap_or_default();
    let tab = resolve_tableau(&args.tableau, &customs)?;

    println!(
        "diagnostics on {} (n={n}, theta={theta:e}), tableau {}, r={}, seed {seed}",
        kind.as_str(),
        tab.name,
        args.r
    );

    let report = if kind.is_complex() {
        let spec = build_problem_c64(kind, n, theta, kind.default_t_final())?;
        diag_cell(
            &spec,
            &tab,
            args.r,
            args.samples,
            args.sweep_h,
            args.ladder_h,
            args.rungs,
            args.warm_steps,
            seed,
        )?
    } else {
        let spec = build_problem_f64(kind, n, theta, kind.default_t_final())?;
        diag_cell(
            &spec,
            &tab,
            args.r,
            args.samples,
            args.sweep_h,
            args.ladder_h,
            args.rungs,
            args.warm_steps,
            seed,
        )?
    };

    let mut failures: Vec<String> = Vec::new();

    let sweep = &report.sweep;
    let sweep_ok = sweep.max_violation <= 1e-9;
    println!(
        "basis-capture sweep: {} comparisons over {} random states, max violation {:.3e}  [{}]",
        sweep.checked,
        args.samples,
        sweep.max_violation,
        if sweep_ok { "pass" } else { "FAIL" }
    );
    if !sweep_ok {
        failures.push(format!(
            "augmented-basis capture fell behind the tangent projection by {:.3e} (tolerance 1e-9)",
            sweep.max_violation
        ));
        if let Some(w) = &sweep.worst {
            let replay = serde_json::json!({
                "replay": {
                    "problem": kind.as_str(), "theta": theta, "n": n,
                    "tableau": tab.name, "r": args.r, "seed": seed,
                    "sweep_h": args.sweep_h, "sample": w.sample,
                    "basis": w.basis, "stage": w.stage,
                    "galerkin": w.galerkin, "tangent": w.tangent,
                }
            });
            eprintln!("{replay}");
        }
    }

    println!("residual ladder ({} rungs from h={:e}):", args.rungs, args.ladder_h);
    println!("  {:>14}  {:>14}  {:>8}", "h", "residual", "ratio");
    for (i, h) in report.ladder.h_values.iter().enumerate() {
        let ratio = if i == 0 {
            "-".to_string()
        } else {
            format!("{:.3}", report.ladder.ratios[i - 1])
        };
        println!(
            "  {h:>14.6e}  {:>14.6e}  {ratio:>8}",
            report.ladder.residuals[i]
        );
    }
    // decay below this scale is unmeasurable roundoff, not signal
    let floor = 1e-13 * (1.0 + report.ladder_state_norm);
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut settled = 0usize;
    for (j, &ratio) in report.ladder.ratios.iter().enumerate().skip(1) {
        if report.ladder.residuals[j + 1] <= floor {
            settled += 1;
        } else if !(ratio <= worst_ratio) {
            worst_ratio = ratio;
        }
    }
    let ladder_ok = worst_ratio <= 0.75 || worst_ratio == f64::NEG_INFINITY;
    let worst_text = if worst_ratio == f64::NEG_INFINITY {
        "-".to_string()
    } else {
        format!("{worst_ratio:.3}")
    };
    println!(
        "  worst ratio after the first rung: {worst_text}  ({settled} rungs below the {floor:.1e} measurement floor)  [{}]",
        if ladder_ok { "pass" } else { "FAIL" }
    );
    if !ladder_ok {
        failures.push(format!(
            "residual decay ratio {worst_ratio:.3} exceeds 0.75 per halving"
        ));
        let replay = serde_json::json!({
            "replay": {
                "problem": kind.as_str(), "theta": theta, "n": n,
                "tableau": tab.name, "r": args.r, "ladder_h": args.ladder_h,
                "rungs": args.rungs, "warm_steps": args.warm_steps,
                "h_values": report.ladder.h_values,
                "residuals": report.ladder.residuals,
                "ratios": report.ladder.ratios,
            }
        });
        eprintln!("{replay}");
    }

    let full_max = report
        .full_rank
        .residuals
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let full_ok = full_max <= 1e-12;
    println!(
        "full-rank ladder (r = n = {n}): max residual {full_max:.3e}  [{}]",
        if full_ok { "pass" } else { "FAIL" }
    );
    if !full_ok {
        failures.push(format!(
            "full-rank truncation residual {full_max:.3e} exceeds 1e-12"
        ));
    }

    if failures.is_empty() {
        println!("all diagnostics passed");
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}

// ------------------------------------------------------------- tableaux

fn cmd_tableaux() -> Result<(), CliError> {
    println!("built-in tableaux:");
    for name in builtin_names() {
        let t = builtin(name)?;
        println!("  {:<12} stages={}  order={}", t.name, t.stages(), t.order);
    }
    Ok(())
}
