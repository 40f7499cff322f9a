//! Scenario-driven command line: `verify`, `simulate`, `audit`, `sweep`, `compare`.
//!
//! Exit codes: 0 success, 2 assumptions unverified, 3 numerical blow-up,
//! 4 audit or agreement failure, 1 anything else.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::diagnostics::{
    audit_contraction, audit_continuous_dependence, audit_cp_inequality, audit_global_bound_norms, audit_mass_rows,
    audit_positivity_rows, audit_semigroup, global_bound_applicability, trajectory_distance, AuditReport, Check,
};
use crate::error::{Error, Result};
use crate::export;
use crate::kinetics::{AssumptionCase, AssumptionReport};
use crate::mild::MildSolver;
use crate::operators::TruncationMode;
use crate::oracle;
use crate::scenario::{AuditName, Engine, OutputFormat, Scenario};
use crate::semigroup::SemigroupEvaluator;
use crate::state::TruncatedState;
use crate::trajectory::{MomentRow, Trajectory};
use crate::weights::{WeightKind, WeightSequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_UNVERIFIED: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "coagfrag", version, about = "Coagulation-fragmentation kinetics: solve, cross-check and audit")]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run even when the assumptions cannot be verified.
    #[arg(long, global = true)]
    pub force: bool,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `solver.engine`.
    #[arg(long, global = true, value_enum)]
    pub engine: Option<Engine>,
    /// Output path stem; overrides `output.path`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the scenario and print kappa, c and the case.
    Verify,
    /// Run the configured engine(s) and write the trajectory.
    Simulate,
    /// Run the configured audits against a trajectory file.
    Audit {
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Solve at every `sweep.n_list` truncation and compare the final states.
    Sweep,
    /// Compare two trajectory files, or run both engines when none are given.
    Compare {
        #[arg(long, requires = "right")]
        left: Option<PathBuf>,
        #[arg(long, requires = "left")]
        right: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_OTHER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Unverified(_) => EXIT_UNVERIFIED,
                _ => EXIT_OTHER,
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut sc = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    if let Some(engine) = cli.engine {
        sc.solver.engine = engine;
    }
    if let Some(out) = &cli.out {
        sc.output.path = strip_extension(out);
    }
    match &cli.command {
        Command::Verify => cmd_verify(&sc),
        Command::Simulate => cmd_simulate(&sc, cli.force),
        Command::Audit { trajectory } => cmd_audit(&sc, trajectory, cli.force),
        Command::Sweep => cmd_sweep(&sc, cli.force),
        Command::Compare { left, right } => match (left, right) {
            (Some(l), Some(r)) => cmd_compare_files(&sc, l, r),
            _ => cmd_compare_engines(&sc, cli.force),
        },
    }
}

fn strip_extension(p: &Path) -> String {
    match p.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => p.with_extension("").to_string_lossy().into_owned(),
        _ => p.to_string_lossy().into_owned(),
    }
}

fn solver_for(sc: &Scenario, force: bool) -> Result<MildSolver> {
    MildSolver::new(sc.solver_config(force), sc.problem()?, sc.solver.horizon)
}

/// Classification report of a scenario, computed without refusing.
pub fn classify(sc: &Scenario) -> Result<AssumptionReport> {
    Ok(solver_for(sc, true)?.report().clone())
}

pub fn cmd_verify(sc: &Scenario) -> Result<i32> {
    let r = classify(sc)?;
    println!("case: {}", r.case);
    println!("kappa_J: {:.16e} (J = {}, argmax j = {})", r.kappa_j, r.j_max, r.kappa_argmax);
    if let Some(s) = r.kappa_sup {
        println!("kappa_sup: {s:.16e}");
    }
    println!("c_J: {:.16e} (c_J/2 = {:.16e})", r.coag_constant_c, r.coag_constant_half);
    for reason in &r.reasons {
        println!("reason: {reason}");
    }
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(match r.case {
        AssumptionCase::Unverified => EXIT_UNVERIFIED,
        _ => EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct WindowStats {
    count: usize,
    delta_min: f64,
    delta_max: f64,
    max_iterations: usize,
    max_observed_ratio: f64,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    engine: String,
    seed: u64,
    case: String,
    n: usize,
    horizon: f64,
    final_time: f64,
    rows: usize,
    initial_mass: f64,
    final_mass: f64,
    final_leakage: f64,
    windows: Option<WindowStats>,
    blowup: &'a Option<crate::trajectory::Blowup>,
}

#[derive(Debug, Serialize)]
struct DiffSummary {
    norm: String,
    sup_distance: f64,
    bound: f64,
    pass: bool,
    max_mass_gap: f64,
}

fn run_engine(sc: &Scenario, solver: &mut MildSolver, engine: Engine, u0: &TruncatedState, at: Option<&[f64]>) -> Result<Trajectory> {
    let p = solver.problem().clone();
    match engine {
        Engine::Picard => solver.solve(u0),
        Engine::Oracle => match at {
            Some(times) => oracle::integrate_at(&p.model, &p.kernel, sc.truncation.mode, u0, times, &sc.oracle_config()),
            None => oracle::integrate(&p.model, &p.kernel, sc.truncation.mode, u0, sc.solver.horizon, &sc.oracle_config()),
        },
        Engine::Both => Err(Error::Config("run_engine takes a single engine".into())),
    }
}

fn write_rows(sc: &Scenario, rows: &[MomentRow], stem: &str) -> Result<PathBuf> {
    let path = PathBuf::from(match sc.output.format {
        OutputFormat::Csv => format!("{stem}.csv"),
        OutputFormat::Json => format!("{stem}.json"),
    });
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let out = BufWriter::new(File::create(&path)?);
    match sc.output.format {
        OutputFormat::Csv => export::write_csv(rows, out)?,
        OutputFormat::Json => export::write_json(rows, out)?,
    }
    Ok(path)
}

fn write_json_file<T: Serialize>(path: &str, value: &T) -> Result<()> {
    let p = Path::new(path);
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(p, text)?;
    Ok(())
}

fn summary<'a>(sc: &Scenario, solver: &MildSolver, tr: &'a Trajectory) -> RunSummary<'a> {
    let windows = (!tr.window_log.is_empty()).then(|| WindowStats {
        count: tr.window_log.len(),
        delta_min: tr.window_log.iter().map(|w| w.delta).fold(f64::INFINITY, f64::min),
        delta_max: tr.window_log.iter().map(|w| w.delta).fold(0.0, f64::max),
        max_iterations: tr.window_log.iter().map(|w| w.picard_iterations).max().unwrap_or(0),
        max_observed_ratio: tr.window_log.iter().map(|w| w.contraction_ratio_observed).fold(0.0, f64::max),
    });
    let first = tr.states.first();
    let last = tr.last();
    RunSummary {
        engine: tr.engine.to_string(),
        seed: sc.seed,
        case: solver.report().case.to_string(),
        n: sc.truncation.n,
        horizon: sc.solver.horizon,
        final_time: last.map_or(0.0, |l| l.0),
        rows: tr.len(),
        initial_mass: first.map_or(0.0, |s| s.mass() + s.leakage_mass),
        final_mass: last.map_or(0.0, |l| l.1.mass()),
        final_leakage: last.map_or(0.0, |l| l.1.leakage_mass),
        windows,
        blowup: &tr.blowup,
    }
}

fn diff_summary(sc: &Scenario, solver: &MildSolver, a: &Trajectory, b: &Trajectory) -> Result<DiffSummary> {
    let d = trajectory_distance(a, b, solver.w_table())?;
    let bound = sc.audits.tol_agreement.max(50.0 * solver.config().tol_picard);
    let gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x.mass() + x.leakage_mass - y.mass() - y.leakage_mass).abs())
        .fold(0.0, f64::max);
    Ok(DiffSummary {
        norm: "w".into(),
        sup_distance: d,
        bound,
        pass: d <= bound,
        max_mass_gap: gap,
    })
}

/// Picard at its own times, then the oracle at the same times.
fn run_both(sc: &Scenario, solver: &mut MildSolver, u0: &TruncatedState) -> Result<(Trajectory, Trajectory)> {
    let picard = run_engine(sc, solver, Engine::Picard, u0, None)?;
    let oracle = run_engine(sc, solver, Engine::Oracle, u0, Some(&picard.times))?;
    Ok((picard, oracle))
}

pub fn cmd_simulate(sc: &Scenario, force: bool) -> Result<i32> {
    let mut solver = solver_for(sc, force)?;
    let u0 = sc.initial_state()?;
    let stem = sc.output.path.clone();
    let rows_of = |tr: &Trajectory, s: &MildSolver| tr.rows(s.w_table(), s.w_tilde_table(), sc.output.stride);
    let mut blowup = false;
    match sc.solver.engine {
        Engine::Both => {
            let (picard, oracle) = run_both(sc, &mut solver, &u0)?;
            for tr in [&picard, &oracle] {
                let part = format!("{stem}_{}", tr.engine);
                let path = write_rows(sc, &rows_of(tr, &solver), &part)?;
                write_json_file(&format!("{part}.summary.json"), &summary(sc, &solver, tr))?;
                println!("wrote {}", path.display());
                blowup |= tr.blowup.is_some();
            }
            let diff = diff_summary(sc, &solver, &picard, &oracle)?;
            write_json_file(&format!("{stem}_diff.json"), &diff)?;
            println!(
                "picard vs oracle: sup |u_P - u_O|_w = {:.3e} (bound {:.1e}, {})",
                diff.sup_distance,
                diff.bound,
                if diff.pass { "pass" } else { "fail" }
            );
        }
        engine => {
            let tr = run_engine(sc, &mut solver, engine, &u0, None)?;
            let path = write_rows(sc, &rows_of(&tr, &solver), &stem)?;
            write_json_file(&format!("{stem}.summary.json"), &summary(sc, &solver, &tr))?;
            println!("wrote {}", path.display());
            blowup = tr.blowup.is_some();
            if let Some(b) = &tr.blowup {
                println!("numerical blow-up at t = {:.6e}: {}", b.time, b.reason);
            }
        }
    }
    Ok(if blowup { EXIT_BLOWUP } else { EXIT_OK })
}

/// Norms `‖u(t)‖_{n^p}` from the rows: the `norm_w` column when the scenario
/// weight is `n^p`, otherwise a full component dump.
fn power_norms(sc: &Scenario, rows: &[MomentRow], p: f64) -> Result<Vec<f64>> {
    let scenario_weight = sc.weight.build()?;
    if matches!(scenario_weight.kind(), WeightKind::Power { p: q } if *q == p) {
        return Ok(rows.iter().map(|r| r.norm_w).collect());
    }
    let n = sc.truncation.n;
    let w = WeightSequence::power(p)?.table(n)?;
    rows.iter()
        .map(|r| {
            if r.components.len() != n {
                return Err(Error::Schema(format!(
                    "global bound in n^{p} needs norm_w in that weight or components dumped at stride 1"
                )));
            }
            let u: Vec<f64> = r.components.iter().map(|c| c.1).collect();
            Ok(w.norm(&u))
        })
        .collect()
}

fn last_state(rows: &[MomentRow], n: usize) -> Option<TruncatedState> {
    let r = rows.last()?;
    if r.components.len() != n {
        return None;
    }
    let mut s = TruncatedState::from_densities(r.components.iter().map(|c| c.1).collect());
    s.leakage_mass = r.leakage;
    Some(s)
}

/// Runs the configured audits on already-loaded rows.
pub fn audit_rows(sc: &Scenario, rows: &[MomentRow], force: bool) -> Result<AuditReport> {
    let a = &sc.audits;
    let problem = sc.problem()?;
    let n = sc.truncation.n;
    let mut rep = AuditReport::new(Some(sc.seed));
    if rows.is_empty() {
        return Err(Error::Schema("trajectory has no rows".into()));
    }
    for check in &a.checks {
        match check {
            AuditName::Mass => {
                rep.extend(audit_mass_rows(rows, problem.model.mass_flags(n.max(2)), a.tol_mass));
                if sc.truncation.mode == TruncationMode::Closed {
                    let leak = rows.iter().map(|r| r.leakage.abs()).fold(0.0, f64::max);
                    rep.push(Check::new("mass.closed_no_leakage", "closed truncation", leak, 0.0));
                }
            }
            AuditName::Positivity => rep.extend(audit_positivity_rows(rows, a.tol_positivity)),
            AuditName::GlobalBound => {
                let gb = a.global_bound.as_ref().ok_or_else(|| Error::Config("missing [audits.global_bound]".into()))?;
                let pts = 33;
                let grid: Vec<f64> = (0..pts).map(|i| sc.solver.horizon * i as f64 / (pts - 1) as f64).collect();
                match global_bound_applicability(&problem.kernel, &problem.model, n, &grid, gb.mu, gb.p)? {
                    Some(why) => rep.push(Check::inapplicable("global_bound", "weighted-norm Gronwall bound", why)),
                    None => {
                        let norms = power_norms(sc, rows, gb.p)?;
                        let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
                        rep.extend(audit_global_bound_norms(&times, &norms, gb.p, gb.mu, rows[0].m1, a.tol_bound)?);
                    }
                }
            }
            AuditName::CpInequality => rep.extend(audit_cp_inequality(a.cp_samples, 1.0, 6.0, sc.seed)?),
            AuditName::Contraction => {
                let mut solver = solver_for(sc, force)?;
                let mut starts = vec![("start", sc.initial_state()?)];
                if let Some(end) = last_state(rows, n) {
                    starts.push(("end", end));
                }
                for (tag, u) in starts {
                    for mut c in audit_contraction(&mut solver, &u, a.samples, sc.seed)?.checks {
                        c.check = format!("{}[{tag}]", c.check);
                        rep.push(c);
                    }
                }
            }
            AuditName::Semigroup => {
                let solver = solver_for(sc, force)?;
                let ev = SemigroupEvaluator::new(
                    &problem.model,
                    n,
                    solver.w_table().clone(),
                    sc.solver_config(force).tol_semigroup,
                    sc.solver_config(force).semigroup_method,
                )?;
                let linear = matches!(problem.weight.kind(), WeightKind::Power { p } if *p == 1.0);
                let conserving = linear && problem.model.mass_flags(n.max(2)).conserving && problem.model.a(1) == 0.0;
                rep.extend(audit_semigroup(&ev, 20, sc.seed, conserving)?);
            }
            AuditName::ContinuousDependence => rep.extend(audit_continuous_dependence(
                &sc.solver_config(force),
                &problem,
                &sc.initial_state()?,
                sc.solver.horizon,
                a.perturbation,
                sc.seed,
            )?),
        }
    }
    Ok(rep)
}

pub fn cmd_audit(sc: &Scenario, trajectory: &Path, force: bool) -> Result<i32> {
    let rows = export::read_rows(trajectory)?;
    let rep = audit_rows(sc, &rows, force)?;
    let json = rep.to_json()?;
    println!("{json}");
    Ok(if rep.passed() { EXIT_OK } else { EXIT_AUDIT })
}

pub fn cmd_sweep(sc: &Scenario, force: bool) -> Result<i32> {
    let sweep = sc
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section with n_list".into()))?;
    let problem = sc.problem()?;
    let initial = |n: usize| sc.initial.build(n).unwrap_or_else(|_| TruncatedState::zeros(n));
    for &n in &sweep.n_list {
        sc.initial.build(n)?;
    }
    let report = crate::diagnostics::truncation_sweep(&sc.solver_config(force), &problem, initial, sc.solver.horizon, &sweep.n_list)?;
    write_json_file(&format!("{}_sweep.json", sc.output.path), &report)?;
    for e in &report.entries {
        println!(
            "N = {:>6}  mass {:.16e}  leakage {:.16e}  diff_to_next {}",
            e.n,
            e.mass,
            e.leakage,
            e.diff_to_next.map_or("-".into(), |d| format!("{d:.3e}"))
        );
    }
    println!("cauchy decrease: {} ({})", report.cauchy_decrease, report.note);
    Ok(EXIT_OK)
}

pub fn cmd_compare_engines(sc: &Scenario, force: bool) -> Result<i32> {
    let mut solver = solver_for(sc, force)?;
    let u0 = sc.initial_state()?;
    let (picard, oracle) = run_both(sc, &mut solver, &u0)?;
    let diff = diff_summary(sc, &solver, &picard, &oracle)?;
    println!("{}", serde_json::to_string_pretty(&diff)?);
    write_json_file(&format!("{}_diff.json", sc.output.path), &diff)?;
    Ok(if picard.blowup.is_some() {
        EXIT_BLOWUP
    } else if diff.pass {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

/// Compares moment columns and common components of two trajectory files.
pub fn cmd_compare_files(sc: &Scenario, left: &Path, right: &Path) -> Result<i32> {
    let a = export::read_rows(left)?;
    let b = export::read_rows(right)?;
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.t != y.t) {
        return Err(Error::Schema("files have different output times".into()));
    }
    let mut norm_gap: f64 = 0.0;
    let mut comp_gap: f64 = 0.0;
    for (x, y) in a.iter().zip(&b) {
        norm_gap = norm_gap.max((x.norm_w - y.norm_w).abs()).max((x.m1 - y.m1).abs());
        for (cx, cy) in x.components.iter().zip(&y.components) {
            if cx.0 != cy.0 {
                return Err(Error::Schema("files dump different components".into()));
            }
            comp_gap = comp_gap.max((cx.1 - cy.1).abs());
        }
    }
    let bound = sc.audits.tol_agreement.max(50.0 * sc.solver_config(false).tol_picard);
    let mut rep = AuditReport::new(Some(sc.seed));
    rep.push(Check::new("compare.moments", "engine agreement", norm_gap, bound));
    rep.push(Check::new("compare.components", "engine agreement", comp_gap, bound));
    println!("{}", rep.to_json()?);
    Ok(if rep.passed() { EXIT_OK } else { EXIT_AUDIT })
}
