use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use sdd_core::classify::{classify, color_sequence, ColorSegment, EXACT_TOL_RED};
use sdd_core::geom::{lift, lift_on, Curve3D};
use sdd_core::oracle::{self, key_family, ClosedFormSolution, RESIDUAL_SAMPLES, RESIDUAL_TOL, WORKING_HORIZON};
use sdd_core::redcert::{red_certificate, red_uniqueness_check, verify_red, RedCertificate, RedUniquenessReport, RedVerification};
use sdd_core::registry::{self, Entry, Params, ENTRIES};
use sdd_core::steps::{seed_branch, BranchSpec};
use sdd_core::unicity::{slope_certificate, UniquenessCertificate};
use sdd_core::{integrate, Color, SddError, SddProblem, SolutionCurve, Trajectory};

use crate::args::{Export3dArgs, RunArgs, SweepArgs, Which};
use crate::report::{file_stem, pass_fail, write_json, RunReport, FAIL};
use crate::{CliError, CliResult};

/// Largest deviation from the closed form tolerated along a seeded branch.
pub const BRANCH_TOL: f64 = 1e-3;
/// Surface and plane residual bound for exported curves.
pub const GEOM_TOL: f64 = 1e-12;
/// Nodes used to render a closed form for classification.
pub const RENDER_NODES: usize = 512;
/// Horizon of the red candidate check in `certify`.
pub const RED_CHECK_HORIZON: f64 = 1.0;

pub fn cmd_list() -> String {
    let mut out = String::new();
    for e in ENTRIES {
        let _ = writeln!(out, "{}", e.key);
        let _ = writeln!(out, "    {}", e.summary);
        if e.families {
            let _ = writeln!(out, "    solution families: yes (use --tau)");
        }
        for p in e.params {
            let _ = writeln!(out, "    --param {}={}  {}", p.name, p.default, p.meaning);
        }
    }
    out
}

struct Setup {
    entry: &'static Entry,
    given: Params,
    params: Params,
    problem: SddProblem,
}

fn setup(args: &RunArgs) -> CliResult<Setup> {
    let entry = registry::entry(&args.problem)?;
    let given: Params = args.params.iter().cloned().collect();
    let params = registry::resolve_params(entry.key, &given)?;
    let problem = registry::build(entry.key, &given)?;
    if !entry.families && !args.tau.is_empty() {
        return Err(CliError::Usage(format!(
            "`{}` has no solution families; drop --tau",
            entry.key
        )));
    }
    if args.tau.iter().any(|t| !(*t >= 0.0)) {
        return Err(CliError::Usage("--tau values must be non-negative".into()));
    }
    fs::create_dir_all(&args.out)?;
    Ok(Setup {
        entry,
        given,
        params,
        problem,
    })
}

fn residual_cap(c: &ClosedFormSolution) -> f64 {
    if c.window.is_bounded() {
        f64::INFINITY
    } else {
        WORKING_HORIZON
    }
}

fn residuals(p: &SddProblem, sols: &[ClosedFormSolution]) -> Vec<(String, Result<f64, SddError>)> {
    sols.par_iter()
        .map(|c| (c.label.clone(), oracle::max_residual(p, c, RESIDUAL_SAMPLES, residual_cap(c))))
        .collect()
}

pub fn cmd_verify(args: &RunArgs) -> CliResult<RunReport> {
    let s = setup(args)?;
    let mut report = RunReport::new("verify", s.entry.key, s.params.clone(), args);
    let sols = registry::closed_forms(s.entry.key, &s.given, &args.tau)?;
    if sols.is_empty() {
        report.verdict("verify", "inapplicable");
        report.note("verify", "no closed-form solutions are registered for this problem");
        return Ok(report);
    }
    let mut all = true;
    for (label, r) in residuals(&s.problem, &sols) {
        match r {
            Ok(v) => {
                all &= v <= RESIDUAL_TOL;
                report.verdict(label.clone(), pass_fail(v <= RESIDUAL_TOL));
                report.max_residuals.insert(label, v);
            }
            Err(e) => {
                all = false;
                report.verdict(label.clone(), FAIL);
                report.note(label, e.to_string());
            }
        }
    }
    report.verdict("verify", pass_fail(all));
    report.note("verify", format!("{} solutions checked", sols.len()));
    Ok(report)
}

#[derive(Debug, Serialize)]
struct BranchOutcome {
    label: String,
    family: Color,
    tau: f64,
    t_start: f64,
    t_end: f64,
    nodes: usize,
    max_deviation: Option<f64>,
    extrapolations: usize,
    verdict: String,
    error: Option<String>,
    csv: Option<PathBuf>,
}

fn run_branch(s: &Setup, args: &RunArgs, family: Color, tau: f64) -> BranchOutcome {
    let kp = registry::key_params(&s.params);
    let label = match key_family(&kp, family, tau) {
        Ok(c) => c.label,
        Err(_) => format!("{}-{family}-tau{tau}", s.entry.key),
    };
    let mut outcome = BranchOutcome {
        label,
        family,
        tau,
        t_start: 0.0,
        t_end: 0.0,
        nodes: 0,
        max_deviation: None,
        extrapolations: 0,
        verdict: FAIL.into(),
        error: None,
        csv: None,
    };
    let result = (|| -> CliResult<(Trajectory, f64)> {
        let exact = key_family(&kp, family, tau)?;
        let traj = if family == Color::Red {
            integrate(&s.problem, WORKING_HORIZON, args.step, None)?
        } else {
            let spec = BranchSpec::key(&kp, family, tau);
            let seed = seed_branch(&s.problem, &spec, args.eps)?;
            integrate(&s.problem, tau + spec.span / 2.0, args.step, Some(seed))?
        };
        let mut dev = 0.0f64;
        for n in traj.nodes() {
            dev = dev.max((n.x - exact.value(n.t)?).abs());
        }
        Ok((traj, dev))
    })();
    match result {
        Ok((traj, dev)) => {
            outcome.t_start = traj.t0();
            outcome.t_end = traj.t_last();
            outcome.nodes = traj.nodes().len();
            outcome.extrapolations = traj.extrapolations();
            outcome.max_deviation = Some(dev);
            let path = args
                .out
                .join(format!("{}-branch-{}.csv", s.entry.key, file_stem(&outcome.label)));
            match write_trajectory(&traj, &s.problem, &path) {
                Ok(()) => {
                    outcome.csv = Some(path);
                    outcome.verdict = pass_fail(dev <= BRANCH_TOL);
                }
                Err(e) => outcome.error = Some(e.to_string()),
            }
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

fn write_trajectory(traj: &Trajectory, p: &SddProblem, path: &Path) -> CliResult<()> {
    traj.write_csv(&p.delay, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn cmd_branches(args: &RunArgs) -> CliResult<RunReport> {
    let s = setup(args)?;
    if !s.entry.families {
        return Err(SddError::Inapplicable(format!("`{}` has no solution families", s.entry.key)).into());
    }
    let mut jobs = vec![(Color::Red, 0.0)];
    for &tau in &args.tau {
        jobs.push((Color::Yellow, tau));
        jobs.push((Color::Blue, tau));
    }
    let outcomes: Vec<BranchOutcome> = jobs
        .par_iter()
        .map(|&(family, tau)| run_branch(&s, args, family, tau))
        .collect();

    let mut report = RunReport::new("branches", s.entry.key, s.params.clone(), args);
    for o in &outcomes {
        report.verdict(o.label.clone(), o.verdict.clone());
        if let Some(d) = o.max_deviation {
            report.max_residuals.insert(o.label.clone(), d);
        }
        if let Some(e) = &o.error {
            report.note(o.label.clone(), e.clone());
        }
        if let Some(p) = &o.csv {
            report.outputs.push(p.clone());
        }
    }
    let summary = args.out.join(format!("{}-branches.json", s.entry.key));
    write_json(&summary, &outcomes)?;
    report.outputs.push(summary);
    Ok(report)
}

#[derive(Debug, Serialize)]
struct ClassifiedCurve {
    label: String,
    declared: Vec<Color>,
    observed: Vec<Color>,
    segments: Vec<ColorSegment>,
}

#[derive(Debug, Serialize)]
struct ClassifiedIntegration {
    t_end: f64,
    tol_red: f64,
    segments: Vec<ColorSegment>,
    /// Set when the integration stopped early; `segments` then cover the
    /// part computed before the stop.
    stopped: Option<String>,
}

#[derive(Debug, Serialize)]
struct ClassifyOutput {
    closed_forms: Vec<ClassifiedCurve>,
    integrated: Option<ClassifiedIntegration>,
}

pub fn cmd_classify(args: &RunArgs) -> CliResult<RunReport> {
    let s = setup(args)?;
    if !(args.tol_red > 0.0) {
        return Err(CliError::Usage("--tol-red must be positive".into()));
    }
    let mut report = RunReport::new("classify", s.entry.key, s.params.clone(), args);
    let sols = registry::closed_forms(s.entry.key, &s.given, &args.tau)?;
    let delay = &s.problem.delay;
    let curves: Vec<Result<ClassifiedCurve, SddError>> = sols
        .par_iter()
        .map(|c| {
            let traj = c.render(RENDER_NODES, WORKING_HORIZON)?;
            let segments = classify(&traj, delay, EXACT_TOL_RED)?;
            Ok(ClassifiedCurve {
                label: c.label.clone(),
                declared: c.colors(),
                observed: color_sequence(&segments),
                segments,
            })
        })
        .collect();
    let mut closed_forms = Vec::new();
    for (c, r) in sols.iter().zip(curves) {
        match r {
            Ok(cc) => {
                report.verdict(cc.label.clone(), pass_fail(cc.declared == cc.observed));
                closed_forms.push(cc);
            }
            Err(e) => {
                report.verdict(c.label.clone(), FAIL);
                report.note(c.label.clone(), e.to_string());
            }
        }
    }

    let integrated = match integrate(&s.problem, WORKING_HORIZON, args.step, None) {
        Ok(traj) => Some((traj, None)),
        Err(SddError::Aborted { t, cause, partial }) if partial.nodes().len() >= 2 => {
            Some((*partial, Some(format!("stopped at t = {t}: {cause}"))))
        }
        Err(e) => {
            report.note("integrated", e.to_string());
            None
        }
    };
    let integrated = match integrated {
        Some((traj, stopped)) => {
            let segments = classify(&traj, delay, args.tol_red)?;
            if let Some(msg) = &stopped {
                report.note("integrated", msg.clone());
            }
            Some(ClassifiedIntegration {
                t_end: traj.t_last(),
                tol_red: args.tol_red,
                segments,
                stopped,
            })
        }
        None => None,
    };
    let path = args.out.join(format!("{}-classify.json", s.entry.key));
    write_json(
        &path,
        &ClassifyOutput {
            closed_forms,
            integrated,
        },
    )?;
    report.outputs.push(path);
    Ok(report)
}

#[derive(Debug, Serialize)]
struct CertifyOutput {
    red_certificate: Option<RedCertificate>,
    red_verification: Option<RedVerification>,
    red_uniqueness: Option<RedUniquenessReport>,
    uniqueness_certificate: Option<UniquenessCertificate>,
}

pub fn cmd_certify(args: &RunArgs) -> CliResult<RunReport> {
    let s = setup(args)?;
    if !(args.margin > 0.0) {
        return Err(CliError::Usage("--margin must be positive".into()));
    }
    let p = &s.problem;
    let mut report = RunReport::new("certify", s.entry.key, s.params.clone(), args);
    let mut out = CertifyOutput {
        red_certificate: None,
        red_verification: None,
        red_uniqueness: None,
        uniqueness_certificate: None,
    };

    match red_certificate(p) {
        Ok(cert) => {
            report.verdict("red", cert.verdict.as_str());
            if cert.candidate.is_some() {
                let v = verify_red(p, &cert, RED_CHECK_HORIZON)?;
                report.verdict("red-verification", pass_fail(v.passed));
                report.max_residuals.insert("red-candidate".into(), v.max_residual);
                out.red_verification = Some(v);
            }
            out.red_certificate = Some(cert);
        }
        Err(SddError::Inapplicable(msg)) => {
            report.verdict("red", "inapplicable");
            report.note("red", msg);
        }
        Err(e) => return Err(e.into()),
    }

    match red_uniqueness_check(p, WORKING_HORIZON, args.step) {
        Ok(r) => {
            report.note(
                "red-uniqueness",
                format!("at most one red solution; reduced solution is red: {}", r.red_candidates == 1),
            );
            out.red_uniqueness = Some(r);
        }
        Err(SddError::Inapplicable(msg)) => report.note("red-uniqueness", msg),
        Err(e) => report.note("red-uniqueness", e.to_string()),
    }

    match slope_certificate(p, args.margin) {
        Ok(c) => {
            report.verdict(
                "uniqueness",
                match c.verdict {
                    sdd_core::unicity::UniquenessVerdict::Unique => "unique",
                    sdd_core::unicity::UniquenessVerdict::Inconclusive => "inconclusive",
                },
            );
            report.note("uniqueness", format!("q = {}", c.q));
            out.uniqueness_certificate = Some(c);
        }
        Err(e @ SddError::NonDifferentiable { .. }) => {
            report.verdict("uniqueness", "inapplicable");
            report.note("uniqueness", e.to_string());
        }
        Err(e) => return Err(e.into()),
    }

    let path = args.out.join(format!("{}-certify.json", s.entry.key));
    write_json(&path, &out)?;
    report.outputs.push(path);
    Ok(report)
}

#[derive(Debug, Serialize)]
struct Plane {
    a: f64,
    b: f64,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct ExportedCurve {
    label: String,
    rows: usize,
    surface_residual: f64,
    /// Present when the delay is affine over the curve's `x` range.
    plane: Option<Plane>,
    file: PathBuf,
}

fn wanted(which: Which, c: &ClosedFormSolution) -> bool {
    match which {
        Which::All => true,
        Which::Red => c.family == Color::Red,
        Which::Yellow => c.family == Color::Yellow,
        Which::Blue => c.family == Color::Blue,
    }
}

fn export_curve(s: &Setup, args: &Export3dArgs, c: &ClosedFormSolution) -> CliResult<ExportedCurve> {
    let delay = &s.problem.delay;
    let curve: Curve3D = if c.window.is_bounded() {
        lift(c, delay, args.run.grid)?
    } else {
        lift_on(c, delay, c.window.lo, WORKING_HORIZON, args.run.grid)?
    };
    let (lo, hi) = curve
        .rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.x), hi.max(r.x)));
    let plane = delay.affine_on(lo, hi).map(|(a, b)| Plane {
        a,
        b,
        residual: curve.plane_residual(a, b),
    });
    let stem = format!("{}-3d-{}", s.entry.key, file_stem(&c.label));
    let file = if args.json {
        let path = args.run.out.join(format!("{stem}.json"));
        fs::write(&path, curve.to_json()? + "\n")?;
        path
    } else {
        let path = args.run.out.join(format!("{stem}.csv"));
        curve.write_csv(BufWriter::new(File::create(&path)?))?;
        path
    };
    Ok(ExportedCurve {
        label: c.label.clone(),
        rows: curve.rows.len(),
        surface_residual: curve.surface_residual(delay)?,
        plane,
        file,
    })
}

pub fn cmd_export3d(args: &Export3dArgs) -> CliResult<RunReport> {
    let s = setup(&args.run)?;
    if args.run.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let sols: Vec<ClosedFormSolution> = registry::closed_forms(s.entry.key, &s.given, &args.run.tau)?
        .into_iter()
        .filter(|c| wanted(args.which, c))
        .collect();
    let results: Vec<CliResult<ExportedCurve>> = sols.par_iter().map(|c| export_curve(&s, args, c)).collect();

    let mut report = RunReport::new("export3d", s.entry.key, s.params.clone(), &args.run);
    let mut exported = Vec::new();
    for (c, r) in sols.iter().zip(results) {
        match r {
            Ok(e) => {
                let plane_ok = e.plane.as_ref().map_or(true, |p| p.residual <= GEOM_TOL);
                report.verdict(e.label.clone(), pass_fail(e.surface_residual <= GEOM_TOL && plane_ok));
                report.max_residuals.insert(format!("{}/surface", e.label), e.surface_residual);
                if let Some(p) = &e.plane {
                    report.max_residuals.insert(format!("{}/plane", e.label), p.residual);
                }
                report.outputs.push(e.file.clone());
                exported.push(e);
            }
            Err(e) => {
                report.verdict(c.label.clone(), FAIL);
                report.note(c.label.clone(), e.to_string());
            }
        }
    }
    if sols.is_empty() {
        report.verdict("export3d", "inapplicable");
        report.note("export3d", "no closed-form solutions selected");
    }
    let path = args.run.out.join(format!("{}-export3d.json", s.entry.key));
    write_json(&path, &exported)?;
    report.outputs.push(path);
    Ok(report)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    params: BTreeMap<String, f64>,
    solutions: usize,
    max_residual: Option<f64>,
    verdict: String,
    error: Option<String>,
}

fn grid_product(vary: &[(String, Vec<f64>)]) -> Vec<Params> {
    vary.iter().fold(vec![Params::new()], |acc, (name, values)| {
        acc.iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut p = base.clone();
                    p.insert(name.clone(), *v);
                    p
                })
            })
            .collect()
    })
}

fn sweep_row(key: &str, base: &Params, combo: &Params, taus: &[f64]) -> SweepRow {
    let mut given = base.clone();
    given.extend(combo.iter().map(|(k, v)| (k.clone(), *v)));
    let result = (|| -> Result<(usize, f64), SddError> {
        let p = registry::build(key, &given)?;
        let sols = registry::closed_forms(key, &given, taus)?;
        let mut worst = 0.0f64;
        for (_, r) in residuals(&p, &sols) {
            worst = worst.max(r?);
        }
        Ok((sols.len(), worst))
    })();
    let params = registry::resolve_params(key, &given).unwrap_or(given);
    match result {
        Ok((n, worst)) => SweepRow {
            params,
            solutions: n,
            max_residual: Some(worst),
            verdict: if n == 0 {
                "inapplicable".into()
            } else {
                pass_fail(worst <= RESIDUAL_TOL)
            },
            error: None,
        },
        Err(e) => SweepRow {
            params,
            solutions: 0,
            max_residual: None,
            verdict: FAIL.into(),
            error: Some(e.to_string()),
        },
    }
}

fn combo_key(combo: &Params) -> String {
    combo
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<RunReport> {
    let s = setup(&args.run)?;
    for (name, values) in &args.vary {
        if !s.entry.params.iter().any(|p| p.name == name) {
            return Err(CliError::Usage(format!("`{}` has no parameter `{name}`", s.entry.key)));
        }
        if values.is_empty() {
            return Err(CliError::Usage(format!("no values given for `{name}`")));
        }
    }
    let combos = grid_product(&args.vary);
    let rows: Vec<SweepRow> = combos
        .par_iter()
        .map(|c| sweep_row(s.entry.key, &s.given, c, &args.run.tau))
        .collect();

    let mut report = RunReport::new("sweep", s.entry.key, s.params.clone(), &args.run);
    for (combo, row) in combos.iter().zip(&rows) {
        let key = if combo.is_empty() {
            "defaults".to_string()
        } else {
            combo_key(combo)
        };
        report.verdict(key.clone(), row.verdict.clone());
        if let Some(r) = row.max_residual {
            report.max_residuals.insert(key.clone(), r);
        }
        if let Some(e) = &row.error {
            report.note(key, e.clone());
        }
    }
    let path = args.run.out.join(format!("{}-sweep.json", s.entry.key));
    write_json(&path, &rows)?;
    report.outputs.push(path);
    Ok(report)
}
