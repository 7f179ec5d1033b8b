use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chs_dynbc::config::{load_config, ConfigError, MeshSpec, Parameter, RunConfig, StabilitySpec, StudySpec};
use chs_dynbc::diagnostics::norms::{self, Field};
use chs_dynbc::diagnostics::{stability_experiment, DiagnosticsError, StabilityReport, Trajectory};
use chs_dynbc::experiments::{prolong_interval, Setup};
use chs_dynbc::io::{write_snapshot, write_table, write_timeseries, write_vtk, Cell, IoError};
use chs_dynbc::stepper::{run_simulation, StepError};
use chs_dynbc::verify::{run_criteria, Tolerances};
use log::info;
use rayon::prelude::*;

use crate::{Common, VerifyArgs};

pub const JOBS_ENV: &str = "CHS_DYNBC_JOBS";

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Verification(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

fn diag_failure(e: DiagnosticsError) -> Failure {
    match e {
        DiagnosticsError::Inapplicable(m) => Failure::Config(m),
        other => Failure::Solver(other.to_string()),
    }
}

/// `CHS_DYNBC_JOBS` if set, else `--jobs`, else the available parallelism.
pub fn jobs(flag: Option<usize>) -> Result<usize, Failure> {
    let n = match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::Config(format!("{JOBS_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(Failure::Config("the job count must be at least 1".into()));
    }
    Ok(n)
}

fn pool(flag: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let n = jobs(flag)?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

struct Loaded {
    cfg: RunConfig,
    out: PathBuf,
}

fn load(args: &Common) -> Result<Loaded, Failure> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.output.vtk |= args.vtk;
    let out = cfg.output.dir.clone();
    fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", out.display())))?;
    Ok(Loaded { cfg, out })
}

fn write_failure(dir: &Path, command: &str, e: &StepError) -> Failure {
    let row = vec![command.into(), e.kind().into(), Cell::from(e.is_recoverable().to_string()), e.to_string().into()];
    let path = dir.join("failure.csv");
    if let Err(io) = write_table(&path, &["command", "kind", "recoverable", "message"], &[row]) {
        log::error!("could not write the failure record: {io}");
    }
    Failure::Solver(format!("{e} (record: {})", path.display()))
}

fn write_trajectory(dir: &Path, setup: &Setup, traj: &Trajectory, every: usize, vtk: bool) -> Result<usize, Failure> {
    write_timeseries(&dir.join("timeseries.csv"), &traj.records)?;
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps).map_err(|e| Failure::Config(format!("cannot create {}: {e}", snaps.display())))?;
    let last = traj.len() - 1;
    let mut written = 0;
    for (k, state) in traj.states.iter().enumerate() {
        if k != last && (every == 0 || k % every != 0) {
            continue;
        }
        let step = traj.records[k].step;
        write_snapshot(&snaps.join(format!("snapshot_{step:06}.csv")), &setup.problem.mesh, state)?;
        if vtk {
            write_vtk(&snaps.join(format!("snapshot_{step:06}.vtk")), &setup.problem.mesh, state)?;
        }
        written += 1;
    }
    Ok(written)
}

pub fn run(args: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(args)?;
    let setup = cfg.build()?;
    fs::write(out.join("config.toml"), cfg.to_toml())
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", out.display())))?;
    let traj = run_simulation(&setup.cfg, &setup.problem).map_err(|e| write_failure(&out, "run", &e))?;
    for f in &traj.flags {
        log::warn!("{f}");
    }
    let n = write_trajectory(&out, &setup, &traj, cfg.output.snapshot_every, cfg.output.vtk)?;
    info!("{} steps, {n} snapshots in {}", traj.len() - 1, out.display());
    println!("run: {} steps to t = {}, {n} snapshot(s) in {}", traj.len() - 1, traj.last().t, out.display());
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let mut tol = Tolerances::default();
    if let Some(name) = &args.sabotage {
        tol = tol.sabotaged(name);
    }
    let results = run_criteria(&args.only, &tol).map_err(Failure::Config)?;
    println!("{:>2} {:<18} result", "#", "criterion");
    for r in &results {
        println!("{r}");
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        let rows: Vec<Vec<Cell>> = results
            .iter()
            .map(|r| {
                vec![
                    r.id.into(),
                    r.name.into(),
                    Cell::from(if r.pass { "pass" } else { "fail" }),
                    r.value.into(),
                    r.elapsed.as_secs_f64().into(),
                    r.detail.clone().into(),
                ]
            })
            .collect();
        write_table(&dir.join("verify.csv"), &["id", "name", "result", "value", "seconds", "detail"], &rows)?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failing criteria: {}", failed.join(", "))))
    }
}

pub const STABILITY_COLUMNS: [&str; 10] = [
    "scale",
    "mu_linf_h",
    "mu_l2_v",
    "rho_h1_h",
    "rho_c0_v",
    "rho_gamma_h1_h",
    "rho_gamma_c0_v",
    "lhs",
    "control_l2",
    "ratio",
];

fn stability_row(scale: f64, r: &StabilityReport) -> Vec<Cell> {
    vec![
        scale.into(),
        r.mu_linf_h.into(),
        r.mu_l2_v.into(),
        r.rho_h1_h.into(),
        r.rho_c0_v.into(),
        r.rho_gamma_h1_h.into(),
        r.rho_gamma_c0_v.into(),
        r.lhs.into(),
        r.control_l2.into(),
        r.ratio.map_or(Cell::from(""), Cell::from),
    ]
}

pub fn stability(args: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(args)?;
    let setup = cfg.build()?;
    let spec = cfg.stability.clone().unwrap_or_else(StabilitySpec::default);
    let phi = spec
        .perturbation
        .build(setup.problem.ops.n_boundary())
        .map_err(|e| Failure::Config(format!("stability.perturbation: {e}")))?;
    let base = setup.problem.control.clone();
    let reports: Vec<Result<StabilityReport, DiagnosticsError>> = pool(args.jobs)?.install(|| {
        spec.scales
            .par_iter()
            .map(|&p| stability_experiment(&setup.cfg, &setup.problem, &base, &base.perturbed(p, phi.clone())))
            .collect()
    });
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for (scale, r) in spec.scales.iter().zip(reports) {
        let r = r.map_err(diag_failure)?;
        ratios.extend(r.ratio);
        rows.push(stability_row(*scale, &r));
    }
    write_table(&out.join("stability.csv"), &STABILITY_COLUMNS, &rows)?;
    if let (Some(lo), Some(hi)) = (ratios.iter().cloned().reduce(f64::min), ratios.iter().cloned().reduce(f64::max)) {
        println!("stability: ratio lhs/control in [{lo:.6e}, {hi:.6e}] over {} scale(s)", ratios.len());
    } else {
        println!("stability: controls coincide; all differences are zero");
    }
    Ok(())
}

/// Size attached to a parameter value for order estimates.
fn size_of(parameter: Parameter, value: f64, setup: &Setup) -> f64 {
    match parameter {
        Parameter::Dt => setup.cfg.effective_dt(),
        Parameter::Blocks | Parameter::Elements => 1.0 / value,
        _ => value,
    }
}

fn study_setups(cfg: &RunConfig, study: &StudySpec) -> Result<Vec<Setup>, Failure> {
    study
        .values
        .iter()
        .map(|&v| {
            let c = cfg
                .with_parameter(study.parameter, v)
                .map_err(|e| Failure::Config(format!("{:?} = {v}: {e}", study.parameter)))?;
            c.build().map_err(Failure::from)
        })
        .collect()
}

pub const DIFFERENCE_COLUMNS: [&str; 5] = ["a", "b", "norm", "rho_diff", "mu_diff"];
pub const RICHARDSON_COLUMNS: [&str; 5] = ["field", "a", "b", "ratio", "order"];

pub fn convergence(args: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(args)?;
    let study =
        cfg.convergence.clone().ok_or_else(|| Failure::Config("convergence needs a [convergence] section".into()))?;
    if study.values.len() < 2 {
        return Err(Failure::Config("convergence needs at least two parameter values".into()));
    }
    if study.parameter == Parameter::Elements && !matches!(cfg.mesh, MeshSpec::Interval { .. }) {
        return Err(Failure::Config("element refinement is supported on interval meshes only".into()));
    }
    let setups = study_setups(&cfg, &study)?;
    let runs: Vec<Result<Trajectory, StepError>> =
        pool(args.jobs)?.install(|| setups.par_iter().map(|s| run_simulation(&s.cfg, &s.problem)).collect());
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>().map_err(|e| write_failure(&out, "convergence", &e))?;

    let mut diffs = Vec::new();
    for k in 0..runs.len() - 1 {
        let (coarse, fine) = (&runs[k], &runs[k + 1]);
        let pair = if study.parameter == Parameter::Elements {
            let ops = &setups[k + 1].problem.ops;
            if 2 * (coarse.last().rho.len() - 1) != fine.last().rho.len() - 1 {
                return Err(Failure::Config("element counts must double between consecutive values".into()));
            }
            let (c, f) = (coarse.last(), fine.last());
            let rho = norms::l2(ops, &(prolong_interval(&c.rho) - &f.rho));
            let mu = norms::l2(ops, &(prolong_interval(&c.mu) - &f.mu));
            ("l2_final", rho, mu)
        } else {
            let ops = &setups[0].problem.ops;
            let d = |f| norms::l2_q_difference(ops, coarse, fine, f);
            ("l2_q", d(Field::Rho), d(Field::Mu))
        };
        diffs.push((pair.0, pair.1.map_err(diag_failure)?, pair.2.map_err(diag_failure)?));
    }
    let v = &study.values;
    let rows: Vec<Vec<Cell>> = diffs
        .iter()
        .enumerate()
        .map(|(k, (norm, r, m))| vec![v[k].into(), v[k + 1].into(), (*norm).into(), (*r).into(), (*m).into()])
        .collect();
    write_table(&out.join("convergence.csv"), &DIFFERENCE_COLUMNS, &rows)?;

    let sizes: Vec<f64> = v.iter().zip(&setups).map(|(&x, s)| size_of(study.parameter, x, s)).collect();
    let mut rich = Vec::new();
    for k in 0..diffs.len().saturating_sub(1) {
        for (field, d0, d1) in [("rho", diffs[k].1, diffs[k + 1].1), ("mu", diffs[k].2, diffs[k + 1].2)] {
            let ratio = d0 / d1;
            let order = ratio.ln() / (sizes[k + 1] / sizes[k + 2]).ln();
            println!("convergence: {field} ratio {ratio:.4} (order {order:.3}) between {} and {}", v[k + 1], v[k + 2]);
            rich.push(vec![field.into(), v[k + 1].into(), v[k + 2].into(), ratio.into(), order.into()]);
        }
    }
    write_table(&out.join("richardson.csv"), &RICHARDSON_COLUMNS, &rich)?;
    Ok(())
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "index",
    "parameter",
    "value",
    "status",
    "steps",
    "t_final",
    "energy_total",
    "mu_min",
    "mu_max",
    "rho_min",
    "rho_max",
    "xi_max_abs",
    "error_kind",
    "message",
];

enum PointOutcome {
    Done(Trajectory),
    ConfigError(String),
    SolverError(StepError),
}

pub fn sweep(args: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(args)?;
    let study = cfg.sweep.clone().unwrap_or(StudySpec { parameter: Parameter::Amplitude, values: Vec::new() });
    let name = format!("{:?}", study.parameter).to_lowercase();
    let outcomes: Vec<PointOutcome> = pool(args.jobs)?.install(|| {
        study
            .values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| {
                let setup = match cfg
                    .with_parameter(study.parameter, v)
                    .map_err(|e| e.to_string())
                    .and_then(|c| c.build().map_err(|e| e.to_string()))
                {
                    Ok(s) => s,
                    Err(m) => return PointOutcome::ConfigError(m.split_whitespace().collect::<Vec<_>>().join(" ")),
                };
                match run_simulation(&setup.cfg, &setup.problem) {
                    Ok(t) => {
                        let dir = out.join("sweep").join(format!("point_{i:03}"));
                        if let Err(e) = fs::create_dir_all(&dir).map_err(|e| e.to_string()).and_then(|_| {
                            write_timeseries(&dir.join("timeseries.csv"), &t.records).map_err(|e| e.to_string())
                        }) {
                            return PointOutcome::ConfigError(format!("output: {e}"));
                        }
                        PointOutcome::Done(t)
                    }
                    Err(e) => PointOutcome::SolverError(e),
                }
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, (v, o)) in study.values.iter().zip(&outcomes).enumerate() {
        let mut row: Vec<Cell> = vec![i.into(), name.as_str().into(), (*v).into()];
        match o {
            PointOutcome::Done(t) => {
                let last = t.records.last().expect("a trajectory has its initial record");
                row.extend([
                    Cell::from("ok"),
                    last.step.into(),
                    last.t.into(),
                    last.energy_total.into(),
                    t.records.iter().map(|r| r.mu_min).fold(f64::INFINITY, f64::min).into(),
                    t.records.iter().map(|r| r.mu_max).fold(f64::NEG_INFINITY, f64::max).into(),
                    t.records.iter().map(|r| r.rho_min).fold(f64::INFINITY, f64::min).into(),
                    t.records.iter().map(|r| r.rho_max).fold(f64::NEG_INFINITY, f64::max).into(),
                    t.max_xi_abs().into(),
                    "".into(),
                    "".into(),
                ]);
            }
            PointOutcome::ConfigError(m) | PointOutcome::SolverError(StepError::InvalidConfig(m)) => {
                failures += 1;
                row.push("config_error".into());
                row.extend((0..8).map(|_| Cell::from("")));
                row.extend(["invalid_config".into(), m.clone().into()]);
            }
            PointOutcome::SolverError(e) => {
                failures += 1;
                row.push("solver_error".into());
                row.extend((0..8).map(|_| Cell::from("")));
                row.extend([e.kind().into(), e.to_string().into()]);
            }
        }
        rows.push(row);
    }
    write_table(&out.join("sweep.csv"), &SWEEP_COLUMNS, &rows)?;
    println!("sweep: {} point(s), {failures} failed", rows.len());
    if failures > 0 {
        return Err(Failure::Solver(format!(
            "{failures} sweep point(s) failed; see {}",
            out.join("sweep.csv").display()
        )));
    }
    Ok(())
}
