use std::sync::Arc;
use std::thread;

use log::{debug, warn};
use nalgebra::DVector;

use super::{
    delayed_mu, BoundaryControl, History, Potentials, SchemeConfig, SimState, StepContext, StepError, Workspace,
};
use crate::diagnostics::{self, norms, DiagnosticsError, StepRecord, Trajectory};
use crate::discretization::{Mesh, MeshError, Operators};
use crate::graphs::{check_domination, CouplingFunction, Interval, MonotoneGraph};
use crate::linalg::quad_form;

/// Everything a run needs besides the scheme parameters.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Arc<Mesh>,
    pub ops: Arc<Operators>,
    pub potentials: Potentials,
    pub coupling: CouplingFunction,
    pub mu0: DVector<f64>,
    pub rho0: DVector<f64>,
    pub control: BoundaryControl,
}

impl Problem {
    /// Assemble the operators of `mesh`; data default to zero.
    pub fn new(mesh: Mesh, potentials: Potentials, coupling: CouplingFunction) -> Result<Problem, MeshError> {
        let ops = Operators::assemble(&mesh)?;
        let n = mesh.n_nodes();
        Ok(Problem {
            mesh: Arc::new(mesh),
            ops: Arc::new(ops),
            potentials,
            coupling,
            mu0: DVector::zeros(n),
            rho0: DVector::zeros(n),
            control: BoundaryControl::Zero,
        })
    }

    /// Nodal values of a function of the coordinates.
    pub fn nodal(&self, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.mesh.n_nodes(), self.mesh.coords().iter().map(|p| f(p[0], p[1])))
    }

    /// Check the initial data, control and potentials against the standing
    /// assumptions before a run.
    pub fn validate(&self, cfg: &SchemeConfig) -> Result<(), StepError> {
        let n = self.ops.n_nodes();
        for v in [&self.mu0, &self.rho0] {
            if v.len() != n {
                return Err(MeshError::SizeMismatch { expected: n, got: v.len() }.into());
            }
        }
        let assumption = |code: &'static str, message: String| Err(StepError::Assumption { code, message });
        if let Some(bad) = self.mu0.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return assumption("(A1)", format!("μ₀ has negative or non-finite entries (found {bad})"));
        }
        if let Some(bad) = self.rho0.iter().find(|x| !x.is_finite()) {
            return assumption("(A1)", format!("ρ₀ has non-finite entries (found {bad})"));
        }
        let trace = self.ops.trace(&self.rho0)?;
        for (label, graph, values) in
            [("β", &self.potentials.bulk.graph, &self.rho0), ("β_Γ", &self.potentials.boundary.graph, &trace)]
        {
            for &r in values.iter() {
                if graph.minimal_section(r).map(f64::is_finite) != Ok(true) {
                    return assumption(
                        "(A6)",
                        format!("{label}°(ρ₀) must be finite; ρ₀ = {r} lies outside {}", graph.domain()),
                    );
                }
            }
        }
        let sup = self.control.sup_norm(cfg.final_time, self.ops.n_boundary(), 400);
        let h1 = self.control.h1_time_norm(cfg.final_time, &self.ops.lumped_surface_mass, 400);
        if !(sup.is_finite() && h1.is_finite()) {
            return assumption("(A2)", "u_Γ must lie in H¹(0,T;H_Γ)".into());
        }
        let mut samples = domination_samples(&self.potentials.boundary.graph);
        samples.extend(trace.iter().copied());
        let report = check_domination(
            &self.potentials.bulk.graph,
            &self.potentials.boundary.graph,
            cfg.eta,
            cfg.c_gamma,
            cfg.eps,
            &samples,
        )?;
        if !report.pass {
            let culprit = report.samples.iter().find(|s| !(s.pass && s.yosida_pass)).map(|s| s.r);
            return assumption(
                "(A7)",
                match culprit {
                    _ if !report.domain_ok => "D(β_Γ) is not contained in D(β)".to_string(),
                    Some(r) => {
                        format!("β is not dominated by β_Γ with η = {}, C_Γ = {} (at r = {r})", cfg.eta, cfg.c_gamma)
                    }
                    None => "β is not dominated by β_Γ".to_string(),
                },
            );
        }
        Ok(())
    }
}

/// Sample points across `D(β_Γ)` (truncated to `[−10, 10]`, kept off open ends).
fn domination_samples(graph: &MonotoneGraph) -> Vec<f64> {
    let d: Interval = graph.domain();
    let lo = if d.lo.is_finite() { d.lo } else { -10.0 };
    let hi = if d.hi.is_finite() { d.hi } else { 10.0 };
    let pad = 1e-3 * (hi - lo);
    let lo = if d.lo_open && d.lo.is_finite() { lo + pad } else { lo };
    let hi = if d.hi_open && d.hi.is_finite() { hi - pad } else { hi };
    (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect()
}

fn diag_err(e: DiagnosticsError) -> StepError {
    match e {
        DiagnosticsError::Graph(g) => StepError::Graph(g),
        DiagnosticsError::Step(s) => s,
        other => StepError::InvalidConfig(other.to_string()),
    }
}

struct Runner<'a> {
    cfg: &'a SchemeConfig,
    problem: &'a Problem,
    ctx: StepContext<'a>,
    workspace: Workspace,
    history: History,
    traj: Trajectory,
    dissipation: f64,
    negativity_floor: f64,
    tau: f64,
}

impl Runner<'_> {
    fn record(&mut self, newton_iters: usize, dt_used: f64) -> Result<(), StepError> {
        let state = self.traj.last();
        let ops = self.ctx.ops;
        let u = self.problem.control.values(state.t, ops.n_boundary());
        let energy_total = diagnostics::total_free_energy(
            ops,
            state,
            &u,
            self.ctx.potentials,
            self.ctx.coupling,
            self.ctx.eps,
            self.ctx.eta,
        )
        .map_err(diag_err)?;
        let extrema = |v: &DVector<f64>| (v.min(), v.max());
        let (mu_min, mu_max) = extrema(&state.mu);
        let (rho_min, rho_max) = extrema(&state.rho);
        let xi_max_abs = norms::linf(&state.xi).max(norms::linf(&state.xi_gamma));
        let record = StepRecord {
            step: self.traj.records.len(),
            t: state.t,
            energy_total,
            mu_energy: diagnostics::mu_energy(ops, self.ctx.coupling, state),
            dissipation_cum: self.dissipation,
            mu_min,
            mu_max,
            rho_min,
            rho_max,
            xi_max_abs,
            newton_iters,
            dt_used,
        };
        if mu_min < self.negativity_floor {
            let msg = format!("mu dropped to {mu_min:e} at t = {}", state.t);
            warn!("{msg}");
            self.traj.flags.push(msg);
        }
        self.traj.records.push(record);
        Ok(())
    }

    /// One ρ-then-μ step to `target`.
    fn try_step(&mut self, target: f64) -> Result<(), StepError> {
        let old = self.traj.last();
        let dt = target - old.t;
        let mu_delay = delayed_mu(&self.history, self.tau, target)?;
        let u = self.problem.control.values(target, self.ctx.ops.n_boundary());
        let up =
            self.workspace.rho_step(&self.ctx, old, &mu_delay, &u, dt, self.cfg.newton_tol, self.cfg.newton_max)?;
        let mu = self.workspace.mu_step(
            self.ctx.ops,
            self.ctx.coupling,
            &up.rho,
            &old.rho,
            &old.mu,
            dt,
            self.cfg.mu_mass,
        )?;
        self.dissipation += dt * quad_form(&self.ctx.ops.stiffness, &mu);
        self.history.push(target, mu.clone())?;
        self.history.prune_before(target - self.tau);
        self.traj.states.push(SimState {
            t: target,
            mu,
            rho: up.rho,
            rho_gamma: up.rho_gamma,
            xi: up.xi,
            xi_gamma: up.xi_gamma,
        });
        self.record(up.iterations, dt)
    }

    /// Advance to `target`, halving the step on recoverable failures.
    fn advance(&mut self, target: f64) -> Result<(), StepError> {
        match self.try_step(target) {
            Ok(()) => Ok(()),
            Err(e) if e.is_recoverable() => {
                let t = self.traj.last().t;
                let half = 0.5 * (target - t);
                if half < self.cfg.dt_min {
                    return Err(StepError::DtUnderflow { t, dt: half, dt_min: self.cfg.dt_min, cause: e.to_string() });
                }
                debug!("halving step at t = {t}: {e}");
                self.advance(t + half)?;
                self.advance(target)
            }
            Err(e) => Err(e),
        }
    }
}

/// March the scheme from `t = 0` to `T` block by block with delay `τ = T/N`.
pub fn run_simulation(cfg: &SchemeConfig, problem: &Problem) -> Result<Trajectory, StepError> {
    cfg.validate()?;
    problem.validate(cfg)?;
    let ops: &Operators = &problem.ops;
    let initial =
        SimState::new(ops, &problem.potentials, cfg.eps, cfg.eta, 0.0, problem.mu0.clone(), problem.rho0.clone())?;
    let mut history = History::new();
    history.push(0.0, initial.mu.clone())?;
    let negativity_floor = -10.0 * f64::EPSILON * norms::linf(&problem.mu0);
    let mut runner = Runner {
        cfg,
        problem,
        ctx: StepContext {
            ops,
            potentials: &problem.potentials,
            coupling: &problem.coupling,
            eps: cfg.eps,
            eta: cfg.eta,
        },
        workspace: Workspace::new(),
        history,
        traj: Trajectory { states: vec![initial], records: Vec::new(), flags: Vec::new(), eps: cfg.eps, eta: cfg.eta },
        dissipation: 0.0,
        negativity_floor,
        tau: cfg.tau(),
    };
    runner.record(0, 0.0)?;
    let total = cfg.n_blocks * cfg.steps_per_block();
    for k in 1..=total {
        let target = cfg.final_time * k as f64 / total as f64;
        runner.advance(target)?;
    }
    Ok(runner.traj)
}

/// Independent runs, executed concurrently; results keep the input order.
pub fn run_family(runs: Vec<(SchemeConfig, Problem)>) -> Result<Vec<Trajectory>, StepError> {
    let workers = thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(1);
    let mut out = Vec::with_capacity(runs.len());
    for chunk in runs.chunks(workers) {
        let results: Vec<Result<Trajectory, StepError>> = thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|(c, p)| s.spawn(move || run_simulation(c, p))).collect();
            handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

/// Space-time differences between consecutive members of a refinement family.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDifference {
    pub a: f64,
    pub b: f64,
    pub rho_l2q: f64,
    pub mu_l2q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// The refined parameter's values, in run order.
    pub values: Vec<f64>,
    pub differences: Vec<PairDifference>,
    /// `max_t ‖ξ‖∞` per run (bulk and boundary).
    pub xi_max: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

/// Run one configuration per value and difference consecutive runs in
/// `L²(Q)` over the times the coarser member recorded.
pub fn refine_configs(
    problem: &Problem,
    cfgs: Vec<SchemeConfig>,
    values: Vec<f64>,
) -> Result<ConvergenceReport, StepError> {
    if cfgs.len() != values.len() {
        return Err(StepError::InvalidConfig("one value per configuration is required".into()));
    }
    let trajectories = run_family(cfgs.into_iter().map(|c| (c, problem.clone())).collect())?;
    let mut differences = Vec::new();
    for (i, w) in trajectories.windows(2).enumerate() {
        let diff = |f| norms::l2_q_difference(&problem.ops, &w[0], &w[1], f).map_err(diag_err);
        differences.push(PairDifference {
            a: values[i],
            b: values[i + 1],
            rho_l2q: diff(norms::Field::Rho)?,
            mu_l2q: diff(norms::Field::Mu)?,
        });
    }
    let xi_max = trajectories.iter().map(Trajectory::max_xi_abs).collect();
    Ok(ConvergenceReport { values, differences, xi_max, trajectories })
}

/// ε-refinement: one run per level, levels strictly decreasing.
pub fn refine_eps(cfg: &SchemeConfig, problem: &Problem, eps_list: &[f64]) -> Result<ConvergenceReport, StepError> {
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(StepError::InvalidConfig(format!(
            "eps list must be positive and strictly decreasing: {eps_list:?}"
        )));
    }
    let cfgs = eps_list.iter().map(|&eps| SchemeConfig { eps, ..cfg.clone() }).collect();
    refine_configs(problem, cfgs, eps_list.to_vec())
}

/// τ-refinement: one run per block count, counts strictly increasing.
pub fn refine_blocks(cfg: &SchemeConfig, problem: &Problem, blocks: &[usize]) -> Result<ConvergenceReport, StepError> {
    if blocks.windows(2).any(|w| !(w[1] > w[0])) || blocks.contains(&0) {
        return Err(StepError::InvalidConfig(format!("block counts must be positive and increasing: {blocks:?}")));
    }
    let cfgs = blocks.iter().map(|&n_blocks| SchemeConfig { n_blocks, ..cfg.clone() }).collect();
    refine_configs(problem, cfgs, blocks.iter().map(|&n| n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::PotentialSplit;

    fn problem(n: usize) -> Problem {
        Problem::new(
            Mesh::interval(n, 1.0).unwrap(),
            Potentials::same(PotentialSplit::regular()),
            CouplingFunction::default_coupling(),
        )
        .unwrap()
    }

    fn cfg() -> SchemeConfig {
        SchemeConfig { final_time: 0.02, dt: 2e-3, n_blocks: 2, ..SchemeConfig::default() }
    }

    #[test]
    fn zero_data_stays_zero() {
        let traj = run_simulation(&cfg(), &problem(8)).unwrap();
        assert_eq!(traj.len(), 11);
        for s in &traj.states {
            assert_eq!(s.mu.amax(), 0.0);
            assert_eq!(s.rho.amax(), 0.0);
        }
        assert!(traj.flags.is_empty());
        assert!((traj.last().t - 0.02).abs() < 1e-15);
    }

    #[test]
    fn assumption_violations_are_named() {
        let mut p = problem(4);
        p.mu0[2] = -1.0;
        let e = run_simulation(&cfg(), &p).unwrap_err();
        assert!(e.to_string().starts_with("(A1)"), "{e}");

        let mut p = problem(4);
        p.potentials = Potentials::same(PotentialSplit::logarithmic(2.0).unwrap());
        p.rho0[0] = 1.0;
        let e = run_simulation(&cfg(), &p).unwrap_err();
        assert!(e.to_string().starts_with("(A6)"), "{e}");

        let mut p = problem(4);
        p.potentials.boundary = PotentialSplit::obstacle(1.0).unwrap();
        let e = run_simulation(&cfg(), &p).unwrap_err();
        assert!(e.to_string().starts_with("(A7)"), "{e}");
    }

    #[test]
    fn single_eps_gives_empty_table() {
        let r = refine_eps(&cfg(), &problem(4), &[0.1]).unwrap();
        assert!(r.differences.is_empty());
        assert_eq!(r.xi_max.len(), 1);
        assert!(refine_eps(&cfg(), &problem(4), &[0.1, 0.2]).is_err());
    }
}
