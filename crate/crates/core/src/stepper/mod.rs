//! Time integration of the regularized delay scheme.
//!
//! On each step the order parameter is advanced first, with the Yosida maps
//! `β^ε`, `β_Γ^{εη}` implicit and the Lipschitz terms explicit, using the
//! chemical potential delayed by `τ = T/N`. The chemical potential is then
//! advanced by a mass-lumped linear solve whose matrix is an M-matrix
//! whenever the diagonal coefficient `1 + 2g + g'Δρ` stays positive.

mod control;
mod driver;
mod history;
mod steps;

pub use control::BoundaryControl;
pub use driver::{
    refine_blocks, refine_configs, refine_eps, run_family, run_simulation, ConvergenceReport, PairDifference, Problem,
};
pub use history::{delayed_mu, History};
pub use steps::{
    linear_dynamic_step, mu_step, rho_jacobian, rho_step, LinearStepOutput, RhoUpdate, StepContext, Workspace,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{MeshError, Operators};
use crate::graphs::{GraphError, PotentialSplit};
use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("Newton did not converge at t = {t}: residual {residual:e} after {iterations} iterations")]
    NewtonNonConvergence { t: f64, iterations: usize, residual: f64 },
    #[error("reduce dt: mu-step coefficient 1 + 2g + g'(rho_new - rho_old) = {value} <= 0 at node {node}")]
    NonPositiveCoefficient { node: usize, value: f64 },
    #[error("time step underflow at t = {t}: dt = {dt:e} below dt_min = {dt_min:e} ({cause})")]
    DtUnderflow { t: f64, dt: f64, dt_min: f64, cause: String },
    #[error("history does not cover the delayed time {requested} (oldest retained: {oldest})")]
    HistoryGap { requested: f64, oldest: f64 },
    #[error("history times must increase strictly: {last} then {next}")]
    HistoryOrder { last: f64, next: f64 },
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("{code}: {message}")]
    Assumption { code: &'static str, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl StepError {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            StepError::NewtonNonConvergence { .. } => "newton_non_convergence",
            StepError::NonPositiveCoefficient { .. } => "non_positive_coefficient",
            StepError::DtUnderflow { .. } => "dt_underflow",
            StepError::HistoryGap { .. } => "history_gap",
            StepError::HistoryOrder { .. } => "history_order",
            StepError::InvalidConfig(_) => "invalid_config",
            StepError::Assumption { .. } => "assumption",
            StepError::Graph(_) => "graph",
            StepError::Linalg(_) => "linalg",
            StepError::Mesh(_) => "mesh",
        }
    }

    /// Failures that a smaller time step may cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            StepError::NewtonNonConvergence { .. } | StepError::NonPositiveCoefficient { .. } | StepError::Linalg(_)
        )
    }
}

/// How the μ-equation's time-derivative mass is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MuMass {
    /// Diagonal mass; yields the discrete maximum principle.
    #[default]
    Lumped,
    /// Exactly integrated coefficient-weighted mass.
    Consistent,
}

/// Scheme parameters: Yosida level, delay blocks, step size and Newton controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub eps: f64,
    pub n_blocks: usize,
    pub dt: f64,
    pub final_time: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub dt_min: f64,
    pub eta: f64,
    pub c_gamma: f64,
    pub mu_mass: MuMass,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            eps: 0.01,
            n_blocks: 10,
            dt: 1e-3,
            final_time: 0.1,
            newton_tol: 1e-10,
            newton_max: 50,
            dt_min: 1e-8,
            eta: 1.0,
            c_gamma: 0.0,
            mu_mass: MuMass::Lumped,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |m: String| Err(StepError::InvalidConfig(m));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1".into());
        }
        if !(self.final_time > 0.0) {
            return bad(format!("final_time must be positive, got {}", self.final_time));
        }
        if !(self.dt > 0.0) || self.dt > self.tau() * (1.0 + 1e-12) {
            return bad(format!("need 0 < dt <= tau = {}, got dt = {}", self.tau(), self.dt));
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return bad("newton_tol must be positive and newton_max at least 1".into());
        }
        if !(self.dt_min > 0.0) || self.dt_min > self.dt {
            return bad(format!("need 0 < dt_min <= dt, got dt_min = {}", self.dt_min));
        }
        if !(self.eta > 0.0) || !(self.c_gamma >= 0.0) {
            return bad("need eta > 0 and c_gamma >= 0".into());
        }
        Ok(())
    }

    /// The delay `τ = T/N`.
    pub fn tau(&self) -> f64 {
        self.final_time / self.n_blocks as f64
    }

    /// Steps per delay block; the step actually used is `τ / steps_per_block`.
    pub fn steps_per_block(&self) -> usize {
        ((self.tau() / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.tau() / self.steps_per_block() as f64
    }
}

/// Bulk and boundary potentials.
#[derive(Clone, Debug)]
pub struct Potentials {
    pub bulk: PotentialSplit,
    pub boundary: PotentialSplit,
}

impl Potentials {
    /// Same family in the bulk and on the boundary.
    pub fn same(p: PotentialSplit) -> Self {
        Potentials { bulk: p.clone(), boundary: p }
    }
}

/// Fields at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub mu: DVector<f64>,
    pub rho: DVector<f64>,
    /// Always `trace(rho)`.
    pub rho_gamma: DVector<f64>,
    /// `β^ε(rho)`
    pub xi: DVector<f64>,
    /// `β_Γ^{εη}(rho_gamma)`
    pub xi_gamma: DVector<f64>,
}

impl SimState {
    /// Build a state from `μ`, `ρ`, evaluating the trace and the Yosida fields.
    pub fn new(
        ops: &Operators,
        potentials: &Potentials,
        eps: f64,
        eta: f64,
        t: f64,
        mu: DVector<f64>,
        rho: DVector<f64>,
    ) -> Result<SimState, StepError> {
        let rho_gamma = ops.trace(&rho)?;
        let xi = map_values(&rho, |r| potentials.bulk.graph.yosida(eps, r))?;
        let xi_gamma = map_values(&rho_gamma, |r| potentials.boundary.graph.yosida(eps * eta, r))?;
        Ok(SimState { t, mu, rho, rho_gamma, xi, xi_gamma })
    }
}

pub(crate) fn map_values(
    v: &DVector<f64>,
    f: impl Fn(f64) -> Result<f64, GraphError>,
) -> Result<DVector<f64>, GraphError> {
    let data = v.iter().map(|&x| f(x)).collect::<Result<Vec<f64>, _>>()?;
    Ok(DVector::from_vec(data))
}
