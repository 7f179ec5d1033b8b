//! Energies, residual identities, norms and the checks built on them.

pub mod norms;
mod stability;
mod trajectory;

pub use norms::Field;
pub use stability::{stability_experiment, StabilityReport};
pub use trajectory::{StepRecord, Trajectory, RECORD_COLUMNS};

use nalgebra::DVector;
use thiserror::Error;

use crate::discretization::Operators;
use crate::graphs::{CouplingFunction, GraphError, Interval};
use crate::linalg::{quad_form, spmv};
use crate::stepper::{ConvergenceReport, Potentials, SimState, StepError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("size mismatch: expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("the two trajectories share no recorded time")]
    NoCommonTimes,
    #[error("not applicable: {0}")]
    Inapplicable(String),
    #[error("runs are on different time grids ({0})")]
    GridMismatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Discrete total free energy
///
/// ```text
/// Ψ = Σ_M [−μ g(ρ) + β̂^ε(ρ) + π̂(ρ)] + ½ρᵀKρ
///   + Σ_{M_Γ} [−u_Γ ρ_Γ + β̂_Γ^{εη}(ρ_Γ) + π̂_Γ(ρ_Γ)] + ½ρ_Γᵀ K_Γ ρ_Γ
/// ```
///
/// with lumped nodal sums. `eps = 0` evaluates the unregularized `β̂`, `β̂_Γ`
/// (infinite outside their domains).
pub fn total_free_energy(
    ops: &Operators,
    state: &SimState,
    u_gamma: &DVector<f64>,
    potentials: &Potentials,
    coupling: &CouplingFunction,
    eps: f64,
    eta: f64,
) -> Result<f64, DiagnosticsError> {
    let n = ops.n_nodes();
    let nb = ops.n_boundary();
    for (v, len) in [(&state.mu, n), (&state.rho, n), (&state.rho_gamma, nb), (u_gamma, nb)] {
        if v.len() != len {
            return Err(DiagnosticsError::SizeMismatch { expected: len, got: v.len() });
        }
    }
    let convex = |p: &crate::graphs::PotentialSplit, level: f64, r: f64| -> Result<f64, GraphError> {
        if level == 0.0 {
            Ok(p.graph.antiderivative(r))
        } else {
            p.graph.yosida_antiderivative(level, r)
        }
    };
    let mut bulk = 0.0;
    for i in 0..n {
        let r = state.rho[i];
        let density = -state.mu[i] * coupling.extended_g(r)
            + convex(&potentials.bulk, eps, r)?
            + potentials.bulk.pi_antiderivative(r);
        bulk += ops.lumped_mass[i] * density;
    }
    let mut surface = 0.0;
    for j in 0..nb {
        let r = state.rho_gamma[j];
        let density =
            -u_gamma[j] * r + convex(&potentials.boundary, eps * eta, r)? + potentials.boundary.pi_antiderivative(r);
        surface += ops.lumped_surface_mass[j] * density;
    }
    Ok(bulk
        + 0.5 * quad_form(&ops.stiffness, &state.rho)
        + surface
        + 0.5 * quad_form(&ops.surface_stiffness, &state.rho_gamma))
}

/// `E = Σ_i m_i (½ + g(ρ_i)) μ_i²`
pub fn mu_energy(ops: &Operators, coupling: &CouplingFunction, state: &SimState) -> f64 {
    state
        .mu
        .iter()
        .zip(state.rho.iter())
        .zip(ops.lumped_mass.iter())
        .map(|((mu, r), m)| m * (0.5 + coupling.extended_g(*r)) * mu * mu)
        .sum()
}

/// `Σ_{s ≤ k} dt_s μ_sᵀKμ_s` for every recorded step `k`.
pub fn cumulative_dissipation(ops: &Operators, traj: &Trajectory) -> Vec<f64> {
    let mut acc = 0.0;
    (0..traj.len())
        .map(|k| {
            acc += traj.dt_at(k) * quad_form(&ops.stiffness, &traj.states[k].mu);
            acc
        })
        .collect()
}

/// Defect of the μ-energy identity, `E(t_k) + Σ_{s≤k} dt μᵀKμ − E(0)`, per step.
pub fn mu_energy_residual(traj: &Trajectory, ops: &Operators, coupling: &CouplingFunction) -> Vec<f64> {
    if traj.is_empty() {
        return Vec::new();
    }
    let e0 = mu_energy(ops, coupling, traj.initial());
    traj.states
        .iter()
        .zip(cumulative_dissipation(ops, traj))
        .map(|(s, d)| mu_energy(ops, coupling, s) + d - e0)
        .collect()
}

/// Residual of the z-form `∂_t(μ/α(ρ)) − α(ρ)Δμ = 0`:
/// `‖M_L(z_k − z_{k−1})/dt + diag(α(ρ_k)) K μ_k‖` in the dual lumped norm.
/// The entry for the initial state is 0.
pub fn z_residual(traj: &Trajectory, ops: &Operators, coupling: &CouplingFunction) -> Vec<f64> {
    let z = |s: &SimState| DVector::from_fn(s.mu.len(), |i, _| s.mu[i] / coupling.alpha(s.rho[i]));
    let mut out = Vec::with_capacity(traj.len());
    if traj.is_empty() {
        return out;
    }
    out.push(0.0);
    for k in 1..traj.len() {
        let (prev, cur) = (&traj.states[k - 1], &traj.states[k]);
        let dt = traj.dt_at(k);
        let kmu = spmv(&ops.stiffness, &cur.mu);
        let dz = (z(cur) - z(prev)) / dt;
        let r = (0..ops.n_nodes())
            .map(|i| {
                let ri = ops.lumped_mass[i] * dz[i] + coupling.alpha(cur.rho[i]) * kmu[i];
                ri * ri / ops.lumped_mass[i]
            })
            .sum::<f64>()
            .sqrt();
        out.push(r);
    }
    out
}

/// `L^{2k}` norms of `ξ` at the final state for `k = 1..=k_max` (at most 8).
pub fn xi_l2k_series(traj: &Trajectory, ops: &Operators, k_max: u32) -> Result<Vec<f64>, DiagnosticsError> {
    (1..=k_max.min(8)).map(|k| norms::l2k(ops, &traj.last().xi, k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityCheck {
    pub min: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Minimum of μ over all steps and nodes; passes above `−1e-10 (1 + ‖μ₀‖∞)`.
pub fn check_positivity(traj: &Trajectory) -> PositivityCheck {
    let scale = traj.states.first().map(|s| norms::linf(&s.mu)).unwrap_or(0.0);
    let tolerance = -1e-10 * (1.0 + scale);
    let min = traj.states.iter().flat_map(|s| s.mu.iter()).fold(f64::INFINITY, |m, &x| m.min(x));
    let min = if min.is_finite() { min } else { 0.0 };
    PositivityCheck { min, tolerance, pass: min >= tolerance }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationCheck {
    pub r_min: f64,
    pub r_max: f64,
    pub margin_lo: f64,
    pub margin_hi: f64,
    pub pass: bool,
}

impl SeparationCheck {
    pub fn margin(&self) -> f64 {
        self.margin_lo.min(self.margin_hi)
    }
}

/// Range of ρ (bulk and boundary) over the trajectory against an open domain
/// `(r₋, r₊)`; passes when both margins exceed `delta`.
pub fn check_separation(traj: &Trajectory, domain: Interval, delta: f64) -> Result<SeparationCheck, DiagnosticsError> {
    if !(domain.lo_open && domain.hi_open && domain.lo.is_finite() && domain.hi.is_finite()) {
        return Err(DiagnosticsError::Inapplicable(format!("separation needs a bounded open domain, got {domain}")));
    }
    let values = traj.states.iter().flat_map(|s| s.rho.iter().chain(s.rho_gamma.iter()));
    let (r_min, r_max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let margin_lo = r_min - domain.lo;
    let margin_hi = domain.hi - r_max;
    Ok(SeparationCheck { r_min, r_max, margin_lo, margin_hi, pass: margin_lo > delta && margin_hi > delta })
}

#[derive(Clone, Debug, PartialEq)]
pub struct XiBoundCheck {
    /// `max_t ‖ξ‖∞` per regularization level.
    pub maxima: Vec<f64>,
    /// Largest over smallest of `maxima`.
    pub variation: f64,
    pub pass: bool,
    pub warning: Option<String>,
}

/// Uniformity of `max_t ‖ξ‖∞` across an ε-sweep: passes when all maxima are
/// finite and vary by less than a factor 2.
pub fn check_xi_bound(report: &ConvergenceReport) -> XiBoundCheck {
    let maxima = report.xi_max.clone();
    if maxima.len() < 2 {
        return XiBoundCheck {
            variation: 1.0,
            pass: true,
            warning: Some("fewer than two regularization levels: the check is vacuous".into()),
            maxima,
        };
    }
    let hi = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
    let variation = if hi == 0.0 { 1.0 } else { hi / lo };
    let finite = maxima.iter().all(|x| x.is_finite());
    XiBoundCheck { pass: finite && variation < 2.0, variation, warning: None, maxima }
}
