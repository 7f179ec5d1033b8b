use serde::Serialize;

use crate::stepper::SimState;

/// Per-step scalar diagnostics; also the row type of the time-series CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub energy_total: f64,
    pub mu_energy: f64,
    pub dissipation_cum: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub xi_max_abs: f64,
    pub newton_iters: usize,
    pub dt_used: f64,
}

/// Column names of the time-series CSV, in order.
pub const RECORD_COLUMNS: [&str; 12] = [
    "step",
    "t",
    "energy_total",
    "mu_energy",
    "dissipation_cum",
    "mu_min",
    "mu_max",
    "rho_min",
    "rho_max",
    "xi_max_abs",
    "newton_iters",
    "dt_used",
];

/// All accepted states of a run, starting with the initial state at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<SimState>,
    pub records: Vec<StepRecord>,
    /// Human-readable warnings raised during the run (e.g. a positivity breach).
    pub flags: Vec<String>,
    pub eps: f64,
    pub eta: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &SimState {
        &self.states[0]
    }

    pub fn last(&self) -> &SimState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Step length that produced state `k` (0 for the initial state).
    pub fn dt_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.states[k].t - self.states[k - 1].t
        }
    }

    /// The recorded state at time `t`, if one exists (up to rounding).
    pub fn state_at(&self, t: f64) -> Option<&SimState> {
        let tol = 1e-9 * (1.0 + t.abs());
        let idx = self.states.partition_point(|s| s.t < t - tol);
        self.states.get(idx).filter(|s| (s.t - t).abs() <= tol)
    }

    pub fn max_xi_abs(&self) -> f64 {
        self.states.iter().flat_map(|s| s.xi.iter().chain(s.xi_gamma.iter())).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.records.iter().map(|r| r.newton_iters).max().unwrap_or(0)
    }
}
