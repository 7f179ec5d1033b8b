use std::collections::VecDeque;

use nalgebra::DVector;

use super::StepError;

const TIME_TOL: f64 = 1e-10;

/// Recorded `(t, μ(t))` snapshots, pruned to what future delayed lookups need.
#[derive(Clone, Debug, Default)]
pub struct History {
    entries: VecDeque<(f64, DVector<f64>)>,
}

impl History {
    pub fn new() -> Self {
        History { entries: VecDeque::new() }
    }

    pub fn push(&mut self, t: f64, mu: DVector<f64>) -> Result<(), StepError> {
        if let Some(&(last, _)) = self.entries.back() {
            if !(t > last) {
                return Err(StepError::HistoryOrder { last, next: t });
            }
        }
        self.entries.push_back((t, mu));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn oldest_time(&self) -> Option<f64> {
        self.entries.front().map(|e| e.0)
    }

    pub fn latest_time(&self) -> Option<f64> {
        self.entries.back().map(|e| e.0)
    }

    /// Snapshot at the largest stored time `≤ s` (piecewise-constant-left).
    pub fn at_or_before(&self, s: f64) -> Result<&DVector<f64>, StepError> {
        let tol = TIME_TOL * (1.0 + s.abs());
        let idx = self.entries.partition_point(|(t, _)| *t <= s + tol);
        if idx == 0 {
            return Err(StepError::HistoryGap { requested: s, oldest: self.oldest_time().unwrap_or(f64::NAN) });
        }
        Ok(&self.entries[idx - 1].1)
    }

    /// Drop snapshots that no lookup at a time `≥ s` can return.
    pub fn prune_before(&mut self, s: f64) {
        let tol = TIME_TOL * (1.0 + s.abs());
        while self.entries.len() >= 2 && self.entries[1].0 <= s + tol {
            self.entries.pop_front();
        }
    }
}

/// `T_τ(μ)(t)`: `μ(t − τ)` for `t > τ`, `μ(0)` for `t ≤ τ`.
pub fn delayed_mu(history: &History, tau: f64, t: f64) -> Result<DVector<f64>, StepError> {
    let tol = TIME_TOL * (1.0 + t.abs());
    if t <= tau + tol {
        return match history.entries.front() {
            Some((t0, mu0)) if t0.abs() <= tol => Ok(mu0.clone()),
            _ => Err(StepError::HistoryGap { requested: 0.0, oldest: history.oldest_time().unwrap_or(f64::NAN) }),
        };
    }
    history.at_or_before(t - tau).cloned()
}
