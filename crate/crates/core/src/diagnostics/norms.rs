//! Discrete counterparts of `H = L²(Ω)`, `V = H¹(Ω)`, `H_Γ`, `V_Γ` and the
//! space-time norms built on them.
//!
//! * spatial `L²`: lumped-mass weighted, `(Σ mᵢ vᵢ²)^{1/2}`
//! * `V`-norm: `(vᵀMv + vᵀKv)^{1/2}`
//! * `L∞(0,t;H)`: maximum over recorded steps of the spatial `L²`
//! * `L²(0,t;X)`: right-endpoint rule `(Σ_k dt_k ‖v_k‖²_X)^{1/2}`

use nalgebra::DVector;

use super::{DiagnosticsError, Trajectory};
use crate::discretization::Operators;
use crate::linalg::quad_form;
use crate::stepper::SimState;

/// Which field of a state a norm is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Mu,
    Rho,
    Xi,
    RhoGamma,
}

impl Field {
    pub fn of<'a>(&self, s: &'a SimState) -> &'a DVector<f64> {
        match self {
            Field::Mu => &s.mu,
            Field::Rho => &s.rho,
            Field::Xi => &s.xi,
            Field::RhoGamma => &s.rho_gamma,
        }
    }

    fn on_boundary(&self) -> bool {
        matches!(self, Field::RhoGamma)
    }
}

fn check(v: &DVector<f64>, n: usize) -> Result<(), DiagnosticsError> {
    if v.len() != n {
        return Err(DiagnosticsError::SizeMismatch { expected: n, got: v.len() });
    }
    Ok(())
}

pub fn l2(ops: &Operators, v: &DVector<f64>) -> Result<f64, DiagnosticsError> {
    check(v, ops.n_nodes())?;
    Ok(v.iter().zip(ops.lumped_mass.iter()).map(|(x, m)| m * x * x).sum::<f64>().sqrt())
}

pub fn l2_surface(ops: &Operators, w: &DVector<f64>) -> Result<f64, DiagnosticsError> {
    check(w, ops.n_boundary())?;
    Ok(w.iter().zip(ops.lumped_surface_mass.iter()).map(|(x, m)| m * x * x).sum::<f64>().sqrt())
}

/// `(vᵀKv)^{1/2}`
pub fn h1_seminorm(ops: &Operators, v: &DVector<f64>) -> Result<f64, DiagnosticsError> {
    check(v, ops.n_nodes())?;
    Ok(quad_form(&ops.stiffness, v).max(0.0).sqrt())
}

/// `(vᵀMv + vᵀKv)^{1/2}`
pub fn v_norm(ops: &Operators, v: &DVector<f64>) -> Result<f64, DiagnosticsError> {
    check(v, ops.n_nodes())?;
    Ok((quad_form(&ops.mass, v) + quad_form(&ops.stiffness, v)).max(0.0).sqrt())
}

/// `(wᵀM_Γw + wᵀK_Γw)^{1/2}`
pub fn v_norm_surface(ops: &Operators, w: &DVector<f64>) -> Result<f64, DiagnosticsError> {
    check(w, ops.n_boundary())?;
    Ok((quad_form(&ops.surface_mass, w) + quad_form(&ops.surface_stiffness, w)).max(0.0).sqrt())
}

pub fn linf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Discrete `L^{2k}` norm; its growth in `k` diagnoses unboundedness.
pub fn l2k(ops: &Operators, v: &DVector<f64>, k: u32) -> Result<f64, DiagnosticsError> {
    check(v, ops.n_nodes())?;
    let p = 2 * k as i32;
    let scale = linf(v);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = v.iter().zip(ops.lumped_mass.iter()).map(|(x, m)| m * (x / scale).powi(p)).sum();
    Ok(scale * s.powf(1.0 / p as f64))
}

fn spatial_l2(ops: &Operators, field: Field, v: &DVector<f64>) -> Result<f64, DiagnosticsError> {
    if field.on_boundary() {
        l2_surface(ops, v)
    } else {
        l2(ops, v)
    }
}

/// `L²(Q)` (or `L²(Σ)` for boundary fields) of one trajectory field.
pub fn l2_q(ops: &Operators, traj: &Trajectory, field: Field) -> Result<f64, DiagnosticsError> {
    let mut acc = 0.0;
    for k in 1..traj.len() {
        acc += traj.dt_at(k) * spatial_l2(ops, field, field.of(&traj.states[k]))?.powi(2);
    }
    Ok(acc.sqrt())
}

/// `L∞(0,T;H)`
pub fn linf_h(ops: &Operators, traj: &Trajectory, field: Field) -> Result<f64, DiagnosticsError> {
    traj.states.iter().try_fold(0.0, |m, s| Ok(f64::max(m, spatial_l2(ops, field, field.of(s))?)))
}

/// `L²(0,T;V)`
pub fn l2_v(ops: &Operators, traj: &Trajectory, field: Field) -> Result<f64, DiagnosticsError> {
    let mut acc = 0.0;
    for k in 1..traj.len() {
        let v = field.of(&traj.states[k]);
        let n = if field.on_boundary() { v_norm_surface(ops, v)? } else { v_norm(ops, v)? };
        acc += traj.dt_at(k) * n * n;
    }
    Ok(acc.sqrt())
}

/// Space-time `L²` distance between two runs on the same mesh, summed over
/// the times of `coarse` that are also recorded in `fine`.
pub fn l2_q_difference(
    ops: &Operators,
    coarse: &Trajectory,
    fine: &Trajectory,
    field: Field,
) -> Result<f64, DiagnosticsError> {
    let mut acc = 0.0;
    let mut prev_t = 0.0;
    let mut matched = 0;
    for s in coarse.states.iter().skip(1) {
        let Some(other) = fine.state_at(s.t) else { continue };
        let diff = field.of(s) - field.of(other);
        acc += (s.t - prev_t) * spatial_l2(ops, field, &diff)?.powi(2);
        prev_t = s.t;
        matched += 1;
    }
    if matched == 0 {
        return Err(DiagnosticsError::NoCommonTimes);
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Mesh;

    #[test]
    fn constant_fields() {
        let ops = Operators::assemble(&Mesh::interval(8, 3.0).unwrap()).unwrap();
        let zero = DVector::zeros(9);
        assert_eq!(l2(&ops, &zero).unwrap(), 0.0);
        assert_eq!(h1_seminorm(&ops, &zero).unwrap(), 0.0);
        assert_eq!(linf(&zero), 0.0);
        let c = DVector::from_element(9, -2.0);
        assert!((l2(&ops, &c).unwrap() - 2.0 * 3.0_f64.sqrt()).abs() < 1e-14);
        assert!(h1_seminorm(&ops, &c).unwrap() < 1e-7);
        assert!((l2k(&ops, &c, 4).unwrap() - 2.0 * 3.0_f64.powf(1.0 / 8.0)).abs() < 1e-12);
        assert!(l2(&ops, &DVector::zeros(3)).is_err());
    }
}
