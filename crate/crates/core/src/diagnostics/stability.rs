use nalgebra::DVector;
use serde::Serialize;

use super::{norms, DiagnosticsError, Trajectory};
use crate::discretization::Operators;
use crate::stepper::{run_family, BoundaryControl, Problem, SchemeConfig};

/// Difference norms of two runs driven by different boundary controls.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `max_k ‖μ₁ − μ₂‖_H`
    pub mu_linf_h: f64,
    /// `‖μ₁ − μ₂‖_{L²(0,T;V)}`
    pub mu_l2_v: f64,
    /// `‖ρ₁ − ρ₂‖_{H¹(0,T;H)}`
    pub rho_h1_h: f64,
    /// `max_k ‖ρ₁ − ρ₂‖_V`
    pub rho_c0_v: f64,
    pub rho_gamma_h1_h: f64,
    pub rho_gamma_c0_v: f64,
    /// Sum of the six norms above.
    pub lhs: f64,
    /// `‖u₁ − u₂‖_{L²(Σ)}` on the step grid.
    pub control_l2: f64,
    /// `lhs / control_l2`; `None` when the controls coincide on the grid.
    pub ratio: Option<f64>,
}

fn weighted_sq(w: &DVector<f64>, v: &DVector<f64>) -> f64 {
    v.iter().zip(w.iter()).map(|(x, m)| m * x * x).sum()
}

/// Run the problem under `u1` and `u2` on identical grids and data and
/// measure the left and right sides of the stability estimate.
///
/// Refuses potentials whose graph is multivalued (double obstacle).
pub fn stability_experiment(
    cfg: &SchemeConfig,
    problem: &Problem,
    u1: &BoundaryControl,
    u2: &BoundaryControl,
) -> Result<StabilityReport, DiagnosticsError> {
    for p in [&problem.potentials.bulk, &problem.potentials.boundary] {
        if !p.graph.is_smooth_in_interior() {
            return Err(DiagnosticsError::Inapplicable(format!(
                "stability estimate needs smooth potentials, got {}",
                p.name
            )));
        }
    }
    let mut first = problem.clone();
    first.control = u1.clone();
    let mut second = problem.clone();
    second.control = u2.clone();
    let runs = run_family(vec![(cfg.clone(), first), (cfg.clone(), second)])?;
    compare(&problem.ops, &runs[0], &runs[1], u1, u2)
}

fn compare(
    ops: &Operators,
    a: &Trajectory,
    b: &Trajectory,
    u1: &BoundaryControl,
    u2: &BoundaryControl,
) -> Result<StabilityReport, DiagnosticsError> {
    if a.len() != b.len() || a.states.iter().zip(&b.states).any(|(x, y)| x.t != y.t) {
        return Err(DiagnosticsError::GridMismatch(format!("{} vs {} states", a.len(), b.len())));
    }
    let nb = ops.n_boundary();
    let (mut mu_linf, mut mu_v) = (0.0_f64, 0.0);
    let (mut rho_h1, mut rho_c0) = (0.0, 0.0_f64);
    let (mut g_h1, mut g_c0) = (0.0, 0.0_f64);
    let mut control = 0.0;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for (k, (x, y)) in a.states.iter().zip(&b.states).enumerate() {
        let dmu = &x.mu - &y.mu;
        let drho = &x.rho - &y.rho;
        let dg = &x.rho_gamma - &y.rho_gamma;
        mu_linf = mu_linf.max(norms::l2(ops, &dmu)?);
        rho_c0 = rho_c0.max(norms::v_norm(ops, &drho)?);
        g_c0 = g_c0.max(norms::v_norm_surface(ops, &dg)?);
        if let Some((p_rho, p_g)) = &prev {
            let dt = a.dt_at(k);
            mu_v += dt * norms::v_norm(ops, &dmu)?.powi(2);
            rho_h1 +=
                dt * (weighted_sq(&ops.lumped_mass, &drho) + weighted_sq(&ops.lumped_mass, &((&drho - p_rho) / dt)));
            g_h1 += dt
                * (weighted_sq(&ops.lumped_surface_mass, &dg)
                    + weighted_sq(&ops.lumped_surface_mass, &((&dg - p_g) / dt)));
            let du = u1.values(x.t, nb) - u2.values(x.t, nb);
            control += dt * weighted_sq(&ops.lumped_surface_mass, &du);
        }
        prev = Some((drho, dg));
    }
    let (mu_v, rho_h1, g_h1, control) = (mu_v.sqrt(), rho_h1.sqrt(), g_h1.sqrt(), control.sqrt());
    let lhs = mu_linf + mu_v + rho_h1 + rho_c0 + g_h1 + g_c0;
    Ok(StabilityReport {
        mu_linf_h: mu_linf,
        mu_l2_v: mu_v,
        rho_h1_h: rho_h1,
        rho_c0_v: rho_c0,
        rho_gamma_h1_h: g_h1,
        rho_gamma_c0_v: g_c0,
        lhs,
        control_l2: control,
        ratio: (control > 0.0).then(|| lhs / control),
    })
}
