//! Reference setups and self-convergence studies.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::diagnostics::norms;
use crate::discretization::Mesh;
use crate::graphs::{CouplingFunction, PotentialSplit};
use crate::stepper::{run_family, BoundaryControl, Potentials, Problem, SchemeConfig, StepError};

/// A scheme configuration together with the problem it runs.
#[derive(Clone, Debug)]
pub struct Setup {
    pub cfg: SchemeConfig,
    pub problem: Problem,
}

/// `[0, 1]` with `n` elements; regular potential, default `g`,
/// `μ₀ = 1 + cos(2πx)`, `ρ₀ = 0.6 cos(πx)`, `u_Γ = 0.5 sin(20πt)`;
/// `T = 0.1`, `dt = 1e-3`, `N = 10`, `ε = 0.01`.
pub fn reference_setup(n: usize) -> Setup {
    let mesh = Mesh::interval(n, 1.0).expect("n >= 2");
    let mut problem =
        Problem::new(mesh, Potentials::same(PotentialSplit::regular()), CouplingFunction::default_coupling())
            .expect("interval meshes assemble");
    problem.mu0 = problem.nodal(|x, _| 1.0 + (2.0 * PI * x).cos());
    problem.rho0 = problem.nodal(|x, _| 0.6 * (PI * x).cos());
    problem.control = BoundaryControl::Sinusoid { amplitude: 0.5, frequency: 10.0 };
    let cfg = SchemeConfig { eps: 0.01, n_blocks: 10, dt: 1e-3, final_time: 0.1, ..SchemeConfig::default() };
    Setup { cfg, problem }
}

/// The reference setup with logarithmic potentials `c` in the bulk and on `Γ`.
pub fn logarithmic_setup(n: usize, c: f64) -> Setup {
    let mut s = reference_setup(n);
    s.problem.potentials = Potentials::same(PotentialSplit::logarithmic(c).expect("c > 1"));
    s
}

/// Successive differences of a refinement family and the observed orders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderStudy {
    /// Step sizes (or mesh sizes), coarse to fine.
    pub sizes: Vec<f64>,
    /// `‖u_{k} − u_{k+1}‖` at the final time.
    pub differences: Vec<f64>,
    /// `log(d_k / d_{k+1}) / log(h_k / h_{k+1})`.
    pub orders: Vec<f64>,
}

fn orders(sizes: &[f64], diffs: &[f64]) -> Vec<f64> {
    diffs.windows(2).zip(sizes.windows(2)).map(|(d, h)| (d[0] / d[1]).ln() / (h[0] / h[1]).ln()).collect()
}

/// Temporal self-convergence of `ρ(T)` in `L²` over the given step sizes.
pub fn temporal_order(setup: &Setup, dts: &[f64]) -> Result<OrderStudy, StepError> {
    let runs = run_family(
        dts.iter()
            .map(|&dt| {
                (SchemeConfig { dt, dt_min: setup.cfg.dt_min.min(dt), ..setup.cfg.clone() }, setup.problem.clone())
            })
            .collect(),
    )?;
    let sizes: Vec<f64> = setup_dts(&setup.cfg, dts);
    let ops = &setup.problem.ops;
    let mut differences = Vec::new();
    for w in runs.windows(2) {
        let d = &w[0].last().rho - &w[1].last().rho;
        differences.push(norms::l2(ops, &d).map_err(|e| StepError::InvalidConfig(e.to_string()))?);
    }
    Ok(OrderStudy { orders: orders(&sizes, &differences), sizes, differences })
}

fn setup_dts(cfg: &SchemeConfig, dts: &[f64]) -> Vec<f64> {
    dts.iter().map(|&dt| SchemeConfig { dt, ..cfg.clone() }.effective_dt()).collect()
}

/// Linear interpolation from `n` to `2n` elements of a uniform interval mesh.
pub fn prolong_interval(coarse: &DVector<f64>) -> DVector<f64> {
    let n = coarse.len() - 1;
    DVector::from_fn(
        2 * n + 1,
        |i, _| {
            if i % 2 == 0 {
                coarse[i / 2]
            } else {
                0.5 * (coarse[i / 2] + coarse[i / 2 + 1])
            }
        },
    )
}

/// Spatial self-convergence on nested interval meshes: each element count
/// must double the previous one. `build` turns an element count into a setup.
pub fn spatial_order_1d(build: impl Fn(usize) -> Setup, elements: &[usize]) -> Result<OrderStudy, StepError> {
    if elements.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(StepError::InvalidConfig(format!("element counts must double: {elements:?}")));
    }
    let setups: Vec<Setup> = elements.iter().map(|&n| build(n)).collect();
    let runs = run_family(setups.iter().map(|s| (s.cfg.clone(), s.problem.clone())).collect())?;
    let mut differences = Vec::new();
    for (k, w) in runs.windows(2).enumerate() {
        let fine_ops = &setups[k + 1].problem.ops;
        let d = prolong_interval(&w[0].last().rho) - &w[1].last().rho;
        differences.push(norms::l2(fine_ops, &d).map_err(|e| StepError::InvalidConfig(e.to_string()))?);
    }
    let sizes: Vec<f64> = elements.iter().map(|&n| 1.0 / n as f64).collect();
    Ok(OrderStudy { orders: orders(&sizes, &differences), sizes, differences })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prolongation_is_exact_for_linears() {
        let c = DVector::from_fn(5, |i, _| 2.0 * i as f64 + 1.0);
        let f = prolong_interval(&c);
        assert_eq!(f, DVector::from_fn(9, |i, _| i as f64 + 1.0));
    }

    #[test]
    fn order_of_exact_power_law() {
        let o = orders(&[1.0, 0.5, 0.25], &[4.0, 1.0]);
        assert!((o[0] - 2.0).abs() < 1e-14);
    }
}
