use std::f64::consts::PI;

use chs_dynbc::diagnostics::{check_positivity, mu_energy_residual, total_free_energy, z_residual};
use chs_dynbc::discretization::{Mesh, Operators};
use chs_dynbc::experiments::{logarithmic_setup, reference_setup};
use chs_dynbc::graphs::{CouplingFunction, MonotoneGraph, Perturbation, PotentialSplit};
use chs_dynbc::linalg::to_dense;
use chs_dynbc::stepper::{
    mu_step, refine_eps, run_simulation, BoundaryControl, MuMass, Potentials, Problem, SchemeConfig, SimState,
};
use chs_dynbc::verify::oracle::{dense_run, OracleData};
use chs_dynbc::verify::{run_criteria, Tolerances, CRITERIA};
use nalgebra::DVector;

#[test]
fn mu_step_matches_dense_solve() {
    let ops = Operators::assemble(&Mesh::disc(2).unwrap()).unwrap();
    let n = ops.n_nodes();
    let g = CouplingFunction::default_coupling();
    let rho_old = DVector::from_fn(n, |i, _| 0.4 * (i as f64 * 0.7).sin());
    let rho_new = rho_old.map(|r| r + 0.01);
    let mu_old = DVector::from_fn(n, |i, _| 1.0 + 0.5 * (i as f64 * 0.3).cos());
    let dt = 0.01;
    let got = mu_step(&ops, &g, &rho_new, &rho_old, &mu_old, dt, MuMass::Lumped).unwrap();

    let mut a = to_dense(&ops.stiffness);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let w = 1.0 + 2.0 * g.g(rho_new[i]);
        a[(i, i)] += ops.lumped_mass[i] * (w + g.g_prime(rho_new[i]) * (rho_new[i] - rho_old[i])) / dt;
        rhs[i] = ops.lumped_mass[i] * w * mu_old[i] / dt;
    }
    let want = a.lu().solve(&rhs).unwrap();
    assert!((got - want).amax() < 1e-12);
}

#[test]
fn matches_dense_oracle_with_longer_delay() {
    let data = OracleData {
        eps: 0.05,
        dt: 0.05,
        steps: 6,
        delay_steps: 2,
        mu0: [0.2, 1.0, 0.6],
        rho0: [-0.4, 0.1, 0.7],
        control: Box::new(|_| [0.25, 0.25]),
    };
    let reference = dense_run(&data);
    let mut s = reference_setup(2);
    s.problem.mu0 = DVector::from_row_slice(&data.mu0);
    s.problem.rho0 = DVector::from_row_slice(&data.rho0);
    s.problem.control = BoundaryControl::Constant(0.25);
    let cfg = SchemeConfig {
        eps: 0.05,
        dt: 0.05,
        final_time: 0.3,
        n_blocks: 3,
        newton_tol: 1e-13,
        ..SchemeConfig::default()
    };
    let tr = run_simulation(&cfg, &s.problem).unwrap();
    assert_eq!(tr.len(), reference.len() + 1);
    for (st, o) in tr.states.iter().skip(1).zip(&reference) {
        assert!((&st.rho - &o.rho).amax() < 1e-10, "t = {}", o.t);
        assert!((&st.mu - &o.mu).amax() < 1e-10, "t = {}", o.t);
    }
}

#[test]
fn energy_defect_is_minus_half_increment_norms_without_coupling() {
    let mut s = reference_setup(32);
    s.problem.coupling = CouplingFunction::zero();
    let tr = run_simulation(&s.cfg, &s.problem).unwrap();
    let ops = &s.problem.ops;
    let res = mu_energy_residual(&tr, ops, &s.problem.coupling);
    let mut acc = 0.0;
    for (k, w) in tr.states.windows(2).enumerate() {
        let d = &w[1].mu - &w[0].mu;
        acc -= 0.5 * d.component_mul(&d).dot(&ops.lumped_mass);
        assert!((res[k + 1] - acc).abs() < 1e-10 * (1.0 + acc.abs()), "step {}: {} vs {acc}", k + 1, res[k + 1]);
    }
    assert!(acc < 0.0);
}

#[test]
fn z_form_holds_without_coupling() {
    let mut s = reference_setup(16);
    s.problem.coupling = CouplingFunction::zero();
    let tr = run_simulation(&s.cfg, &s.problem).unwrap();
    let z = z_residual(&tr, &s.problem.ops, &s.problem.coupling);
    assert_eq!(z[0], 0.0);
    assert!(z.iter().all(|r| *r < 1e-9), "max {}", z.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn free_energy_of_constant_state() {
    // W(r) = ¼(r² − 1)² for the regular split; at ρ ≡ 0, μ ≡ 0, u = 0, g = 0:
    // bulk |Ω|/4 and boundary |Γ|/4 (two end points in 1D).
    let ops = Operators::assemble(&Mesh::interval(10, 2.0).unwrap()).unwrap();
    let p = Potentials::same(PotentialSplit::regular());
    let n = ops.n_nodes();
    let s = SimState::new(&ops, &p, 0.01, 1.0, 0.0, DVector::zeros(n), DVector::zeros(n)).unwrap();
    for eps in [0.0, 0.01] {
        let e = total_free_energy(&ops, &s, &DVector::zeros(2), &p, &CouplingFunction::zero(), eps, 1.0).unwrap();
        assert!((e - (2.0 / 4.0 + 2.0 / 4.0)).abs() < 1e-12, "eps {eps}: {e}");
    }
}

#[test]
fn linear_graph_eps_refinement_contracts() {
    let mut p = Problem::new(
        Mesh::interval(16, 1.0).unwrap(),
        Potentials::same(PotentialSplit::new("linear", MonotoneGraph::linear(3.0), Perturbation::zero())),
        CouplingFunction::default_coupling(),
    )
    .unwrap();
    p.mu0 = p.nodal(|x, _| 1.0 + (PI * x).cos());
    p.rho0 = p.nodal(|x, _| 0.5 * (PI * x).cos());
    let cfg = SchemeConfig { final_time: 0.05, dt: 1e-3, n_blocks: 5, ..SchemeConfig::default() };
    let r = refine_eps(&cfg, &p, &[0.1, 0.05, 0.025]).unwrap();
    let d: Vec<f64> = r.differences.iter().map(|d| d.rho_l2q).collect();
    assert!(d[1] < d[0], "{d:?}");
}

#[test]
fn logarithmic_eps_refinement_contracts() {
    let s = logarithmic_setup(16, 2.0);
    let cfg = SchemeConfig { final_time: 0.05, n_blocks: 5, ..s.cfg.clone() };
    let r = refine_eps(&cfg, &s.problem, &[0.04, 0.02, 0.01]).unwrap();
    let d: Vec<f64> = r.differences.iter().map(|d| d.rho_l2q).collect();
    assert!(d[1] < d[0], "{d:?}");
    assert!(r.xi_max.iter().all(|x| x.is_finite()));
}

#[test]
fn mu_stays_nonnegative_on_the_disc() {
    let mut p = Problem::new(
        Mesh::disc(3).unwrap(),
        Potentials::same(PotentialSplit::logarithmic(2.0).unwrap()),
        CouplingFunction::default_coupling(),
    )
    .unwrap();
    p.mu0 = p.nodal(|x, y| if x > 0.2 && y > 0.0 { 2.0 } else { 0.0 });
    p.rho0 = p.nodal(|x, y| 0.5 * x * y);
    p.control = BoundaryControl::Sinusoid { amplitude: 0.5, frequency: 4.0 };
    let cfg = SchemeConfig { final_time: 0.02, dt: 1e-3, n_blocks: 4, ..SchemeConfig::default() };
    let tr = run_simulation(&cfg, &p).unwrap();
    let c = check_positivity(&tr);
    assert!(c.pass, "{c:?}");
    assert!(tr.flags.is_empty(), "{:?}", tr.flags);
}

#[test]
fn sabotage_fails_only_the_named_criterion() {
    let names = vec!["yosida".to_string(), "dense-oracle".to_string()];
    let res = run_criteria(&names, &Tolerances::default().sabotaged("dense-oracle")).unwrap();
    assert!(res[0].pass);
    assert!(!res[1].pass);
    assert!(run_criteria(&["nope".to_string()], &Tolerances::default()).is_err());
    assert_eq!(CRITERIA.len(), 11);
}

#[test]
fn oracle_keeps_zero_data_at_zero() {
    let data = OracleData {
        eps: 0.1,
        dt: 0.1,
        steps: 2,
        delay_steps: 1,
        mu0: [0.0; 3],
        rho0: [0.0; 3],
        control: Box::new(|_| [0.0, 0.0]),
    };
    for st in dense_run(&data) {
        assert!(st.rho.amax() < 1e-14 && st.mu.amax() < 1e-14);
    }
}
