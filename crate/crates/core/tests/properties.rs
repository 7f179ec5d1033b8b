use chs_dynbc::config::{parse_raw, ControlSpec, MeshSpec, Profile, RunConfig};
use chs_dynbc::diagnostics::{check_positivity, norms, stability_experiment, total_free_energy};
use chs_dynbc::discretization::{Mesh, Operators};
use chs_dynbc::graphs::{CouplingFunction, MonotoneGraph, PotentialSplit};
use chs_dynbc::io::{read_timeseries, write_timeseries};
use chs_dynbc::linalg::{generalized_eigenvalues, max_asymmetry, to_dense};
use chs_dynbc::stepper::{
    delayed_mu, mu_step, rho_jacobian, run_simulation, BoundaryControl, History, MuMass, Potentials, Problem,
    SchemeConfig, SimState, StepContext,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn graphs() -> Vec<MonotoneGraph> {
    vec![MonotoneGraph::cubic(1.0), MonotoneGraph::logarithmic(), MonotoneGraph::obstacle(), MonotoneGraph::linear(2.0)]
}

fn small_problem(n: usize) -> Problem {
    let mut p = Problem::new(
        Mesh::interval(n, 1.0).unwrap(),
        Potentials::same(PotentialSplit::regular()),
        CouplingFunction::default_coupling(),
    )
    .unwrap();
    p.mu0 = p.nodal(|x, _| 1.0 + x);
    p.rho0 = p.nodal(|x, _| 0.5 - x);
    p.control = BoundaryControl::Sinusoid { amplitude: 0.3, frequency: 5.0 };
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn yosida_is_monotone_and_lipschitz(a in -4.0..4.0f64, b in -4.0..4.0f64, eps in 0.005..2.0f64) {
        for g in graphs() {
            let (fa, fb) = (g.yosida(eps, a).unwrap(), g.yosida(eps, b).unwrap());
            prop_assert!((fa - fb) * (a - b) >= -1e-10 * (1.0 + fa.abs() + fb.abs()));
            prop_assert!((fa - fb).abs() <= (a - b).abs() / eps * (1.0 + 1e-9) + 1e-12);
            // r = J_ε r + ε β^ε(r)
            let j = g.resolvent(eps, a).unwrap();
            prop_assert!((j + eps * fa - a).abs() <= 1e-9 * (1.0 + a.abs()));
            prop_assert!(g.domain().closure_contains(j));
        }
    }

    #[test]
    fn rho_jacobian_is_spd(values in prop::collection::vec(-1.5..1.5f64, 9), dt in 1e-4..0.1f64, eps in 1e-3..0.5f64) {
        let ops = Operators::assemble(&Mesh::interval(8, 1.0).unwrap()).unwrap();
        for split in [PotentialSplit::regular(), PotentialSplit::logarithmic(2.0).unwrap(), PotentialSplit::obstacle(1.0).unwrap()] {
            let p = Potentials::same(split);
            let g = CouplingFunction::default_coupling();
            let ctx = StepContext { ops: &ops, potentials: &p, coupling: &g, eps, eta: 1.0 };
            let jac = rho_jacobian(&ctx, &DVector::from_vec(values.clone()), dt).unwrap();
            prop_assert!(max_asymmetry(&jac) < 1e-12);
            let ev = generalized_eigenvalues(&to_dense(&jac), &DMatrix::identity(9, 9)).unwrap();
            prop_assert!(ev[0] > 0.0);
        }
    }

    #[test]
    fn mu_step_preserves_sign(
        mu in prop::collection::vec(0.0..3.0f64, 9),
        rho in prop::collection::vec(-0.9..0.9f64, 9),
        drho in prop::collection::vec(-0.05..0.05f64, 9),
        dt in 1e-4..0.05f64,
    ) {
        let ops = Operators::assemble(&Mesh::interval(8, 1.0).unwrap()).unwrap();
        let g = CouplingFunction::default_coupling();
        let rho_old = DVector::from_vec(rho);
        let rho_new = &rho_old + DVector::from_vec(drho);
        let out = mu_step(&ops, &g, &rho_new, &rho_old, &DVector::from_vec(mu), dt, MuMass::Lumped).unwrap();
        prop_assert!(out.min() >= 0.0);
    }

    #[test]
    fn free_energy_ignores_node_labels(seed in any::<u64>(), shift in -0.5..0.5f64) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mesh = Mesh::disc(2).unwrap();
        let mut perm: Vec<usize> = (0..mesh.n_nodes()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = mesh.permuted(&perm);
        let p = Potentials::same(PotentialSplit::logarithmic(1.5).unwrap());
        let g = CouplingFunction::default_coupling();
        let energy = |m: &Mesh| {
            let ops = Operators::assemble(m).unwrap();
            let mu = DVector::from_iterator(m.n_nodes(), m.coords().iter().map(|c| 1.0 + c[0] * c[1]));
            let rho = DVector::from_iterator(m.n_nodes(), m.coords().iter().map(|c| 0.6 * c[0] + shift * c[1]));
            let s = SimState::new(&ops, &p, 0.01, 1.0, 0.0, mu, rho).unwrap();
            let u = DVector::from_element(ops.n_boundary(), 0.2);
            total_free_energy(&ops, &s, &u, &p, &g, 0.01, 1.0).unwrap()
        };
        let (a, b) = (energy(&mesh), energy(&shuffled));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn delay_is_exact_inside_first_block(t in 0.0..0.3f64) {
        let mut h = History::new();
        for k in 0..=10 {
            h.push(0.05 * k as f64, DVector::from_element(2, k as f64)).unwrap();
        }
        prop_assert_eq!(delayed_mu(&h, 0.3, t).unwrap(), DVector::from_element(2, 0.0));
    }

    #[test]
    fn norms_are_nonnegative(values in prop::collection::vec(-5.0..5.0f64, 9)) {
        let ops = Operators::assemble(&Mesh::interval(8, 2.0).unwrap()).unwrap();
        let v = DVector::from_vec(values);
        prop_assert!(norms::l2(&ops, &v).unwrap() >= 0.0);
        prop_assert!(norms::h1_seminorm(&ops, &v).unwrap() >= 0.0);
        prop_assert!(norms::v_norm(&ops, &v).unwrap() >= norms::h1_seminorm(&ops, &v).unwrap());
        for k in 1..=8 {
            prop_assert!(norms::l2k(&ops, &v, k).unwrap() >= 0.0);
        }
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), eps in 1e-4..1.0f64, elements in 2usize..200, amp in -2.0..2.0f64, lo in -0.5..0.0f64) {
        let mut cfg = RunConfig { seed, ..RunConfig::default() };
        cfg.scheme.eps = eps;
        cfg.mesh = MeshSpec::Interval { elements, length: 1.0 + eps };
        cfg.control = ControlSpec::Pulse { amplitude: amp, node: 1, start: 0.0, end: eps };
        cfg.initial.rho = Profile::Random { lo, hi: 0.5 };
        let once = parse_raw(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&once, &cfg);
        prop_assert_eq!(parse_raw(&once.to_toml()).unwrap(), once);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn stability_ratio_is_symmetric(p in 0.01..0.2f64) {
        let problem = small_problem(8);
        let cfg = SchemeConfig { final_time: 0.02, dt: 2e-3, n_blocks: 2, ..SchemeConfig::default() };
        let u1 = problem.control.clone();
        let u2 = u1.perturbed(p, BoundaryControl::Constant(1.0));
        let a = stability_experiment(&cfg, &problem, &u1, &u2).unwrap();
        let b = stability_experiment(&cfg, &problem, &u2, &u1).unwrap();
        prop_assert_eq!(a.ratio, b.ratio);
        prop_assert!(a.ratio.unwrap().is_finite());
    }

    #[test]
    fn timeseries_csv_is_bit_exact(amp in 0.0..1.0f64) {
        let mut problem = small_problem(6);
        problem.control = BoundaryControl::Sinusoid { amplitude: amp, frequency: 3.0 };
        let cfg = SchemeConfig { final_time: 0.01, dt: 1e-3, n_blocks: 2, ..SchemeConfig::default() };
        let traj = run_simulation(&cfg, &problem).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        write_timeseries(&path, &traj.records).unwrap();
        prop_assert_eq!(read_timeseries(&path).unwrap(), traj.records);
    }
}

#[test]
fn blockwise_runs_agree_when_lookups_coincide() {
    let mut problem = small_problem(8);
    problem.coupling = CouplingFunction::zero();
    problem.mu0 = DVector::from_element(9, 0.7);
    let base = SchemeConfig { final_time: 0.04, dt: 2e-3, n_blocks: 2, ..SchemeConfig::default() };
    let a = run_simulation(&base, &problem).unwrap();
    let b = run_simulation(&SchemeConfig { n_blocks: 4, ..base }, &problem).unwrap();
    assert_eq!(a.times(), b.times());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.rho, y.rho);
        assert_eq!(x.mu, y.mu);
    }
}

#[test]
fn checks_are_pure() {
    let problem = small_problem(8);
    let cfg = SchemeConfig { final_time: 0.02, dt: 2e-3, n_blocks: 2, ..SchemeConfig::default() };
    let traj = run_simulation(&cfg, &problem).unwrap();
    assert_eq!(check_positivity(&traj), check_positivity(&traj.clone()));
    assert_eq!(run_simulation(&cfg, &problem).unwrap(), traj);
}
