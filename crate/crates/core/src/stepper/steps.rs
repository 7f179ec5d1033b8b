use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::{MuMass, Potentials, SimState, StepError};
use crate::discretization::{MeshError, Operators};
use crate::graphs::CouplingFunction;
use crate::linalg::{add_diagonal, lincomb, spmv, SpdSolver};

/// Everything a single step reads but does not own.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub ops: &'a Operators,
    pub potentials: &'a Potentials,
    pub coupling: &'a CouplingFunction,
    /// Bulk Yosida level; the boundary graph is regularized at `eps · eta`.
    pub eps: f64,
    pub eta: f64,
}

/// Result of the implicit ρ-solve.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoUpdate {
    pub rho: DVector<f64>,
    pub rho_gamma: DVector<f64>,
    pub xi: DVector<f64>,
    pub xi_gamma: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearStepOutput {
    pub y: DVector<f64>,
    pub y_gamma: DVector<f64>,
}

/// Factorizations reused across steps of one run (the pattern never changes).
#[derive(Default)]
pub struct Workspace {
    jacobian: Option<SpdSolver>,
    mu: Option<SpdSolver>,
}

fn factor_into(slot: &mut Option<SpdSolver>, m: &CsrMatrix<f64>) -> Result<(), StepError> {
    match slot {
        Some(s) => {
            if s.refactor(m).is_err() {
                // retry from scratch before giving up
                *slot = Some(SpdSolver::factor(m)?);
            }
        }
        None => *slot = Some(SpdSolver::factor(m)?),
    }
    Ok(())
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<(), StepError> {
    if v.len() != n {
        return Err(MeshError::SizeMismatch { expected: n, got: v.len() }.into());
    }
    Ok(())
}

/// `(M + TᵀM_ΓT)/dt + K + TᵀK_ΓT`
fn dynamic_operator(ops: &Operators, dt: f64) -> CsrMatrix<f64> {
    lincomb(&[
        (1.0 / dt, &ops.mass),
        (1.0 / dt, &ops.lifted_surface_mass),
        (1.0, &ops.stiffness),
        (1.0, &ops.lifted_surface_stiffness),
    ])
}

/// Nodal weights of the dual norm used for residuals: lumped bulk mass plus
/// lumped surface mass on the boundary nodes.
fn residual_weights(ops: &Operators) -> DVector<f64> {
    let mut w = ops.lumped_mass.clone();
    for (j, &i) in ops.boundary_nodes().iter().enumerate() {
        w[i] += ops.lumped_surface_mass[j];
    }
    w
}

fn dual_norm(r: &DVector<f64>, w: &DVector<f64>) -> f64 {
    r.iter().zip(w.iter()).map(|(x, m)| x * x / m).sum::<f64>().sqrt()
}

struct Evaluation {
    residual: DVector<f64>,
    jac_diag: DVector<f64>,
    xi: DVector<f64>,
    xi_gamma: DVector<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Implicit ρ-step with the dynamic boundary condition:
    ///
    /// ```text
    /// (M + TᵀM_ΓT)(ρ − ρ_old)/dt + (K + TᵀK_ΓT)ρ + M_L β^ε(ρ) + Tᵀ M_{Γ,L} β_Γ^{εη}(Tρ)
    ///     = M (g'(ρ_old)∘μ_delay − π(ρ_old)) + Tᵀ M_Γ (u_Γ − π_Γ(Tρ_old))
    /// ```
    ///
    /// solved by damped Newton; the Jacobian is SPD for every ρ.
    #[allow(clippy::too_many_arguments)]
    pub fn rho_step(
        &mut self,
        ctx: &StepContext<'_>,
        state: &SimState,
        mu_delay: &DVector<f64>,
        u_gamma: &DVector<f64>,
        dt: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<RhoUpdate, StepError> {
        let ops = ctx.ops;
        let n = ops.n_nodes();
        check_len(&state.rho, n)?;
        check_len(mu_delay, n)?;
        check_len(u_gamma, ops.n_boundary())?;
        let bulk = &ctx.potentials.bulk;
        let surf = &ctx.potentials.boundary;
        let eps_gamma = ctx.eps * ctx.eta;

        let base = dynamic_operator(ops, dt);
        let rho_old = &state.rho;
        let rho_old_gamma = ops.trace_unchecked(rho_old);
        let bulk_source =
            DVector::from_fn(n, |i, _| ctx.coupling.extended_g_prime(rho_old[i]) * mu_delay[i] - bulk.pi(rho_old[i]));
        let surf_source = DVector::from_fn(ops.n_boundary(), |j, _| u_gamma[j] - surf.pi(rho_old_gamma[j]));
        let inertia = spmv(&ops.mass, rho_old) + spmv(&ops.lifted_surface_mass, rho_old);
        let rhs = inertia / dt + spmv(&ops.mass, &bulk_source) + ops.inject(&spmv(&ops.surface_mass, &surf_source))?;
        let weights = residual_weights(ops);

        let evaluate = |rho: &DVector<f64>| -> Result<Evaluation, StepError> {
            let mut residual = spmv(&base, rho) - &rhs;
            let mut jac_diag = DVector::zeros(n);
            let mut xi = DVector::zeros(n);
            for i in 0..n {
                let (v, d) = bulk.graph.yosida_with_derivative(ctx.eps, rho[i])?;
                xi[i] = v;
                residual[i] += ops.lumped_mass[i] * v;
                jac_diag[i] += ops.lumped_mass[i] * d;
            }
            let mut xi_gamma = DVector::zeros(ops.n_boundary());
            for (j, &i) in ops.boundary_nodes().iter().enumerate() {
                let (v, d) = surf.graph.yosida_with_derivative(eps_gamma, rho[i])?;
                xi_gamma[j] = v;
                residual[i] += ops.lumped_surface_mass[j] * v;
                jac_diag[i] += ops.lumped_surface_mass[j] * d;
            }
            Ok(Evaluation { residual, jac_diag, xi, xi_gamma })
        };

        let mut rho = rho_old.clone();
        let mut eval = evaluate(&rho)?;
        let mut norm = dual_norm(&eval.residual, &weights);
        let mut iterations = 0;
        while norm > tol {
            if iterations == max_iter {
                return Err(StepError::NewtonNonConvergence { t: state.t + dt, iterations, residual: norm });
            }
            let mut jac = base.clone();
            add_diagonal(&mut jac, &eval.jac_diag);
            factor_into(&mut self.jacobian, &jac)?;
            let delta = self.jacobian.as_ref().expect("factored above").solve(&(-&eval.residual))?;

            let mut lambda = 1.0;
            loop {
                let trial = &rho + lambda * &delta;
                let trial_eval = evaluate(&trial)?;
                let trial_norm = dual_norm(&trial_eval.residual, &weights);
                if trial_norm <= (1.0 - 1e-4 * lambda) * norm || lambda < 1e-6 {
                    rho = trial;
                    eval = trial_eval;
                    norm = trial_norm;
                    break;
                }
                lambda *= 0.5;
            }
            iterations += 1;
        }
        Ok(RhoUpdate {
            rho_gamma: ops.trace_unchecked(&rho),
            rho,
            xi: eval.xi,
            xi_gamma: eval.xi_gamma,
            iterations,
            residual: norm,
        })
    }

    /// Linear μ-step
    ///
    /// ```text
    /// [M_L diag(1 + 2g(ρ) + g'(ρ)(ρ − ρ_old))/dt + K] μ = M_L diag(1 + 2g(ρ))/dt μ_old
    /// ```
    ///
    /// (or its consistent-mass analogue).
    #[allow(clippy::too_many_arguments)]
    pub fn mu_step(
        &mut self,
        ops: &Operators,
        coupling: &CouplingFunction,
        rho_new: &DVector<f64>,
        rho_old: &DVector<f64>,
        mu_old: &DVector<f64>,
        dt: f64,
        mode: MuMass,
    ) -> Result<DVector<f64>, StepError> {
        let n = ops.n_nodes();
        check_len(rho_new, n)?;
        check_len(rho_old, n)?;
        check_len(mu_old, n)?;
        let weight = DVector::from_fn(n, |i, _| 1.0 + 2.0 * coupling.extended_g(rho_new[i]));
        let coef =
            DVector::from_fn(n, |i, _| weight[i] + coupling.extended_g_prime(rho_new[i]) * (rho_new[i] - rho_old[i]));
        if let Some((node, &value)) = coef.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
            return Err(StepError::NonPositiveCoefficient { node, value });
        }
        let (matrix, rhs) = match mode {
            MuMass::Lumped => {
                let mut m = ops.stiffness.clone();
                add_diagonal(&mut m, &(ops.lumped_mass.component_mul(&coef) / dt));
                let rhs = ops.lumped_mass.component_mul(&weight).component_mul(mu_old) / dt;
                (m, rhs)
            }
            MuMass::Consistent => {
                let m = lincomb(&[(1.0, &ops.stiffness), (1.0 / dt, &ops.weighted_mass(&coef))]);
                let rhs = spmv(&ops.weighted_mass(&weight), mu_old) / dt;
                (m, rhs)
            }
        };
        factor_into(&mut self.mu, &matrix)?;
        Ok(self.mu.as_ref().expect("factored above").solve(&rhs)?)
    }
}

/// Newton matrix of the ρ-step at `rho`:
/// `(M + TᵀM_ΓT)/dt + K + TᵀK_ΓT + M_L diag((β^ε)'(ρ)) + Tᵀ M_{Γ,L} diag((β_Γ^{εη})'(Tρ)) T`.
pub fn rho_jacobian(ctx: &StepContext<'_>, rho: &DVector<f64>, dt: f64) -> Result<CsrMatrix<f64>, StepError> {
    let ops = ctx.ops;
    check_len(rho, ops.n_nodes())?;
    let mut diag = DVector::zeros(ops.n_nodes());
    for i in 0..ops.n_nodes() {
        diag[i] = ops.lumped_mass[i] * ctx.potentials.bulk.graph.yosida_with_derivative(ctx.eps, rho[i])?.1;
    }
    for (j, &i) in ops.boundary_nodes().iter().enumerate() {
        let d = ctx.potentials.boundary.graph.yosida_with_derivative(ctx.eps * ctx.eta, rho[i])?.1;
        diag[i] += ops.lumped_surface_mass[j] * d;
    }
    let mut jac = dynamic_operator(ops, dt);
    add_diagonal(&mut jac, &diag);
    Ok(jac)
}

/// One ρ-step with a fresh workspace.
#[allow(clippy::too_many_arguments)]
pub fn rho_step(
    ctx: &StepContext<'_>,
    state: &SimState,
    mu_delay: &DVector<f64>,
    u_gamma: &DVector<f64>,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RhoUpdate, StepError> {
    Workspace::new().rho_step(ctx, state, mu_delay, u_gamma, dt, tol, max_iter)
}

/// One μ-step with a fresh workspace.
pub fn mu_step(
    ops: &Operators,
    coupling: &CouplingFunction,
    rho_new: &DVector<f64>,
    rho_old: &DVector<f64>,
    mu_old: &DVector<f64>,
    dt: f64,
    mode: MuMass,
) -> Result<DVector<f64>, StepError> {
    Workspace::new().mu_step(ops, coupling, rho_new, rho_old, mu_old, dt, mode)
}

/// Implicit Euler step of the linear problem
/// `∂_t y − Δy + a y = σ` in `Ω`, `∂_n y + ∂_t y_Γ − Δ_Γ y_Γ + a_Γ y_Γ = σ_Γ` on `Γ`,
/// in the same coupled weak form (and with the same mass treatment) as [`rho_step`].
#[allow(clippy::too_many_arguments)]
pub fn linear_dynamic_step(
    ops: &Operators,
    a: &DVector<f64>,
    a_gamma: &DVector<f64>,
    sigma: &DVector<f64>,
    sigma_gamma: &DVector<f64>,
    y_old: &DVector<f64>,
    dt: f64,
) -> Result<LinearStepOutput, StepError> {
    let n = ops.n_nodes();
    for v in [a, sigma, y_old] {
        check_len(v, n)?;
    }
    check_len(a_gamma, ops.n_boundary())?;
    check_len(sigma_gamma, ops.n_boundary())?;
    let mut matrix = dynamic_operator(ops, dt);
    let mut diag = ops.lumped_mass.component_mul(a);
    for (j, &i) in ops.boundary_nodes().iter().enumerate() {
        diag[i] += ops.lumped_surface_mass[j] * a_gamma[j];
    }
    add_diagonal(&mut matrix, &diag);
    let rhs = (spmv(&ops.mass, y_old) + spmv(&ops.lifted_surface_mass, y_old)) / dt
        + spmv(&ops.mass, sigma)
        + ops.inject(&spmv(&ops.surface_mass, sigma_gamma))?;
    let y = SpdSolver::factor(&matrix)?.solve(&rhs)?;
    Ok(LinearStepOutput { y_gamma: ops.trace_unchecked(&y), y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Mesh;
    use crate::graphs::{MonotoneGraph, Perturbation, PotentialSplit};

    fn ops(n: usize) -> Operators {
        Operators::assemble(&Mesh::interval(n, 1.0).unwrap()).unwrap()
    }

    fn state(ops: &Operators, p: &Potentials, mu: DVector<f64>, rho: DVector<f64>) -> SimState {
        SimState::new(ops, p, 0.1, 1.0, 0.0, mu, rho).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let ops = ops(6);
        let split = PotentialSplit::new("cubic only", MonotoneGraph::cubic(1.0), Perturbation::zero());
        let p = Potentials::same(split);
        let g = CouplingFunction::default_coupling();
        let ctx = StepContext { ops: &ops, potentials: &p, coupling: &g, eps: 0.1, eta: 1.0 };
        let s = state(&ops, &p, DVector::zeros(7), DVector::zeros(7));
        let up = rho_step(&ctx, &s, &DVector::zeros(7), &DVector::zeros(2), 0.1, 1e-12, 20).unwrap();
        assert_eq!(up.rho, DVector::zeros(7));
        assert_eq!(up.iterations, 0);
    }

    #[test]
    fn linear_graph_needs_one_newton_update_and_matches_linear_step() {
        let ops = ops(5);
        let (k, eps, eta) = (2.0, 0.1, 0.5);
        let split = PotentialSplit::new("linear", MonotoneGraph::linear(k), Perturbation::zero());
        let p = Potentials::same(split);
        let g = CouplingFunction::default_coupling();
        let ctx = StepContext { ops: &ops, potentials: &p, coupling: &g, eps, eta };
        let rho0 = DVector::from_fn(6, |i, _| (i as f64 * 0.7).sin());
        let s = SimState::new(&ops, &p, eps, eta, 0.0, DVector::zeros(6), rho0.clone()).unwrap();
        let u = DVector::from_vec(vec![0.3, -0.2]);
        let up = rho_step(&ctx, &s, &DVector::zeros(6), &u, 0.05, 1e-11, 20).unwrap();
        assert_eq!(up.iterations, 1);

        let a = DVector::from_element(6, k / (1.0 + eps * k));
        let a_gamma = DVector::from_element(2, k / (1.0 + eps * eta * k));
        let lin = linear_dynamic_step(&ops, &a, &a_gamma, &DVector::zeros(6), &u, &rho0, 0.05).unwrap();
        assert!((&lin.y - &up.rho).amax() < 1e-12);
    }

    #[test]
    fn mu_step_keeps_constants() {
        let ops = ops(8);
        let rho = DVector::from_fn(9, |i, _| 0.1 * i as f64 - 0.4);
        let mu = DVector::from_element(9, 2.5);
        for g in [CouplingFunction::zero(), CouplingFunction::default_coupling()] {
            for mode in [MuMass::Lumped, MuMass::Consistent] {
                let out = mu_step(&ops, &g, &rho, &rho, &mu, 0.01, mode).unwrap();
                assert!((&out - &mu).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn mu_step_flags_nonpositive_coefficient() {
        let ops = ops(2);
        let g = CouplingFunction::default_coupling();
        // g' = 1/2 so 1 + 2g + g'Δρ = 1 + (1 + r) + (r − r_old)/2 < 0 for a big negative jump
        let rho_new = DVector::from_element(3, -0.9);
        let rho_old = DVector::from_element(3, 10.0);
        let err = mu_step(&ops, &g, &rho_new, &rho_old, &DVector::zeros(3), 0.1, MuMass::Lumped).unwrap_err();
        assert!(matches!(err, StepError::NonPositiveCoefficient { .. }));
        assert!(err.is_recoverable());
    }

    #[test]
    fn linear_step_zero_data_and_steady_state() {
        let ops = ops(2);
        let z = DVector::zeros(3);
        let out = linear_dynamic_step(
            &ops,
            &DVector::from_element(3, 1.0),
            &DVector::from_element(2, 1.0),
            &z,
            &DVector::zeros(2),
            &z,
            0.1,
        )
        .unwrap();
        assert_eq!(out.y, z);

        let mut y = DVector::zeros(3);
        for _ in 0..400 {
            y = linear_dynamic_step(
                &ops,
                &DVector::from_element(3, 1.0),
                &DVector::from_element(2, 1.0),
                &DVector::from_element(3, 1.0),
                &DVector::from_element(2, 1.0),
                &y,
                0.1,
            )
            .unwrap()
            .y;
        }
        assert!((y.add_scalar(-1.0)).amax() < 1e-12);
    }
}
