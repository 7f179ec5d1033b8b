//! Dense reference solver for the two-element interval, written from the
//! element formulas with no use of the sparse assembly or the graph module.

use nalgebra::{DMatrix, DVector};

/// `β^ε` of `β(r) = r³` from the closed-form root of `ε s³ + s = r`.
pub fn cubic_yosida(eps: f64, r: f64) -> f64 {
    let p = 1.0 / eps;
    let q = r / eps;
    let a = (p / 3.0).sqrt();
    let s = 2.0 * a * ((1.5 * q / p / a).asinh() / 3.0).sinh();
    (r - s) / eps
}

/// Problem data of the oracle run.
pub struct OracleData {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    /// Delay in units of `dt`.
    pub delay_steps: usize,
    pub mu0: [f64; 3],
    pub rho0: [f64; 3],
    /// Boundary control at the two end nodes as a function of time.
    pub control: Box<dyn Fn(f64) -> [f64; 2]>,
}

pub struct OracleStep {
    pub t: f64,
    pub rho: DVector<f64>,
    pub mu: DVector<f64>,
}

fn matrices(h: f64) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let mut m = DMatrix::zeros(3, 3);
    let mut k = DMatrix::zeros(3, 3);
    for e in 0..2 {
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let (i, j) = (e + a, e + b);
            m[(i, j)] += h / 6.0 * if a == b { 2.0 } else { 1.0 };
            k[(i, j)] += if a == b { 1.0 / h } else { -1.0 / h };
        }
    }
    let lumped = DVector::from_vec(vec![h / 2.0, h, h / 2.0]);
    (m, k, lumped)
}

/// March the coupled `(ρ, μ)` system with one dense Newton solve per step
/// (finite-difference Jacobian). Regular potential in bulk and on the
/// boundary, `g(r) = (1 + r)/2`, unit interval, `η = 1`.
pub fn dense_run(data: &OracleData) -> Vec<OracleStep> {
    let h = 0.5;
    let (m, k, ml) = matrices(h);
    // trace rows pick nodes 0 and 2; the boundary mass is the counting measure
    let mut tt = DMatrix::zeros(3, 3);
    tt[(0, 0)] = 1.0;
    tt[(2, 2)] = 1.0;
    let g = |r: f64| 0.5 * (1.0 + r);
    let gp = 0.5;
    let pi = |r: f64| -r;
    let dt = data.dt;

    let mut rho = DVector::from_row_slice(&data.rho0);
    let mut mu = DVector::from_row_slice(&data.mu0);
    let mut mus = vec![mu.clone()];
    let mut out = Vec::new();
    for n in 1..=data.steps {
        let t = n as f64 * dt;
        let mu_delay = if n <= data.delay_steps { mus[0].clone() } else { mus[n - data.delay_steps].clone() };
        let u = (data.control)(t);
        let (rho_o, mu_o) = (rho.clone(), mu.clone());
        let src = DVector::from_fn(3, |i, _| gp * mu_delay[i] - pi(rho_o[i]));
        let mut rhs = (&m + &tt) * &rho_o / dt + &m * src;
        rhs[0] += u[0] - pi(rho_o[0]);
        rhs[2] += u[1] - pi(rho_o[2]);

        let residual = |x: &DVector<f64>| -> DVector<f64> {
            let r = x.rows(0, 3).into_owned();
            let w = x.rows(3, 3).into_owned();
            let mut fr = (&m + &tt) * &r / dt + &k * &r - &rhs;
            for i in 0..3 {
                fr[i] += ml[i] * cubic_yosida(data.eps, r[i]);
            }
            fr[0] += cubic_yosida(data.eps, r[0]);
            fr[2] += cubic_yosida(data.eps, r[2]);
            let mut fw = &k * &w;
            for i in 0..3 {
                let c = 1.0 + 2.0 * g(r[i]) + gp * (r[i] - rho_o[i]);
                fw[i] += ml[i] * (c * w[i] - (1.0 + 2.0 * g(r[i])) * mu_o[i]) / dt;
            }
            let mut f = DVector::zeros(6);
            f.rows_mut(0, 3).copy_from(&fr);
            f.rows_mut(3, 3).copy_from(&fw);
            f
        };

        let mut x = DVector::zeros(6);
        x.rows_mut(0, 3).copy_from(&rho_o);
        x.rows_mut(3, 3).copy_from(&mu_o);
        for _ in 0..60 {
            let f = residual(&x);
            if f.amax() < 1e-14 {
                break;
            }
            let mut jac = DMatrix::zeros(6, 6);
            for j in 0..6 {
                let step = 1e-6 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += step;
                xm[j] -= step;
                jac.set_column(j, &((residual(&xp) - residual(&xm)) / (2.0 * step)));
            }
            let dx = jac.lu().solve(&(-f)).expect("oracle Jacobian is regular");
            x += dx;
        }
        rho = x.rows(0, 3).into_owned();
        mu = x.rows(3, 3).into_owned();
        mus.push(mu.clone());
        out.push(OracleStep { t, rho: rho.clone(), mu: mu.clone() });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardano_root_solves_the_cubic() {
        for &eps in &[1.0, 0.1, 0.01] {
            for &r in &[-3.0, -0.2, 0.0, 1e-6, 0.7, 5.0] {
                let x = cubic_yosida(eps, r);
                let s = r - eps * x;
                assert!((eps * s.powi(3) + s - r).abs() < 1e-12 * (1.0 + r.abs()));
                assert!((x - s.powi(3)).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}
