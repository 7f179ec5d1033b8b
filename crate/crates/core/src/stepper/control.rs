use std::f64::consts::PI;

use nalgebra::DVector;

/// Boundary source `u_Γ(t, j)` indexed by boundary-cycle position `j`.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryControl {
    Zero,
    Constant(f64),
    /// `amplitude · sin(2π · frequency · t)`, uniform along `Γ`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
    },
    /// `amplitude · sin²(π (t − start)/(end − start))` on `[start, end]` at one boundary node.
    Pulse {
        amplitude: f64,
        node: usize,
        start: f64,
        end: f64,
    },
    /// Time-independent nodal profile.
    Nodal(DVector<f64>),
    Sum(Vec<BoundaryControl>),
    Scaled(f64, Box<BoundaryControl>),
}

impl BoundaryControl {
    pub fn value(&self, t: f64, j: usize) -> f64 {
        match self {
            BoundaryControl::Zero => 0.0,
            BoundaryControl::Constant(c) => *c,
            BoundaryControl::Sinusoid { amplitude, frequency } => amplitude * (2.0 * PI * frequency * t).sin(),
            BoundaryControl::Pulse { amplitude, node, start, end } => {
                if j == *node && t >= *start && t <= *end && end > start {
                    amplitude * (PI * (t - start) / (end - start)).sin().powi(2)
                } else {
                    0.0
                }
            }
            BoundaryControl::Nodal(v) => v.get(j).copied().unwrap_or(0.0),
            BoundaryControl::Sum(parts) => parts.iter().map(|p| p.value(t, j)).sum(),
            BoundaryControl::Scaled(s, inner) => s * inner.value(t, j),
        }
    }

    pub fn values(&self, t: f64, n_boundary: usize) -> DVector<f64> {
        DVector::from_fn(n_boundary, |j, _| self.value(t, j))
    }

    /// `u + scale · φ`
    pub fn perturbed(&self, scale: f64, profile: BoundaryControl) -> BoundaryControl {
        BoundaryControl::Sum(vec![self.clone(), BoundaryControl::Scaled(scale, Box::new(profile))])
    }

    /// Largest `|u|` over a uniform sampling of `[0, T]`.
    pub fn sup_norm(&self, final_time: f64, n_boundary: usize, samples: usize) -> f64 {
        (0..=samples)
            .map(|k| final_time * k as f64 / samples as f64)
            .flat_map(|t| (0..n_boundary).map(move |j| (t, j)))
            .map(|(t, j)| self.value(t, j).abs())
            .fold(0.0, f64::max)
    }

    /// Discrete `H¹(0, T; H_Γ)` norm from `samples` uniform increments, weighted
    /// by the lumped surface mass.
    pub fn h1_time_norm(&self, final_time: f64, surface_weights: &DVector<f64>, samples: usize) -> f64 {
        let nb = surface_weights.len();
        let h = final_time / samples as f64;
        let weighted = |v: &DVector<f64>| v.iter().zip(surface_weights.iter()).map(|(x, w)| w * x * x).sum::<f64>();
        let mut acc = 0.0;
        let mut prev = self.values(0.0, nb);
        for k in 1..=samples {
            let cur = self.values(h * k as f64, nb);
            let diff = (&cur - &prev) / h;
            acc += h * (weighted(&cur) + weighted(&diff));
            prev = cur;
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let s = BoundaryControl::Sinusoid { amplitude: 0.5, frequency: 5.0 };
        assert!((s.value(0.05, 0) - 0.5).abs() < 1e-15);
        let p = BoundaryControl::Pulse { amplitude: 2.0, node: 1, start: 0.0, end: 1.0 };
        assert_eq!(p.value(0.5, 0), 0.0);
        assert!((p.value(0.5, 1) - 2.0).abs() < 1e-15);
        let sum = s.perturbed(0.1, BoundaryControl::Nodal(DVector::from_vec(vec![1.0, -1.0])));
        assert!((sum.value(0.05, 1) - 0.4).abs() < 1e-15);
        assert_eq!(BoundaryControl::Constant(3.0).sup_norm(1.0, 2, 10), 3.0);
    }

    #[test]
    fn h1_norm_of_constant_has_no_derivative_part() {
        let w = DVector::from_vec(vec![1.0, 1.0]);
        let n = BoundaryControl::Constant(2.0).h1_time_norm(1.0, &w, 100);
        assert!((n - (8.0_f64).sqrt()).abs() < 1e-12);
    }
}
