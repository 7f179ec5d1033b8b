use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::mesh::{Cells, Mesh};
use super::MeshError;
use crate::linalg::{self, add_to, pattern_from_rows, zeros_on};

/// Assembled P1 operators in the bulk and on the boundary cycle.
///
/// The boundary unknowns are the bulk boundary nodes, so the trace is a
/// selection and `ρ_Γ = ρ|_Γ` holds by construction. Every bulk matrix,
/// including the lifted surface terms `TᵀM_ΓT` and `TᵀK_ΓT`, shares one
/// sparsity pattern.
#[derive(Clone, Debug)]
pub struct Operators {
    pub mass: CsrMatrix<f64>,
    pub stiffness: CsrMatrix<f64>,
    pub lumped_mass: DVector<f64>,
    /// `M_Γ` on boundary indices (cycle order).
    pub surface_mass: CsrMatrix<f64>,
    /// `K_Γ`, discretizing `−Δ_Γ`; identically zero in 1D.
    pub surface_stiffness: CsrMatrix<f64>,
    pub lumped_surface_mass: DVector<f64>,
    /// `TᵀM_ΓT` on the bulk pattern.
    pub lifted_surface_mass: CsrMatrix<f64>,
    /// `TᵀK_ΓT` on the bulk pattern.
    pub lifted_surface_stiffness: CsrMatrix<f64>,
    boundary: Vec<usize>,
    cells: Cells,
    cell_measures: Vec<f64>,
    n_nodes: usize,
}

impl Operators {
    pub fn assemble(mesh: &Mesh) -> Result<Operators, MeshError> {
        let n = mesh.n_nodes();
        let coords = mesh.coords();
        let measures = mesh.cell_measures();
        let scale = mesh.measure() / mesh.n_cells().max(1) as f64;
        for (k, &m) in measures.iter().enumerate() {
            if !(m > 1e-12 * scale) {
                return Err(MeshError::DegenerateCell { cell: k, measure: m });
            }
        }

        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut link = |a: usize, b: usize| {
            rows[a].push(b);
            rows[b].push(a);
        };
        match mesh.cells() {
            Cells::Segments(s) => s.iter().for_each(|&[a, b]| link(a, b)),
            Cells::Triangles(t) => t.iter().for_each(|&[a, b, c]| {
                link(a, b);
                link(b, c);
                link(c, a);
            }),
        }
        let boundary = mesh.boundary().to_vec();
        for [j, k] in mesh.boundary_edges() {
            link(boundary[j], boundary[k]);
        }
        let pattern = pattern_from_rows(rows, n);
        let mut mass = zeros_on(&pattern);
        let mut stiffness = zeros_on(&pattern);

        match mesh.cells() {
            Cells::Segments(s) => {
                for (&[a, b], &h) in s.iter().zip(&measures) {
                    let idx = [a, b];
                    for (p, &i) in idx.iter().enumerate() {
                        for (q, &j) in idx.iter().enumerate() {
                            let same = p == q;
                            add_to(&mut mass, i, j, h / 6.0 * if same { 2.0 } else { 1.0 });
                            add_to(&mut stiffness, i, j, if same { 1.0 / h } else { -1.0 / h });
                        }
                    }
                }
            }
            Cells::Triangles(t) => {
                for (&tri, &area) in t.iter().zip(&measures) {
                    let p = tri.map(|i| coords[i]);
                    // ∇φ_i = (b_i, c_i) / (2A)
                    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
                    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
                    for i in 0..3 {
                        for j in 0..3 {
                            let mij = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                            add_to(&mut mass, tri[i], tri[j], mij);
                            add_to(&mut stiffness, tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
                        }
                    }
                }
            }
        }

        let nb = boundary.len();
        let edges = mesh.boundary_edges();
        let surface_rows: Vec<Vec<usize>> = (0..nb)
            .map(|j| {
                let mut r = vec![j];
                if mesh.dim() == 2 {
                    r.push((j + 1) % nb);
                    r.push((j + nb - 1) % nb);
                }
                r
            })
            .collect();
        let surface_pattern = pattern_from_rows(surface_rows, nb);
        let mut surface_mass = zeros_on(&surface_pattern);
        let mut surface_stiffness = zeros_on(&surface_pattern);
        if mesh.dim() == 1 {
            // Γ is two points carrying the counting measure
            for j in 0..nb {
                add_to(&mut surface_mass, j, j, 1.0);
            }
        } else {
            for e in edges {
                let h = mesh.boundary_edge_length(e);
                if !(h > 0.0) {
                    return Err(MeshError::DegenerateBoundaryEdge { a: boundary[e[0]], b: boundary[e[1]] });
                }
                for (p, &i) in e.iter().enumerate() {
                    for (q, &j) in e.iter().enumerate() {
                        let same = p == q;
                        add_to(&mut surface_mass, i, j, h / 6.0 * if same { 2.0 } else { 1.0 });
                        add_to(&mut surface_stiffness, i, j, if same { 1.0 / h } else { -1.0 / h });
                    }
                }
            }
        }

        let mut lifted_surface_mass = zeros_on(&pattern);
        let mut lifted_surface_stiffness = zeros_on(&pattern);
        for (i, j, v) in surface_mass.triplet_iter() {
            add_to(&mut lifted_surface_mass, boundary[i], boundary[j], *v);
        }
        for (i, j, v) in surface_stiffness.triplet_iter() {
            add_to(&mut lifted_surface_stiffness, boundary[i], boundary[j], *v);
        }

        Ok(Operators {
            lumped_mass: linalg::row_sums(&mass),
            lumped_surface_mass: linalg::row_sums(&surface_mass),
            mass,
            stiffness,
            surface_mass,
            surface_stiffness,
            lifted_surface_mass,
            lifted_surface_stiffness,
            boundary,
            cells: mesh.cells().clone(),
            cell_measures: measures,
            n_nodes: n,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Bulk indices of the boundary cycle.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Restriction of a bulk vector to the boundary, in cycle order.
    pub fn trace(&self, v: &DVector<f64>) -> Result<DVector<f64>, MeshError> {
        if v.len() != self.n_nodes {
            return Err(MeshError::SizeMismatch { expected: self.n_nodes, got: v.len() });
        }
        Ok(self.trace_unchecked(v))
    }

    pub(crate) fn trace_unchecked(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.boundary.len(), self.boundary.iter().map(|&i| v[i]))
    }

    /// `Tᵀ`: scatter a boundary vector into an otherwise zero bulk vector.
    pub fn inject(&self, w: &DVector<f64>) -> Result<DVector<f64>, MeshError> {
        if w.len() != self.boundary.len() {
            return Err(MeshError::SizeMismatch { expected: self.boundary.len(), got: w.len() });
        }
        let mut v = DVector::zeros(self.n_nodes);
        for (j, &i) in self.boundary.iter().enumerate() {
            v[i] += w[j];
        }
        Ok(v)
    }

    /// `|Ω|` measured as `1ᵀM1`.
    pub fn bulk_measure(&self) -> f64 {
        self.lumped_mass.sum()
    }

    /// `|Γ|` measured as `1ᵀM_Γ1`.
    pub fn surface_measure(&self) -> f64 {
        self.lumped_surface_mass.sum()
    }

    /// Mass matrix weighted by the P1 interpolant of `c`: `∫ c_h φ_i φ_j`, exact.
    pub fn weighted_mass(&self, c: &DVector<f64>) -> CsrMatrix<f64> {
        let mut m = zeros_on(self.mass.pattern());
        match &self.cells {
            Cells::Segments(s) => {
                // ∫φ_i³ = h/4, ∫φ_i²φ_j = h/12
                for (&[a, b], &h) in s.iter().zip(&self.cell_measures) {
                    let (ca, cb) = (c[a], c[b]);
                    add_to(&mut m, a, a, h * (ca / 4.0 + cb / 12.0));
                    add_to(&mut m, b, b, h * (cb / 4.0 + ca / 12.0));
                    let off = h * (ca + cb) / 12.0;
                    add_to(&mut m, a, b, off);
                    add_to(&mut m, b, a, off);
                }
            }
            Cells::Triangles(t) => {
                // ∫φ_i³ = A/10, ∫φ_i²φ_j = A/30, ∫φ_iφ_jφ_k = A/60
                for (&tri, &area) in t.iter().zip(&self.cell_measures) {
                    let cv = tri.map(|i| c[i]);
                    let total: f64 = cv.iter().sum();
                    for i in 0..3 {
                        for j in 0..3 {
                            let v = if i == j {
                                area * (cv[i] / 10.0 + (total - cv[i]) / 30.0)
                            } else {
                                let k = 3 - i - j;
                                area * ((cv[i] + cv[j]) / 30.0 + cv[k] / 60.0)
                            };
                            add_to(&mut m, tri[i], tri[j], v);
                        }
                    }
                }
            }
        }
        m
    }

    /// Whether the stiffness matrix has nonpositive off-diagonal entries,
    /// the structural condition for the lumped μ-step to be an M-matrix.
    pub fn stiffness_is_m_matrix(&self) -> bool {
        self.stiffness.triplet_iter().all(|(i, j, v)| i == j || *v <= 1e-14)
    }
}

pub fn assemble(mesh: &Mesh) -> Result<Operators, MeshError> {
    Operators::assemble(mesh)
}

pub fn trace(ops: &Operators, v: &DVector<f64>) -> Result<DVector<f64>, MeshError> {
    ops.trace(v)
}
