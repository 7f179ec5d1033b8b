use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use super::MeshError;

/// Maximum refinement level accepted by [`Mesh::disc`].
pub const MAX_DISC_LEVEL: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub enum Cells {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// A conforming simplicial mesh of `Ω` in one or two dimensions, with the
/// boundary nodes listed in cycle order along `Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<[f64; 2]>,
    cells: Cells,
    boundary: Vec<usize>,
}

impl Mesh {
    /// `n` equal segments on `[0, length]`; the boundary is the two endpoints.
    pub fn interval(n: usize, length: f64) -> Result<Mesh, MeshError> {
        if n < 2 {
            return Err(MeshError::TooFewElements(n));
        }
        if !(length > 0.0) {
            return Err(MeshError::InvalidLength(length));
        }
        let coords = (0..=n).map(|i| [length * i as f64 / n as f64, 0.0]).collect();
        let cells = Cells::Segments((0..n).map(|i| [i, i + 1]).collect());
        Ok(Mesh { dim: 1, coords, cells, boundary: vec![0, n] })
    }

    /// Uniformly refined triangulation of the unit disc. Level 0 is the
    /// regular hexagon fan; each level splits every triangle in four and
    /// pushes new boundary midpoints out to the unit circle.
    pub fn disc(levels: usize) -> Result<Mesh, MeshError> {
        if levels > MAX_DISC_LEVEL {
            return Err(MeshError::LevelTooHigh { levels, max: MAX_DISC_LEVEL });
        }
        let mut coords = vec![[0.0, 0.0]];
        for k in 0..6 {
            let th = PI / 3.0 * k as f64;
            coords.push([th.cos(), th.sin()]);
        }
        let mut tris: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();

        for _ in 0..levels {
            let boundary_edges = boundary_edge_set(&tris);
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, coords: &mut Vec<[f64; 2]>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    let (pa, pb) = (coords[a], coords[b]);
                    let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    if boundary_edges.contains(&key) {
                        let r = p[0].hypot(p[1]);
                        p = [p[0] / r, p[1] / r];
                    }
                    coords.push(p);
                    coords.len() - 1
                })
            };
            let mut next = Vec::with_capacity(tris.len() * 4);
            for &[a, b, c] in &tris {
                let ab = mid(a, b, &mut coords);
                let bc = mid(b, c, &mut coords);
                let ca = mid(c, a, &mut coords);
                next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            }
            tris = next;
        }

        let mut boundary: Vec<usize> = boundary_edge_set(&tris).into_iter().flat_map(|(a, b)| [a, b]).collect();
        boundary.sort_unstable();
        boundary.dedup();
        boundary.sort_by(|&i, &j| {
            let ti = coords[i][1].atan2(coords[i][0]);
            let tj = coords[j][1].atan2(coords[j][0]);
            ti.partial_cmp(&tj).unwrap()
        });
        Ok(Mesh { dim: 2, coords, cells: Cells::Triangles(tris), boundary })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        match &self.cells {
            Cells::Segments(s) => s.len(),
            Cells::Triangles(t) => t.len(),
        }
    }

    /// Boundary nodes in cycle order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn boundary_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n_nodes()];
        for &b in &self.boundary {
            flags[b] = true;
        }
        flags
    }

    /// Consecutive pairs of the boundary cycle (with wrap-around in 2D; none in 1D).
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        if self.dim == 1 {
            return Vec::new();
        }
        let nb = self.boundary.len();
        (0..nb).map(|j| [j, (j + 1) % nb]).collect()
    }

    pub fn boundary_edge_length(&self, edge: [usize; 2]) -> f64 {
        let (a, b) = (self.coords[self.boundary[edge[0]]], self.coords[self.boundary[edge[1]]]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Signed measure of each cell (length or oriented area).
    pub fn cell_measures(&self) -> Vec<f64> {
        match &self.cells {
            Cells::Segments(s) => s.iter().map(|&[a, b]| self.coords[b][0] - self.coords[a][0]).collect(),
            Cells::Triangles(t) => {
                t.iter().map(|&[a, b, c]| triangle_area(self.coords[a], self.coords[b], self.coords[c])).collect()
            }
        }
    }

    /// `|Ω|` from the geometry.
    pub fn measure(&self) -> f64 {
        self.cell_measures().iter().map(|m| m.abs()).sum()
    }

    /// `|Γ|`: perimeter in 2D, counting measure of the two endpoints in 1D.
    pub fn boundary_measure(&self) -> f64 {
        if self.dim == 1 {
            return 2.0;
        }
        self.boundary_edges().into_iter().map(|e| self.boundary_edge_length(e)).sum()
    }

    /// Unique undirected edges of the cell complex.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        let mut set = BTreeSet::new();
        match &self.cells {
            Cells::Segments(s) => {
                for &[a, b] in s {
                    set.insert((a.min(b), a.max(b)));
                }
            }
            Cells::Triangles(t) => {
                for &[a, b, c] in t {
                    for (x, y) in [(a, b), (b, c), (c, a)] {
                        set.insert((x.min(y), x.max(y)));
                    }
                }
            }
        }
        set
    }

    /// `V − E + F`
    pub fn euler_characteristic(&self) -> i64 {
        let v = self.n_nodes() as i64;
        let e = self.edges().len() as i64;
        match &self.cells {
            Cells::Segments(_) => v - e,
            Cells::Triangles(t) => v - e + t.len() as i64,
        }
    }

    /// Relabel nodes: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Mesh {
        assert_eq!(perm.len(), self.n_nodes());
        let mut inv = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let coords = perm.iter().map(|&old| self.coords[old]).collect();
        let cells = match &self.cells {
            Cells::Segments(s) => Cells::Segments(s.iter().map(|c| c.map(|i| inv[i])).collect()),
            Cells::Triangles(t) => Cells::Triangles(t.iter().map(|c| c.map(|i| inv[i])).collect()),
        };
        let boundary = self.boundary.iter().map(|&b| inv[b]).collect();
        Mesh { dim: self.dim, coords, cells, boundary }
    }
}

pub(crate) fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn boundary_edge_set(tris: &[[usize; 3]]) -> BTreeSet<(usize, usize)> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for &[a, b, c] in tris {
        for (x, y) in [(a, b), (b, c), (c, a)] {
            *count.entry((x.min(y), x.max(y))).or_default() += 1;
        }
    }
    count.into_iter().filter(|&(_, n)| n == 1).map(|(e, _)| e).collect()
}

pub fn build_interval_mesh(n: usize, length: f64) -> Result<Mesh, MeshError> {
    Mesh::interval(n, length)
}

pub fn build_disc_mesh(levels: usize) -> Result<Mesh, MeshError> {
    Mesh::disc(levels)
}
