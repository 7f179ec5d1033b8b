//! Sparse helpers shared by the assembly and the time stepper.
//!
//! All bulk operators live on one sparsity pattern (node adjacency of the
//! mesh), so linear combinations are plain value-array arithmetic.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::pattern::SparsityPattern;
use nalgebra_sparse::{CscMatrix, CsrMatrix};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric positive definite (Cholesky breakdown)")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Build a pattern from per-row column sets (each row is sorted and deduplicated here).
pub fn pattern_from_rows(mut rows: Vec<Vec<usize>>, ncols: usize) -> SparsityPattern {
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    let mut cols = Vec::new();
    offsets.push(0);
    for row in rows.iter_mut() {
        row.sort_unstable();
        row.dedup();
        cols.extend_from_slice(row);
        offsets.push(cols.len());
    }
    SparsityPattern::try_from_offsets_and_indices(rows.len(), ncols, offsets, cols)
        .expect("rows are sorted and deduplicated")
}

pub fn zeros_on(pattern: &SparsityPattern) -> CsrMatrix<f64> {
    let values = vec![0.0; pattern.nnz()];
    CsrMatrix::try_from_pattern_and_values(pattern.clone(), values).expect("value count matches pattern")
}

/// Add `v` to entry `(i, j)`, which must be part of the pattern.
pub fn add_to(m: &mut CsrMatrix<f64>, i: usize, j: usize, v: f64) {
    let (offsets, cols, values) = m.csr_data_mut();
    let row = &cols[offsets[i]..offsets[i + 1]];
    let k = row.binary_search(&j).unwrap_or_else(|_| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
    values[offsets[i] + k] += v;
}

pub fn entry(m: &CsrMatrix<f64>, i: usize, j: usize) -> f64 {
    m.get_entry(i, j).map(|e| e.into_value()).unwrap_or(0.0)
}

/// `Σ cᵢ Aᵢ` for matrices sharing one pattern.
pub fn lincomb(terms: &[(f64, &CsrMatrix<f64>)]) -> CsrMatrix<f64> {
    let first = terms.first().expect("at least one term").1;
    let mut values = vec![0.0; first.nnz()];
    for (c, m) in terms {
        assert_eq!(m.pattern(), first.pattern(), "lincomb requires a shared sparsity pattern");
        for (v, x) in values.iter_mut().zip(m.values()) {
            *v += c * x;
        }
    }
    CsrMatrix::try_from_pattern_and_values(first.pattern().clone(), values).expect("same pattern")
}

pub fn add_diagonal(m: &mut CsrMatrix<f64>, d: &DVector<f64>) {
    for (i, &di) in d.iter().enumerate() {
        if di != 0.0 {
            add_to(m, i, i, di);
        }
    }
}

pub fn spmv(m: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    assert_eq!(m.ncols(), x.len());
    let (offsets, cols, values) = m.csr_data();
    DVector::from_iterator(
        m.nrows(),
        (0..m.nrows()).map(|i| (offsets[i]..offsets[i + 1]).map(|k| values[k] * x[cols[k]]).sum::<f64>()),
    )
}

/// `xᵀ A x`
pub fn quad_form(m: &CsrMatrix<f64>, x: &DVector<f64>) -> f64 {
    spmv(m, x).dot(x)
}

pub fn row_sums(m: &CsrMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.values().iter().sum()))
}

pub fn to_dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

pub fn max_asymmetry(m: &CsrMatrix<f64>) -> f64 {
    m.triplet_iter().map(|(i, j, v)| (v - entry(m, j, i)).abs()).fold(0.0, f64::max)
}

/// Reverse Cuthill–McKee ordering of a symmetric pattern.
fn reverse_cuthill_mckee(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.major_dim();
    let degree: Vec<usize> = (0..n).map(|i| pattern.lane(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).expect("unvisited node exists");
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = pattern.lane(v).iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| degree[w]);
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Sparse Cholesky of a symmetric positive definite matrix, with a fixed
/// bandwidth-reducing permutation computed from the pattern once.
pub struct SpdSolver {
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// position of each permuted value in the original value array
    gather: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl SpdSolver {
    pub fn factor(m: &CsrMatrix<f64>) -> Result<Self, LinalgError> {
        let n = m.nrows();
        let perm = reverse_cuthill_mckee(m.pattern());
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (offsets, cols, _) = m.csr_data();
        let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for old_i in 0..n {
            for k in offsets[old_i]..offsets[old_i + 1] {
                rows[inv[old_i]].push((inv[cols[k]], k));
            }
        }
        let mut p_offsets = vec![0];
        let mut p_cols = Vec::with_capacity(m.nnz());
        let mut gather = Vec::with_capacity(m.nnz());
        for row in rows.iter_mut() {
            row.sort_unstable();
            for &(c, k) in row.iter() {
                p_cols.push(c);
                gather.push(k);
            }
            p_offsets.push(p_cols.len());
        }
        let pattern =
            SparsityPattern::try_from_offsets_and_indices(n, n, p_offsets, p_cols).expect("permuted pattern is valid");
        let values: Vec<f64> = gather.iter().map(|&k| m.values()[k]).collect();
        // symmetric, so the CSR arrays double as CSC arrays
        let csc = CscMatrix::try_from_pattern_and_values(pattern, values).expect("valid csc");
        let chol = CscCholesky::factor(&csc).map_err(|_| LinalgError::NotPositiveDefinite)?;
        Ok(SpdSolver { perm, gather, chol })
    }

    /// Refactor a matrix with the same pattern as the one first factored.
    pub fn refactor(&mut self, m: &CsrMatrix<f64>) -> Result<(), LinalgError> {
        let values: Vec<f64> = self.gather.iter().map(|&k| m.values()[k]).collect();
        self.chol.refactor(&values).map_err(|_| LinalgError::NotPositiveDefinite)
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        let n = self.perm.len();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
        }
        let pb = DMatrix::from_iterator(n, 1, self.perm.iter().map(|&old| b[old]));
        let px = self.chol.solve(&pb);
        let mut x = DVector::zeros(n);
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = px[(new, 0)];
        }
        Ok(x)
    }
}

/// Solve `A x = b` once.
pub fn solve_spd(m: &CsrMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    SpdSolver::factor(m)?.solve(b)
}

/// Eigenvalues of the symmetric-definite pencil `A v = λ B v`, ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    let chol = b.clone().cholesky().ok_or(LinalgError::NotPositiveDefinite)?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(LinalgError::NotPositiveDefinite)?;
    let c = &linv * a * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let p = pattern_from_rows(rows, n);
        let mut m = zeros_on(&p);
        for i in 0..n {
            add_to(&mut m, i, i, 2.0);
            if i + 1 < n {
                add_to(&mut m, i, i + 1, -1.0);
                add_to(&mut m, i + 1, i, -1.0);
            }
        }
        m
    }

    #[test]
    fn cholesky_matches_dense_solve() {
        let m = laplacian_1d(9);
        let b = DVector::from_fn(9, |i, _| (i as f64).sin() + 0.3);
        let x = solve_spd(&m, &b).unwrap();
        let dense = to_dense(&m).lu().solve(&b).unwrap();
        assert!((x - dense).amax() < 1e-12);
    }

    #[test]
    fn refactor_reuses_pattern() {
        let m = laplacian_1d(6);
        let mut s = SpdSolver::factor(&m).unwrap();
        let mut m2 = m.clone();
        add_diagonal(&mut m2, &DVector::from_element(6, 1.5));
        s.refactor(&m2).unwrap();
        let b = DVector::from_element(6, 1.0);
        let x = s.solve(&b).unwrap();
        assert!((spmv(&m2, &x) - b).amax() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = lincomb(&[(-1.0, &laplacian_1d(4))]);
        assert!(SpdSolver::factor(&m).is_err());
    }

    #[test]
    fn pencil_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 6.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let ev = generalized_eigenvalues(&a, &b).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
