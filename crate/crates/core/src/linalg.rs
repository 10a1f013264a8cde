//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalue threshold used for every rank decision in the crate.
pub const RANK_TOL: f64 = 1e-9;

/// Orthonormal basis (as columns) of the eigenspace of the symmetric matrix
/// `gram` with eigenvalues below `tol`, ordered by ascending eigenvalue.
///
/// `gram` is expected to be positive semi-definite, e.g. `MᵀM`.
pub fn null_space_of_gram(gram: DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram);
    let mut idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < tol).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    DMatrix::from_fn(n, idx.len(), |r, c| eig.eigenvectors[(r, idx[c])])
}

/// Modified Gram–Schmidt over the rows of `rows` with a second
/// re-orthogonalization pass. Rows whose residual norm falls below `tol`
/// are dropped, so the result has `rank` orthonormal rows.
pub fn gram_schmidt_rows(rows: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in 0..rows.nrows() {
        let mut v: DVector<f64> = rows.row(r).transpose();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v.axpy(-d, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol.max(tol * norm0) {
            basis.push(v / norm);
        }
    }
    let ncols = rows.ncols();
    DMatrix::from_fn(basis.len(), ncols, |r, c| basis[r][c])
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Distance of the rows of `m` from being orthonormal, `max |M Mᵀ − I|`.
pub fn row_orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let g = m * m.transpose();
    max_abs_diff(&g, &DMatrix::identity(m.nrows(), m.nrows()))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(b);
        at += k;
    }
    out
}

/// Numerical rank via the singular values, relative to the largest one.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}
