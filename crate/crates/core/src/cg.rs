//! Real-basis Clebsch–Gordan tensors.
//!
//! `C^{l1,l2,l3}` is the unique (up to sign) tensor invariant under
//! `D^{l1} ⊗ D^{l2} ⊗ D^{l3}`. It is found as the null vector of the
//! infinitesimal invariance system `Σ_a (J_a ⊗ 1 ⊗ 1 + 1 ⊗ J_a ⊗ 1 + 1 ⊗ 1 ⊗ J_a) c = 0`.
//!
//! The `y` equation is solved exactly first: in the complex basis its
//! kernel is spanned by the triples with `m1 + m2 + m3 = 0`, so those
//! vectors are mapped back to the real basis and the `x`/`z` equations are
//! solved inside that (much smaller) subspace with a symmetric
//! eigendecomposition.

use std::sync::{Arc, OnceLock};

use nalgebra::{Complex, DMatrix};

use crate::cache::Memo;
use crate::error::{Error, Result};
use crate::linalg::{null_space_of_gram, RANK_TOL};
use crate::o3::{complex_to_real, generators};

/// Dense `(2l1+1) × (2l2+1) × (2l3+1)` coefficient block, row-major in
/// `(i, j, k)`, Frobenius norm 1, first nonzero entry positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CgTensor {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
    values: Vec<f64>,
    nonzeros: Vec<(usize, usize, usize, f64)>,
}

impl CgTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        (
            2 * self.l1 as usize + 1,
            2 * self.l2 as usize + 1,
            2 * self.l3 as usize + 1,
        )
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (_, n2, n3) = self.shape();
        self.values[(i * n2 + j) * n3 + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries that are not exactly zero, in lexicographic order.
    pub fn nonzeros(&self) -> &[(usize, usize, usize, f64)] {
        &self.nonzeros
    }

    /// `out_k += scale · Σ_ij C_ijk a_i b_j`.
    pub fn contract_into(&self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        for &(i, j, k, c) in &self.nonzeros {
            out[k] += scale * c * a[i] * b[j];
        }
    }

    /// Block `C_{·,·,k}` reshaped as a `(2l3+1) × (2l1+1)(2l2+1)` matrix:
    /// row `k` maps `V1 ⊗ V2` onto component `k` of the output irrep.
    pub fn as_projection(&self) -> DMatrix<f64> {
        let (n1, n2, n3) = self.shape();
        DMatrix::from_fn(n3, n1 * n2, |k, ij| self.get(ij / n2, ij % n2, k))
    }
}

pub fn triangle(l1: u32, l2: u32, l3: u32) -> bool {
    l1.abs_diff(l2) <= l3 && l3 <= l1 + l2
}

/// Apply `J ⊗ 1 ⊗ 1 + 1 ⊗ J ⊗ 1 + 1 ⊗ 1 ⊗ J` for one generator axis.
fn apply_total(js: [&DMatrix<f64>; 3], c: &[f64]) -> Vec<f64> {
    let (n1, n2, n3) = (js[0].nrows(), js[1].nrows(), js[2].nrows());
    let at = |i: usize, j: usize, k: usize| (i * n2 + j) * n3 + k;
    let mut out = vec![0.0; c.len()];
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                let mut acc = 0.0;
                for a in 0..n1 {
                    acc += js[0][(i, a)] * c[at(a, j, k)];
                }
                for b in 0..n2 {
                    acc += js[1][(j, b)] * c[at(i, b, k)];
                }
                for d in 0..n3 {
                    acc += js[2][(k, d)] * c[at(i, j, d)];
                }
                out[at(i, j, k)] = acc;
            }
        }
    }
    out
}

/// Orthonormal real basis (as columns) of the kernel of the total `y`
/// generator.
fn y_invariant_basis(l1: u32, l2: u32, l3: u32) -> DMatrix<f64> {
    let q = [complex_to_real(l1), complex_to_real(l2), complex_to_real(l3)];
    let ls = [l1 as i64, l2 as i64, l3 as i64];
    let n = [q[0].nrows(), q[1].nrows(), q[2].nrows()];
    let total = n[0] * n[1] * n[2];

    // each complex weight vector conj(q1[m1,:]) ⊗ conj(q2[m2,:]) ⊗ conj(q3[m3,:])
    // touches at most 8 real entries; collect their real and imaginary parts
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    for m1 in -ls[0]..=ls[0] {
        for m2 in -ls[1]..=ls[1] {
            let m3 = -m1 - m2;
            if m3.abs() > ls[2] {
                continue;
            }
            let rows = [(ls[0] + m1) as usize, (ls[1] + m2) as usize, (ls[2] + m3) as usize];
            let support = |d: usize| -> Vec<(usize, Complex<f64>)> {
                (0..n[d])
                    .filter_map(|c| {
                        let v = q[d][(rows[d], c)].conj();
                        (v.norm() > 0.0).then_some((c, v))
                    })
                    .collect()
            };
            let (s1, s2, s3) = (support(0), support(1), support(2));
            let mut re = Vec::new();
            let mut im = Vec::new();
            for &(i, a) in &s1 {
                for &(j, b) in &s2 {
                    for &(k, c) in &s3 {
                        let v = a * b * c;
                        let idx = (i * n[1] + j) * n[2] + k;
                        if v.re.abs() > 1e-15 {
                            re.push((idx, v.re));
                        }
                        if v.im.abs() > 1e-15 {
                            im.push((idx, v.im));
                        }
                    }
                }
            }
            for part in [re, im] {
                if !part.is_empty() {
                    sparse.push(part);
                }
            }
        }
    }

    // orthonormalize through the Gram matrix of the sparse vectors
    let count = sparse.len();
    let dense: Vec<Vec<f64>> = sparse
        .iter()
        .map(|s| {
            let mut v = vec![0.0; total];
            for &(i, x) in s {
                v[i] = x;
            }
            v
        })
        .collect();
    let gram = DMatrix::from_fn(count, count, |a, b| {
        sparse[a].iter().map(|&(i, x)| x * dense[b][i]).sum::<f64>()
    });
    let eig = nalgebra::SymmetricEigen::new(gram);
    let keep: Vec<usize> = (0..count)
        .filter(|&i| eig.eigenvalues[i] > RANK_TOL)
        .collect();
    let mut basis = DMatrix::zeros(total, keep.len());
    for (col, &e) in keep.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[e].sqrt();
        for (a, s) in sparse.iter().enumerate() {
            let w = eig.eigenvectors[(a, e)] * scale;
            if w == 0.0 {
                continue;
            }
            for &(i, x) in s {
                basis[(i, col)] += w * x;
            }
        }
    }
    basis
}

/// Null space (columns) of the full invariance system.
fn invariant_vectors(l1: u32, l2: u32, l3: u32) -> DMatrix<f64> {
    let basis = y_invariant_basis(l1, l2, l3);
    let k = basis.ncols();
    if k == 0 {
        return basis;
    }
    let g = [generators(l1), generators(l2), generators(l3)];
    let total = basis.nrows();
    let mut images = DMatrix::zeros(2 * total, k);
    for col in 0..k {
        let c: Vec<f64> = basis.column(col).iter().copied().collect();
        let ax = apply_total([&g[0].x, &g[1].x, &g[2].x], &c);
        let az = apply_total([&g[0].z, &g[1].z, &g[2].z], &c);
        for (r, v) in ax.into_iter().chain(az).enumerate() {
            images[(r, col)] = v;
        }
    }
    let gram = images.transpose() * &images;
    let null = null_space_of_gram(gram, RANK_TOL);
    basis * null
}

/// Dimension of the space of invariant tensors for `(l1, l2, l3)`: 1 for
/// triangle-admissible triples, 0 otherwise.
pub fn invariant_space_dim(l1: u32, l2: u32, l3: u32) -> usize {
    invariant_vectors(l1, l2, l3).ncols()
}

fn compute(l1: u32, l2: u32, l3: u32) -> Result<CgTensor> {
    let null = invariant_vectors(l1, l2, l3);
    if null.ncols() != 1 {
        return Err(Error::Domain(format!(
            "invariance system for ({l1},{l2},{l3}) has a {}-dimensional null space",
            null.ncols()
        )));
    }
    let mut values: Vec<f64> = null.column(0).iter().copied().collect();
    for v in values.iter_mut() {
        if v.abs() < 1e-14 {
            *v = 0.0;
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let first = values
        .iter()
        .copied()
        .find(|v| v.abs() > 1e-10)
        .unwrap_or(1.0);
    let scale = first.signum() / norm;
    values.iter_mut().for_each(|v| *v *= scale);

    let (n2, n3) = (2 * l2 as usize + 1, 2 * l3 as usize + 1);
    let nonzeros = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(idx, &v)| (idx / (n2 * n3), (idx / n3) % n2, idx % n3, v))
        .collect();
    Ok(CgTensor {
        l1,
        l2,
        l3,
        values,
        nonzeros,
    })
}

/// Clebsch–Gordan tensor for `(l1, l2, l3)`, computed once per triple and
/// shared afterwards.
pub fn wigner_3j(l1: u32, l2: u32, l3: u32) -> Result<Arc<CgTensor>> {
    if !triangle(l1, l2, l3) {
        return Err(Error::Domain(format!(
            "({l1},{l2},{l3}) violates the triangle rule |l1-l2| <= l3 <= l1+l2"
        )));
    }
    static CACHE: OnceLock<Memo<(u32, u32, u32), CgTensor>> = OnceLock::new();
    CACHE
        .get_or_init(Memo::new)
        .get_or_try_insert(&(l1, l2, l3), || compute(l1, l2, l3))
}
