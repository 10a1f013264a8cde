//! Decomposition of tensors with index (anti)symmetries into irreps.
//!
//! An index formula such as `ijkl=jikl=-klij` generates a group `𝒫` of
//! signed index permutations. The tensor space `X` (one [`Irreps`] per index)
//! carries both the rotation action `D_X(g) = ⊗_k D_k(g)` and the permutation
//! action, and the two commute. [`reduce`] returns an orthonormal `Q` whose
//! rows span the permutation-stable subspace and are grouped into irrep
//! blocks:
//!
//! ```text
//! Q D_X(g) = [⊕ D_i(g)] Q        Q D_X(τ) = D_S(τ) Q
//! ```
//!
//! The steps are: an orthonormal basis `P` of the stable subspace (orbit
//! sums of the signed symmetrizer), a chained decomposition of `X` into
//! irrep bases `R_i`, and for every irrep the multiplicity mixing `W_i` with
//! `W_i R_i ⊂ span(P)`, found as the null space of a block Gram system on a
//! single irrep component.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cg::wigner_3j;
use crate::error::{Error, Result};
use crate::irreps::{Irrep, Irreps, MulIrrep};
use crate::linalg::{gram_schmidt_rows, RANK_TOL};
use crate::o3::O3Element;

pub const MAX_INDICES: usize = 6;

/// A signed index permutation: `x_I = sign · x_{I∘perm}`, where
/// `(I∘perm)_k = I_{perm[k]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignedPerm {
    pub perm: Vec<usize>,
    pub sign: i8,
}

impl SignedPerm {
    fn identity(n: usize) -> Self {
        SignedPerm {
            perm: (0..n).collect(),
            sign: 1,
        }
    }

    fn then(&self, other: &SignedPerm) -> SignedPerm {
        SignedPerm {
            perm: other.perm.iter().map(|&k| self.perm[k]).collect(),
            sign: self.sign * other.sign,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// Parsed index formula with its closed signed permutation group.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFormula {
    letters: Vec<char>,
    group: Vec<SignedPerm>,
    text: String,
}

impl IndexFormula {
    /// Parse `word ('=' ['-'] word)*`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words: Vec<(usize, bool, String)> = Vec::new();
        let mut pos = 0;
        for (n, part) in text.split('=').enumerate() {
            let lead = part.len() - part.trim_start().len();
            let trimmed = part.trim();
            let (neg, word) = match trimmed.strip_prefix('-') {
                Some(rest) if n > 0 => (true, rest.trim_start()),
                Some(_) => return Err(Error::parse(pos + lead, "the first word cannot be negated")),
                None => (false, trimmed),
            };
            if word.is_empty() {
                return Err(Error::parse(pos + lead, "empty index word"));
            }
            if let Some(off) = word.find(|c: char| !c.is_alphabetic()) {
                let at = pos + part.find(word).unwrap_or(lead) + off;
                return Err(Error::parse(at, "index letters must be alphabetic"));
            }
            words.push((pos + lead, neg, word.to_string()));
            pos += part.len() + 1;
        }

        let letters: Vec<char> = words[0].2.chars().collect();
        let n = letters.len();
        if n > MAX_INDICES {
            return Err(Error::parse(0, format!("at most {MAX_INDICES} indices are supported")));
        }
        if letters.iter().collect::<HashSet<_>>().len() != n {
            return Err(Error::parse(words[0].0, "index letters must be distinct"));
        }

        let mut generators = Vec::new();
        for (at, neg, word) in &words[1..] {
            let chars: Vec<char> = word.chars().collect();
            let mut sorted_a = chars.clone();
            let mut sorted_b = letters.clone();
            sorted_a.sort_unstable();
            sorted_b.sort_unstable();
            if sorted_a != sorted_b {
                return Err(Error::parse(*at, format!("`{word}` is not a permutation of `{}`", words[0].2)));
            }
            let perm = chars
                .iter()
                .map(|c| letters.iter().position(|l| l == c).unwrap())
                .collect();
            generators.push(SignedPerm {
                perm,
                sign: if *neg { -1 } else { 1 },
            });
        }

        let group = close_group(n, &generators)?;
        Ok(IndexFormula {
            letters,
            group,
            text: text.trim().to_string(),
        })
    }

    pub fn letters(&self) -> &[char] {
        &self.letters
    }

    pub fn num_indices(&self) -> usize {
        self.letters.len()
    }

    /// Every element of `𝒫` with its sign, identity first.
    pub fn group(&self) -> &[SignedPerm] {
        &self.group
    }

    /// Permutation matrix `D_X(τ)`: `(D_X(τ) x)_I = x_{I∘τ}`.
    pub fn permutation_matrix(&self, tau: &SignedPerm, dims: &[usize]) -> DMatrix<f64> {
        let total: usize = dims.iter().product();
        let mut m = DMatrix::zeros(total, total);
        for flat in 0..total {
            let idx = unflatten(flat, dims);
            let src: Vec<usize> = tau.perm.iter().map(|&k| idx[k]).collect();
            m[(flat, flatten(&src, dims))] = 1.0;
        }
        m
    }
}

impl fmt::Display for IndexFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn close_group(n: usize, generators: &[SignedPerm]) -> Result<Vec<SignedPerm>> {
    let mut seen: HashMap<Vec<usize>, i8> = HashMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([SignedPerm::identity(n)]);
    while let Some(g) = queue.pop_front() {
        match seen.get(&g.perm) {
            Some(&s) if s != g.sign => return Err(Error::ZeroTensor),
            Some(_) => continue,
            None => {}
        }
        seen.insert(g.perm.clone(), g.sign);
        for h in generators {
            queue.push_back(g.then(h));
        }
        order.push(g);
    }
    Ok(order)
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

fn flatten(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Orthonormal rows spanning `{x : x = D_S(τ) D_X(τ) x ∀τ ∈ 𝒫}`: the range
/// of the signed symmetrizer, one orbit sum per multi-index orbit that does
/// not cancel.
pub fn permutation_basis(formula: &IndexFormula, dims: &[usize]) -> Result<DMatrix<f64>> {
    if dims.len() != formula.num_indices() {
        return Err(Error::DimensionMismatch {
            what: "index dimensions",
            expected: formula.num_indices(),
            got: dims.len(),
        });
    }
    for tau in formula.group() {
        for (k, &src) in tau.perm.iter().enumerate() {
            if dims[k] != dims[src] {
                return Err(Error::Precondition(format!(
                    "indices `{}` and `{}` are exchanged by the formula but have dimensions {} and {}",
                    formula.letters[k], formula.letters[src], dims[k], dims[src]
                )));
            }
        }
    }
    let total: usize = dims.iter().product();
    let mut visited = vec![false; total];
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for flat in 0..total {
        if visited[flat] {
            continue;
        }
        let idx = unflatten(flat, dims);
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for tau in formula.group() {
            let image: Vec<usize> = tau.perm.iter().map(|&k| idx[k]).collect();
            let j = flatten(&image, dims);
            visited[j] = true;
            *acc.entry(j).or_insert(0.0) += tau.sign as f64;
        }
        let entries: Vec<(usize, f64)> = acc.into_iter().filter(|(_, v)| *v != 0.0).collect();
        if !entries.is_empty() {
            rows.push(entries);
        }
    }
    let mut p = DMatrix::zeros(rows.len(), total);
    for (r, entries) in rows.iter().enumerate() {
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        for &(c, v) in entries {
            p[(r, c)] = v / norm;
        }
    }
    Ok(p)
}

/// Basis of all copies of one irrep inside `X`: `mul · (2l+1)` orthonormal
/// rows ordered `(copy, component)`, satisfying
/// `[1 ⊗ D_i(g)] R_i = R_i D_X(g)`.
#[derive(Debug, Clone)]
pub struct IrrepBasis {
    pub ir: Irrep,
    pub mul: usize,
    pub basis: DMatrix<f64>,
}

/// Decompose `X = ⊗_k index_irreps[k]` one tensor product at a time.
pub fn chained_decomposition(index_irreps: &[Irreps]) -> Result<Vec<IrrepBasis>> {
    let Some(first) = index_irreps.first() else {
        return Ok(Vec::new());
    };
    let mut dim_x = first.dim();
    let mut current: BTreeMap<Irrep, Vec<Vec<f64>>> = BTreeMap::new();
    for (m, off) in first.iter().zip(first.offsets()) {
        let rows = current.entry(m.ir).or_default();
        for flat in off..off + m.dim() {
            let mut row = vec![0.0; dim_x];
            row[flat] = 1.0;
            rows.push(row);
        }
    }

    for next in &index_irreps[1..] {
        let dim_j = next.dim();
        let new_dim = dim_x * dim_j;
        let mut produced: BTreeMap<Irrep, Vec<Vec<f64>>> = BTreeMap::new();
        for (ir_a, rows_a) in &current {
            let da = ir_a.dim();
            let mul_a = rows_a.len() / da;
            for (mb, off_b) in next.iter().zip(next.offsets()) {
                let db = mb.ir.dim();
                for ir_c in ir_a.selection_rule(mb.ir) {
                    let dc = ir_c.dim();
                    let cg = wigner_3j(ir_a.l, mb.ir.l, ir_c.l)?;
                    let scale = (dc as f64).sqrt();
                    let out = produced.entry(ir_c).or_default();
                    for u in 0..mul_a {
                        for v in 0..mb.mul {
                            let mut block = vec![vec![0.0; new_dim]; dc];
                            for &(i, j, k, c) in cg.nonzeros() {
                                let src = &rows_a[u * da + i];
                                let col_j = off_b + v * db + j;
                                let dst = &mut block[k];
                                for (x, &val) in src.iter().enumerate() {
                                    if val != 0.0 {
                                        dst[x * dim_j + col_j] += scale * c * val;
                                    }
                                }
                            }
                            out.extend(block);
                        }
                    }
                }
            }
        }
        current = produced;
        dim_x = new_dim;
    }

    Ok(current
        .into_iter()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(ir, rows)| {
            let mul = rows.len() / ir.dim();
            let basis = DMatrix::from_fn(rows.len(), dim_x, |r, c| rows[r][c]);
            IrrepBasis { ir, mul, basis }
        })
        .collect())
}

/// `D_X(g) = ⊗_k D_{index k}(g)`.
pub fn tensor_representation(index_irreps: &[Irreps], g: &O3Element) -> DMatrix<f64> {
    index_irreps
        .iter()
        .fold(DMatrix::identity(1, 1), |acc, irreps| acc.kronecker(&irreps.d_matrix(g)))
}

/// Result of [`reduce`].
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    pub irreps_out: Irreps,
    /// `dim(irreps_out) × dim(X)`, orthonormal rows grouped by irrep blocks.
    pub q: DMatrix<f64>,
    pub index_irreps: Vec<Irreps>,
    pub formula: IndexFormula,
}

impl ReducedBasis {
    pub fn dim_x(&self) -> usize {
        self.q.ncols()
    }

    /// The permutation-stable basis `P` the reduction was built from.
    pub fn permutation_basis(&self) -> DMatrix<f64> {
        let dims: Vec<usize> = self.index_irreps.iter().map(Irreps::dim).collect();
        permutation_basis(&self.formula, &dims).expect("validated at construction")
    }
}

/// Irreps of every index, filling in letters related by the formula.
pub fn assign_index_irreps(formula: &IndexFormula, assignments: &[(char, Irreps)]) -> Result<Vec<Irreps>> {
    let n = formula.num_indices();
    let mut slots: Vec<Option<Irreps>> = vec![None; n];
    for (letter, irreps) in assignments {
        let Some(k) = formula.letters.iter().position(|l| l == letter) else {
            return Err(Error::Precondition(format!("index `{letter}` does not appear in `{formula}`")));
        };
        if let Some(prev) = &slots[k] {
            if prev != irreps {
                return Err(Error::Precondition(format!("index `{letter}` assigned twice")));
            }
        }
        slots[k] = Some(irreps.clone());
    }
    loop {
        let mut changed = false;
        for tau in formula.group() {
            for (k, &src) in tau.perm.iter().enumerate() {
                match (slots[k].clone(), slots[src].clone()) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Precondition(format!(
                            "indices `{}` ({a}) and `{}` ({b}) are related by the formula but carry different irreps",
                            formula.letters[k], formula.letters[src]
                        )))
                    }
                    (Some(a), None) => {
                        slots[src] = Some(a);
                        changed = true;
                    }
                    (None, Some(b)) => {
                        slots[k] = Some(b);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
        if !changed {
            break;
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            s.ok_or_else(|| Error::Precondition(format!("no irreps given for index `{}`", formula.letters[k])))
        })
        .collect()
}

/// Reduce the tensor space described by `formula` and the per-letter irreps.
pub fn reduce(formula: &IndexFormula, assignments: &[(char, Irreps)]) -> Result<ReducedBasis> {
    reduce_using_component(formula, assignments, 0)
}

/// [`reduce`] solving the mixing system on irrep component `component`
/// (taken modulo `2l + 1`) instead of the first one.
pub fn reduce_using_component(
    formula: &IndexFormula,
    assignments: &[(char, Irreps)],
    component: usize,
) -> Result<ReducedBasis> {
    let index_irreps = assign_index_irreps(formula, assignments)?;
    let dims: Vec<usize> = index_irreps.iter().map(Irreps::dim).collect();
    let p = permutation_basis(formula, &dims)?;
    let dim_x: usize = dims.iter().product();

    let mut entries = Vec::new();
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    if p.nrows() > 0 {
        for rb in chained_decomposition(&index_irreps)? {
            let d = rb.ir.dim();
            let c = component % d;
            let r = DMatrix::from_fn(rb.mul, dim_x, |u, x| rb.basis[(u * d + c, x)]);
            let w = mixing_solutions(&r, &p);
            if w.nrows() == 0 {
                continue;
            }
            let s = w.nrows();
            let mut q_i = DMatrix::zeros(s * d, dim_x);
            for sol in 0..s {
                for u in 0..rb.mul {
                    let coef = w[(sol, u)];
                    if coef == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        for x in 0..dim_x {
                            q_i[(sol * d + k, x)] += coef * rb.basis[(u * d + k, x)];
                        }
                    }
                }
            }
            entries.push(MulIrrep::new(s, rb.ir));
            blocks.push(q_i);
        }
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut q = DMatrix::zeros(rows, dim_x);
    let mut at = 0;
    for b in blocks {
        q.rows_mut(at, b.nrows()).copy_from(&b);
        at += b.nrows();
    }
    Ok(ReducedBasis {
        irreps_out: Irreps::new(entries),
        q,
        index_irreps,
        formula: formula.clone(),
    })
}

/// Orthonormal rows `W` (solutions × multiplicity) with `W r ⊂ span(P)`,
/// from the null space of `[[r rᵀ, −r Pᵀ], [−P rᵀ, P Pᵀ]]`.
fn mixing_solutions(r: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let m = r.nrows();
    let n = m + p.nrows();
    let mut u = DMatrix::zeros(n, n);
    u.view_mut((0, 0), (m, m)).copy_from(&(r * r.transpose()));
    let cross = -(r * p.transpose());
    u.view_mut((0, m), (m, p.nrows())).copy_from(&cross);
    u.view_mut((m, 0), (p.nrows(), m)).copy_from(&cross.transpose());
    u.view_mut((m, m), (p.nrows(), p.nrows())).copy_from(&(p * p.transpose()));

    let eig = SymmetricEigen::new(u);
    let null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < RANK_TOL).collect();
    if null.is_empty() {
        return DMatrix::zeros(0, m);
    }
    // num_solutions × multiplicity
    let w = DMatrix::from_fn(null.len(), m, |s, uu| eig.eigenvectors[(uu, null[s])]);
    gram_schmidt_rows(&(w.transpose() * &w), RANK_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_o() -> Irreps {
        "1o".parse().unwrap()
    }

    #[test]
    fn formula_groups() {
        let f = IndexFormula::parse("ij=ji").unwrap();
        assert_eq!(f.group().len(), 2);
        assert!(f.group().iter().all(|g| g.sign == 1));

        let f = IndexFormula::parse("ijkl=jikl=ijlk=klij").unwrap();
        assert_eq!(f.group().len(), 8);

        let f = IndexFormula::parse("ij=-ji").unwrap();
        assert_eq!(f.group().len(), 2);
        let swap = f.group().iter().find(|g| !g.is_identity()).unwrap();
        assert_eq!(swap.sign, -1);

        let f = IndexFormula::parse(" ijk = -jik = jki ").unwrap();
        assert_eq!(f.group().len(), 6);
        assert_eq!(f.letters(), &['i', 'j', 'k']);
    }

    #[test]
    fn formula_errors() {
        assert_eq!(IndexFormula::parse("ij=-ij").unwrap_err(), Error::ZeroTensor);
        // (ij)(kl) odd and even at once
        assert_eq!(IndexFormula::parse("ijk=-jik=jik").unwrap_err(), Error::ZeroTensor);
        assert!(matches!(IndexFormula::parse("ij=jk"), Err(Error::Parse { pos: 3, .. })));
        assert!(matches!(IndexFormula::parse("ii"), Err(Error::Parse { .. })));
        assert!(matches!(IndexFormula::parse("-ij=ji"), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!(IndexFormula::parse("ij="), Err(Error::Parse { .. })));
        assert!(matches!(IndexFormula::parse("i1=1i"), Err(Error::Parse { pos: 1, .. })));
        assert!(matches!(IndexFormula::parse("abcdefg"), Err(Error::Parse { .. })));
    }

    #[test]
    fn symmetric_2x2_basis() {
        let f = IndexFormula::parse("ij=ji").unwrap();
        let p = permutation_basis(&f, &[2, 2]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, s, s, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.nrows(), 3);
        assert!((p - expected).amax() < 1e-15);
    }

    #[test]
    fn stable_subspace_ranks() {
        let f = IndexFormula::parse("ij=-ji").unwrap();
        assert_eq!(permutation_basis(&f, &[3, 3]).unwrap().nrows(), 3);
        let f = IndexFormula::parse("ijkl=jikl=ijlk=klij").unwrap();
        assert_eq!(permutation_basis(&f, &[3; 4]).unwrap().nrows(), 21);
    }

    #[test]
    fn permutation_basis_rejects_mismatched_dims() {
        let f = IndexFormula::parse("ij=ji").unwrap();
        assert!(matches!(permutation_basis(&f, &[2, 3]), Err(Error::Precondition(_))));
        assert!(matches!(permutation_basis(&f, &[2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chained_examples() {
        let r = chained_decomposition(&[one_o(), one_o()]).unwrap();
        let irs: Vec<String> = r.iter().map(|b| format!("{}x{}", b.mul, b.ir)).collect();
        assert_eq!(irs, ["1x0e", "1x1e", "1x2e"]);

        let r = chained_decomposition(&["0e".parse().unwrap()]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].basis, DMatrix::identity(1, 1));

        let r = chained_decomposition(&vec![one_o(); 4]).unwrap();
        let total: usize = r.iter().map(|b| b.basis.nrows()).sum();
        assert_eq!(total, 81);
    }

    #[test]
    fn known_reductions() {
        let i = |f: &str| reduce(&IndexFormula::parse(f).unwrap(), &[('i', one_o())]).unwrap();
        let r = i("ijkl=jikl=ijlk=klij");
        assert_eq!(r.irreps_out.to_string(), "2x0e+2x2e+1x4e");
        assert_eq!(r.q.nrows(), 21);
        assert_eq!(i("ij=ji").irreps_out.to_string(), "1x0e+1x2e");
        assert_eq!(i("ij=-ji").irreps_out.to_string(), "1x1e");
    }

    #[test]
    fn assignment_propagation_and_errors() {
        let f = IndexFormula::parse("ijk=jik").unwrap();
        let v = assign_index_irreps(&f, &[('i', one_o()), ('k', "0e".parse().unwrap())]).unwrap();
        assert_eq!(v[1], one_o());
        assert!(matches!(assign_index_irreps(&f, &[('i', one_o())]), Err(Error::Precondition(_))));
        assert!(matches!(
            assign_index_irreps(&f, &[('i', one_o()), ('j', "1e".parse().unwrap()), ('k', one_o())]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(assign_index_irreps(&f, &[('z', one_o())]), Err(Error::Precondition(_))));
    }

    #[test]
    fn all_zero_tensor_gives_empty_basis() {
        let f = IndexFormula::parse("ij=-ji").unwrap();
        let r = reduce(&f, &[('i', "0e".parse().unwrap())]).unwrap();
        assert!(r.irreps_out.is_empty());
        assert_eq!(r.q.shape(), (0, 1));
    }
}
