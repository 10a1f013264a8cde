//! Real spherical harmonics.
//!
//! `Y^0 = 1`, `Y^1(x) = x` (in the `l = 1` layout) and
//! `Y^{l+1}(x) = c_l · C^{l,1,l+1}(Y^l(x) ⊗ Y^1(x))`, where `c_l > 0` makes
//! `‖Y^{l+1}‖ = 1` on the unit sphere. With `normalize = false` the input is
//! not projected to the sphere and every `Y^l` is a homogeneous polynomial of
//! degree `l`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::Memo;
use crate::cg::wigner_3j;
use crate::error::{Error, Result};
use crate::o3::vector_to_irrep;
use crate::s2grid::S2Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `‖Y^l‖ = 1` on the unit sphere.
    #[default]
    Norm,
    /// `‖Y^l‖² = 2l + 1` on the unit sphere.
    Component,
    /// `∫ Y^l_m Y^l_m = 1` over the unit sphere.
    Integral,
}

impl Normalization {
    /// Factor relative to `Norm` for degree `l`.
    pub fn factor(self, l: u32) -> f64 {
        let d = (2 * l + 1) as f64;
        match self {
            Normalization::Norm => 1.0,
            Normalization::Component => d.sqrt(),
            Normalization::Integral => (d / (4.0 * PI)).sqrt(),
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Normalization::Norm),
            "component" => Ok(Normalization::Component),
            "integral" => Ok(Normalization::Integral),
            other => Err(Error::parse(
                0,
                format!("unknown normalization `{other}` (norm, component, integral)"),
            )),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Norm => "norm",
            Normalization::Component => "component",
            Normalization::Integral => "integral",
        })
    }
}

/// Spherical harmonics of a batch of points: row `p` holds
/// `Y^0(x_p), Y^1(x_p), ..., Y^lmax(x_p)` concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct ShOutput {
    pub lmax: u32,
    values: Vec<f64>,
}

impl ShOutput {
    pub fn dim(&self) -> usize {
        sh_dim(self.lmax)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, p: usize) -> &[f64] {
        let d = self.dim();
        &self.values[p * d..(p + 1) * d]
    }

    /// `Y^l` of point `p`.
    pub fn block(&self, p: usize, l: u32) -> &[f64] {
        let start = (l * l) as usize;
        &self.point(p)[start..start + 2 * l as usize + 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `(lmax + 1)²`.
pub fn sh_dim(lmax: u32) -> usize {
    ((lmax + 1) * (lmax + 1)) as usize
}

/// `c_l` such that `c_l · C^{l,1,l+1}(Y^l ⊗ Y^1)` has unit norm on the sphere.
fn recursion_scale(l: u32) -> f64 {
    static CACHE: OnceLock<Memo<u32, f64>> = OnceLock::new();
    *CACHE.get_or_init(Memo::new).get_or_insert(&l, || {
        // the norm is rotation invariant, so any unit point will do
        let mut y = vec![0.0; sh_dim(l + 1)];
        eval_norm(l + 1, &Vector3::y(), &mut y, |k| if k < l { recursion_scale(k) } else { 1.0 });
        let top = &y[sh_dim(l)..];
        1.0 / top.iter().map(|v| v * v).sum::<f64>().sqrt()
    })
}

/// Fill `out` with `Y^0..=Y^lmax` in `norm` normalization (polynomial in `x`).
fn eval_norm(lmax: u32, x: &Vector3<f64>, out: &mut [f64], scale: impl Fn(u32) -> f64) {
    out[0] = 1.0;
    if lmax == 0 {
        return;
    }
    let y1 = vector_to_irrep(x);
    out[1..4].copy_from_slice(&y1);
    for l in 1..lmax {
        let cg = wigner_3j(l, 1, l + 1).expect("triangle rule holds");
        let (prev, next) = out.split_at_mut(sh_dim(l));
        let yl = &prev[(l * l) as usize..];
        let target = &mut next[..2 * (l + 1) as usize + 1];
        target.iter_mut().for_each(|v| *v = 0.0);
        cg.contract_into(yl, &y1, scale(l), target);
    }
}

fn eval_point(
    lmax: u32,
    x: &Vector3<f64>,
    normalize: bool,
    normalization: Normalization,
    out: &mut [f64],
) -> Result<()> {
    let x = if normalize {
        let n = x.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        x / n
    } else {
        *x
    };
    eval_norm(lmax, &x, out, recursion_scale);
    if normalization != Normalization::Norm {
        for l in 0..=lmax {
            let f = normalization.factor(l);
            out[(l * l) as usize..sh_dim(l)].iter_mut().for_each(|v| *v *= f);
        }
    }
    Ok(())
}

/// Evaluate `Y^0..=Y^lmax` on every point.
///
/// With `normalize = true` points are projected onto the unit sphere first and
/// a zero vector is a domain error.
pub fn spherical_harmonics(
    lmax: u32,
    points: &[Vector3<f64>],
    normalize: bool,
    normalization: Normalization,
) -> Result<ShOutput> {
    // warm the caches before going parallel
    for l in 1..lmax {
        recursion_scale(l);
    }
    let d = sh_dim(lmax);
    let mut values = vec![0.0; d * points.len()];
    values
        .par_chunks_mut(d)
        .zip(points.par_iter())
        .try_for_each(|(out, x)| eval_point(lmax, x, normalize, normalization, out))?;
    Ok(ShOutput { lmax, values })
}

/// Single-point convenience wrapper.
pub fn spherical_harmonics_at(
    lmax: u32,
    point: &Vector3<f64>,
    normalize: bool,
    normalization: Normalization,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; sh_dim(lmax)];
    eval_point(lmax, point, normalize, normalization, &mut out)?;
    Ok(out)
}

/// Largest deviation `|⟨Y^l_m, Y^{l'}_{m'}⟩ − δδ|` of the `integral`
/// normalized harmonics under the quadrature of `grid`.
pub fn sh_orthogonality_check(lmax: u32, grid: &S2Grid) -> Result<f64> {
    let points = grid.points();
    let weights = grid.point_weights();
    let y = spherical_harmonics(lmax, &points, true, Normalization::Integral)?;
    let d = sh_dim(lmax);
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in a..d {
            let inner: f64 = (0..points.len())
                .map(|p| weights[p] * y.point(p)[a] * y.point(p)[b])
                .sum();
            let expected = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((inner - expected).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::o3::{generators, wigner_d, EulerAngles};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng) -> Vector3<f64> {
        Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        )
    }

    /// Hand-written degree ≤ 2 polynomials spanning the irreps in the
    /// `(x, y, z)` layout, `component` normalization, up to a sign per l.
    fn oracle_l2(v: &Vector3<f64>) -> [f64; 5] {
        let (x, y, z) = (v.x, v.y, v.z);
        let s15 = 15f64.sqrt();
        let s5 = 5f64.sqrt();
        [
            s15 * x * z,
            s15 * x * y,
            s5 * (y * y - 0.5 * (x * x + z * z)),
            s15 * y * z,
            s15 / 2.0 * (z * z - x * x),
        ]
    }

    #[test]
    fn constant_and_vector() {
        let y = spherical_harmonics_at(0, &Vector3::new(0.3, -2.0, 1.0), true, Normalization::Norm).unwrap();
        assert_eq!(y, vec![1.0]);
        let p = Vector3::new(0.3, -2.0, 1.0).normalize();
        let y = spherical_harmonics_at(1, &p, true, Normalization::Norm).unwrap();
        assert_eq!(&y[1..], &vector_to_irrep(&p));
    }

    #[test]
    fn matches_quadratic_oracle_up_to_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let probe = Vector3::new(0.3, 0.5, -0.8).normalize();
        let y = spherical_harmonics_at(2, &probe, true, Normalization::Component).unwrap();
        let o = oracle_l2(&probe);
        let sign = (y[4..9].iter().zip(&o).map(|(a, b)| a * b).sum::<f64>()).signum();
        for _ in 0..50 {
            let p = random_point(&mut rng).normalize();
            let y = spherical_harmonics_at(2, &p, true, Normalization::Component).unwrap();
            let o = oracle_l2(&p);
            for k in 0..5 {
                assert!((y[4 + k] - sign * o[k]).abs() < 1e-12, "component {k}");
            }
        }
    }

    #[test]
    fn normalizations() {
        let p = Vector3::new(1.0, 2.0, -0.5).normalize();
        for l in 0..=6u32 {
            let n = spherical_harmonics_at(l, &p, true, Normalization::Norm).unwrap();
            let c = spherical_harmonics_at(l, &p, true, Normalization::Component).unwrap();
            let block = |v: &[f64]| v[(l * l) as usize..].iter().map(|x| x * x).sum::<f64>();
            assert!((block(&n) - 1.0).abs() < 1e-12);
            assert!((block(&c) - (2 * l + 1) as f64).abs() < 1e-11);
        }
        let i = spherical_harmonics_at(0, &p, true, Normalization::Integral).unwrap();
        assert!((i[0] - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let x = random_point(&mut rng);
            let c = rng.random::<f64>() * 3.0 - 1.5;
            let a = spherical_harmonics_at(6, &x, false, Normalization::Component).unwrap();
            let b = spherical_harmonics_at(6, &(x * c), false, Normalization::Component).unwrap();
            for l in 0..=6u32 {
                for k in (l * l) as usize..sh_dim(l) {
                    assert!((b[k] - c.powi(l as i32) * a[k]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_vector_rejected_only_when_normalizing() {
        let zero = Vector3::zeros();
        assert!(matches!(
            spherical_harmonics_at(2, &zero, true, Normalization::Norm),
            Err(Error::Domain(_))
        ));
        let y = spherical_harmonics_at(2, &zero, false, Normalization::Norm).unwrap();
        assert_eq!(y[0], 1.0);
        assert!(y[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn equivariance_parity_and_stabilizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let lmax = 8;
        for _ in 0..10 {
            let a = EulerAngles::random(&mut rng);
            let x = random_point(&mut rng).normalize();
            let y = spherical_harmonics_at(lmax, &x, true, Normalization::Norm).unwrap();
            let yr = spherical_harmonics_at(lmax, &(a.rot_matrix() * x), true, Normalization::Norm).unwrap();
            let yn = spherical_harmonics_at(lmax, &(-x), true, Normalization::Norm).unwrap();
            for l in 0..=lmax {
                let range = (l * l) as usize..sh_dim(l);
                let block = nalgebra::DVector::from_column_slice(&y[range.clone()]);
                let rotated = wigner_d(l, &a) * &block;
                for (k, i) in range.clone().enumerate() {
                    assert!((yr[i] - rotated[k]).abs() < 1e-9);
                    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((yn[i] - sign * y[i]).abs() < 1e-12);
                }
                let stab = generators(l).about(&x) * block;
                assert!(stab.amax() < 1e-10, "l={l}");
            }
        }
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let pts: Vec<_> = (0..17).map(|_| random_point(&mut rng)).collect();
        let batch = spherical_harmonics(4, &pts, true, Normalization::Integral).unwrap();
        assert_eq!(batch.len(), 17);
        for (p, x) in pts.iter().enumerate() {
            let single = spherical_harmonics_at(4, x, true, Normalization::Integral).unwrap();
            assert_eq!(batch.point(p), single.as_slice());
        }
    }

    #[test]
    fn polynomial_dimension_count() {
        // degree-l monomials in 3 variables vs. ‖x‖^{2k} Y^{l-2k} blocks
        for l in 0..=10usize {
            let monomials = (l + 2) * (l + 1) / 2;
            let blocks: usize = (0..=l / 2).map(|k| 2 * (l - 2 * k) + 1).sum();
            assert_eq!(monomials, blocks);
        }
    }
}
