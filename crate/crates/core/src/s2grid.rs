//! Band-limited signals on the sphere and their samples on a grid of
//! necklaces (rings of constant `β`) around the `y` axis.
//!
//! Point `(i, j)` sits at `R_y(α_j) R_x(β_i) e_y = (sinβ sinα, cosβ, sinβ cosα)`
//! with `α_j = 2πj / res_alpha` and `cos β_i` the Gauss–Legendre nodes.
//! All transforms use `integral` normalized harmonics.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::o3::{wigner_d, EulerAngles};
use crate::quadrature::gauss_legendre;
use crate::sh::{sh_dim, spherical_harmonics, Normalization};

#[derive(Debug, Clone)]
pub struct S2Grid {
    pub res_beta: usize,
    pub res_alpha: usize,
    pub lmax: u32,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    /// Quadrature weight of every point of ring `i` (Gauss–Legendre weight
    /// times the uniform `2π / res_alpha` in `α`).
    ring_weights: Vec<f64>,
    /// Harmonics at every point, `(res_beta · res_alpha) × (lmax + 1)²`.
    sh: DMatrix<f64>,
}

/// Coefficients `v^0, ..., v^L` of `f = Σ_l v^l · Y^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct S2Signal {
    pub lmax: u32,
    pub coeffs: Vec<f64>,
}

impl S2Signal {
    pub fn new(lmax: u32, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != sh_dim(lmax) {
            return Err(Error::DimensionMismatch {
                what: "signal coefficients",
                expected: sh_dim(lmax),
                got: coeffs.len(),
            });
        }
        Ok(S2Signal { lmax, coeffs })
    }

    pub fn zeros(lmax: u32) -> Self {
        S2Signal {
            lmax,
            coeffs: vec![0.0; sh_dim(lmax)],
        }
    }

    pub fn block(&self, l: u32) -> &[f64] {
        &self.coeffs[(l * l) as usize..sh_dim(l)]
    }

    /// `v^l -> D^l(R) v^l`: the coefficients of `x ↦ f(R⁻¹ x)`.
    pub fn rotated(&self, angles: &EulerAngles) -> S2Signal {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for l in 0..=self.lmax {
            let v = DVector::from_column_slice(self.block(l));
            coeffs.extend((wigner_d(l, angles) * v).iter());
        }
        S2Signal {
            lmax: self.lmax,
            coeffs,
        }
    }

    /// `Σ_l ‖v^l‖²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum()
    }
}

/// Grid able to represent signals up to band limit `lmax`.
///
/// Requires `res_beta ≥ lmax + 1` (Gauss–Legendre exactness for products of
/// two degree-`lmax` harmonics) and `res_alpha ≥ 2·lmax + 1`.
pub fn make_grid(res_beta: usize, res_alpha: usize, lmax: u32) -> Result<S2Grid> {
    let min_beta = lmax as usize + 1;
    let min_alpha = 2 * lmax as usize + 1;
    if res_beta < min_beta {
        return Err(Error::Precondition(format!(
            "res_beta = {res_beta} is below the minimum {min_beta} for band limit {lmax}"
        )));
    }
    if res_alpha < min_alpha {
        return Err(Error::Precondition(format!(
            "res_alpha = {res_alpha} is below the minimum {min_alpha} for band limit {lmax}"
        )));
    }
    let (nodes, weights) = gauss_legendre(res_beta);
    // β ascending <=> cos β descending
    let betas: Vec<f64> = nodes.iter().rev().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
    let alpha_step = 2.0 * PI / res_alpha as f64;
    let ring_weights: Vec<f64> = weights.iter().rev().map(|w| w * alpha_step).collect();
    let alphas: Vec<f64> = (0..res_alpha).map(|j| j as f64 * alpha_step).collect();

    let mut grid = S2Grid {
        res_beta,
        res_alpha,
        lmax,
        betas,
        alphas,
        ring_weights,
        sh: DMatrix::zeros(0, 0),
    };
    let y = spherical_harmonics(lmax, &grid.points(), true, Normalization::Integral)?;
    grid.sh = DMatrix::from_row_slice(res_beta * res_alpha, sh_dim(lmax), y.values());
    Ok(grid)
}

impl S2Grid {
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }

    pub fn num_points(&self) -> usize {
        self.res_beta * self.res_alpha
    }

    /// Unit points, ring-major: index `i · res_alpha + j`.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let mut pts = Vec::with_capacity(self.num_points());
        for &b in &self.betas {
            let (sb, cb) = b.sin_cos();
            for &a in &self.alphas {
                let (sa, ca) = a.sin_cos();
                pts.push(Vector3::new(sb * sa, cb, sb * ca));
            }
        }
        pts
    }

    /// Quadrature weight of every point, same order as [`S2Grid::points`].
    pub fn point_weights(&self) -> Vec<f64> {
        self.ring_weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, self.res_alpha))
            .collect()
    }

    /// `∫_{S²} f` for samples in grid layout.
    pub fn integrate(&self, samples: &DMatrix<f64>) -> f64 {
        (0..self.res_beta)
            .map(|i| self.ring_weights[i] * samples.row(i).sum())
            .sum()
    }

    fn check_band(&self, lmax: u32) -> Result<()> {
        if lmax > self.lmax {
            return Err(Error::Precondition(format!(
                "band limit {lmax} exceeds the grid band limit {}",
                self.lmax
            )));
        }
        Ok(())
    }

    /// Samples of `f = Σ v^l · Y^l` as a `res_beta × res_alpha` matrix.
    pub fn to_grid(&self, signal: &S2Signal) -> Result<DMatrix<f64>> {
        self.check_band(signal.lmax)?;
        let d = sh_dim(signal.lmax);
        let v = DVector::from_column_slice(&signal.coeffs);
        let flat = self.sh.columns(0, d) * v;
        Ok(DMatrix::from_row_slice(self.res_beta, self.res_alpha, flat.as_slice()))
    }

    /// Quadrature projection onto `Y^0..=Y^lmax`; the exact inverse of
    /// [`S2Grid::to_grid`] on signals of band limit `≤ lmax`.
    pub fn from_grid(&self, samples: &DMatrix<f64>, lmax: u32) -> Result<S2Signal> {
        self.check_band(lmax)?;
        if samples.shape() != (self.res_beta, self.res_alpha) {
            return Err(Error::DimensionMismatch {
                what: "grid samples",
                expected: self.num_points(),
                got: samples.len(),
            });
        }
        let d = sh_dim(lmax);
        let weighted = DVector::from_fn(self.num_points(), |p, _| {
            let (i, j) = (p / self.res_alpha, p % self.res_alpha);
            self.ring_weights[i] * samples[(i, j)]
        });
        let coeffs = self.sh.columns(0, d).transpose() * weighted;
        Ok(S2Signal {
            lmax,
            coeffs: coeffs.iter().copied().collect(),
        })
    }
}
