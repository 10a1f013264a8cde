//! Equivariance testing, normalization utilities and the point-cloud
//! polynomial example.

use std::sync::OnceLock;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::irreps::Irreps;
use crate::o3::{rand_o3, EulerAngles, O3Element};
use crate::quadrature::gauss_hermite_normal;
use crate::sh::{spherical_harmonics, Normalization};
use crate::tensor_product::{fully_connected, TensorProductSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResidual {
    pub g: O3Element,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub max_residual: f64,
    pub trials: Vec<TrialResidual>,
}

impl EquivarianceReport {
    pub fn num_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn worst(&self) -> Option<&TrialResidual> {
        self.trials.iter().max_by(|a, b| a.residual.total_cmp(&b.residual))
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Residuals `max |f(D_in(g) x) − D_out(g) f(x)|` over random `g ∈ O(3)` and
/// standard-normal inputs. Trial `t` draws from ChaCha stream `t` of `seed`,
/// so results do not depend on scheduling.
pub fn equivariance_report<F>(
    f: F,
    irreps_in: &[Irreps],
    irreps_out: &Irreps,
    trials: usize,
    seed: u64,
) -> Result<EquivarianceReport>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<f64>> + Sync,
{
    let results: Vec<TrialResidual> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let g = rand_o3(&mut rng);
            let x: Vec<Vec<f64>> = irreps_in
                .iter()
                .map(|irreps| (0..irreps.dim()).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let gx: Vec<Vec<f64>> = irreps_in
                .iter()
                .zip(&x)
                .map(|(irreps, x)| (irreps.d_matrix(&g) * DVector::from_column_slice(x)).as_slice().to_vec())
                .collect();
            let fx = f(&x)?;
            let fgx = f(&gx)?;
            if fx.len() != irreps_out.dim() || fgx.len() != irreps_out.dim() {
                return Err(Error::DimensionMismatch {
                    what: "function output",
                    expected: irreps_out.dim(),
                    got: fx.len(),
                });
            }
            let gfx = irreps_out.d_matrix(&g) * DVector::from_vec(fx);
            let residual = gfx.iter().zip(&fgx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok(TrialResidual { g, residual })
        })
        .collect::<Result<_>>()?;
    let max_residual = results.iter().fold(0.0f64, |m, t| m.max(t.residual));
    Ok(EquivarianceReport {
        max_residual,
        trials: results,
    })
}

/// [`equivariance_report`] that fails with the worst group element when the
/// residual exceeds `tol`.
pub fn assert_equivariant<F>(
    f: F,
    irreps_in: &[Irreps],
    irreps_out: &Irreps,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<EquivarianceReport>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<f64>> + Sync,
{
    let report = equivariance_report(f, irreps_in, irreps_out, trials, seed)?;
    match report.worst() {
        Some(w) if !report.passed(tol) => Err(Error::NotEquivariant {
            residual: report.max_residual,
            tol,
            worst: w.g.to_string(),
        }),
        _ => Ok(report),
    }
}

/// Positions plus the directed edges `(src, dst)` between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vector3<f64>>,
    pub edges: Vec<(usize, usize)>,
}

impl PointCloud {
    pub fn with_radius(positions: Vec<Vector3<f64>>, r_max: f64) -> Self {
        let edges = radius_graph(&positions, r_max);
        PointCloud { positions, edges }
    }
}

/// All ordered pairs with `0 < |x_src − x_dst| < r_max`, sorted by `(src, dst)`.
pub fn radius_graph(positions: &[Vector3<f64>], r_max: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, a) in positions.iter().enumerate() {
        for (j, b) in positions.iter().enumerate() {
            let r = (a - b).norm();
            if r < r_max && r > 0.0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Sum rows of `values` (`index.len() × width`) into `num_nodes` rows,
/// accumulating in ascending edge order.
pub fn scatter_sum(values: &[f64], width: usize, index: &[usize], num_nodes: usize) -> Result<Vec<f64>> {
    if values.len() != index.len() * width {
        return Err(Error::DimensionMismatch {
            what: "scattered values",
            expected: index.len() * width,
            got: values.len(),
        });
    }
    let mut out = vec![0.0; num_nodes * width];
    for (e, &dst) in index.iter().enumerate() {
        if dst >= num_nodes {
            return Err(Error::Domain(format!("edge {e} targets node {dst} of {num_nodes}")));
        }
        let src = &values[e * width..][..width];
        out[dst * width..][..width].iter_mut().zip(src).for_each(|(o, v)| *o += v);
    }
    Ok(out)
}

pub const POLYNOMIAL_LMAX: u32 = 3;
pub const POLYNOMIAL_MID: &str = "64x0e + 24x1e + 24x1o + 16x2e + 16x2o";

/// Equivariant polynomial of a point cloud: spherical harmonics of the edge
/// vectors, two rounds of neighbourhood aggregation, each followed by a
/// fully connected tensor product, and a global sum.
#[derive(Debug, Clone)]
pub struct Polynomial {
    irreps_sh: Irreps,
    tp1: TensorProductSpec,
    tp2: TensorProductSpec,
    break_symmetry: bool,
}

impl Polynomial {
    pub fn new(irreps_out: &Irreps) -> Result<Self> {
        let irreps_sh = Irreps::spherical_harmonics(POLYNOMIAL_LMAX);
        let mid: Irreps = POLYNOMIAL_MID.parse()?;
        let tp1 = fully_connected(&irreps_sh, &irreps_sh, &mid)?;
        let tp2 = fully_connected(&mid, &mid, irreps_out)?;
        Ok(Polynomial {
            irreps_sh,
            tp1,
            tp2,
            break_symmetry: false,
        })
    }

    /// Same architecture, but the `x` and `z` components of the `l = 1`
    /// edge harmonics are swapped: a negative control that must fail
    /// rotation equivariance.
    pub fn negative_control(irreps_out: &Irreps) -> Result<Self> {
        Ok(Polynomial {
            break_symmetry: true,
            ..Polynomial::new(irreps_out)?
        })
    }

    pub fn irreps_out(&self) -> &Irreps {
        self.tp2.irreps_out()
    }

    pub fn tp1(&self) -> &TensorProductSpec {
        &self.tp1
    }

    pub fn tp2(&self) -> &TensorProductSpec {
        &self.tp2
    }

    /// Weights of `tp1` followed by those of `tp2`.
    pub fn weight_numel(&self) -> usize {
        self.tp1.weight_numel() + self.tp2.weight_numel()
    }

    pub fn random_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.weight_numel()).map(|_| rng.sample(StandardNormal)).collect()
    }

    pub fn forward(
        &self,
        pos: &[Vector3<f64>],
        max_radius: f64,
        num_neigh: f64,
        num_nodes: f64,
        weights: &[f64],
    ) -> Result<Vec<f64>> {
        if pos.is_empty() {
            return Err(Error::Domain("empty point cloud".into()));
        }
        if weights.len() != self.weight_numel() {
            return Err(Error::DimensionMismatch {
                what: "polynomial weights",
                expected: self.weight_numel(),
                got: weights.len(),
            });
        }
        let (w1, w2) = weights.split_at(self.tp1.weight_numel());
        let n = pos.len();
        let edges = radius_graph(pos, max_radius);
        let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();
        let vecs: Vec<Vector3<f64>> = edges.iter().map(|&(s, d)| pos[s] - pos[d]).collect();

        // we want polynomials of x
        let mut e_x = spherical_harmonics(POLYNOMIAL_LMAX, &vecs, false, Normalization::Component)?.into_values();
        let d_sh = self.irreps_sh.dim();
        if self.break_symmetry {
            for row in e_x.chunks_mut(d_sh) {
                row.swap(1, 3);
            }
        }
        let neigh = num_neigh.sqrt();

        let mut n_x = scatter_sum(&e_x, d_sh, &dst, n)?;
        n_x.iter_mut().for_each(|v| *v /= neigh);
        let e_x = edge_products(&self.tp1, w1, &n_x, &e_x, &src)?;

        let d_mid = self.tp1.irreps_out().dim();
        let mut n_x = scatter_sum(&e_x, d_mid, &dst, n)?;
        n_x.iter_mut().for_each(|v| *v /= neigh);
        let e_x = edge_products(&self.tp2, w2, &n_x, &e_x, &src)?;

        let d_out = self.irreps_out().dim();
        let mut out = vec![0.0; d_out];
        for row in e_x.chunks(d_out) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        let scale = neigh * num_nodes.sqrt();
        out.iter_mut().for_each(|v| *v /= scale);
        Ok(out)
    }

    /// Residuals of the three symmetry laws for one cloud and weight draw:
    /// shift by `shift`, rotate by `rotation`, and invert.
    pub fn e3_residuals(
        &self,
        pos: &[Vector3<f64>],
        params: &PolynomialParams,
        weights: &[f64],
        rotation: &EulerAngles,
        shift: &Vector3<f64>,
    ) -> Result<E3Residuals> {
        let run = |p: &[Vector3<f64>]| self.forward(p, params.max_radius, params.num_neigh, params.num_nodes, weights);
        let base = DVector::from_vec(run(pos)?);
        let diff = |a: &DVector<f64>, b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

        let shifted: Vec<_> = pos.iter().map(|x| x + shift).collect();
        let translation = diff(&base, &run(&shifted)?);

        let r = rotation.rot_matrix();
        let rotated: Vec<_> = pos.iter().map(|x| r * x).collect();
        let d_rot = self.irreps_out().d_matrix(&O3Element::rotation(*rotation));
        let rotation = diff(&(d_rot * &base), &run(&rotated)?);

        let inverted: Vec<_> = pos.iter().map(|x| -x).collect();
        let d_inv = self.irreps_out().d_matrix(&O3Element::INVERSION);
        let parity = diff(&(d_inv * &base), &run(&inverted)?);

        Ok(E3Residuals {
            translation,
            rotation,
            parity,
        })
    }
}

/// Caller-supplied constants of [`Polynomial::forward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialParams {
    pub max_radius: f64,
    pub num_neigh: f64,
    pub num_nodes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct E3Residuals {
    pub translation: f64,
    pub rotation: f64,
    pub parity: f64,
}

fn edge_products(
    tp: &TensorProductSpec,
    weights: &[f64],
    node_x: &[f64],
    edge_x: &[f64],
    src: &[usize],
) -> Result<Vec<f64>> {
    let (d1, d2, d3) = (tp.irreps_in1().dim(), tp.irreps_in2().dim(), tp.irreps_out().dim());
    let mut out = vec![0.0; src.len() * d3];
    out.par_chunks_mut(d3.max(1))
        .zip(edge_x.par_chunks(d2.max(1)))
        .zip(src.par_iter())
        .try_for_each(|((o, e), &s)| tp.evaluate_into(weights, &node_x[s * d1..][..d1], e, o))?;
    Ok(out)
}

/// Uniform points in a cube sized so that each point has on average
/// `mean_neighbours` others within `r_max`.
pub fn random_point_cloud<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    r_max: f64,
    mean_neighbours: f64,
) -> Vec<Vector3<f64>> {
    let ball = 4.0 / 3.0 * std::f64::consts::PI * r_max.powi(3);
    let side = (n as f64 * ball / mean_neighbours).cbrt();
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| side * (rng.random::<f64>() - 0.5)))
        .collect()
}

pub const HERMITE_NODES: usize = 128;

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite_normal(HERMITE_NODES))
}

/// `E[φ(Z)²]` for `Z ~ N(0, 1)`.
pub fn gaussian_second_moment<F: Fn(f64) -> f64>(phi: F) -> f64 {
    let (x, w) = hermite_rule();
    x.iter().zip(w).map(|(&x, &w)| w * phi(x).powi(2)).sum()
}

/// `c · φ` with `c = E[φ(Z)²]^{-1/2}`.
#[derive(Debug, Clone, Copy)]
pub struct RescaledActivation<F> {
    phi: F,
    scale: f64,
}

impl<F: Fn(f64) -> f64> RescaledActivation<F> {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * (self.phi)(x)
    }
}

pub fn rescale_activation<F: Fn(f64) -> f64>(phi: F) -> Result<RescaledActivation<F>> {
    let m = gaussian_second_moment(&phi);
    if !m.is_finite() || m <= f64::MIN_POSITIVE {
        return Err(Error::Domain(format!("activation has second moment {m}, cannot rescale")));
    }
    Ok(RescaledActivation {
        phi,
        scale: m.powf(-0.5),
    })
}

/// Mean of `‖x‖² / d` over a batch of `irreps` features stored row by row.
pub fn component_norm_check(samples: &[f64], irreps: &Irreps) -> Result<f64> {
    let d = irreps.dim();
    if d == 0 || !samples.len().is_multiple_of(d) || samples.is_empty() {
        return Err(Error::Precondition(format!(
            "{} values do not form a non-empty batch of {d}-dimensional features",
            samples.len()
        )));
    }
    let batch = samples.len() / d;
    let total: f64 = samples.iter().map(|v| v * v).sum();
    Ok(total / (batch * d) as f64)
}
