//! Rotations, inversion and the real irreducible representations of O(3).
//!
//! Euler angles follow the Y-X-Y convention: `R = R_y(α) R_x(β) R_y(γ)`.
//! The complex irreps are built with ladder operators in the basis where the
//! generator about `y` is diagonal, then moved to a real basis with
//! [`complex_to_real`]. In that basis the `l = 1` irrep acts on vectors
//! stored as `(x, y, z)`: the `m = 0` component is the `y` coordinate.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{Complex, DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use rand::Rng;

use crate::cache::Memo;
use crate::irreps::{Irrep, Irreps};
use crate::linalg::block_diag;

type C64 = Complex<f64>;

/// Position of the cartesian components `x, y, z` inside an `l = 1`
/// feature. The basis produced by [`complex_to_real`] keeps them in
/// cartesian order, so `wigner_d(1, a) == a.rot_matrix()`.
pub const VECTOR_ORDER: [usize; 3] = [0, 1, 2];

/// Cartesian vector to `l = 1` components.
pub fn vector_to_irrep(v: &Vector3<f64>) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (axis, &slot) in VECTOR_ORDER.iter().enumerate() {
        out[slot] = v[axis];
    }
    out
}

/// Inverse of [`vector_to_irrep`].
pub fn irrep_to_vector(c: &[f64]) -> Vector3<f64> {
    Vector3::from_fn(|axis, _| c[VECTOR_ORDER[axis]])
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Y-X-Y Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub const IDENTITY: EulerAngles = EulerAngles {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        EulerAngles { alpha, beta, gamma }
    }

    /// `R_y(α) R_x(β) R_y(γ)`.
    pub fn rot_matrix(&self) -> Matrix3<f64> {
        rot_y(self.alpha) * rot_x(self.beta) * rot_y(self.gamma)
    }

    /// Angles of a proper rotation matrix. `β ∈ [0, π]`; at the poles the
    /// split between `α` and `γ` is arbitrary but the product is exact.
    pub fn from_matrix(r: &Matrix3<f64>) -> Self {
        // R e_y = (sinβ sinα, cosβ, sinβ cosα)
        let beta = (r[(0, 1)].hypot(r[(2, 1)])).atan2(r[(1, 1)]);
        let alpha = if beta.sin().abs() < 1e-300 {
            0.0
        } else {
            r[(0, 1)].atan2(r[(2, 1)])
        };
        let rest = rot_x(-beta) * rot_y(-alpha) * r;
        let gamma = rest[(0, 2)].atan2(rest[(0, 0)]);
        EulerAngles { alpha, beta, gamma }
    }

    /// Rotation `self ∘ other`, i.e. matrix `R(self) R(other)`.
    pub fn compose(&self, other: &EulerAngles) -> EulerAngles {
        EulerAngles::from_matrix(&(self.rot_matrix() * other.rot_matrix()))
    }

    pub fn inverse(&self) -> EulerAngles {
        EulerAngles::new(-self.gamma, -self.beta, -self.alpha)
    }

    /// Haar-distributed rotation: `α, γ` uniform on `[0, 2π)`, `cos β`
    /// uniform on `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let alpha = rng.random::<f64>() * 2.0 * PI;
        let beta = (1.0 - 2.0 * rng.random::<f64>()).clamp(-1.0, 1.0).acos();
        let gamma = rng.random::<f64>() * 2.0 * PI;
        EulerAngles { alpha, beta, gamma }
    }
}

/// Element of O(3) = SO(3) × {1, inversion}.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct O3Element {
    pub rotation: EulerAngles,
    pub inversion: bool,
}

impl O3Element {
    pub const IDENTITY: O3Element = O3Element {
        rotation: EulerAngles::IDENTITY,
        inversion: false,
    };

    pub const INVERSION: O3Element = O3Element {
        rotation: EulerAngles::IDENTITY,
        inversion: true,
    };

    pub fn new(rotation: EulerAngles, inversion: bool) -> Self {
        O3Element {
            rotation,
            inversion,
        }
    }

    pub fn rotation(rotation: EulerAngles) -> Self {
        O3Element::new(rotation, false)
    }

    /// Inversion commutes with every rotation, so composition is
    /// componentwise.
    pub fn compose(&self, other: &O3Element) -> O3Element {
        O3Element {
            rotation: self.rotation.compose(&other.rotation),
            inversion: self.inversion ^ other.inversion,
        }
    }

    pub fn inverse(&self) -> O3Element {
        O3Element::new(self.rotation.inverse(), self.inversion)
    }

    /// Action on cartesian vectors: `±R`.
    pub fn matrix(&self) -> Matrix3<f64> {
        let r = self.rotation.rot_matrix();
        if self.inversion {
            -r
        } else {
            r
        }
    }
}

impl std::fmt::Display for O3Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = &self.rotation;
        write!(f, "(alpha={:.6}, beta={:.6}, gamma={:.6}", a.alpha, a.beta, a.gamma)?;
        f.write_str(if self.inversion { ", inverted)" } else { ")" })
    }
}

/// Haar rotation with a fair coin for the inversion flag.
pub fn rand_o3<R: Rng + ?Sized>(rng: &mut R) -> O3Element {
    let rotation = EulerAngles::random(rng);
    O3Element::new(rotation, rng.random_bool(0.5))
}

/// Unitary change of basis from the real basis to the complex basis where
/// the `y` generator is diagonal. Row `l + m` holds the coefficients of the
/// complex component `z_m` in terms of the real components `x_{-l..l}`.
pub fn complex_to_real(l: u32) -> DMatrix<C64> {
    let l = l as i64;
    let n = (2 * l + 1) as usize;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut q = DMatrix::<C64>::zeros(n, n);
    let idx = |m: i64| (l + m) as usize;
    for m in -l..0 {
        q[(idx(m), idx(-m))] = C64::new(s, 0.0);
        q[(idx(m), idx(m))] = C64::new(0.0, -s);
    }
    q[(idx(0), idx(0))] = C64::new(1.0, 0.0);
    for m in 1..=l {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        q[(idx(m), idx(m))] = C64::new(sign * s, 0.0);
        q[(idx(m), idx(-m))] = C64::new(0.0, sign * s);
    }
    // (-i)^l
    let phase = match l % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    };
    q * phase
}

/// Complex angular-momentum generators `(X, Y, Z)` in the basis `m = -l..l`
/// where `Y = diag(i m)`. All three are anti-Hermitian.
pub fn complex_generators(l: u32) -> [DMatrix<C64>; 3] {
    let n = 2 * l as usize + 1;
    let j = l as f64;
    let mut raising = DMatrix::<C64>::zeros(n, n);
    let mut lowering = DMatrix::<C64>::zeros(n, n);
    for k in 0..n.saturating_sub(1) {
        // raising: entry (k+1, k) for m = k - l
        let m = k as f64 - j;
        raising[(k + 1, k)] = C64::new(-(j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        // lowering: entry (k, k+1) for m = k + 1 - l
        let m = k as f64 + 1.0 - j;
        lowering[(k, k + 1)] = C64::new((j * (j + 1.0) - m * (m - 1.0)).sqrt(), 0.0);
    }
    let half = C64::new(0.5, 0.0);
    let x = (&raising + &lowering) * half;
    let y = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            C64::new(0.0, r as f64 - j)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let z = (&raising - &lowering) * C64::new(0.0, -0.5);
    [x, y, z]
}

/// Real antisymmetric generators of the `l` irrep.
#[derive(Debug, Clone)]
pub struct Generators {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl Generators {
    pub fn as_array(&self) -> [&DMatrix<f64>; 3] {
        [&self.x, &self.y, &self.z]
    }

    /// Generator of rotations about the (not necessarily unit) cartesian
    /// axis `axis`.
    pub fn about(&self, axis: &Vector3<f64>) -> DMatrix<f64> {
        &self.x * axis.x + &self.y * axis.y + &self.z * axis.z
    }
}

/// Precomputed data per `l`: generators and the spectral decompositions used
/// to exponentiate the `x` and `y` generators.
struct IrrepData {
    generators: Generators,
    exp_x: AntisymmetricExp,
    exp_y: AntisymmetricExp,
}

/// `exp(θJ)` for a real antisymmetric `J` via the Hermitian matrix `iJ = V Λ V†`:
/// `exp(θJ) = V e^{-iθΛ} V†`.
struct AntisymmetricExp {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl AntisymmetricExp {
    fn new(j: &DMatrix<f64>) -> Self {
        let h = j.map(|v| C64::new(0.0, v));
        let eig = SymmetricEigen::new(h);
        AntisymmetricExp {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    fn exp(&self, theta: f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let phases = self
            .eigenvalues
            .map(|lam| C64::from_polar(1.0, -theta * lam));
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * phases[c]);
        (scaled * v.adjoint()).map(|z| z.re)
    }
}

fn irrep_data(l: u32) -> Arc<IrrepData> {
    static CACHE: OnceLock<Memo<u32, IrrepData>> = OnceLock::new();
    CACHE.get_or_init(Memo::new).get_or_insert(&l, || {
        let q = complex_to_real(l);
        let [x, y, z] = complex_generators(l);
        let to_real = |g: &DMatrix<C64>| (q.adjoint() * g * &q).map(|v| v.re);
        let generators = Generators {
            x: to_real(&x),
            y: to_real(&y),
            z: to_real(&z),
        };
        IrrepData {
            exp_x: AntisymmetricExp::new(&generators.x),
            exp_y: AntisymmetricExp::new(&generators.y),
            generators,
        }
    })
}

/// Real generators of the `l` irrep (cached).
pub fn generators(l: u32) -> Generators {
    irrep_data(l).generators.clone()
}

/// Real Wigner D matrix `exp(α J_y) exp(β J_x) exp(γ J_y)`.
pub fn wigner_d(l: u32, angles: &EulerAngles) -> DMatrix<f64> {
    if l == 0 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let data = irrep_data(l);
    data.exp_y.exp(angles.alpha) * data.exp_x.exp(angles.beta) * data.exp_y.exp(angles.gamma)
}

/// Wigner D matrix of the rotation given as a 3×3 matrix.
pub fn wigner_d_from_matrix(l: u32, r: &Matrix3<f64>) -> DMatrix<f64> {
    wigner_d(l, &EulerAngles::from_matrix(r))
}

/// Representation of `g` on the irrep `ir`: rotation part times the parity
/// sign when `g` contains the inversion.
pub fn d_o3(ir: Irrep, g: &O3Element) -> DMatrix<f64> {
    let d = wigner_d(ir.l, &g.rotation);
    if g.inversion {
        d * ir.p.sign()
    } else {
        d
    }
}

impl Irreps {
    /// Block-diagonal representation of `g` following the data layout.
    pub fn d_matrix(&self, g: &O3Element) -> DMatrix<f64> {
        let mut blocks = Vec::new();
        for m in self {
            let d = d_o3(m.ir, g);
            for _ in 0..m.mul {
                blocks.push(d.clone());
            }
        }
        block_diag(&blocks)
    }
}
