//! O(3)-equivariant tensor algebra.
//!
//! The crate is organised bottom-up:
//!
//! - [`irreps`]: the `(l, parity)` type system and its string grammar.
//! - [`o3`]: rotations, generators, real Wigner D matrices and the parity action.
//! - [`cg`]: real-basis Clebsch–Gordan tensors obtained as null vectors of the
//!   infinitesimal invariance system.
//! - [`sh`]: real spherical harmonics built by the Clebsch–Gordan recursion.
//! - [`tensor_product`]: weighted bilinear equivariant paths and [`tensor_product::Linear`].
//! - [`reduce`]: decomposition of index-symmetrized tensors into irreps.
//! - [`s2grid`]: sampling of band-limited signals on a sphere grid.
//! - [`harness`]: equivariance testing, graph helpers and the equivariant
//!   point-cloud polynomial.
//!
//! Vector components of `1o` are stored in cartesian `(x, y, z)` order, see
//! [`o3::VECTOR_ORDER`].

mod cache;
pub mod cg;
pub mod error;
pub mod harness;
pub mod irreps;
pub mod linalg;
pub mod o3;
pub mod quadrature;
pub mod reduce;
pub mod s2grid;
pub mod sh;
pub mod tensor_product;

pub use error::{Error, Result};
pub use irreps::{Irrep, Irreps, MulIrrep, Parity};
