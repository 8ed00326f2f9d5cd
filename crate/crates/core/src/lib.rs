//! Tucker decomposition of third-order tensors by regularized nonconvex local
//! search.
//!
//! The objective is `f = L + λ·R` where `L = ‖S(A,B,C) − T‖²` and
//! `R = φ²`, with `φ = Σ_m ‖M Mᵀ − S₍ₘ₎ S₍ₘ₎ᵀ‖²` balancing each factor
//! against the matching flattening of the core. Plain second-order methods
//! stall at the high-order saddles of this objective (the origin is a
//! fourth-order saddle), so [`search::run`] alternates a second-order
//! stationary point finder with randomized missing-direction sampling from
//! [`escape`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! report output live in the `tucker` companion crate.
//!
//! Layout:
//! - [`linalg`]: dense row-major matrices and a one-sided Jacobi SVD.
//! - [`tensor`]: [`Tensor3`], flattenings, multilinear transforms, spectral
//!   norm estimation and HOSVD.
//! - [`objective`]: [`FactorPoint`], loss, regularizer, gradients, HVPs.
//! - [`subspace`]: singular-value-threshold splits and block decompositions.
//! - [`escape`]: improvement-direction constructors and the sampler.
//! - [`search`]: threshold schedule and the full local search driver.
//! - [`verify`]: executable checks of the landscape identities and bounds.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod escape;
pub mod linalg;
pub(crate) mod math;
pub mod objective;
pub mod random;
pub mod search;
pub mod subspace;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Svd};
pub use objective::{FactorPoint, ObjectiveReport};
pub use tensor::{SpectralTriple, Tensor3};
