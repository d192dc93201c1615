//! Numerical workbench for matrix-valued truncated Toeplitz operators (MTTOs)
//! on finite-dimensional model spaces.
//!
//! The crate assembles compressions `f ↦ P_Θ(G f)` as explicit matrices,
//! extracts and decomposes their kernels, checks the block Toeplitz
//! factorisation that relates them to `T_𝒢`, and solves the associated
//! finite-interval convolution and state-space problems.

// `!(x < bound)` is used on purpose so that NaN is rejected with the
// out-of-range values; index loops mirror the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod canonical;
pub mod eae;
pub mod error;
pub mod fourier;
pub mod linalg;
pub mod lp_diagnostic;
pub mod model_space;
pub mod mtto;
pub mod near_invariance;
pub mod subspace;
pub mod sweep;
pub mod wiener_hopf;

pub use error::{Error, Result};
pub use fourier::{ExponentPair, MatrixSymbol, TrigPoly, C64};
pub use model_space::{MatrixInner, ModelSpaceBasis, ScalarInner};
