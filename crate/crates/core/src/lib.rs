//! Nonnegative matrix factorization toolkit.
//!
//! * [`matrix`]: dense matrices, residuals, column normalization, numerical rank.
//! * [`nnls`]: nonnegative least squares subsolvers.
//! * [`nmf`]: MU, HALS and ANLS under the two-block coordinate descent scheme.
//! * [`separable`]: SPA and its robust variants, the self-dictionary convex model.
//! * [`exact`]: heuristic exact NMF and nonnegative rank bracketing.
//! * [`geometry`]: nested polygons, slack matrices and extended formulations.
//! * [`hsi`]: synthetic hyperspectral unmixing benchmark.

pub mod error;
pub mod exact;
pub mod geometry;
pub mod hsi;
pub mod io;
pub mod matrix;
pub mod nmf;
pub mod nnls;
pub mod rng;
pub mod separable;

pub use error::{NmfError, Result};
pub use matrix::DenseMatrix;
