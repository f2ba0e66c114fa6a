//! Spectral toolkit for the quantum random energy model `H = ΓT + U` on the
//! Hamming cube `{−1,1}^N`.
//!
//! Configurations are bit masks: bit `j` set means `σ_j = −1`. `T` is minus
//! the adjacency matrix of the cube, `U(σ) = √N ω(σ)` with i.i.d. standard
//! normal `ω`.

pub mod analysis;
pub mod disorder;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod green;
pub mod hypercube;
pub mod krylov;
pub mod operators;
pub mod predictions;
pub mod rng;
pub mod thermo;

pub use error::{QremError, Result};
