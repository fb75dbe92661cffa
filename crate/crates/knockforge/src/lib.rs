//! Conditional model-X knockoffs.
//!
//! Knockoff generators for low-dimensional Gaussian models, Gaussian graphical models,
//! discrete graphical models and discrete Markov chains, all conditioning on a sufficient
//! statistic so that no model parameter needs to be known. Also the knockoff filter
//! (lasso coefficient-difference statistics with knockoff/knockoff+ thresholds) and a
//! seeded simulation harness.
//!
//! The Gaussian linear algebra is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which every other module uses.

pub mod error;
pub mod discrete_knockoffs;
pub mod folds;
pub mod gaussian_core;
pub mod ggm_knockoffs;
pub mod graph_tools;
pub mod io;
pub mod knockoff_filter;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod simbench;

pub use error::{KnockoffError, Result};
pub use rng::RngStream;
pub use scalar::Real;

pub type Matrix = linalg::RealMatrix<f64>;
pub type MatrixF32 = linalg::RealMatrix<f32>;
pub type SVector = gaussian_core::SVector<f64>;
pub type GaussianSuffStats = gaussian_core::GaussianSuffStats<f64>;

/// Knockoff matrix plus which columns came out identical to the originals.
#[derive(Clone, Debug, PartialEq)]
pub struct KnockoffResult<M> {
    pub knockoffs: M,
    pub trivial: Vec<bool>,
}

impl<M> KnockoffResult<M> {
    pub fn n_trivial(&self) -> usize {
        self.trivial.iter().filter(|&&t| t).count()
    }
}
