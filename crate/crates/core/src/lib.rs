//! The latent logarithm.
//!
//! `lag` replaces `log(x + pseudocount)` for non-negative data. Each
//! measurement `t` taken with exposure `o` is treated as a noisy draw from a
//! Continuous-Poisson with rate `exp(z) o`, where the log-latent rate `z` has
//! a Normal prior `N(mu, sigma2)`. The transform reports the MAP `z` (`nlag`)
//! and `z + ln o` (`lag`). The prior is either supplied or learned from the
//! data by iterated conditional modes.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, with `*32` variants for `f32`.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod contpois;
pub mod error;
pub mod experiments;
pub mod icm_fit;
pub mod io;
pub mod map_solver;
pub mod prior_file;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod transform;

pub use error::{LagError, Result};
pub use scalar::Real;

pub type Observation = map_solver::Observation<f64>;
pub type PriorSpec = map_solver::PriorSpec<f64>;
pub type MapSolution = map_solver::MapSolution<f64>;
pub type SolverOptions = map_solver::SolverOptions<f64>;
pub type ContPoisParam = contpois::ContPoisParam<f64>;
pub type LatentFit = icm_fit::LatentFit<f64>;
pub type FitOptions = icm_fit::FitOptions<f64>;
pub type TransformRow = transform::TransformRow<f64>;

pub type Observation32 = map_solver::Observation<f32>;
pub type PriorSpec32 = map_solver::PriorSpec<f32>;
pub type MapSolution32 = map_solver::MapSolution<f32>;
pub type LatentFit32 = icm_fit::LatentFit<f32>;
pub type TransformRow32 = transform::TransformRow<f32>;
