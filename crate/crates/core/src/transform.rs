//! `lag` and `nlag`, with a supplied prior or a learned one.

use std::path::Path;

use crate::error::{LagError, Result};
use crate::icm_fit::{fit, FitOptions, LatentFit};
use crate::map_solver::{solve_map_batch, Observation, PriorSpec, SolverOptions};
use crate::prior_file;
use crate::scalar::Real;

/// Per-row output.
///
/// `nlag` is the log-latent rate `z`; `lag = z + ln(o)` is the log-latent
/// abundance, undefined (`None`) for rows with `o = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformRow<T> {
    pub z: T,
    pub lag: Option<T>,
    pub nlag: T,
}

impl<T: Real> TransformRow<T> {
    pub fn new(z: T, o: T) -> Self {
        let lag = if o > T::zero() {
            Some(z + o.ln())
        } else {
            None
        };
        Self { z, lag, nlag: z }
    }
}

fn check_rows<T: Real>(obs: &[Observation<T>]) -> Result<()> {
    for (i, r) in obs.iter().enumerate() {
        r.validate().map_err(|e| LagError::InvalidObservation {
            row: i,
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

fn rows_from_z<T: Real>(obs: &[Observation<T>], z: &[T]) -> Vec<TransformRow<T>> {
    obs.iter()
        .zip(z)
        .map(|(r, &zi)| TransformRow::new(zi, r.o))
        .collect()
}

/// MAP transform under a fixed prior.
pub fn transform_fixed<T: Real>(
    obs: &[Observation<T>],
    prior: PriorSpec<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<TransformRow<T>>> {
    prior.validate()?;
    check_rows(obs)?;
    let z: Vec<T> = solve_map_batch(obs, prior, opts)?
        .into_iter()
        .map(|s| s.z)
        .collect();
    Ok(rows_from_z(obs, &z))
}

/// Learns the prior by ICM, then transforms. The learned prior is `fit.prior`.
pub fn transform_learned<T: Real>(
    obs: &[Observation<T>],
    opts: &FitOptions<T>,
) -> Result<(Vec<TransformRow<T>>, LatentFit<T>)> {
    let fitted = fit(obs, opts)?;
    let rows = rows_from_z(obs, &fitted.z);
    Ok((rows, fitted))
}

/// [`transform_fixed`] with the prior read from a prior document.
pub fn transform_with_prior<T: Real>(
    obs: &[Observation<T>],
    prior_path: &Path,
    opts: &SolverOptions<T>,
) -> Result<Vec<TransformRow<T>>> {
    let doc = prior_file::read_prior(prior_path)?;
    let prior = PriorSpec::new(T::lit(doc.prior.mu), T::lit(doc.prior.sigma2))?;
    transform_fixed(obs, prior, opts)
}
