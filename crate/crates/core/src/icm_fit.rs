//! Learning the prior: iterated conditional modes over `(z, mu, sigma2)`.
//!
//! Each sweep sets every `z_i` to its MAP under the current prior, then sets
//! `(mu, sigma2)` to the mean and (n-divisor) variance of `z`. Both steps
//! maximize the same joint log-likelihood over their own block, so the
//! recorded objective never decreases.
//!
//! With `sigma2` held fixed the objective is jointly concave in `(z, mu)`, and
//! plain alternation creeps along that ridge at rate `1 - sigma2 exp(z) o`,
//! which stalls once `sigma2` is small. Each sweep therefore solves the
//! `(z, mu)` block exactly: `mu` is moved by bracketed Newton steps to the root
//! of `mean(MAP(mu)) - mu`, each step re-solving the MAP batch, before the
//! variance update.
//!
//! The variance update is a fixed-point iteration that can also contract
//! slowly, so a sweep repeats `(z, mu)` and variance steps until `sigma2` is
//! stationary, extrapolating `ln sigma2` by secant steps. An extrapolated step
//! that would lower the objective is replaced by the plain update, so the
//! trace stays monotone and every fixed point is an ICM fixed point.

use crate::error::{LagError, Result};
use crate::map_solver::{expected_count, solve_map_batch, Observation, PriorSpec, SolverOptions};
use crate::scalar::{compensated_sum, Real};
use crate::special::ln_gamma;

/// Floor applied to learned variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    pub solver: SolverOptions<T>,
    pub max_iter: usize,
    /// Stop once `|delta objective| <= rel_tol * (1 + |objective|)`.
    pub rel_tol: T,
    /// Starting prior; `None` uses [`init_params`].
    pub init: Option<PriorSpec<T>>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            max_iter: 500,
            rel_tol: T::lit(1e-8),
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentFit<T> {
    /// MAP log-latent rates under `prior`, one per observation.
    pub z: Vec<T>,
    pub prior: PriorSpec<T>,
    /// Joint objective after each sweep.
    pub objective_trace: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> LatentFit<T> {
    pub fn final_objective(&self) -> Option<T> {
        self.objective_trace.last().copied()
    }
}

fn mean_and_variance<T: Real>(values: &[T]) -> (T, T) {
    let n = T::from_usize(values.len()).unwrap();
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean))) / n;
    (mean, var.max(T::lit(VARIANCE_FLOOR)))
}

/// Pseudocount start: mean and variance of `ln(t/o + 1)` over rows with `o > 0`.
pub fn init_params<T: Real>(obs: &[Observation<T>]) -> Result<PriorSpec<T>> {
    let values: Vec<T> = obs
        .iter()
        .filter(|r| r.o > T::zero())
        .map(|r| (r.t / r.o).ln_1p())
        .collect();
    if values.len() < 2 {
        return Err(LagError::TooFewRows {
            needed: 2,
            got: values.len(),
        });
    }
    let (mu, sigma2) = mean_and_variance(&values);
    PriorSpec::new(mu, sigma2)
}

/// Closed-form prior update: mean and n-divisor variance of `z`.
pub fn update_params<T: Real>(z: &[T]) -> Result<PriorSpec<T>> {
    if z.len() < 2 {
        return Err(LagError::TooFewRows {
            needed: 2,
            got: z.len(),
        });
    }
    let (mu, sigma2) = mean_and_variance(z);
    PriorSpec::new(mu, sigma2)
}

/// Joint log-likelihood of `(t, z)` given the prior, with the Continuous-Poisson
/// normalizer dropped.
pub fn joint_objective<T: Real>(obs: &[Observation<T>], z: &[T], prior: PriorSpec<T>) -> Result<T> {
    if obs.len() != z.len() {
        return Err(LagError::Length(format!(
            "{} observations but {} latent values",
            obs.len(),
            z.len()
        )));
    }
    let two = T::lit(2.0);
    let log_norm = T::lit(0.5) * (two * T::PI() * prior.sigma2).ln();
    let mut overflow = false;
    let total = compensated_sum(obs.iter().zip(z).map(|(r, &zi)| {
        let rate = expected_count(zi, r.o);
        if rate.is_infinite() {
            overflow = true;
        }
        let d = zi - prior.mu;
        r.t * zi - rate - ln_gamma(r.t + T::one()) - log_norm - d * d / (two * prior.sigma2)
    }));
    Ok(if overflow { T::neg_infinity() } else { total })
}

fn check_rows<T: Real>(obs: &[Observation<T>]) -> Result<()> {
    for (i, r) in obs.iter().enumerate() {
        if let Err(e) = r.validate() {
            return Err(LagError::InvalidObservation {
                row: i,
                reason: e.to_string(),
            });
        }
    }
    Ok(())
}

const MEAN_STEPS: usize = 60;

fn map_batch<T: Real>(
    obs: &[Observation<T>],
    prior: PriorSpec<T>,
    solver: &SolverOptions<T>,
) -> Result<Vec<T>> {
    Ok(solve_map_batch(obs, prior, solver)?
        .into_iter()
        .map(|s| s.z)
        .collect())
}

/// Maximizes the joint objective over `(z, mu)` with `sigma2` fixed and returns
/// the MAP `z` at the maximizing `mu`.
///
/// The maximizer is the root of `h(mu) = mean(MAP(mu)) - mu`. Each `MAP_i` is
/// increasing in `mu` with slope `d_i = 1 / (1 + sigma2 exp(z_i) o_i)`, so
/// `h' = mean(d) - 1 < 0` and the root is unique.
fn profile_mean<T: Real>(
    obs: &[Observation<T>],
    prior: PriorSpec<T>,
    solver: &SolverOptions<T>,
) -> Result<Vec<T>> {
    let n = T::from_usize(obs.len()).unwrap();
    let tol = T::lit(64.0) * T::epsilon();
    let mut mu = prior.mu;
    let mut lo = T::neg_infinity();
    let mut hi = T::infinity();
    let mut z = map_batch(obs, prior, solver)?;
    for _ in 0..MEAN_STEPS {
        let mean = compensated_sum(z.iter().copied()) / n;
        let h = mean - mu;
        if h.abs() <= tol * T::one().max(mu.abs()) {
            break;
        }
        if h > T::zero() {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        let slope = compensated_sum(
            obs.iter()
                .zip(&z)
                .map(|(r, &zi)| (T::one() + prior.sigma2 * expected_count(zi, r.o)).recip()),
        ) / n
            - T::one();
        let mut next = if slope < T::zero() {
            mu - h / slope
        } else {
            mean
        };
        if !(next > lo && next < hi) {
            next = if lo.is_finite() && hi.is_finite() {
                T::lit(0.5) * (lo + hi)
            } else {
                mean
            };
        }
        if next == mu {
            break;
        }
        mu = next;
        z = map_batch(
            obs,
            PriorSpec {
                mu,
                sigma2: prior.sigma2,
            },
            solver,
        )?;
    }
    Ok(z)
}

const VARIANCE_STEPS: usize = 100;

/// One block step: profile `(z, mu)` at `start.sigma2`, then the variance update.
fn block_step<T: Real>(
    obs: &[Observation<T>],
    start: PriorSpec<T>,
    solver: &SolverOptions<T>,
) -> Result<(PriorSpec<T>, T)> {
    let z = profile_mean(obs, start, solver)?;
    let next = update_params(&z)?;
    Ok((next, joint_objective(obs, &z, next)?))
}

/// Secant step on `ln sigma2` toward the root of `ln F(sigma2) - ln sigma2`,
/// where `F` is the variance update. `None` when the secant is degenerate or
/// would not move past the plain update.
fn secant_variance<T: Real>(u0: T, g0: T, u1: T, g1: T) -> Option<T> {
    let dg = g1 - g0;
    if dg == T::zero() || !dg.is_finite() || g1 == T::zero() {
        return None;
    }
    let step = -g1 * (u1 - u0) / dg;
    // same direction as the plain update and at most e^2 away
    if step.signum() != g1.signum() || step.abs() <= g1.abs() {
        return None;
    }
    let step = step.max(-T::lit(2.0)).min(T::lit(2.0));
    let sigma2 = (u1 + step).exp();
    (sigma2 >= T::lit(VARIANCE_FLOOR) && sigma2.is_finite()).then_some(sigma2)
}

/// Repeats block steps until the variance update is stationary, extrapolating
/// `ln sigma2` by secant steps. A step that would lower the objective is
/// replaced by the plain update.
fn variance_sweep<T: Real>(
    obs: &[Observation<T>],
    prior: PriorSpec<T>,
    solver: &SolverOptions<T>,
) -> Result<(PriorSpec<T>, T)> {
    let tol = T::lit(1e-10).max(T::lit(64.0) * T::epsilon());
    let (mut next, mut j) = block_step(obs, prior, solver)?;
    let mut from = prior.sigma2;
    let mut last: Option<(T, T)> = None;
    for _ in 0..VARIANCE_STEPS {
        let u = from.ln();
        let g = next.sigma2.ln() - u;
        if g.abs() <= tol {
            break;
        }
        let secant = last.and_then(|(u0, g0)| secant_variance(u0, g0, u, g));
        last = Some((u, g));
        let mut start = PriorSpec {
            mu: next.mu,
            sigma2: secant.unwrap_or(next.sigma2),
        };
        let mut step = block_step(obs, start, solver)?;
        if step.1 < j && secant.is_some() {
            start.sigma2 = next.sigma2;
            step = block_step(obs, start, solver)?;
            last = None;
        }
        if step.1 < j {
            break;
        }
        from = start.sigma2;
        (next, j) = step;
    }
    Ok((next, j))
}

/// Learns `(mu, sigma2)` and the MAP `z` jointly.
pub fn fit<T: Real>(obs: &[Observation<T>], opts: &FitOptions<T>) -> Result<LatentFit<T>> {
    if obs.len() < 2 {
        return Err(LagError::TooFewRows {
            needed: 2,
            got: obs.len(),
        });
    }
    check_rows(obs)?;
    let mut prior = match opts.init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => init_params(obs)?,
    };

    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let (next, j) = variance_sweep(obs, prior, &opts.solver)?;
        let done = trace
            .last()
            .is_some_and(|&prev| (j - prev).abs() <= opts.rel_tol * (T::one() + j.abs()));
        trace.push(j);
        prior = next;
        if done {
            converged = true;
            break;
        }
    }

    let z = map_batch(obs, prior, &opts.solver)?;
    Ok(LatentFit {
        z,
        prior,
        objective_trace: trace,
        converged,
        iterations,
    })
}
