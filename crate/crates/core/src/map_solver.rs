//! Per-sample MAP estimate of the log-latent rate.
//!
//! For one observation `(t, o)` under the prior `z ~ N(mu, sigma2)` the
//! posterior mode maximizes
//!
//! ```text
//! t z - exp(z) o - (z - mu)^2 / (2 sigma2)
//! ```
//!
//! The Continuous-Poisson normalizer `C(exp(z) o)` is dropped from this
//! objective, so the mode is that of the Poisson-kernel posterior, not of the
//! fully normalized one. The objective is strictly concave (its second
//! derivative is `-exp(z) o - 1/sigma2`), so the root of the gradient is the
//! unique maximizer and a bracketed Newton iteration always finds it.

use rayon::prelude::*;

use crate::error::{LagError, Result};
use crate::scalar::Real;

/// Smallest prior variance accepted; smaller positive values are raised to it.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// One measurement `t` taken with exposure (depth, effort) `o`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    pub t: T,
    pub o: T,
}

impl<T: Real> Observation<T> {
    pub fn new(t: T, o: T) -> Result<Self> {
        let obs = Self { t, o };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= T::zero() && self.t.is_finite()) {
            return Err(LagError::Domain(format!(
                "t must be finite and >= 0, got {}",
                self.t
            )));
        }
        if !(self.o >= T::zero() && self.o.is_finite()) {
            return Err(LagError::Domain(format!(
                "o must be finite and >= 0, got {}",
                self.o
            )));
        }
        if self.o == T::zero() && self.t > T::zero() {
            return Err(LagError::Domain(format!(
                "t = {} observed with zero exposure has zero likelihood",
                self.t
            )));
        }
        Ok(())
    }
}

/// Normal prior over log-latent rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec<T> {
    pub mu: T,
    pub sigma2: T,
}

impl<T: Real> PriorSpec<T> {
    /// Validates `sigma2 > 0` and raises it to [`SIGMA2_FLOOR`] when smaller.
    pub fn new(mu: T, sigma2: T) -> Result<Self> {
        if !mu.is_finite() {
            return Err(LagError::InvalidPrior(format!(
                "mu must be finite, got {mu}"
            )));
        }
        if !(sigma2 > T::zero()) || !sigma2.is_finite() {
            return Err(LagError::InvalidPrior(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self {
            mu,
            sigma2: sigma2.max(T::lit(SIGMA2_FLOOR)),
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.mu, self.sigma2).and_then(|p| {
            if p.sigma2 == self.sigma2 {
                Ok(())
            } else {
                Err(LagError::InvalidPrior(format!(
                    "sigma2 = {} is below the floor {SIGMA2_FLOOR:e}",
                    self.sigma2
                )))
            }
        })
    }

    pub fn sigma(&self) -> T {
        self.sigma2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Gradient tolerance, scaled by `max(1, t, exp(z) o)` (absolute for small
    /// counts) and widened by the gradient's floating-point resolution at `z`.
    pub grad_tol: T,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            grad_tol: T::lit(1e-10).max(T::lit(64.0) * T::epsilon()),
            max_iter: 100,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSolution<T> {
    pub z: T,
    pub iterations: usize,
    pub grad_residual: T,
    pub converged: bool,
}

/// `exp(z) o`, evaluated as `exp(z + ln o)`; `+inf` past the overflow cutoff.
#[inline]
pub(crate) fn expected_count<T: Real>(z: T, o: T) -> T {
    if o == T::zero() {
        return T::zero();
    }
    let e = z + o.ln();
    if e > T::exp_cutoff() {
        T::infinity()
    } else {
        e.exp()
    }
}

/// `t z - exp(z) o - (z - mu)^2 / (2 sigma2)`; `-inf` on overflow.
pub fn objective<T: Real>(z: T, obs: Observation<T>, prior: PriorSpec<T>) -> T {
    let rate = expected_count(z, obs.o);
    if rate.is_infinite() {
        return T::neg_infinity();
    }
    let d = z - prior.mu;
    obs.t * z - rate - d * d / (T::lit(2.0) * prior.sigma2)
}

/// `t - exp(z) o - (z - mu) / sigma2`.
pub fn gradient<T: Real>(z: T, obs: Observation<T>, prior: PriorSpec<T>) -> T {
    obs.t - expected_count(z, obs.o) - (z - prior.mu) / prior.sigma2
}

/// `-exp(z) o - 1 / sigma2`, always negative.
pub fn hessian<T: Real>(z: T, obs: Observation<T>, prior: PriorSpec<T>) -> T {
    -expected_count(z, obs.o) - prior.sigma2.recip()
}

// Magnitude of the terms summed in `objective`, for rounding slack.
fn objective_scale<T: Real>(z: T, obs: Observation<T>, prior: PriorSpec<T>) -> T {
    let d = z - prior.mu;
    (obs.t * z).abs() + expected_count(z, obs.o) + d * d / (T::lit(2.0) * prior.sigma2)
}

// Gradient tolerance at z: `grad_tol` scaled by the count magnitude, plus the
// gradient change across a few ulps of z (which matters when sigma2 is tiny).
fn grad_bound<T: Real>(z: T, obs: Observation<T>, prior: PriorSpec<T>, grad_tol: T) -> T {
    let scale = T::one().max(obs.t).max(expected_count(z, obs.o));
    let resolution = T::lit(4.0)
        * T::epsilon()
        * hessian(z, obs, prior).abs()
        * T::one().max(z.abs()).max(prior.mu.abs());
    grad_tol * scale + resolution
}

// Grows [mu - w, mu + w] by doubling w on whichever side lacks the sign change.
fn bracket<T: Real>(obs: Observation<T>, prior: PriorSpec<T>) -> Result<(T, T)> {
    let two = T::lit(2.0);
    let mut w_lo = prior.sigma();
    let mut w_hi = prior.sigma();
    let mut lo = prior.mu - w_lo;
    let mut hi = prior.mu + w_hi;
    for _ in 0..2048 {
        let lo_ok = gradient(lo, obs, prior) >= T::zero();
        let hi_ok = gradient(hi, obs, prior) <= T::zero();
        if lo_ok && hi_ok {
            return Ok((lo, hi));
        }
        if !lo_ok {
            w_lo = w_lo * two;
            lo = prior.mu - w_lo;
        }
        if !hi_ok {
            w_hi = w_hi * two;
            hi = prior.mu + w_hi;
        }
        if !(lo.is_finite() && hi.is_finite()) {
            break;
        }
    }
    Err(LagError::Domain(format!(
        "could not bracket the MAP for t = {}, o = {}, mu = {}, sigma2 = {}",
        obs.t, obs.o, prior.mu, prior.sigma2
    )))
}

/// MAP estimate of `z` by bracketed Newton-Raphson with step halving.
///
/// Starts at `mu`. Iterates that leave the current sign-change bracket are
/// replaced by the bracket midpoint, and each step is halved until the
/// objective does not decrease.
pub fn solve_map<T: Real>(
    obs: Observation<T>,
    prior: PriorSpec<T>,
    opts: &SolverOptions<T>,
) -> Result<MapSolution<T>> {
    obs.validate()?;
    prior.validate()?;
    if obs.o == T::zero() {
        // t = 0 here; the likelihood is flat in z and the prior mode wins.
        return Ok(MapSolution {
            z: prior.mu,
            iterations: 0,
            grad_residual: T::zero(),
            converged: true,
        });
    }

    let (mut lo, mut hi) = bracket(obs, prior)?;
    let slack = T::lit(8.0) * T::epsilon();
    let half = T::lit(0.5);
    let mut z = prior.mu;
    let mut g = gradient(z, obs, prior);
    let mut f = objective(z, obs, prior);

    for iter in 0..=opts.max_iter {
        if g.abs() <= grad_bound(z, obs, prior, opts.grad_tol) {
            return Ok(MapSolution {
                z,
                iterations: iter,
                grad_residual: g.abs(),
                converged: true,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        if g > T::zero() {
            lo = lo.max(z);
        } else {
            hi = hi.min(z);
        }

        let mut cand = z - g / hessian(z, obs, prior);
        if !(cand > lo && cand < hi) {
            cand = half * (lo + hi);
        }
        let mut f_cand = objective(cand, obs, prior);
        let mut halvings = 0;
        let tol = slack * objective_scale(z, obs, prior);
        while f_cand < f - tol && halvings < opts.max_halvings {
            cand = z + half * (cand - z);
            f_cand = objective(cand, obs, prior);
            halvings += 1;
        }
        if cand == z {
            // No representable progress: the root sits between adjacent floats.
            break;
        }
        z = cand;
        f = f_cand;
        g = gradient(z, obs, prior);
    }

    let residual = g.abs();
    if residual <= grad_bound(z, obs, prior, opts.grad_tol) {
        return Ok(MapSolution {
            z,
            iterations: opts.max_iter,
            grad_residual: residual,
            converged: true,
        });
    }
    Err(LagError::NonConvergence {
        best_z: z.as_f64(),
        residual: residual.as_f64(),
        iterations: opts.max_iter,
    })
}

/// Element-wise [`solve_map`], in parallel; output order matches input order.
pub fn solve_map_batch<T: Real>(
    obs: &[Observation<T>],
    prior: PriorSpec<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<MapSolution<T>>> {
    let results: Vec<Result<MapSolution<T>>> =
        obs.par_iter().map(|&o| solve_map(o, prior, opts)).collect();
    let mut failures = Vec::new();
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => out.push(s),
            Err(e) => failures.push((i, e)),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(LagError::Batch(failures))
    }
}
