//! The Continuous-Poisson distribution on `[0, inf)`.
//!
//! Density `f(x | lambda) = C(lambda) * lambda^x * exp(-lambda) / Gamma(x + 1)`,
//! the Poisson pmf formula read as a function of a real argument. The
//! normalizer `C(lambda)` has no closed form and is obtained by quadrature on
//! `[0, U]` with `U = lambda + 12 sqrt(lambda + 1) + 30`.
//!
//! Truncation at `U`: `ln f` is concave with slope `ln(lambda) - digamma(x + 1)`,
//! and `digamma(x + 1) > ln(x + 1/2)`, so for `x >= U` the integrand is bounded
//! by `f(U) exp(-(x - U) r)` with `r = ln((U + 1/2) / lambda) > 0`. The
//! neglected tail is therefore at most `f(U) / r`; [`tail_bound`] reports it and
//! [`norm_const`] refuses to return a value when it is not negligible.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{LagError, Result};
use crate::quadrature::{self, QuadResult};
use crate::scalar::Real;
use crate::special::ln_gamma;

/// Number of grid points used by the inverse-CDF sampler.
pub const SAMPLER_GRID_POINTS: usize = 4096;

const MAX_QUAD_INTERVALS: usize = 2000;

/// Rate parameter of a Continuous-Poisson distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContPoisParam<T> {
    lambda: T,
}

impl<T: Real> ContPoisParam<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(LagError::Domain(format!(
                "Continuous-Poisson rate must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Upper truncation point `U` of the support used for quadrature and sampling.
    pub fn upper_bound(&self) -> T {
        self.lambda + T::lit(12.0) * (self.lambda + T::one()).sqrt() + T::lit(30.0)
    }
}

fn check_x<T: Real>(x: T) -> Result<()> {
    if x >= T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(LagError::Domain(format!(
            "Continuous-Poisson support is [0, inf), got x = {x}"
        )))
    }
}

#[inline]
fn log_kernel<T: Real>(x: T, ln_lambda: T, lambda: T) -> T {
    x * ln_lambda - lambda - ln_gamma(x + T::one())
}

/// `x ln(lambda) - lambda - ln Gamma(x + 1)`.
pub fn log_unnorm_density<T: Real>(x: T, p: ContPoisParam<T>) -> Result<T> {
    check_x(x)?;
    Ok(log_kernel(x, p.lambda.ln(), p.lambda))
}

/// Upper bound on the unnormalized mass beyond [`ContPoisParam::upper_bound`].
pub fn tail_bound<T: Real>(p: ContPoisParam<T>) -> T {
    let u = p.upper_bound();
    let rate = ((u + T::lit(0.5)) / p.lambda).ln();
    log_kernel(u, p.lambda.ln(), p.lambda).exp() / rate
}

fn quad_rel_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::lit(64.0) * T::epsilon())
}

fn accept_rel_tol<T: Real>() -> T {
    T::lit(1e-8).max(T::lit(1024.0) * T::epsilon())
}

/// Integrates `g(x) * f_unnorm(x | lambda)` over `[0, a]` (clipped to `[0, U]`).
pub(crate) fn integrate_weighted<T, G>(p: ContPoisParam<T>, upper: T, g: G) -> Result<QuadResult<T>>
where
    T: Real,
    G: Fn(T) -> T,
{
    let ln_lambda = p.lambda.ln();
    let lambda = p.lambda;
    let b = upper.min(p.upper_bound()).max(T::zero());
    quadrature::integrate(
        |x| g(x) * log_kernel(x, ln_lambda, lambda).exp(),
        T::zero(),
        b,
        quad_rel_tol(),
        MAX_QUAD_INTERVALS,
    )
}

/// The normalizer `C(lambda) = 1 / integral_0^inf lambda^x e^-lambda / Gamma(x+1) dx`.
pub fn norm_const<T: Real>(p: ContPoisParam<T>) -> Result<T> {
    let q = integrate_weighted(p, p.upper_bound(), |_| T::one())?;
    let rel = (q.abs_error + tail_bound(p)) / q.value;
    if !(q.value > T::zero()) || rel > accept_rel_tol() {
        return Err(LagError::Quadrature {
            rel_error: rel.as_f64(),
        });
    }
    Ok(q.value.recip())
}

pub fn log_density<T: Real>(x: T, p: ContPoisParam<T>) -> Result<T> {
    Ok(log_unnorm_density(x, p)? + norm_const(p)?.ln())
}

/// How [`ContPoisSampler`] draws values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerMode {
    /// Inverse CDF of the normalized density on a 4096-point grid over `[0, U]`,
    /// with the log-density interpolated linearly inside each cell.
    #[default]
    InverseCdf,
    /// Integer Poisson draws; fast, but only approximates the continuous law.
    IntegerPoisson,
}

impl SamplerMode {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerMode::InverseCdf => "inverse-cdf",
            SamplerMode::IntegerPoisson => "integer-poisson",
        }
    }
}

/// A sampler for one rate; immutable once built.
#[derive(Debug, Clone)]
pub struct ContPoisSampler<T> {
    param: ContPoisParam<T>,
    mode: SamplerMode,
    step: T,
    log_density: Vec<T>,
    // cdf[k] is the mass of cells 0..k, so cdf[0] = 0 and cdf[last] = 1.
    cdf: Vec<T>,
}

impl<T: Real> ContPoisSampler<T> {
    pub fn new(param: ContPoisParam<T>, mode: SamplerMode) -> Self {
        if mode == SamplerMode::IntegerPoisson {
            return Self {
                param,
                mode,
                step: T::zero(),
                log_density: Vec::new(),
                cdf: Vec::new(),
            };
        }
        let n = SAMPLER_GRID_POINTS;
        let step = param.upper_bound() / T::from_usize(n - 1).unwrap();
        let ln_lambda = param.lambda.ln();
        let log_density: Vec<T> = (0..n)
            .map(|k| log_kernel(T::from_usize(k).unwrap() * step, ln_lambda, param.lambda))
            .collect();
        let peak = log_density.iter().copied().fold(T::neg_infinity(), T::max);
        let mut cdf = Vec::with_capacity(n);
        cdf.push(T::zero());
        let mut acc = T::zero();
        for w in log_density.windows(2) {
            acc = acc + cell_mass(w[0] - peak, w[1] - w[0], step);
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c = *c / acc;
        }
        Self {
            param,
            mode,
            step,
            log_density,
            cdf,
        }
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn param(&self) -> ContPoisParam<T> {
        self.param
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<T> {
        match self.mode {
            SamplerMode::IntegerPoisson => {
                let dist = Poisson::new(self.param.lambda.as_f64())
                    .map_err(|e| LagError::Domain(format!("integer Poisson sampler: {e}")))?;
                Ok(T::lit(dist.sample(rng)))
            }
            SamplerMode::InverseCdf => {
                let u = T::lit(rng.random::<f64>());
                Ok(self.quantile(u))
            }
        }
    }

    /// Inverse of the grid CDF at `u` in `[0, 1]`.
    pub fn quantile(&self, u: T) -> T {
        let cells = self.cdf.len() - 1;
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, cells) - 1;
        let mass = self.cdf[k + 1] - self.cdf[k];
        let x0 = T::from_usize(k).unwrap() * self.step;
        if !(mass > T::zero()) {
            return x0;
        }
        let v = ((u - self.cdf[k]) / mass).max(T::zero()).min(T::one());
        let delta = self.log_density[k + 1] - self.log_density[k];
        let frac = if delta.abs() < T::lit(1e-8) {
            v
        } else {
            (v * delta.exp_m1()).ln_1p() / delta
        };
        x0 + self.step * frac.max(T::zero()).min(T::one())
    }
}

// Mass of exp(a + delta * s / h) over s in [0, h].
fn cell_mass<T: Real>(a: T, delta: T, h: T) -> T {
    let shape = if delta.abs() < T::lit(1e-8) {
        T::one() + delta * T::lit(0.5)
    } else {
        delta.exp_m1() / delta
    };
    h * a.exp() * shape
}

/// Draws one value from Continuous-Poisson(lambda) with the default sampler.
pub fn sample<T: Real, R: Rng + ?Sized>(p: ContPoisParam<T>, rng: &mut R) -> Result<T> {
    ContPoisSampler::new(p, SamplerMode::InverseCdf).sample(rng)
}
