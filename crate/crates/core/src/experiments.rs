//! Synthetic data from the full hierarchy and the scripted experiments built
//! on it: the fixed-prior depth sweep and the rare/abundant gene analogs.

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;

use crate::contpois::{ContPoisParam, ContPoisSampler, SamplerMode};
use crate::error::{LagError, Result};
use crate::icm_fit::{FitOptions, LatentFit};
use crate::io::{compare_rows, format_sig, write_compare, write_rows, CompareRow};
use crate::map_solver::{Observation, PriorSpec, SolverOptions};
use crate::transform::{transform_fixed, transform_learned, TransformRow};

/// How offsets (exposures) are assigned to synthetic rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetSpec {
    /// Every row gets the same offset.
    Const(f64),
    /// `n` log-spaced points from `lo` up to `hi`.
    LogGrid { lo: f64, hi: f64 },
    /// `ln o ~ N(m, s^2)`.
    LogNormal { m: f64, s: f64 },
}

impl FromStr for OffsetSpec {
    type Err = LagError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| LagError::Parse(format!("offset spec `{s}`: `{p}` is not a number")))
        };
        let spec = match parts.as_slice() {
            ["const", v] => OffsetSpec::Const(num(v)?),
            ["loggrid", lo, hi] => OffsetSpec::LogGrid {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            ["lognormal", m, sd] => OffsetSpec::LogNormal {
                m: num(m)?,
                s: num(sd)?,
            },
            _ => {
                return Err(LagError::Parse(format!(
                    "offset spec `{s}`: expected const:<v>, loggrid:<lo>:<hi> or lognormal:<m>:<s>"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl OffsetSpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OffsetSpec::Const(v) => v >= 0.0 && v.is_finite(),
            OffsetSpec::LogGrid { lo, hi } => lo > 0.0 && hi >= lo && hi.is_finite(),
            OffsetSpec::LogNormal { m, s } => m.is_finite() && s >= 0.0 && s.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(LagError::Parse(format!("invalid offset spec {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub o_spec: OffsetSpec,
    pub seed: u64,
    /// Force every `t` to zero (the depth sweep).
    pub zero_inflation_override: bool,
    pub sampler: SamplerMode,
}

impl SynthConfig {
    pub fn new(n: usize, mu: f64, sigma2: f64, o_spec: OffsetSpec, seed: u64) -> Self {
        Self {
            n,
            mu,
            sigma2,
            o_spec,
            seed,
            zero_inflation_override: false,
            sampler: SamplerMode::InverseCdf,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LagError::Parse("synthetic data needs n >= 1".into()));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() || !self.mu.is_finite() {
            return Err(LagError::InvalidPrior(format!(
                "synthetic prior needs finite mu and sigma2 > 0, got ({}, {})",
                self.mu, self.sigma2
            )));
        }
        self.o_spec.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthRow {
    pub obs: Observation<f64>,
    pub true_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub rows: Vec<SynthRow>,
    /// Sampler that produced `t` (recorded for provenance).
    pub sampler: SamplerMode,
}

impl SynthData {
    pub fn observations(&self) -> Vec<Observation<f64>> {
        self.rows.iter().map(|r| r.obs).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    format_sig(r.obs.t),
                    format_sig(r.obs.o),
                    format_sig(r.true_z),
                ]
            })
            .collect();
        write_rows(path, b',', &["t", "o", "true_z"], &rows)
    }
}

fn offsets(spec: OffsetSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    Ok(match spec {
        OffsetSpec::Const(v) => vec![v; n],
        OffsetSpec::LogGrid { lo, hi } => {
            if n == 1 {
                vec![lo]
            } else {
                let (a, b) = (lo.ln(), hi.ln());
                (0..n)
                    .map(|k| {
                        if k == n - 1 {
                            hi
                        } else {
                            (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                        }
                    })
                    .collect()
            }
        }
        OffsetSpec::LogNormal { m, s } => {
            let d = LogNormal::new(m, s)
                .map_err(|e| LagError::Parse(format!("lognormal offsets: {e}")))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
    })
}

/// Draws `z ~ N(mu, sigma2)` and `t ~ Continuous-Poisson(exp(z) o)` per row.
///
/// All random numbers are drawn sequentially from one ChaCha8 stream seeded
/// with `cfg.seed` (offsets first, then `z` and a uniform per row), so the
/// output is a pure function of the configuration.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let o = offsets(cfg.o_spec, cfg.n, &mut rng)?;
    let normal = Normal::new(cfg.mu, cfg.sigma2.sqrt())
        .map_err(|e| LagError::InvalidPrior(e.to_string()))?;
    let z: Vec<f64> = (0..cfg.n).map(|_| normal.sample(&mut rng)).collect();

    let rate = |i: usize| -> Result<f64> {
        let lambda = z[i].exp() * o[i];
        if !lambda.is_finite() {
            return Err(LagError::Domain(format!(
                "row {i}: rate exp(z) o overflows"
            )));
        }
        Ok(lambda)
    };

    let t: Vec<f64> = if cfg.zero_inflation_override {
        vec![0.0; cfg.n]
    } else {
        match cfg.sampler {
            SamplerMode::InverseCdf => {
                let u: Vec<f64> = (0..cfg.n).map(|_| rng.random::<f64>()).collect();
                (0..cfg.n)
                    .into_par_iter()
                    .map(|i| {
                        let lambda = rate(i)?;
                        if lambda == 0.0 {
                            return Ok(0.0);
                        }
                        let s = ContPoisSampler::new(
                            ContPoisParam::new(lambda)?,
                            SamplerMode::InverseCdf,
                        );
                        Ok(s.quantile(u[i]))
                    })
                    .collect::<Result<Vec<f64>>>()?
            }
            SamplerMode::IntegerPoisson => {
                let mut out = Vec::with_capacity(cfg.n);
                for i in 0..cfg.n {
                    let lambda = rate(i)?;
                    out.push(if lambda == 0.0 {
                        0.0
                    } else {
                        ContPoisSampler::new(
                            ContPoisParam::new(lambda)?,
                            SamplerMode::IntegerPoisson,
                        )
                        .sample(&mut rng)?
                    });
                }
                out
            }
        }
    };

    let rows = (0..cfg.n)
        .map(|i| SynthRow {
            obs: Observation { t: t[i], o: o[i] },
            true_z: z[i],
        })
        .collect();
    Ok(SynthData {
        rows,
        sampler: cfg.sampler,
    })
}

/// Fixed prior used by the depth sweep.
pub const SWEEP_PRIOR: (f64, f64) = (0.25, 0.05);

#[derive(Debug, Clone, PartialEq)]
pub struct DepthSweepReport {
    pub prior: PriorSpec<f64>,
    /// `(o, nlag, lag)` ordered by decreasing `o`.
    pub rows: Vec<(f64, f64, f64)>,
    /// nlag strictly increases as `o` decreases.
    pub monotone: bool,
    /// `|nlag - mu|` at the shallowest depth.
    pub endpoint_gap: f64,
}

impl DepthSweepReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|&(o, nlag, lag)| {
                vec![
                    "0".to_string(),
                    format_sig(o),
                    format_sig(nlag),
                    format_sig(lag),
                ]
            })
            .collect();
        write_rows(path, b',', &["t", "o", "nlag", "lag"], &rows)
    }
}

/// Zero counts at depths on a log grid from 10 down to 1e-6 under the fixed
/// prior `N(0.25, 0.05)`.
pub fn run_depth_sweep(grid_points: usize) -> Result<DepthSweepReport> {
    let n = grid_points.max(13);
    let mut cfg = SynthConfig::new(
        n,
        SWEEP_PRIOR.0,
        SWEEP_PRIOR.1,
        OffsetSpec::LogGrid { lo: 1e-6, hi: 10.0 },
        0,
    );
    cfg.zero_inflation_override = true;
    let mut obs = generate(&cfg)?.observations();
    obs.reverse();
    let prior = PriorSpec::new(SWEEP_PRIOR.0, SWEEP_PRIOR.1)?;
    let out = transform_fixed(&obs, prior, &SolverOptions::default())?;
    let rows: Vec<(f64, f64, f64)> = obs
        .iter()
        .zip(&out)
        .map(|(o, r)| (o.o, r.nlag, r.lag.unwrap_or(f64::NAN)))
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let endpoint_gap = (rows.last().map_or(f64::NAN, |r| r.1) - prior.mu).abs();
    Ok(DepthSweepReport {
        prior,
        rows,
        monotone,
        endpoint_gap,
    })
}

/// Parameters of one gene analog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogSpec {
    pub name: &'static str,
    pub mu: f64,
    pub sigma2: f64,
    pub n: usize,
    pub depth: OffsetSpec,
}

/// Depths: log-normal with median 5 (millions of reads) and log-sd 0.5.
pub const ANALOG_DEPTH: OffsetSpec = OffsetSpec::LogNormal {
    m: 1.609_437_912_434_100_3,
    s: 0.5,
};

pub const RARE_ANALOG: AnalogSpec = AnalogSpec {
    name: "rare",
    mu: -4.63,
    sigma2: 2.30,
    n: 2597,
    depth: ANALOG_DEPTH,
};

pub const ABUNDANT_ANALOG: AnalogSpec = AnalogSpec {
    name: "abundant",
    mu: 0.83,
    sigma2: 1.80,
    n: 2597,
    depth: ANALOG_DEPTH,
};

#[derive(Debug, Clone)]
pub struct AnalogReport {
    pub spec: AnalogSpec,
    pub data: SynthData,
    pub fit: LatentFit<f64>,
    pub rows: Vec<TransformRow<f64>>,
    pub compare: Vec<CompareRow>,
    pub zero_fraction: f64,
    pub median_depth: f64,
}

impl AnalogReport {
    /// Zero-count rows as `(o, lag)`.
    pub fn zero_rows(&self) -> impl Iterator<Item = (f64, Option<f64>)> + '_ {
        self.compare
            .iter()
            .filter(|r| r.t == 0.0)
            .map(|r| (r.o, r.lag))
    }
}

/// Generates an analog with integer counts (sequencing reads are counted) and
/// learns its prior.
pub fn run_analog(spec: AnalogSpec, seed: u64) -> Result<AnalogReport> {
    let mut cfg = SynthConfig::new(spec.n, spec.mu, spec.sigma2, spec.depth, seed);
    cfg.sampler = SamplerMode::IntegerPoisson;
    let data = generate(&cfg)?;
    let obs = data.observations();
    let (rows, fit) = transform_learned(&obs, &FitOptions::default())?;
    let compare = compare_rows(&obs, &rows, 1.0);
    let zeros = obs.iter().filter(|o| o.t == 0.0).count();
    let mut depths: Vec<f64> = obs.iter().map(|o| o.o).collect();
    depths.sort_by(f64::total_cmp);
    let mid = depths.len() / 2;
    let median_depth = if depths.len() % 2 == 1 {
        depths[mid]
    } else {
        0.5 * (depths[mid - 1] + depths[mid])
    };
    Ok(AnalogReport {
        spec,
        zero_fraction: zeros as f64 / obs.len() as f64,
        median_depth,
        data,
        fit,
        rows,
        compare,
    })
}

/// The rare and abundant analogs, in that order.
pub fn run_gene_analogs(seed: u64) -> Result<(AnalogReport, AnalogReport)> {
    Ok((
        run_analog(RARE_ANALOG, seed)?,
        run_analog(ABUNDANT_ANALOG, seed.wrapping_add(1))?,
    ))
}

/// Runs every experiment and writes one CSV per experiment into `dir`, plus
/// a `summary.csv` of learned parameters.
pub fn write_reports(dir: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| LagError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    run_depth_sweep(13)?.write_csv(&dir.join("depth_sweep.csv"))?;
    let (rare, abundant) = run_gene_analogs(seed)?;
    let mut summary = Vec::new();
    for r in [&rare, &abundant] {
        write_compare(
            &r.compare,
            &dir.join(format!("{}_gene.csv", r.spec.name)),
            b',',
        )?;
        summary.push(vec![
            r.spec.name.to_string(),
            format_sig(r.spec.mu),
            format_sig(r.spec.sigma2),
            format_sig(r.fit.prior.mu),
            format_sig(r.fit.prior.sigma2),
            r.fit.iterations.to_string(),
            r.fit.converged.to_string(),
            format_sig(r.zero_fraction),
        ]);
    }
    write_rows(
        &dir.join("summary.csv"),
        b',',
        &[
            "analog",
            "true_mu",
            "true_sigma2",
            "learned_mu",
            "learned_sigma2",
            "iterations",
            "converged",
            "zero_fraction",
        ],
        &summary,
    )
}
