//! Prior documents: `key = value` lines holding a learned or chosen prior.
//!
//! ```text
//! # latent-log prior
//! mu = -4.6300000000000000e0
//! sigma2 = 2.2999999999999998e0
//! n_fit = 2597
//! created = 1760659200
//! tool_version = 0.1.0
//! ```
//!
//! `mu` and `sigma2` are required; `n_fit`, `created` and `tool_version` are
//! optional. Blank lines, `#` comments and unknown keys are ignored.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{LagError, Result};
use crate::map_solver::PriorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorDocument {
    pub prior: PriorSpec<f64>,
    pub n_fit: Option<usize>,
    pub created: Option<String>,
    pub tool_version: Option<String>,
}

impl PriorDocument {
    /// A document stamped with the current time and this crate's version.
    pub fn new(prior: PriorSpec<f64>, n_fit: Option<usize>) -> Self {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .ok();
        Self {
            prior,
            n_fit,
            created,
            tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# latent-log prior\n");
        // 17 significant digits: decimal text round-trips the f64 exactly.
        let _ = writeln!(s, "mu = {:.16e}", self.prior.mu);
        let _ = writeln!(s, "sigma2 = {:.16e}", self.prior.sigma2);
        if let Some(n) = self.n_fit {
            let _ = writeln!(s, "n_fit = {n}");
        }
        if let Some(c) = &self.created {
            let _ = writeln!(s, "created = {c}");
        }
        if let Some(v) = &self.tool_version {
            let _ = writeln!(s, "tool_version = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut mu = None;
        let mut sigma2 = None;
        let mut n_fit = None;
        let mut created = None;
        let mut tool_version = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LagError::Parse(format!(
                    "prior line {line_no}: expected `key = value`, got `{line}`"
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let number = |field: &str| {
                value.parse::<f64>().map_err(|_| {
                    LagError::Parse(format!(
                        "prior line {line_no}: field `{field}` is not a number: `{value}`"
                    ))
                })
            };
            match key {
                "mu" => mu = Some((number("mu")?, line_no)),
                "sigma2" => sigma2 = Some((number("sigma2")?, line_no)),
                "n_fit" => {
                    n_fit = Some(value.parse::<usize>().map_err(|_| {
                        LagError::Parse(format!(
                            "prior line {line_no}: field `n_fit` is not a count: `{value}`"
                        ))
                    })?)
                }
                "created" => created = Some(value.to_string()),
                "tool_version" => tool_version = Some(value.to_string()),
                _ => {}
            }
        }
        let (mu, mu_line) =
            mu.ok_or_else(|| LagError::Parse("prior document is missing field `mu`".into()))?;
        let (sigma2, s_line) = sigma2
            .ok_or_else(|| LagError::Parse("prior document is missing field `sigma2`".into()))?;
        if !mu.is_finite() {
            return Err(LagError::InvalidPrior(format!(
                "line {mu_line}: field `mu` must be finite"
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(LagError::InvalidPrior(format!(
                "line {s_line}: field `sigma2` must be positive, got {sigma2}"
            )));
        }
        Ok(Self {
            prior: PriorSpec::new(mu, sigma2)?,
            n_fit,
            created,
            tool_version,
        })
    }
}

pub fn read_prior(path: &Path) -> Result<PriorDocument> {
    let text = std::fs::read_to_string(path).map_err(|source| LagError::Io {
        path: path.display().to_string(),
        source,
    })?;
    PriorDocument::parse(&text).map_err(|e| match e {
        LagError::Parse(m) => LagError::Parse(format!("{}: {m}", path.display())),
        LagError::InvalidPrior(m) => LagError::InvalidPrior(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_prior(path: &Path, doc: &PriorDocument) -> Result<()> {
    std::fs::write(path, doc.to_text()).map_err(|source| LagError::Io {
        path: path.display().to_string(),
        source,
    })
}
