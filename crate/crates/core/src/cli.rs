//! The `lag` command line: `fit`, `transform`, `synth`, `compare`, `experiments`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::contpois::SamplerMode;
use crate::error::LagError;
use crate::experiments::{generate, write_reports, OffsetSpec, SynthConfig};
use crate::icm_fit::FitOptions;
use crate::io::{compare_rows, read_table, write_compare, write_table, Table, TableSpec};
use crate::map_solver::{PriorSpec, SolverOptions};
use crate::prior_file::{read_prior, write_prior, PriorDocument};
use crate::transform::{transform_fixed, transform_learned, TransformRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lag", version, about = "Latent logarithm of non-negative data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn the prior from the data and write lag/nlag columns.
    Fit(FitArgs),
    /// Transform under a fixed prior (from a prior file or --mu/--sigma2).
    Transform(TransformArgs),
    /// Generate synthetic data from the hierarchy.
    Synth(SynthArgs),
    /// Emit t, o, log(t + P), lag, nlag per row.
    Compare(CompareArgs),
    /// Run the depth sweep and gene analogs, writing one CSV per experiment.
    Experiments(ExperimentArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "t-col", default_value = "t")]
    t_col: String,
    #[arg(long = "o-col")]
    o_col: Option<String>,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// The input has no header row; columns are then 1-based indices.
    #[arg(long = "no-header")]
    no_header: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "save-prior")]
    save_prior: Option<PathBuf>,
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Debug, Args)]
#[group(id = "prior_source", required = true, multiple = true)]
struct FixedPriorArgs {
    #[arg(long, group = "prior_source", conflicts_with_all = ["mu", "sigma2"])]
    prior: Option<PathBuf>,
    #[arg(
        long,
        group = "prior_source",
        requires = "sigma2",
        allow_hyphen_values = true
    )]
    mu: Option<f64>,
    #[arg(long, group = "prior_source", requires = "mu")]
    sigma2: Option<f64>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: FixedPriorArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplerArg {
    Continuous,
    Poisson,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long)]
    sigma2: f64,
    /// const:<v>, loggrid:<lo>:<hi> or lognormal:<m>:<s>
    #[arg(long = "o-spec")]
    o_spec: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Force every t to zero.
    #[arg(long = "zero-counts")]
    zero_counts: bool,
    #[arg(long, value_enum, default_value = "continuous")]
    sampler: SamplerArg,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, conflicts_with_all = ["fit", "mu", "sigma2"])]
    prior: Option<PathBuf>,
    /// Learn the prior from the input instead of reading one.
    #[arg(long)]
    fit: bool,
    #[arg(
        long,
        requires = "sigma2",
        conflicts_with = "fit",
        allow_hyphen_values = true
    )]
    mu: Option<f64>,
    #[arg(long, requires = "mu")]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pseudocount: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!(
            "delimiter must be a single ASCII character, got `{s}`"
        )),
    }
}

fn exit_code(e: &LagError) -> i32 {
    match e {
        LagError::NonConvergence { .. } => EXIT_CONVERGENCE,
        LagError::Batch(items)
            if items
                .iter()
                .any(|(_, e)| matches!(e, LagError::NonConvergence { .. })) =>
        {
            EXIT_CONVERGENCE
        }
        _ => EXIT_DATA,
    }
}

fn load(input: &InputArgs) -> Result<Table, LagError> {
    let spec = TableSpec {
        path: input.input.clone(),
        delimiter: input.delimiter,
        t_column: input.t_col.clone(),
        o_column: input.o_col.clone(),
        header: !input.no_header,
    };
    let table = read_table(&spec)?;
    if table.offsets_defaulted {
        eprintln!("warning: no offset column found; using o = 1 for every row");
    }
    Ok(table)
}

fn fixed_prior(
    path: Option<&PathBuf>,
    mu: Option<f64>,
    sigma2: Option<f64>,
) -> Result<PriorSpec<f64>, LagError> {
    match (path, mu, sigma2) {
        (Some(p), _, _) => Ok(read_prior(p)?.prior),
        (None, Some(mu), Some(s2)) => PriorSpec::new(mu, s2),
        _ => Err(LagError::InvalidPrior(
            "need --prior or both --mu and --sigma2".into(),
        )),
    }
}

fn report_fit(fit: &crate::icm_fit::LatentFit<f64>) {
    eprintln!("mu = {}", fit.prior.mu);
    eprintln!("sigma2 = {}", fit.prior.sigma2);
    eprintln!("iterations = {}", fit.iterations);
    eprintln!("converged = {}", fit.converged);
}

fn learned(
    table: &Table,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<TransformRow<f64>>, crate::icm_fit::LatentFit<f64>), LagError> {
    let opts = FitOptions {
        max_iter,
        rel_tol: tol,
        ..FitOptions::default()
    };
    let (rows, fit) = transform_learned(&table.observations, &opts)?;
    report_fit(&fit);
    Ok((rows, fit))
}

fn run_command(cmd: Command) -> Result<i32, LagError> {
    match cmd {
        Command::Fit(a) => {
            let table = load(&a.input)?;
            let (rows, fit) = learned(&table, a.max_iter, a.tol)?;
            write_table(&table, &rows, &a.output)?;
            if let Some(p) = &a.save_prior {
                write_prior(p, &PriorDocument::new(fit.prior, Some(table.len())))?;
            }
            if fit.converged {
                Ok(EXIT_OK)
            } else {
                eprintln!(
                    "error: ICM did not converge within {} iterations",
                    fit.iterations
                );
                Ok(EXIT_CONVERGENCE)
            }
        }
        Command::Transform(a) => {
            let table = load(&a.input)?;
            let prior = fixed_prior(a.prior.prior.as_ref(), a.prior.mu, a.prior.sigma2)?;
            let rows = transform_fixed(&table.observations, prior, &SolverOptions::default())?;
            write_table(&table, &rows, &a.output)?;
            Ok(EXIT_OK)
        }
        Command::Synth(a) => {
            let o_spec: OffsetSpec = a.o_spec.parse()?;
            let mut cfg = SynthConfig::new(a.n, a.mu, a.sigma2, o_spec, a.seed);
            cfg.zero_inflation_override = a.zero_counts;
            cfg.sampler = match a.sampler {
                SamplerArg::Continuous => SamplerMode::InverseCdf,
                SamplerArg::Poisson => SamplerMode::IntegerPoisson,
            };
            let data = generate(&cfg)?;
            data.write_csv(&a.output)?;
            eprintln!(
                "wrote {} rows (sampler: {})",
                data.rows.len(),
                data.sampler.name()
            );
            Ok(EXIT_OK)
        }
        Command::Compare(a) => {
            let table = load(&a.input)?;
            if !(a.pseudocount > 0.0) {
                return Err(LagError::Domain(format!(
                    "pseudocount must be positive, got {}",
                    a.pseudocount
                )));
            }
            let (rows, code) = if a.fit {
                let (rows, fit) = learned(&table, 500, 1e-8)?;
                (
                    rows,
                    if fit.converged {
                        EXIT_OK
                    } else {
                        EXIT_CONVERGENCE
                    },
                )
            } else {
                let prior = fixed_prior(a.prior.as_ref(), a.mu, a.sigma2)?;
                (
                    transform_fixed(&table.observations, prior, &SolverOptions::default())?,
                    EXIT_OK,
                )
            };
            write_compare(
                &compare_rows(&table.observations, &rows, a.pseudocount),
                &a.output,
                table.delimiter,
            )?;
            Ok(code)
        }
        Command::Experiments(a) => {
            write_reports(&a.out_dir, a.seed)?;
            eprintln!("wrote reports to {}", a.out_dir.display());
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    if let Command::Compare(a) = &cli.command {
        if a.prior.is_none() && !a.fit && a.mu.is_none() {
            eprintln!("error: compare needs one of --prior, --fit or --mu/--sigma2");
            return EXIT_USAGE;
        }
    }
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
