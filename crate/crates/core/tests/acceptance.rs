//! Acceptance suite for the latent logarithm.
//!
//! One line per criterion, `PASS` or `FAIL`, followed by the measured value
//! and the wall time against its budget. Exit code 0 only if every criterion
//! passes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use latent_log::contpois::{log_density, log_unnorm_density, ContPoisParam};
use latent_log::experiments::{self, OffsetSpec, SynthConfig};
use latent_log::icm_fit::{self, FitOptions};
use latent_log::map_solver::{
    gradient, hessian, objective, solve_map, Observation, PriorSpec, SolverOptions,
};
use latent_log::transform::transform_fixed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn obs(t: f64, o: f64) -> Observation<f64> {
    Observation::new(t, o).unwrap()
}

fn prior(mu: f64, sigma2: f64) -> PriorSpec<f64> {
    PriorSpec::new(mu, sigma2).unwrap()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

// Gradient of t z - exp(z) o - (z - mu)^2 / (2 sigma2), written out here so the
// oracle does not share code with the solver.
fn oracle_gradient(z: f64, t: f64, o: f64, mu: f64, sigma2: f64) -> f64 {
    t - (z + o.ln()).exp() - (z - mu) / sigma2
}

/// Root of the (strictly decreasing) gradient by bracket expansion and bisection.
fn bisection_map(t: f64, o: f64, mu: f64, sigma2: f64) -> f64 {
    let g = |z: f64| oracle_gradient(z, t, o, mu, sigma2);
    let mut step = sigma2.sqrt().max(1.0);
    let mut lo = mu - step;
    while g(lo) <= 0.0 {
        step *= 2.0;
        lo = mu - step;
    }
    let mut step = sigma2.sqrt().max(1.0);
    let mut hi = mu + step;
    while g(hi) >= 0.0 {
        step *= 2.0;
        hi = mu + step;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn depth_sweep() -> Outcome {
    let (mu, sigma2) = (0.25, 0.05);
    let p = prior(mu, sigma2);
    let n = 71;
    // 10 down to 1e-6 in equal log steps
    let depths: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(1.0 - 7.0 * i as f64 / (n - 1) as f64))
        .collect();
    let rows: Vec<_> = depths.iter().map(|&o| obs(0.0, o)).collect();
    let out = transform_fixed(&rows, p, &SolverOptions::default()).unwrap();
    let increasing = out.windows(2).all(|w| w[1].nlag > w[0].nlag);
    let gap = (out[n - 1].nlag - mu).abs();
    let report = experiments::run_depth_sweep(13).unwrap();
    let report_ok = report.monotone && report.endpoint_gap < 1e-3;
    outcome(
        increasing && gap < 1e-3 && report_ok,
        format!(
            "nlag strictly increasing as o falls: {increasing}; |nlag(1e-6) - mu| = {gap:.3e} (< 1e-3); 13-point report monotone: {}, gap {:.3e}",
            report.monotone, report.endpoint_gap
        ),
    )
}

fn limit_to_log() -> Outcome {
    let mus = [-8.0, -2.0, 0.0, 0.25, 4.0];
    let sigma2s = [0.5, 1.0, 9.0];
    let mut cases = 0;
    let mut failures = Vec::new();
    for &r in &[0.01, 1.0, 100.0] {
        for &o in &[1e2, 1e4, 1e6] {
            let t: f64 = r * o;
            let bound = 10.0 / o + 1e-6;
            for &mu in &mus {
                for &s2 in &sigma2s {
                    cases += 1;
                    let z = solve_map(obs(t, o), prior(mu, s2), &SolverOptions::default())
                        .unwrap()
                        .z;
                    let err = (z + o.ln() - t.ln()).abs();
                    if err > bound {
                        failures.push((r, o, mu, s2, err, bound));
                    }
                }
            }
        }
    }
    let worst = failures
        .iter()
        .max_by(|a, b| (a.4 / a.5).total_cmp(&(b.4 / b.5)))
        .map(|f| {
            format!(
                "; worst r={} o={:e} mu={} sigma2={}: |lag - log t| = {:.4} > {:.2e}",
                f.0, f.1, f.2, f.3, f.4, f.5
            )
        })
        .unwrap_or_default();
    let by_r: Vec<String> = [0.01, 1.0, 100.0]
        .iter()
        .map(|&r| format!("r={r}: {}", failures.iter().filter(|f| f.0 == r).count()))
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} of {cases} (r, o, mu, sigma2) cases exceed 10/o + 1e-6 [{}]{worst}",
            failures.len(),
            by_r.join(", ")
        ),
    )
}

fn no_data_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    let mut exact = true;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = prior(rng.random_range(-8.0..4.0), rng.random_range(0.01..9.0));
        exact &= solve_map(obs(0.0, 0.0), p, &opts).unwrap().z == p.mu;
        let z = solve_map(obs(0.0, 1e-9), p, &opts).unwrap().z;
        worst = worst.max((z - p.mu).abs());
    }
    outcome(
        exact && worst < 1e-6,
        format!("(0, 0) returns mu exactly: {exact}; max |nlag - mu| at o = 1e-9 is {worst:.3e} (< 1e-6)"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..1e4)
        };
        let o = log_uniform(&mut rng, 1e-6, 1e4);
        let mu = rng.random_range(-8.0..4.0);
        let s2 = rng.random_range(0.01..9.0);
        let z = solve_map(obs(t, o), prior(mu, s2), &opts).unwrap().z;
        worst = worst.max((z - bisection_map(t, o, mu, s2)).abs());
    }
    outcome(
        worst <= 1e-8,
        format!("max |z_newton - z_bisection| over 1000 instances = {worst:.3e} (<= 1e-8)"),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let t = rng.random_range(0.0..1e3);
        let o = log_uniform(&mut rng, 1e-3, 1e3);
        let p = prior(rng.random_range(-4.0..4.0), rng.random_range(0.1..4.0));
        let z: f64 = rng.random_range(-5.0..5.0);
        let r = obs(t, o);
        let h = 1e-5 * z.abs().max(1.0);
        let fd_g = (objective(z + h, r, p) - objective(z - h, r, p)) / (2.0 * h);
        let fd_h = (gradient(z + h, r, p) - gradient(z - h, r, p)) / (2.0 * h);
        worst_g = worst_g.max(rel_err(gradient(z, r, p), fd_g));
        worst_h = worst_h.max(rel_err(hessian(z, r, p), fd_h));
    }
    outcome(
        worst_g < 1e-5 && worst_h < 1e-5,
        format!("max relative error: gradient {worst_g:.3e}, hessian {worst_h:.3e} (< 1e-5)"),
    )
}

fn icm_monotone_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_drop: f64 = 0.0;
    let mut worst_move: f64 = 0.0;
    let mut unconverged = 0;
    for k in 0..100 {
        let mu = rng.random_range(-3.0..2.0);
        let s2 = rng.random_range(0.2..2.0);
        let m = rng.random_range(-1.0..3.0);
        let cfg = SynthConfig::new(200, mu, s2, OffsetSpec::LogNormal { m, s: 1.0 }, 600 + k);
        let data = experiments::generate(&cfg).unwrap().observations();
        let fit = icm_fit::fit(&data, &FitOptions::default()).unwrap();
        unconverged += usize::from(!fit.converged);
        for w in fit.objective_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        let again = icm_fit::fit(
            &data,
            &FitOptions {
                init: Some(fit.prior),
                ..FitOptions::default()
            },
        )
        .unwrap();
        let moved = (again.final_objective().unwrap() - fit.final_objective().unwrap()).abs();
        worst_move = worst_move.max(moved);
    }
    outcome(
        worst_drop <= 1e-9 && worst_move <= 1e-8,
        format!(
            "largest objective decrease {worst_drop:.3e} (<= 1e-9); refit from converged prior moves objective by {worst_move:.3e} (<= 1e-8); unconverged fits: {unconverged}"
        ),
    )
}

fn parameter_recovery() -> Outcome {
    let mut mus = Vec::new();
    let mut sigma2s = Vec::new();
    for seed in 0..20 {
        let cfg = SynthConfig::new(5000, -2.0, 1.0, OffsetSpec::Const(1000.0), 700 + seed);
        let data = experiments::generate(&cfg).unwrap().observations();
        let fit = icm_fit::fit(&data, &FitOptions::default()).unwrap();
        mus.push(fit.prior.mu);
        sigma2s.push(fit.prior.sigma2);
    }
    let mean_mu = mus.iter().sum::<f64>() / mus.len() as f64;
    let mean_s2 = sigma2s.iter().sum::<f64>() / sigma2s.len() as f64;
    outcome(
        (mean_mu + 2.0).abs() <= 0.1,
        format!("mean mu_hat = {mean_mu:.4} (target -2 +/- 0.1); mean sigma2_hat = {mean_s2:.4} (reported, not gated)"),
    )
}

fn pseudocount_direction() -> Outcome {
    let (rare, abundant) = experiments::run_gene_analogs(8).unwrap();
    let rare_zeros: Vec<f64> = rare.zero_rows().map(|(_, lag)| lag.unwrap()).collect();
    let rare_bad = rare_zeros.iter().filter(|&&lag| !(lag < 0.0)).count();
    let deep: Vec<f64> = abundant
        .zero_rows()
        .filter(|&(o, _)| o > abundant.median_depth)
        .map(|(_, lag)| lag.unwrap())
        .collect();
    let deep_bad = deep.iter().filter(|&&lag| !(lag > 0.0)).count();
    let rare_max = rare_zeros.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let deep_min = deep.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        !rare_zeros.is_empty() && !deep.is_empty() && rare_bad == 0 && deep_bad == 0,
        format!(
            "rare (mu_hat {:.3}, sigma2_hat {:.3}): {} zero rows, max lag {rare_max:.4} < log 1; abundant (mu_hat {:.3}, sigma2_hat {:.3}): {} deep zero rows, min lag {deep_min:.4} > log 1",
            rare.fit.prior.mu,
            rare.fit.prior.sigma2,
            rare_zeros.len(),
            abundant.fit.prior.mu,
            abundant.fit.prior.sigma2,
            deep.len()
        ),
    )
}

fn two_sample_convergence() -> Outcome {
    let rows = [obs(3.0, 1.0), obs(0.0, 2.0)];
    let fit = icm_fit::fit(&rows, &FitOptions::default());
    let (lib_ok, lib_detail) = match fit {
        Ok(f) => {
            let monotone = f.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9);
            (
                monotone && f.converged,
                format!(
                    "library: converged {} in {} sweeps, monotone {monotone}, mu {:.6}, sigma2 {:.1e}",
                    f.converged, f.iterations, f.prior.mu, f.prior.sigma2
                ),
            )
        }
        Err(e) => (false, format!("library error: {e}")),
    };
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("two.csv");
    let output = dir.path().join("out.csv");
    std::fs::write(&input, "t,o\n3,1\n0,2\n").unwrap();
    let code = latent_log::cli::run([
        "lag",
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    outcome(
        lib_ok && code == 0,
        format!("{lib_detail}; cli fit exit code {code}"),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn contpois_normalization() -> Outcome {
    let mut worst_norm: f64 = 0.0;
    let mut worst_pmf: f64 = 0.0;
    for &lambda in &[0.1f64, 1.0, 5.0, 20.0, 100.0] {
        let p = ContPoisParam::new(lambda).unwrap();
        let upper = lambda + 40.0 * (lambda + 1.0).sqrt() + 60.0;
        let ln_c = log_unnorm_density(0.0, p).unwrap() - log_density(0.0, p).unwrap();
        let total = simpson(
            |x| (log_unnorm_density(x, p).unwrap() - ln_c).exp(),
            0.0,
            upper,
            400_000,
        );
        worst_norm = worst_norm.max((total - 1.0).abs());
        // pmf by the product recurrence p_k = p_{k-1} lambda / k
        let mut pmf = (-lambda).exp();
        let kmax = (lambda + 10.0 * lambda.sqrt() + 10.0) as usize;
        for k in 0..=kmax {
            if k > 0 {
                pmf *= lambda / k as f64;
            }
            let dens = log_unnorm_density(k as f64, p).unwrap().exp();
            worst_pmf = worst_pmf.max((dens - pmf).abs() / pmf);
        }
    }
    outcome(
        worst_norm <= 1e-6 && worst_pmf <= 1e-12,
        format!("max |integral - 1| = {worst_norm:.3e} (<= 1e-6); max relative gap to the Poisson pmf = {worst_pmf:.3e} (<= 1e-12)"),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "depth sweep", Duration::from_secs(1), depth_sweep),
        (2, "limit to log", Duration::from_secs(1), limit_to_log),
        (3, "no-data limit", Duration::from_secs(1), no_data_limit),
        (
            4,
            "newton vs bisection",
            Duration::from_secs(5),
            oracle_equivalence,
        ),
        (
            5,
            "finite differences",
            Duration::from_secs(1),
            finite_differences,
        ),
        (
            6,
            "icm monotone and fixed point",
            Duration::from_secs(30),
            icm_monotone_fixed_point,
        ),
        (
            7,
            "parameter recovery",
            Duration::from_secs(60),
            parameter_recovery,
        ),
        (
            8,
            "pseudocount direction",
            Duration::from_secs(60),
            pseudocount_direction,
        ),
        (
            9,
            "two-sample convergence",
            Duration::from_secs(1),
            two_sample_convergence,
        ),
        (
            10,
            "continuous-poisson normalization",
            Duration::from_secs(5),
            contpois_normalization,
        ),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed < budget, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.3} s / {} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
