use latent_log::contpois::SamplerMode;
use latent_log::experiments::{self, OffsetSpec, SynthConfig, ANALOG_DEPTH};
use latent_log::icm_fit::{self, FitOptions};
use latent_log::transform::transform_learned;
use latent_log::Observation;

fn count_data(mu: f64, sigma2: f64, seed: u64) -> Vec<Observation> {
    let mut cfg = SynthConfig::new(2597, mu, sigma2, ANALOG_DEPTH, seed);
    cfg.sampler = SamplerMode::IntegerPoisson;
    experiments::generate(&cfg).unwrap().observations()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[test]
fn rare_analog_is_mostly_zeros_with_low_mean() {
    let (rare, _) = experiments::run_gene_analogs(3).unwrap();
    assert!(rare.zero_fraction > 0.8, "{}", rare.zero_fraction);
    assert!(rare.fit.prior.mu < -3.0, "{}", rare.fit.prior.mu);
    assert!(rare.zero_rows().all(|(_, lag)| lag.unwrap() < 0.0));
}

#[test]
fn abundant_analog_deep_zeros_exceed_log_one() {
    let (_, abundant) = experiments::run_gene_analogs(3).unwrap();
    let deep: Vec<f64> = abundant
        .zero_rows()
        .filter(|&(o, _)| o > abundant.median_depth)
        .map(|(_, lag)| lag.unwrap())
        .collect();
    assert!(!deep.is_empty());
    assert!(deep.iter().all(|&lag| lag > 0.0), "{deep:?}");
}

#[test]
fn report_tables_satisfy_offset_identity() {
    let (rare, abundant) = experiments::run_gene_analogs(4).unwrap();
    for report in [&rare, &abundant] {
        for row in &report.compare {
            let lag = row.lag.unwrap();
            assert!((lag - (row.nlag + row.o.ln())).abs() < 1e-12);
            assert!((row.log_pseudo - (row.t + 1.0).ln()).abs() < 1e-15);
        }
    }
    let sweep = experiments::run_depth_sweep(13).unwrap();
    for &(o, nlag, lag) in &sweep.rows {
        assert!((lag - (nlag + o.ln())).abs() < 1e-12);
    }
}

// ~93% zeros over log-normal depths
#[test]
fn learned_transform_on_rare_counts_undercuts_pseudocount() {
    let obs = count_data(-5.5, 2.3, 21);
    let zeros = obs.iter().filter(|r| r.t == 0.0).count() as f64 / obs.len() as f64;
    assert!(zeros > 0.9);
    let (rows, fit) = transform_learned(&obs, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.prior.mu < -3.0);
    for (r, row) in obs.iter().zip(&rows) {
        if r.t <= 2.0 {
            assert!(
                row.lag.unwrap() < (r.t + 1.0).ln(),
                "t = {}, o = {}",
                r.t,
                r.o
            );
        }
    }
}

// median latent count 100, ~1% zeros
#[test]
fn learned_transform_on_abundant_counts_lifts_deep_zeros() {
    let obs = count_data(3.0, 4.0, 21);
    let zeros = obs.iter().filter(|r| r.t == 0.0).count() as f64 / obs.len() as f64;
    assert!(zeros > 0.0 && zeros <= 0.03, "{zeros}");
    let depth = median(obs.iter().map(|r| r.o).collect());
    let (rows, fit) = transform_learned(&obs, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let mut deep = 0;
    for (r, row) in obs.iter().zip(&rows) {
        if r.t == 0.0 && r.o > depth {
            deep += 1;
            assert!(row.lag.unwrap() >= 0.0, "o = {}", r.o);
        }
    }
    assert!(deep > 0);
}

#[test]
fn deep_constant_exposure_recovers_prior_mean() {
    let cfg = SynthConfig::new(5000, -2.0, 1.0, OffsetSpec::Const(1000.0), 17);
    let obs = experiments::generate(&cfg).unwrap().observations();
    let fit = icm_fit::fit(&obs, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!((-2.2..=-1.8).contains(&fit.prior.mu), "{}", fit.prior.mu);
}

#[test]
fn generated_truths_follow_the_prior() {
    let cfg = SynthConfig::new(20_000, 0.7, 0.4, OffsetSpec::Const(1.0), 5);
    let data = experiments::generate(&cfg).unwrap();
    let z: Vec<f64> = data.rows.iter().map(|r| r.true_z).collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    assert!((mean - 0.7).abs() < 3.0 * (0.4 / n).sqrt());
    // variance of a sample variance is 2 sigma^4 / n
    assert!((var - 0.4).abs() < 3.0 * 0.4 * (2.0 / n).sqrt());
}
