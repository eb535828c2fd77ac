//! Acceptance suite. Each test prints one `PASS`/`FAIL` line (or `SKIP` for
//! the optional real-data check) and then asserts the same condition.
//!
//! Tests take a shared lock so runtime bounds are measured without other
//! criteria competing for the CPU.

use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use probench::benchmark::{
    covariate_screen, label_units, monte_carlo_success, success_probability, BenchmarkThreshold, ScreenConfig,
};
use probench::config::PipelineConfig;
use probench::copula::{estimate_theta, kendall_tau_merge, kendall_tau_pairwise, ClaytonCopula};
use probench::dataset::{generate_synthetic, load_csv, save_csv, ColumnMapping, SyntheticConfig};
use probench::metrics::{auc, gini, Confusion};
use probench::pipeline::{cmd_benchmark, cmd_denoise, cmd_pipeline, cmd_simulate, Manifest};
use probench::rng;
use probench::rvm::{
    design_matrix, fit_regression, median_distance, penalized_gradient, penalized_log_likelihood, posterior,
    KernelSpec, RvmFitConfig, RvmModel,
};
use probench::swarm::{optimize, SwarmConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes to the process stdout directly so the line survives output capture.
fn line(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    line(&format!("criterion {id:>2} [{name}]: {verdict} ({detail})"));
}

/// Concordant minus discordant pairs, counted directly.
fn pair_score(points: &[[f64; 2]]) -> i64 {
    let mut s = 0i64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            s += match (dx * dy).partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    s
}

/// Clayton θ from the tie-free Kendall τ, `θ = 2τ / (1 − τ)`.
fn oracle_theta(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let tau = pair_score(points) as f64 / (n * (n - 1.0) / 2.0);
    2.0 * tau / (1.0 - tau)
}

#[test]
fn criterion_01_copula_correctness() {
    let _g = serial();
    let start = Instant::now();
    let mut r = rng::rng(101);

    let mut boundary = 0.0f64;
    for &theta in &[1e-6, 0.5, 2.0, 4.0, 8.0, 50.0] {
        let c = ClaytonCopula::bivariate(theta).unwrap();
        for _ in 0..200 {
            let u: f64 = r.random_range(0.0..=1.0);
            boundary = boundary
                .max((c.cdf(&[u, 1.0]).unwrap() - u).abs())
                .max((c.cdf(&[1.0, u]).unwrap() - u).abs())
                .max(c.cdf(&[0.0, u]).unwrap().abs())
                .max(c.cdf(&[u, 0.0]).unwrap().abs());
        }
    }

    let h = 1e-4;
    let mut fd = 0.0f64;
    for _ in 0..100 {
        let theta = r.random_range(0.5..8.0);
        let c = ClaytonCopula::bivariate(theta).unwrap();
        let (u, v) = (r.random_range(0.05..0.95), r.random_range(0.05..0.95));
        let f = |a: f64, b: f64| c.cdf(&[a, b]).unwrap();
        let mixed = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h);
        fd = fd.max((c.pdf(u, v).unwrap() - mixed).abs());
    }

    let m = 200;
    let mut mass = 0.0f64;
    for &theta in &[0.5, 2.0, 4.0] {
        let c = ClaytonCopula::bivariate(theta).unwrap();
        let mut sum = 0.0;
        for i in 0..m {
            for j in 0..m {
                let u = (i as f64 + 0.5) / m as f64;
                let v = (j as f64 + 0.5) / m as f64;
                sum += c.pdf(u, v).unwrap();
            }
        }
        mass = mass.max((sum / (m * m) as f64 - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = boundary <= 1e-12 && fd <= 1e-4 && mass <= 1e-2 && secs < 5.0;
    report(
        1,
        "copula correctness",
        pass,
        &format!("boundary {boundary:.1e}, pdf vs differences {fd:.1e}, mass error {mass:.1e}, {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_theta_round_trip() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for (k, &theta) in [0.5, 2.0, 4.0, 8.0].iter().enumerate() {
        let c = ClaytonCopula::bivariate(theta).unwrap();
        let fit = estimate_theta(&c.sample(100_000, 200 + k as u64)).unwrap();
        let rel = (fit.theta - theta).abs() / theta;
        worst = worst.max(rel);
        details.push(format!("{theta}->{:.3}", fit.theta));
    }

    let mut r = rng::rng(202);
    let mut agree = true;
    for trial in 0..6 {
        let points: Vec<[f64; 2]> = (0..1000)
            .map(|_| {
                let (a, b): (f64, f64) = (r.random(), r.random());
                if trial % 2 == 0 {
                    [a, 0.6 * a + 0.4 * b]
                } else {
                    // coarse values force ties in both coordinates
                    [(a * 20.0).floor(), ((0.5 * a + 0.5 * b) * 15.0).floor()]
                }
            })
            .collect();
        let slow = kendall_tau_pairwise(&points).unwrap();
        let fast = kendall_tau_merge(&points).unwrap();
        agree &= slow.score == fast.score && slow.tau == fast.tau && slow.score == pair_score(&points);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 0.05 && agree && secs < 30.0;
    report(
        2,
        "theta round trip",
        pass,
        &format!(
            "{}, worst relative error {worst:.4}, Kendall algorithms agree: {agree}, {secs:.1} s",
            details.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_limits() {
    let _g = serial();
    let grid: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
    let max_dev = |theta: f64, target: fn(f64, f64) -> f64| {
        let c = ClaytonCopula::bivariate(theta).unwrap();
        let mut worst = (0.0f64, 0.0, 0.0);
        for &u in &grid {
            for &v in &grid {
                let d = (c.cdf(&[u, v]).unwrap() - target(u, v)).abs();
                if d > worst.0 {
                    worst = (d, u, v);
                }
            }
        }
        worst
    };
    let independence = max_dev(1e-6, |u, v| u * v);
    let comonotone = max_dev(50.0, f64::min);
    let pass = independence.0 < 1e-4 && comonotone.0 < 1e-2;
    report(
        3,
        "independence and comonotone limits",
        pass,
        &format!(
            "theta 1e-6: max |C - uv| {:.2e}; theta 50: max |C - min| {:.4} at ({}, {})",
            independence.0, comonotone.0, comonotone.1, comonotone.2
        ),
    );
    assert!(independence.0 < 1e-4, "independence limit");
    assert!(
        comonotone.0 < 1e-2,
        "comonotone limit: max deviation {:.4}",
        comonotone.0
    );
}

#[test]
fn criterion_04_survival_benchmark() {
    let _g = serial();
    let mut r = rng::rng(404);
    let mut worst_z = 0.0f64;
    for k in 0..20 {
        let theta = r.random_range(0.2..10.0);
        let u = [r.random_range(0.05..0.95), r.random_range(0.05..0.95)];
        let c = ClaytonCopula::bivariate(theta).unwrap();
        let exact = success_probability(&c, u).unwrap();
        let mc = monte_carlo_success(&c, &u, 100_000, 4000 + k).unwrap();
        worst_z = worst_z.max((exact - mc.value).abs() / mc.std_error);
    }
    let independent = success_probability(&ClaytonCopula::bivariate(1e-6).unwrap(), [0.5, 0.5]).unwrap();
    let pass = worst_z <= 3.0 && (independent - 0.75).abs() <= 1e-4;
    report(
        4,
        "survival benchmark",
        pass,
        &format!("worst |exact - MC| = {worst_z:.2} standard errors; independence case {independent:.6}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_denoising() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut hits = 0;
    let mut seconds = 0.0;
    let mut thetas = Vec::new();
    for seed in 0..20u64 {
        let synthetic = generate_synthetic(&SyntheticConfig {
            n: 5000,
            theta: 4.0,
            noise_fraction: 0.2,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let data = &synthetic.dataset;
        let input = dir.path().join(format!("synthetic_{seed}.csv"));
        save_csv(data, &input).unwrap();
        let mut config = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        config.input.path = input;
        config.input.columns = ColumnMapping::for_dataset(data);
        config.output.dir = dir.path().join(format!("out_{seed}"));

        let start = Instant::now();
        let result = cmd_denoise(&config).unwrap();
        seconds += start.elapsed().as_secs_f64();

        let points = data.kpi_pairs();
        let kept: Vec<[f64; 2]> = points
            .iter()
            .zip(&result.kept_mask)
            .filter(|(_, k)| **k)
            .map(|(p, _)| *p)
            .collect();
        let (kept_theta, raw_theta) = (oracle_theta(&kept), oracle_theta(&points));
        assert!((kept_theta - result.theta_hat).abs() < 1e-9 * kept_theta.max(1.0));
        if kept_theta > raw_theta && (3.0..=5.0).contains(&kept_theta) {
            hits += 1;
        }
        thetas.push(kept_theta);
    }
    let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = hits >= 19 && seconds < 120.0;
    report(
        5,
        "denoising",
        pass,
        &format!("{hits}/20 runs with theta(kept) > theta(raw) and in [3, 5]; kept theta in [{lo:.2}, {hi:.2}]; {seconds:.1} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_swarm_invariants() {
    let _g = serial();
    let synthetic = generate_synthetic(&SyntheticConfig {
        n: 3000,
        seed: 606,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let points = synthetic.dataset.kpi_pairs();
    let config = SwarmConfig {
        seed: 66,
        ..SwarmConfig::default()
    };
    let a = optimize(&points, &config).unwrap();
    let b = optimize(&points, &config).unwrap();
    let sweeps = &a.trace.sweeps;
    let monotone = sweeps.windows(2).all(|w| w[1].best_theta >= w[0].best_theta);
    let shrinking = sweeps.windows(2).all(|w| w[1].delta < w[0].delta);
    let identical = format!("{a:?}") == format!("{b:?}")
        && serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
    let pass = monotone && shrinking && identical && sweeps.len() > 1;
    report(
        6,
        "swarm invariants",
        pass,
        &format!(
            "{} sweeps; monotone {monotone}, delta decreasing {shrinking}, repeat identical {identical}",
            sweeps.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_rvm_regression() {
    let _g = serial();
    let sinc = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
    let mut r = rng::rng(707);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let x: Vec<Vec<f64>> = (0..100).map(|_| vec![r.random_range(-10.0..10.0)]).collect();
    let t: Vec<f64> = x.iter().map(|v| sinc(v[0]) + noise.sample(&mut r)).collect();
    let model = RvmModel::regression(&x, &t, KernelSpec::rbf(2.0).unwrap(), &RvmFitConfig::default()).unwrap();
    let held_out: Vec<f64> = (0..1000).map(|i| -10.0 + 20.0 * (i as f64 + 0.5) / 1000.0).collect();
    let rmse = (held_out
        .iter()
        .map(|&g| (model.predict_one(&[g]).unwrap().score() - sinc(g)).powi(2))
        .sum::<f64>()
        / held_out.len() as f64)
        .sqrt();
    let rvs = model.relevant_vectors();
    let evidence = &model.diagnostics.log_evidence;
    let worst_drop = evidence.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);

    // ridge regression through the origin: w = Σ xᵢtᵢ / (Σ xᵢ² + ασ²)
    let (alpha, sigma2) = (0.7, 0.05);
    let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
    let ts: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, v)| 1.3 * v + 0.1 * ((i * 7 % 11) as f64 - 5.0))
        .collect();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxt: f64 = xs.iter().zip(&ts).map(|(a, b)| a * b).sum();
    let ridge = sxt / (sxx + alpha * sigma2);
    let ridge_var = sigma2 / (sxx + alpha * sigma2);
    let design = DMatrix::from_column_slice(xs.len(), 1, &xs);
    let post = posterior(&design, &DVector::from_vec(ts.clone()), &[alpha], sigma2).unwrap();
    let fixed = fit_regression(
        &ts,
        &design,
        &RvmFitConfig {
            alpha_init: alpha,
            sigma2_init: Some(sigma2),
            fixed_hyperparameters: true,
            ..RvmFitConfig::default()
        },
    )
    .unwrap();
    let ridge_err = (post.mu[0] - ridge)
        .abs()
        .max((post.sigma[(0, 0)] - ridge_var).abs())
        .max((fixed.mu[0] - ridge).abs());

    let pass = rmse < 0.15 && rvs < 20 && ridge_err <= 1e-10 && worst_drop <= 1e-6;
    report(
        7,
        "RVM regression",
        pass,
        &format!(
            "sinc RMSE {rmse:.4} with {rvs} relevant vectors; ridge difference {ridge_err:.1e}; largest evidence drop {worst_drop:.1e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_rvm_classification() {
    let _g = serial();
    let mut r = rng::rng(808);
    let spread = Normal::new(0.0, 0.7).unwrap();
    let mut blobs = |n: usize| -> (Vec<Vec<f64>>, Vec<bool>) {
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let c = if positive { 1.5 } else { -1.5 };
                (vec![c + spread.sample(&mut r), c + spread.sample(&mut r)], positive)
            })
            .unzip()
    };
    let (train_x, train_y) = blobs(200);
    let (test_x, test_y) = blobs(1000);
    let width = median_distance(&train_x);
    let model = RvmModel::classifier(
        &train_x,
        &train_y,
        KernelSpec::rbf(width).unwrap(),
        &RvmFitConfig::default(),
    )
    .unwrap();
    let scores: Vec<f64> = test_x.iter().map(|x| model.predict_one(x).unwrap().score()).collect();
    let separable = auc(&scores, &test_y).unwrap();

    let mut r = rng::rng(809);
    let mut uniform = |n: usize| -> (Vec<Vec<f64>>, Vec<bool>) {
        (0..n)
            .map(|_| {
                (
                    vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)],
                    r.random_bool(0.5),
                )
            })
            .unzip()
    };
    let (train_x, train_y) = uniform(200);
    let (test_x, test_y) = uniform(2000);
    let width = median_distance(&train_x);
    let model = RvmModel::classifier(
        &train_x,
        &train_y,
        KernelSpec::rbf(width).unwrap(),
        &RvmFitConfig::default(),
    )
    .unwrap();
    let scores: Vec<f64> = test_x.iter().map(|x| model.predict_one(x).unwrap().score()).collect();
    let random = auc(&scores, &test_y).unwrap();

    let mut r = rng::rng(810);
    let inputs: Vec<Vec<f64>> = (0..40).map(|_| vec![r.random_range(-3.0..3.0)]).collect();
    let basis: Vec<Vec<f64>> = inputs[..8].to_vec();
    let design = design_matrix(&inputs, &basis, &KernelSpec::rbf(1.0).unwrap()).unwrap();
    let labels: Vec<bool> = inputs.iter().map(|x| x[0] + r.random_range(-1.0..1.0) > 0.0).collect();
    let alphas: Vec<f64> = (0..design.ncols()).map(|_| r.random_range(0.1..5.0)).collect();
    let mut fd = 0.0f64;
    for _ in 0..10 {
        let w = DVector::from_iterator(design.ncols(), (0..design.ncols()).map(|_| r.random_range(-2.0..2.0)));
        let g = penalized_gradient(&design, &labels, &alphas, &w);
        for k in 0..w.len() {
            let h = 1e-6;
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let numeric = (penalized_log_likelihood(&design, &labels, &alphas, &wp)
                - penalized_log_likelihood(&design, &labels, &alphas, &wm))
                / (2.0 * h);
            fd = fd.max((g[k] - numeric).abs());
        }
    }
    let pass = separable >= 0.99 && (random - 0.5).abs() <= 0.05 && fd <= 1e-4;
    report(
        8,
        "RVM classification",
        pass,
        &format!("separable AUC {separable:.4}, random-label AUC {random:.4}, gradient vs differences {fd:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_metric_identities() {
    let _g = serial();
    let mut r = rng::rng(909);
    let mut exact = true;
    for _ in 0..500 {
        let a: f64 = r.random();
        exact &= gini(a) == 2.0 * a - 1.0;
        let c = Confusion {
            tp: r.random_range(0..50),
            fp: r.random_range(1..50),
            tn: r.random_range(0..50),
            fn_: r.random_range(0..50),
        };
        exact &= (c.precision() + c.fdr() - 1.0).abs() <= f64::EPSILON;
    }
    // a printed 4-decimal AUC of 0.8516 covers [0.85155, 0.85165); its Gini
    // interval must reach the printed 0.7031
    let (lo, hi) = (gini(0.85155), gini(0.85165));
    let gini_ok = lo < 0.70315 && hi >= 0.70305;
    let fdr = 1.0 - 0.3723;
    let fdr_ok = format!("{fdr:.4}") == "0.6277";
    let pass = exact && gini_ok && fdr_ok;
    report(
        9,
        "metric identities",
        pass,
        &format!("identities exact {exact}; gini(0.8516) spans [{lo:.5}, {hi:.5}]; 1 - 0.3723 = {fdr:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_covariate_screen() {
    let _g = serial();
    let start = Instant::now();
    let mut hits = 0;
    for seed in 0..20u64 {
        let synthetic = generate_synthetic(&SyntheticConfig {
            n: 1000,
            informative_covariates: 5,
            noise_covariates: 16,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let data = &synthetic.dataset;
        assert_eq!(data.covariate_names().len() + data.kpi_names().len(), 23);
        let threshold = BenchmarkThreshold::from_quantiles(data, &[0.5, 0.5]).unwrap();
        let labels = label_units(data, &threshold).unwrap();
        let report = covariate_screen(
            data,
            &labels.labels,
            &ScreenConfig {
                seed,
                ..ScreenConfig::default()
            },
        )
        .unwrap();
        let starred = report.starred();
        if starred.len() == 5 && starred.iter().all(|s| s.starts_with("informative_")) {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = hits >= 18;
    report(
        10,
        "covariate screen",
        pass,
        &format!("exactly the 5 informative columns starred on {hits}/20 seeds, {secs:.1} s"),
    );
    assert!(pass);
}

/// Runs only when `PROBENCH_SAVIX_CONFIG` names a pipeline config whose input
/// is the SAVIX export. `PROBENCH_SAVIX_SAVINGS` names the savings-per-member
/// column (default `savings_per_member`).
#[test]
fn criterion_11_savix_reproduction() {
    let _g = serial();
    let Some(path) = std::env::var_os("PROBENCH_SAVIX_CONFIG") else {
        line("criterion 11 [SAVIX reproduction]: SKIP (PROBENCH_SAVIX_CONFIG not set)");
        return;
    };
    let mut config = PipelineConfig::load(Path::new(&path)).unwrap();
    if !config.input.path.exists() {
        line(&format!(
            "criterion 11 [SAVIX reproduction]: SKIP (input {} not found)",
            config.input.path.display()
        ));
        return;
    }
    let savings = std::env::var("PROBENCH_SAVIX_SAVINGS").unwrap_or_else(|_| "savings_per_member".into());
    let out = tempfile::tempdir().unwrap();
    config.output.dir = out.path().to_path_buf();
    config.denoise.enabled = true;

    let data = load_csv(&config.input.path, &config.input.columns).unwrap().dataset;
    let mean = |v: &[f64]| {
        let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let mut means = vec![mean(&data.kpi_column(0)), mean(&data.kpi_column(1))];
    let mut table = vec![48.63, 40.41];
    if let Some(c) = data.covariate_index(&savings) {
        means.push(mean(&data.covariate_column(c)));
        table.push(29.15);
    }
    let means_ok = means.iter().zip(&table).all(|(m, t)| (m - t).abs() <= 0.005);

    let denoised = cmd_denoise(&config).unwrap();
    let theta_ok = (denoised.theta_hat - 3.97).abs() <= 0.5;
    let bench = cmd_benchmark(&config).unwrap();
    let savings_auc = bench
        .metrics
        .rows
        .iter()
        .find(|row| row.covariate == savings)
        .map_or(f64::NAN, |row| row.auc);
    let pass = means_ok && theta_ok && savings_auc >= 0.99;
    report(
        11,
        "SAVIX reproduction",
        pass,
        &format!(
            "theta {:.3}, means {means:.2?}, savings AUC {savings_auc:.4}",
            denoised.theta_hat
        ),
    );
    assert!(pass);
}

fn read_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_end_to_end() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig {
        seed: 1212,
        ..PipelineConfig::default()
    };
    config.output.dir = dir.path().join("data");
    let simulated = cmd_simulate(&config).unwrap();
    assert_eq!(simulated.rows, 5000);
    config.input.path = simulated.data_path;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut runs = Vec::new();
    let mut seconds = Vec::new();
    for name in ["run_a", "run_b"] {
        let mut c = config.clone();
        c.output.dir = dir.path().join(name);
        let start = Instant::now();
        let outcome = pool.install(|| cmd_pipeline(&c)).unwrap();
        seconds.push(start.elapsed().as_secs_f64());
        runs.push((c.output.dir.clone(), outcome.manifest));
    }
    let (dir_a, manifest_a) = &runs[0];
    let (dir_b, manifest_b) = &runs[1];
    let names: Vec<String> = manifest_a.artifacts.iter().map(|a| a.file.clone()).collect();
    let present = |f: &dyn Fn(&str) -> bool| names.iter().any(|n| f(n));
    let complete = [
        "stats.csv",
        "stats.json",
        "filter.json",
        "kept_mask.csv",
        "trace.csv",
        "metrics.csv",
        "isolines.json",
    ]
    .iter()
    .all(|want| present(&|n| n == *want))
        && present(&|n| n.starts_with("surface_") && n.ends_with(".csv"))
        && dir_a.join("manifest.json").exists();
    let on_disk: Manifest = serde_json::from_slice(&std::fs::read(dir_a.join("manifest.json")).unwrap()).unwrap();
    let identical = read_artifacts(dir_a) == read_artifacts(dir_b)
        && manifest_a.artifacts == manifest_b.artifacts
        && on_disk.artifacts == manifest_a.artifacts;
    let pass = complete && identical && seconds[0] < 60.0;
    report(
        12,
        "end to end",
        pass,
        &format!(
            "{} artifacts, complete {complete}, repeat byte-identical {identical}, {:.1} s single-threaded",
            names.len() + 1,
            seconds[0]
        ),
    );
    assert!(pass);
}
