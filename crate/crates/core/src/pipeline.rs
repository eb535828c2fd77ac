//! Stage commands behind the CLI. Each stage writes its artifacts into the
//! output directory; every artifact carries the config hash and seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{
    covariate_screen, label_units, monte_carlo_success, probability_surface, success_probability, BenchmarkSurface,
    BenchmarkThreshold, Estimate, GridSpec, StandardizedClassifier,
};
use crate::config::PipelineConfig;
use crate::copula::{estimate_theta, ClaytonCopula, ClaytonFit};
use crate::dataset::{descriptive_stats, generate_synthetic, load_csv, save_csv, DescriptiveStats, KpiDataset};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::rng::derive_seed;
use crate::svg;
use crate::swarm::{optimize, SwarmConfig, SwarmResult};

const MAX_CONDITIONING_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Stats,
    Denoise,
    Benchmark,
    Simulate,
}

impl Stage {
    /// Process exit code reported when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Stats => 3,
            Stage::Denoise => 4,
            Stage::Benchmark => 5,
            Stage::Simulate => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Stats => "stats",
            Stage::Denoise => "denoise",
            Stage::Benchmark => "benchmark",
            Stage::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait InStage<T> {
    fn stage(self, stage: Stage) -> StageResult<T>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

/// Artifact writer bound to one configuration.
struct Run<'a> {
    config: &'a PipelineConfig,
    hash: String,
    dir: PathBuf,
}

impl<'a> Run<'a> {
    fn new(config: &'a PipelineConfig) -> StageResult<Self> {
        config.validate().stage(Stage::Config)?;
        let hash = config.hash().stage(Stage::Config)?;
        let dir = config.output.dir.clone();
        std::fs::create_dir_all(&dir)
            .map_err(Error::from)
            .stage(Stage::Config)?;
        Ok(Self { config, hash, dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        let stamped = Stamped {
            config_hash: &self.hash,
            seed: self.config.seed,
            body,
        };
        let mut text = serde_json::to_string_pretty(&stamped)?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        Ok(())
    }

    /// CSV preceded by `#` lines holding the hash and seed.
    fn csv(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = format!("# config_hash={}\n# seed={}\n", self.hash, self.config.seed).into_bytes();
        fill(&mut buf)?;
        std::fs::write(self.path(name), buf)?;
        Ok(())
    }

    fn records(&self, name: &str, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
        self.csv(name, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(())
        })
    }

    fn svg(&self, name: &str, content: String) -> Result<()> {
        if self.config.output.svg {
            let stamp = format!("<!-- config_hash={} seed={} -->\n", self.hash, self.config.seed);
            std::fs::write(self.path(name), stamp + &content)?;
        }
        Ok(())
    }
}

fn load(config: &PipelineConfig) -> Result<KpiDataset> {
    Ok(load_csv(&config.input.path, &config.input.columns)?.dataset)
}

fn kpi_names(data: &KpiDataset) -> [&str; 2] {
    [data.kpi_names()[0].as_str(), data.kpi_names()[1].as_str()]
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsOutcome {
    pub rows: usize,
    pub dropped_rows: usize,
    pub stats: DescriptiveStats,
}

fn stats_stage(run: &Run) -> Result<StatsOutcome> {
    let report = load_csv(&run.config.input.path, &run.config.input.columns)?;
    let data = &report.dataset;
    for (c, name) in data.covariate_names().iter().enumerate() {
        if data.covariate_column(c).iter().all(|v| v.is_nan()) {
            return Err(Error::EmptyColumn(name.clone()));
        }
    }
    let stats = descriptive_stats(data);
    let outcome = StatsOutcome {
        rows: data.len(),
        dropped_rows: report.dropped_rows,
        stats,
    };
    let header = ["variable", "n", "mean", "std_dev", "min", "max"].map(String::from);
    run.records(
        "stats.csv",
        &header,
        outcome.stats.variables.iter().map(|v| {
            vec![
                v.variable.clone(),
                v.n.to_string(),
                v.mean.to_string(),
                v.std_dev.to_string(),
                v.min.to_string(),
                v.max.to_string(),
            ]
        }),
    )?;
    run.json("stats.json", &outcome)?;
    Ok(outcome)
}

/// Descriptive statistics of every mapped column.
pub fn cmd_stats(config: &PipelineConfig) -> StageResult<StatsOutcome> {
    let run = Run::new(config)?;
    stats_stage(&run).stage(Stage::Stats)
}

#[derive(Debug, Clone, Serialize)]
struct FilterArtifact<'a> {
    psi: [f64; 4],
    psi_perp: [f64; 4],
    mode: crate::hyperbola::MembershipMode,
    band_center: f64,
    theta_hat: f64,
    kept_fit: &'a ClaytonFit,
    raw_fit: &'a Option<ClaytonFit>,
    rows: usize,
    kept_rows: usize,
    kept_fraction: f64,
    fallback_steps: usize,
    sweeps: usize,
    swarm: &'a SwarmConfig,
}

fn denoise_stage(run: &Run, data: &KpiDataset) -> Result<SwarmResult> {
    if data.len() < 10 {
        return Err(Error::TooFewRows(data.len()));
    }
    let mut swarm = run.config.denoise.swarm.clone();
    swarm.seed = derive_seed(run.config.seed, "denoise");
    let points = data.kpi_pairs();
    let result = optimize(&points, &swarm)?;
    run.json(
        "filter.json",
        &FilterArtifact {
            psi: result.filter.psi.values(),
            psi_perp: result.filter.psi_perp.values(),
            mode: result.filter.mode,
            band_center: result.filter.band_center,
            theta_hat: result.theta_hat,
            kept_fit: &result.fit,
            raw_fit: &result.raw_fit,
            rows: data.len(),
            kept_rows: result.kept_mask.iter().filter(|k| **k).count(),
            kept_fraction: result.kept_fraction,
            fallback_steps: result.fallback_steps,
            sweeps: result.trace.sweeps.len(),
            swarm: &swarm,
        },
    )?;
    run.records(
        "kept_mask.csv",
        &["unit".to_string(), "kept".to_string()],
        data.units()
            .iter()
            .zip(&result.kept_mask)
            .map(|(u, &k)| vec![u.clone(), (k as u8).to_string()]),
    )?;
    run.csv("trace.csv", |buf| result.trace.write_csv(buf))?;
    run.svg(
        "filter.svg",
        svg::filter_plot(&points, &result.kept_mask, &result.filter, kpi_names(data)),
    )?;
    run.svg("convergence.svg", svg::convergence_plot(&result.trace))?;
    Ok(result)
}

/// Swarm-optimized double-hyperbola filter on the input KPIs.
pub fn cmd_denoise(config: &PipelineConfig) -> StageResult<SwarmResult> {
    let run = Run::new(config)?;
    let data = load(config).stage(Stage::Denoise)?;
    denoise_stage(&run, &data).stage(Stage::Denoise)
}

/// Reads a `kept_mask.csv` written by the denoise stage.
pub fn read_kept_mask(path: &Path, data: &KpiDataset) -> Result<Vec<bool>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut mask = Vec::with_capacity(data.len());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let unit = record.get(0).unwrap_or("");
        if data.units().get(i).map(String::as_str) != Some(unit) {
            return Err(Error::InvalidParameter(format!(
                "kept mask row {} names unit {unit:?}, which does not match the input",
                i + 1
            )));
        }
        mask.push(match record.get(1) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(Error::InvalidParameter(format!("kept flag {other:?} is not 0 or 1")));
            }
        });
    }
    if mask.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: mask.len(),
        });
    }
    Ok(mask)
}

/// Copula view of the benchmark: the probability that a unit falls short
/// on at least one KPI, `u₁ + u₂ − C(u₁, u₂)`.
#[derive(Debug, Clone, Serialize)]
pub struct CopulaBenchmark {
    pub tau: Vec<f64>,
    pub tau_quantiles: Vec<f64>,
    /// Empirical CDF of each KPI at its threshold, `#{y ≤ τ} / (N + 1)`.
    pub u: [f64; 2],
    pub fit: Option<ClaytonFit>,
    pub success_probability: Option<f64>,
    /// `1 − success_probability`: both KPIs beyond their thresholds.
    pub joint_exceedance: Option<f64>,
    pub monte_carlo: Option<Estimate>,
    /// Why the copula part is missing, when it is.
    pub error: Option<String>,
}

fn copula_benchmark(run: &Run, data: &KpiDataset, threshold: &BenchmarkThreshold) -> CopulaBenchmark {
    let n = data.len() as f64;
    let ecdf = |c: usize| data.kpi_column(c).iter().filter(|&&y| y <= threshold.tau[c]).count() as f64 / (n + 1.0);
    let u = [ecdf(0), ecdf(1)];
    let mut out = CopulaBenchmark {
        tau: threshold.tau.clone(),
        tau_quantiles: threshold.tau_quantiles.clone(),
        u,
        fit: None,
        success_probability: None,
        joint_exceedance: None,
        monte_carlo: None,
        error: None,
    };
    let analytic = || -> Result<(ClaytonFit, f64, Option<Estimate>)> {
        let fit = estimate_theta(&data.kpi_pairs())?;
        let copula = ClaytonCopula::bivariate(fit.theta)?;
        let p = success_probability(&copula, u)?;
        let samples = run.config.copula.monte_carlo_samples;
        let mc = if samples > 0 {
            Some(monte_carlo_success(
                &copula,
                &u,
                samples,
                derive_seed(run.config.seed, "copula"),
            )?)
        } else {
            None
        };
        Ok((fit, p, mc))
    };
    match analytic() {
        Ok((fit, p, mc)) => {
            out.fit = Some(fit);
            out.success_probability = Some(p);
            out.joint_exceedance = Some(1.0 - p);
            out.monte_carlo = mc;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkOutcome {
    pub rows: usize,
    pub positives: usize,
    pub labeling_rule: String,
    pub copula: CopulaBenchmark,
    pub surfaces: Vec<BenchmarkSurface>,
    pub metrics: MetricsReport,
}

fn conditioning_assignments(data: &KpiDataset, names: &[String]) -> Result<Vec<Vec<(String, f64)>>> {
    let mut assignments: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for name in names {
        let c = data
            .covariate_index(name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        let mut values: Vec<f64> = data.covariate_column(c).into_iter().filter(|v| v.is_finite()).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.is_empty() {
            return Err(Error::EmptyColumn(name.clone()));
        }
        if values.len() > MAX_CONDITIONING_LEVELS {
            return Err(Error::InvalidParameter(format!(
                "conditioning covariate {name} has {} distinct values; at most {MAX_CONDITIONING_LEVELS} are supported",
                values.len()
            )));
        }
        assignments = assignments
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push((name.clone(), v));
                    next
                })
            })
            .collect();
    }
    Ok(assignments)
}

fn surface_label(conditioning: &[(String, f64)]) -> String {
    if conditioning.is_empty() {
        return "all".into();
    }
    conditioning
        .iter()
        .map(|(n, v)| format!("{n}-{v}"))
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Serialize)]
struct IsolineEntry<'a> {
    label: String,
    conditioning: &'a [(String, f64)],
    extrapolated: bool,
    isolines: &'a [crate::contour::Isoline],
}

fn benchmark_stage(run: &Run, full: &KpiDataset, mask: Option<&[bool]>) -> Result<BenchmarkOutcome> {
    let config = run.config;
    let data = match mask {
        Some(m) => full.select(m)?,
        None => full.clone(),
    };
    let threshold = BenchmarkThreshold::from_quantiles(&data, &config.benchmark.quantiles)?;
    let labeling = label_units(&data, &threshold)?;
    if labeling.warning.is_some() {
        return Err(Error::SingleClass);
    }
    let copula = copula_benchmark(run, &data, &threshold);
    run.json("benchmark.json", &copula)?;

    let conditioning_names: Vec<String> = match &config.benchmark.conditioning {
        Some(names) => names.clone(),
        None => data
            .covariate_names()
            .iter()
            .zip(data.categorical_flags())
            .filter(|(_, c)| **c)
            .map(|(n, _)| n.clone())
            .collect(),
    };
    let cond_cols = conditioning_names
        .iter()
        .map(|n| data.covariate_index(n).ok_or_else(|| Error::MissingColumn(n.clone())))
        .collect::<Result<Vec<usize>>>()?;
    let mut features = data.kpi_names().to_vec();
    features.extend(conditioning_names.iter().cloned());
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..data.len() {
        let mut row = data.kpis()[i].clone();
        row.extend(cond_cols.iter().map(|&c| data.covariates()[i][c]));
        if row.iter().all(|v| v.is_finite()) {
            rows.push(row);
            labels.push(labeling.labels[i]);
        }
    }
    let model = StandardizedClassifier::fit(
        features,
        &rows,
        &labels,
        &config.surface_settings(),
        derive_seed(config.seed, "surface"),
    )?;
    run.json("model.json", &model)?;

    let grid = GridSpec::from_data(&data, config.benchmark.grid_points);
    let names = kpi_names(&data);
    let mut surfaces = Vec::new();
    for assignment in conditioning_assignments(&data, &conditioning_names)? {
        let surface = probability_surface(&model, &grid, &assignment, &config.benchmark.levels)?;
        let label = surface_label(&assignment);
        let g = &surface.grid;
        let header = [names[0], names[1], "probability", "raw_probability"].map(String::from);
        run.records(
            &format!("surface_{label}.csv"),
            &header,
            (0..g.ys.len()).flat_map(|j| {
                let surface = &surface;
                (0..g.xs.len()).map(move |i| {
                    vec![
                        g.xs[i].to_string(),
                        g.ys[j].to_string(),
                        g.values[j][i].to_string(),
                        surface.raw_probability[j][i].to_string(),
                    ]
                })
            }),
        )?;
        run.svg(&format!("contours_{label}.svg"), svg::contour_plot(&surface, names))?;
        surfaces.push(surface);
    }
    let entries: Vec<IsolineEntry> = surfaces
        .iter()
        .map(|s| IsolineEntry {
            label: surface_label(&s.conditioning),
            conditioning: &s.conditioning,
            extrapolated: s.extrapolated,
            isolines: &s.isolines,
        })
        .collect();
    run.json(
        "isolines.json",
        &serde_json::json!({ "levels": config.benchmark.levels, "surfaces": entries }),
    )?;

    let mut metrics = covariate_screen(
        &data,
        &labeling.labels,
        &config.screen_config(derive_seed(config.seed, "screen")),
    )?;
    metrics.labeling_rule = labeling.rule.clone();
    run.csv("metrics.csv", |buf| metrics.write_csv(buf))?;
    run.json("metrics.json", &metrics)?;

    Ok(BenchmarkOutcome {
        rows: data.len(),
        positives: labeling.positives,
        labeling_rule: labeling.rule,
        copula,
        surfaces,
        metrics,
    })
}

/// Labels, surfaces, isolines and the covariate screen. Uses the kept mask
/// from a previous denoise run unless denoising is disabled.
pub fn cmd_benchmark(config: &PipelineConfig) -> StageResult<BenchmarkOutcome> {
    let run = Run::new(config)?;
    let go = || -> Result<BenchmarkOutcome> {
        let data = load(config)?;
        let mask = if config.denoise.enabled {
            Some(read_kept_mask(&run.path("kept_mask.csv"), &data)?)
        } else {
            None
        };
        benchmark_stage(&run, &data, mask.as_deref())
    };
    go().stage(Stage::Benchmark)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// The effective configuration, output directory included.
    pub config: PipelineConfig,
    /// Wall-clock seconds; the only run-dependent part of the manifest.
    pub stages: Vec<StageTiming>,
    /// Every artifact in the output directory except the manifest, by name.
    pub artifacts: Vec<ArtifactHash>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutcome {
    pub stats: StatsOutcome,
    pub denoise: Option<SwarmResult>,
    pub benchmark: BenchmarkOutcome,
    pub manifest: Manifest,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn write_manifest(run: &Run, stages: Vec<StageTiming>) -> Result<Manifest> {
    let mut files: Vec<String> = std::fs::read_dir(&run.dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != "manifest.json")
        .collect();
    files.sort();
    let artifacts = files
        .into_iter()
        .map(|file| {
            Ok(ArtifactHash {
                sha256: sha256_file(&run.path(&file))?,
                file,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config_hash: run.hash.clone(),
        seed: run.config.seed,
        config: run.config.clone(),
        stages,
        artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(run.path("manifest.json"), text)?;
    Ok(manifest)
}

/// stats, then denoise (unless disabled), then benchmark, then the manifest.
/// The first failing stage aborts the run.
pub fn cmd_pipeline(config: &PipelineConfig) -> StageResult<PipelineOutcome> {
    let run = Run::new(config)?;
    let mut timings = Vec::new();
    let mut timed = |stage: Stage, start: Instant| {
        timings.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        })
    };

    let start = Instant::now();
    let stats = stats_stage(&run).stage(Stage::Stats)?;
    timed(Stage::Stats, start);

    let data = load(config).stage(Stage::Stats)?;
    let denoise = if config.denoise.enabled {
        let start = Instant::now();
        let result = denoise_stage(&run, &data).stage(Stage::Denoise)?;
        timed(Stage::Denoise, start);
        Some(result)
    } else {
        None
    };

    let start = Instant::now();
    let mask = denoise.as_ref().map(|r| r.kept_mask.as_slice());
    let benchmark = benchmark_stage(&run, &data, mask).stage(Stage::Benchmark)?;
    timed(Stage::Benchmark, start);

    let manifest = write_manifest(&run, timings).stage(Stage::Benchmark)?;
    Ok(PipelineOutcome {
        stats,
        denoise,
        benchmark,
        manifest,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutcome {
    pub data_path: PathBuf,
    pub rows: usize,
    pub noise_rows: usize,
}

/// Writes `synthetic.csv` (loadable with the default column mapping) and
/// `synthetic_truth.csv` marking the rows drawn as noise.
pub fn cmd_simulate(config: &PipelineConfig) -> StageResult<SimulateOutcome> {
    let run = Run::new(config)?;
    let go = || -> Result<SimulateOutcome> {
        let mut settings = config.simulate.clone();
        settings.seed = derive_seed(config.seed, "simulate");
        let synthetic = generate_synthetic(&settings)?;
        let data_path = run.path("synthetic.csv");
        save_csv(&synthetic.dataset, &data_path)?;
        let body = std::fs::read(&data_path)?;
        run.csv("synthetic.csv", |buf| {
            buf.extend_from_slice(&body);
            Ok(())
        })?;
        run.records(
            "synthetic_truth.csv",
            &["unit".to_string(), "noise".to_string()],
            synthetic
                .dataset
                .units()
                .iter()
                .zip(&synthetic.is_noise)
                .map(|(u, &k)| vec![u.clone(), (k as u8).to_string()]),
        )?;
        Ok(SimulateOutcome {
            data_path,
            rows: synthetic.dataset.len(),
            noise_rows: synthetic.is_noise.iter().filter(|k| **k).count(),
        })
    };
    go().stage(Stage::Simulate)
}
