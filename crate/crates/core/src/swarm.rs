//! Swarm search for the double-hyperbola filter that maximizes the Clayton
//! dependence of the kept points.
//!
//! Each sweep spawns `M` particles around the incumbent parameter pair by
//! Gaussian steps weighted by `δ·|p|/‖p‖`, scores every particle by the
//! Clayton `θ` of a filtered random subsample, and greedily adopts the best
//! particle when it beats the incumbent. Success shrinks the dispersion by
//! `ζ*`, failure by `ζ`. Cohesion and separation are logged per sweep.
//!
//! Particles move in KPI units by default, so `δ` is an absolute step and the
//! search stays local to the starting filter. With `standardize` set they
//! move in a working space where each KPI is divided by its standard
//! deviation; filters are always evaluated after mapping back to KPI units.

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{estimate_theta, ClaytonFit};
use crate::error::{Error, Result};
use crate::hyperbola::{DoubleHyperbolaFilter, HyperbolaParams, MembershipMode};
use crate::rng::{self, Rng};

/// Rejection value for particles whose filter keeps too little data.
pub const REJECTED: f64 = f64::NEG_INFINITY;

/// Candidates farther than this many separations from the sweep centroid
/// are drawn again once.
const OUTLIER_SEPARATIONS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    /// Initial dispersion.
    pub delta: f64,
    /// Particles per sweep.
    pub particles: usize,
    pub theta0: f64,
    /// Starting parameters, in KPI units unless `standardize` is set.
    pub p0: [f64; 4],
    pub p0_perp: [f64; 4],
    /// Shrink factor after a sweep without improvement.
    pub zeta: f64,
    /// Shrink factor after an improving sweep.
    pub zeta_star: f64,
    pub sample_fraction: f64,
    pub min_keep_fraction: f64,
    pub max_sweeps: usize,
    pub stagnation_limit: usize,
    pub mode: MembershipMode,
    pub band_center: f64,
    /// Search in standard-deviation units instead of KPI units.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            particles: 30,
            theta0: 0.0,
            p0: [150.0, 1.0, -20.0, 40.0],
            p0_perp: [120.0, 1.0, -100.0, 50.0],
            zeta: 0.99,
            zeta_star: 0.90,
            sample_fraction: 0.5,
            min_keep_fraction: 0.5,
            max_sweeps: 200,
            stagnation_limit: 25,
            mode: MembershipMode::BelowUpperBranch,
            band_center: 0.0,
            standardize: false,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be > 0, got {}", self.delta));
        }
        if self.particles == 0 {
            return bad("particles must be >= 1".into());
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0 && self.zeta_star > 0.0 && self.zeta_star < 1.0) {
            return bad(format!(
                "zeta ({}) and zeta_star ({}) must lie in (0, 1)",
                self.zeta, self.zeta_star
            ));
        }
        if self.zeta_star > self.zeta {
            return bad(format!(
                "zeta_star ({}) must not exceed zeta ({})",
                self.zeta_star, self.zeta
            ));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return bad(format!(
                "sample_fraction must lie in (0, 1], got {}",
                self.sample_fraction
            ));
        }
        if !(self.min_keep_fraction > 0.0 && self.min_keep_fraction < 1.0) {
            return bad(format!(
                "min_keep_fraction must lie in (0, 1), got {}",
                self.min_keep_fraction
            ));
        }
        if self.max_sweeps == 0 || self.stagnation_limit == 0 {
            return bad("max_sweeps and stagnation_limit must be >= 1".into());
        }
        if !self.theta0.is_finite() {
            return bad("theta0 must be finite".into());
        }
        HyperbolaParams::new(self.p0)?;
        HyperbolaParams::new(self.p0_perp)?;
        Ok(())
    }
}

fn norm(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Componentwise step weights `δ·|p|/‖p‖`; unit weights when `‖p‖ = 0`.
pub fn step_weights(p: &[f64; 4], delta: f64) -> [f64; 4] {
    let n = norm(p);
    if n == 0.0 {
        return [delta; 4];
    }
    p.map(|v| delta * v.abs() / n)
}

pub fn perturb(p: &[f64; 4], delta: f64, rng: &mut Rng) -> [f64; 4] {
    let w = step_weights(p, delta);
    let mut out = *p;
    for (slot, weight) in out.iter_mut().zip(w) {
        let eps: f64 = StandardNormal.sample(rng);
        *slot += weight * eps;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleScore {
    /// Clayton θ of the kept subsample, or [`REJECTED`].
    pub theta: f64,
    pub kept_fraction: f64,
}

/// Scores one filter on a random subsample of `data`.
pub fn evaluate_particle(
    filter: &DoubleHyperbolaFilter,
    data: &[[f64; 2]],
    sample_fraction: f64,
    min_keep_fraction: f64,
    seed: u64,
) -> ParticleScore {
    let n = data.len();
    let m = ((sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let kept: Vec<[f64; 2]> = if m == n {
        data.iter().copied().filter(|&p| filter.keeps(p)).collect()
    } else {
        let mut rng = rng::rng(seed);
        index::sample(&mut rng, n, m)
            .into_iter()
            .map(|i| data[i])
            .filter(|&p| filter.keeps(p))
            .collect()
    };
    let kept_fraction = kept.len() as f64 / m as f64;
    if kept_fraction < min_keep_fraction || kept.len() < 2 {
        return ParticleScore {
            theta: REJECTED,
            kept_fraction,
        };
    }
    let theta = estimate_theta(&kept).map(|fit| fit.theta).unwrap_or(REJECTED);
    ParticleScore { theta, kept_fraction }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    /// Incumbent θ after the sweep.
    pub best_theta: f64,
    /// Best particle of this sweep ([`REJECTED`] if all were rejected).
    pub sweep_best_theta: f64,
    pub accepted: bool,
    /// Dispersion used to spawn this sweep's particles.
    pub delta: f64,
    pub cohesion: Option<f64>,
    pub separation: Option<f64>,
    /// Kept fraction of the incumbent's scoring subsample.
    pub kept_fraction: f64,
    pub rejected_particles: usize,
    pub redrawn_particles: usize,
    /// Incumbent parameters in KPI units.
    pub psi: [f64; 4],
    pub psi_perp: [f64; 4],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwarmTrace {
    pub sweeps: Vec<SweepRecord>,
}

impl SwarmTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sweep",
            "best_theta",
            "sweep_best_theta",
            "accepted",
            "delta",
            "cohesion",
            "separation",
            "kept_fraction",
            "rejected_particles",
            "redrawn_particles",
            "psi1",
            "psi2",
            "psi3",
            "psi4",
            "psi_perp1",
            "psi_perp2",
            "psi_perp3",
            "psi_perp4",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.sweeps {
            let mut row = vec![
                r.sweep.to_string(),
                r.best_theta.to_string(),
                r.sweep_best_theta.to_string(),
                r.accepted.to_string(),
                r.delta.to_string(),
                opt(r.cohesion),
                opt(r.separation),
                r.kept_fraction.to_string(),
                r.rejected_particles.to_string(),
                r.redrawn_particles.to_string(),
            ];
            row.extend(r.psi.iter().map(f64::to_string));
            row.extend(r.psi_perp.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmResult {
    /// Fitted filter in KPI units.
    pub filter: DoubleHyperbolaFilter,
    pub theta_hat: f64,
    pub fit: ClaytonFit,
    /// Clayton fit of the unfiltered data, when it has positive dependence.
    pub raw_fit: Option<ClaytonFit>,
    pub kept_mask: Vec<bool>,
    pub kept_fraction: f64,
    /// Column scales of the working space.
    pub scales: [f64; 2],
    /// Accepted incumbents skipped because they failed the keep guard on the
    /// full data.
    pub fallback_steps: usize,
    pub trace: SwarmTrace,
}

#[derive(Clone, Copy)]
struct Particle {
    p: [f64; 4],
    perp: [f64; 4],
}

impl Particle {
    fn spread(&self, centre: &Particle) -> f64 {
        0.5 * (distance(&self.p, &centre.p) + distance(&self.perp, &centre.perp))
    }

    fn filter(&self, scales: [f64; 2], config: &SwarmConfig) -> Option<DoubleHyperbolaFilter> {
        let psi = HyperbolaParams::new(self.p).ok()?;
        let perp = HyperbolaParams::new(self.perp).ok()?;
        let working = DoubleHyperbolaFilter {
            psi,
            psi_perp: perp,
            mode: config.mode,
            band_center: config.band_center,
        };
        let mut out = working.unscale(scales);
        out.band_center = config.band_center;
        Some(out)
    }
}

fn centroid(particles: &[&Particle]) -> Particle {
    let k = particles.len() as f64;
    let mut c = Particle {
        p: [0.0; 4],
        perp: [0.0; 4],
    };
    for q in particles {
        for i in 0..4 {
            c.p[i] += q.p[i] / k;
            c.perp[i] += q.perp[i] / k;
        }
    }
    c
}

fn column_scales(data: &[[f64; 2]], standardize: bool) -> [f64; 2] {
    if !standardize {
        return [1.0, 1.0];
    }
    let mut out = [1.0; 2];
    for (c, slot) in out.iter_mut().enumerate() {
        let col: Vec<f64> = data.iter().map(|p| p[c]).collect();
        let sd = crate::dataset::summarize("", &col).std_dev;
        if sd.is_finite() && sd > 0.0 {
            *slot = sd;
        }
    }
    out
}

pub fn optimize(data: &[[f64; 2]], config: &SwarmConfig) -> Result<SwarmResult> {
    config.validate()?;
    if data.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "swarm search needs at least 10 rows, got {}",
            data.len()
        )));
    }
    if data.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::Domain("swarm search needs finite KPI values".into()));
    }
    let scales = column_scales(data, config.standardize);
    let m = config.particles;

    let mut incumbent = Particle {
        p: config.p0,
        perp: config.p0_perp,
    };
    let mut incumbent_theta = config.theta0;
    let mut incumbent_kept = f64::NAN;
    let mut history = vec![incumbent];
    let mut delta = config.delta;
    let mut stagnation = 0;
    let mut any_valid = false;
    let mut trace = SwarmTrace::default();

    for sweep in 0..config.max_sweeps {
        let sweep_seed = rng::indexed_seed(config.seed, sweep as u64);
        let mut rngs: Vec<Rng> = (0..m)
            .map(|i| rng::rng(rng::indexed_seed(sweep_seed, i as u64)))
            .collect();
        let mut particles: Vec<Particle> = rngs
            .iter_mut()
            .map(|r| Particle {
                p: perturb(&incumbent.p, delta, r),
                perp: perturb(&incumbent.perp, delta, r),
            })
            .collect();

        let mut redrawn = 0;
        if m > 1 {
            let all: Vec<&Particle> = particles.iter().collect();
            let centre = centroid(&all);
            let spreads: Vec<f64> = particles.iter().map(|q| q.spread(&centre)).collect();
            let separation = spreads.iter().sum::<f64>() / m as f64;
            for (i, spread) in spreads.iter().enumerate() {
                if *spread > OUTLIER_SEPARATIONS * separation {
                    particles[i] = Particle {
                        p: perturb(&incumbent.p, delta, &mut rngs[i]),
                        perp: perturb(&incumbent.perp, delta, &mut rngs[i]),
                    };
                    redrawn += 1;
                }
            }
        }

        let scores: Vec<ParticleScore> = particles
            .par_iter()
            .enumerate()
            .map(|(i, q)| match q.filter(scales, config) {
                Some(f) => evaluate_particle(
                    &f,
                    data,
                    config.sample_fraction,
                    config.min_keep_fraction,
                    rng::indexed_seed(sweep_seed, (m + i) as u64),
                ),
                None => ParticleScore {
                    theta: REJECTED,
                    kept_fraction: 0.0,
                },
            })
            .collect();

        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if s.theta > scores[best].theta {
                best = i;
            }
        }
        let best_theta = scores[best].theta;
        let valid: Vec<&Particle> = particles
            .iter()
            .zip(&scores)
            .filter(|(_, s)| s.theta > REJECTED)
            .map(|(q, _)| q)
            .collect();
        any_valid |= !valid.is_empty();
        let (cohesion, separation) = if valid.is_empty() {
            (None, None)
        } else {
            let centre = centroid(&valid);
            let k = valid.len() as f64;
            let leader = &particles[best];
            (
                Some(valid.iter().map(|q| q.spread(leader)).sum::<f64>() / k),
                Some(valid.iter().map(|q| q.spread(&centre)).sum::<f64>() / k),
            )
        };

        let sweep_delta = delta;
        let accepted = best_theta > incumbent_theta;
        if accepted {
            incumbent = particles[best];
            incumbent_theta = best_theta;
            incumbent_kept = scores[best].kept_fraction;
            history.push(incumbent);
            delta *= config.zeta_star;
            stagnation = 0;
        } else {
            delta *= config.zeta;
            stagnation += 1;
        }

        let reported = incumbent
            .filter(scales, config)
            .expect("incumbent parameters are valid");
        trace.sweeps.push(SweepRecord {
            sweep,
            best_theta: incumbent_theta,
            sweep_best_theta: best_theta,
            accepted,
            delta: sweep_delta,
            cohesion,
            separation,
            kept_fraction: incumbent_kept,
            rejected_particles: m - valid.len(),
            redrawn_particles: redrawn,
            psi: reported.psi.values(),
            psi_perp: reported.psi_perp.values(),
        });

        if stagnation >= config.stagnation_limit {
            break;
        }
    }

    if !any_valid {
        return Err(Error::DegenerateSearch);
    }

    let raw_fit = estimate_theta(data).ok();
    for (steps_back, candidate) in history.iter().rev().enumerate() {
        let Some(filter) = candidate.filter(scales, config) else {
            continue;
        };
        let outcome = filter.apply(data);
        let kept_fraction = outcome.kept.len() as f64 / data.len() as f64;
        if kept_fraction < config.min_keep_fraction {
            continue;
        }
        let Ok(fit) = estimate_theta(&outcome.kept) else {
            continue;
        };
        return Ok(SwarmResult {
            filter,
            theta_hat: fit.theta,
            fit,
            raw_fit,
            kept_mask: outcome.kept_mask,
            kept_fraction,
            scales,
            fallback_steps: steps_back,
            trace,
        });
    }
    Err(Error::DegenerateSearch)
}
