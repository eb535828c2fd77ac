//! Clayton Archimedean copula and rank-based estimation of its dependence
//! parameter.
//!
//! The copula is built from the generator `g(u) = u^(-θ) - 1`:
//!
//! ```text
//! C(u_1, ..., u_d) = (1 - d + Σ u_v^(-θ))^(-1/θ)
//! ```
//!
//! Powers are evaluated in log space so that large `θ` and small `u` do not
//! overflow, and `θ ≤ 1e-6` is answered with the independence copula.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// At or below this value the copula is treated as the independence copula.
pub const INDEPENDENCE_THETA: f64 = 1e-6;

/// Sample sizes at or below this use the direct pair count for Kendall's tau.
pub const PAIRWISE_TAU_CUTOFF: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaytonCopula {
    theta: f64,
    dimension: usize,
}

impl ClaytonCopula {
    pub fn new(theta: f64, dimension: usize) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Clayton theta must be finite and > 0, got {theta}"
            )));
        }
        if dimension < 2 {
            return Err(Error::InvalidParameter(format!(
                "copula dimension must be >= 2, got {dimension}"
            )));
        }
        Ok(Self { theta, dimension })
    }

    pub fn bivariate(theta: f64) -> Result<Self> {
        Self::new(theta, 2)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_independence(&self) -> bool {
        self.theta <= INDEPENDENCE_THETA
    }

    /// Population Kendall's tau, `θ / (θ + 2)`.
    pub fn kendall_tau(&self) -> f64 {
        self.theta / (self.theta + 2.0)
    }

    /// `g(u) = u^(-θ) - 1` on `(0, 1]`.
    pub fn generator(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("generator needs 0 < u <= 1, got {u}")));
        }
        Ok((-self.theta * u.ln()).exp_m1())
    }

    /// `g^(-1)(s) = (1 + s)^(-1/θ)` for `s >= 0`.
    pub fn generator_inverse(&self, s: f64) -> f64 {
        (-s.ln_1p() / self.theta).exp()
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: u.len(),
            });
        }
        if let Some(bad) = u.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::Domain(format!("copula argument {bad} outside [0, 1]")));
        }
        if u.contains(&0.0) {
            return Ok(0.0);
        }
        if self.is_independence() {
            return Ok(u.iter().product());
        }
        let log_sum = self.log_generator_sum(u);
        Ok((-log_sum / self.theta).exp())
    }

    /// Bivariate density `∂²C/∂u₁∂u₂`.
    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64> {
        if self.dimension != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.dimension,
            });
        }
        for v in [u1, u2] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain(format!(
                    "density needs strictly interior arguments, got {v}"
                )));
            }
        }
        if self.is_independence() {
            return Ok(1.0);
        }
        let theta = self.theta;
        let log_sum = self.log_generator_sum(&[u1, u2]);
        let log_density = theta.ln_1p() - (theta + 1.0) * (u1.ln() + u2.ln()) - (2.0 + 1.0 / theta) * log_sum;
        Ok(log_density.exp())
    }

    /// `ln(1 - d + Σ u_v^(-θ))` for strictly positive arguments.
    fn log_generator_sum(&self, u: &[f64]) -> f64 {
        let exponents: Vec<f64> = u.iter().map(|&v| -self.theta * v.ln()).collect();
        let largest = exponents.iter().copied().fold(0.0_f64, f64::max);
        if largest < 500.0 {
            exponents.iter().map(|a| a.exp_m1()).sum::<f64>().ln_1p()
        } else {
            let extra = (exponents.len() - 1) as f64;
            let scaled: f64 = exponents.iter().map(|a| (a - largest).exp()).sum();
            largest + (scaled - extra * (-largest).exp()).ln()
        }
    }

    /// Draws `n` bivariate points by the Marshall–Olkin frailty construction.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = rng::rng(seed);
        let mut out = Vec::with_capacity(n);
        if self.is_independence() {
            for _ in 0..n {
                out.push([open_unit(&mut rng), open_unit(&mut rng)]);
            }
            return out;
        }
        let frailty = Gamma::new(1.0 / self.theta, 1.0).expect("shape and scale are positive");
        for _ in 0..n {
            let v = positive_draw(&mut rng, &frailty);
            let mut point = [0.0; 2];
            for slot in point.iter_mut() {
                *slot = self.frailty_margin(&mut rng, v);
            }
            out.push(point);
        }
        out
    }

    /// Draws `n` points of the copula's full dimension.
    pub fn sample_rows(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::rng(seed);
        let d = self.dimension;
        if self.is_independence() {
            return (0..n).map(|_| (0..d).map(|_| open_unit(&mut rng)).collect()).collect();
        }
        let frailty = Gamma::new(1.0 / self.theta, 1.0).expect("shape and scale are positive");
        (0..n)
            .map(|_| {
                let v = positive_draw(&mut rng, &frailty);
                (0..d).map(|_| self.frailty_margin(&mut rng, v)).collect()
            })
            .collect()
    }

    fn frailty_margin(&self, rng: &mut rng::Rng, v: f64) -> f64 {
        let e: f64 = Exp1.sample(rng);
        let ratio_log = if e / v < 1e300 {
            (e / v).ln_1p()
        } else {
            e.ln() - v.ln()
        };
        let u = (-ratio_log / self.theta).exp();
        u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }
}

fn open_unit(rng: &mut rng::Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn positive_draw(rng: &mut rng::Rng, dist: &Gamma<f64>) -> f64 {
    loop {
        let v = dist.sample(rng);
        if v > 0.0 {
            return v;
        }
    }
}

/// Kendall's tau-a with ties counted as neither concordant nor discordant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallTauEstimate {
    pub tau: f64,
    pub n_pairs: u64,
    /// Concordant minus discordant pair count.
    pub score: i64,
}

impl KendallTauEstimate {
    fn from_score(n: usize, score: i64) -> Self {
        let n_pairs = (n as u64) * (n as u64 - 1) / 2;
        Self {
            tau: score as f64 / n_pairs as f64,
            n_pairs,
            score,
        }
    }
}

fn check_points(points: &[[f64; 2]]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "Kendall tau needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::Domain("Kendall tau needs finite coordinates".into()));
    }
    Ok(())
}

pub fn kendall_tau(points: &[[f64; 2]]) -> Result<KendallTauEstimate> {
    if points.len() <= PAIRWISE_TAU_CUTOFF {
        kendall_tau_pairwise(points)
    } else {
        kendall_tau_merge(points)
    }
}

/// Direct O(n²) pair count.
pub fn kendall_tau_pairwise(points: &[[f64; 2]]) -> Result<KendallTauEstimate> {
    check_points(points)?;
    let mut score: i64 = 0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let s = (a[0] - b[0]).signum_or_zero() * (a[1] - b[1]).signum_or_zero();
            score += s as i64;
        }
    }
    Ok(KendallTauEstimate::from_score(points.len(), score))
}

/// Knight's O(n log n) algorithm: sort by (x, y), then count strict
/// inversions in y with a merge sort.
pub fn kendall_tau_merge(points: &[[f64; 2]]) -> Result<KendallTauEstimate> {
    check_points(points)?;
    let n = points.len();
    let mut sorted: Vec<[f64; 2]> = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));

    let x_ties = tie_pairs(&sorted, |a, b| a[0] == b[0]);
    let joint_ties = tie_pairs(&sorted, |a, b| a[0] == b[0] && a[1] == b[1]);

    let mut ys: Vec<f64> = sorted.iter().map(|p| p[1]).collect();
    let mut buffer = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buffer);

    let y_ties = {
        let mut pairs = 0u64;
        let mut run = 1u64;
        for w in ys.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                pairs += run * (run - 1) / 2;
                run = 1;
            }
        }
        pairs + run * (run - 1) / 2
    };

    let total = (n as u64) * (n as u64 - 1) / 2;
    let score = total as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * swaps as i64;
    Ok(KendallTauEstimate::from_score(n, score))
}

fn tie_pairs(sorted: &[[f64; 2]], same: impl Fn(&[f64; 2], &[f64; 2]) -> bool) -> u64 {
    let mut pairs = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
    }
    pairs + run * (run - 1) / 2
}

/// Sorts `values` ascending and returns the number of strict inversions.
fn merge_count(values: &mut [f64], buffer: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = values.split_at_mut(mid);
        let (lbuf, rbuf) = buffer.split_at_mut(mid);
        merge_count(left, lbuf) + merge_count(right, rbuf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if values[j] < values[i] {
            buffer[k] = values[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buffer[k] = values[i];
            i += 1;
        }
        k += 1;
    }
    buffer[k..k + mid - i].copy_from_slice(&values[i..mid]);
    k += mid - i;
    buffer[k..k + n - j].copy_from_slice(&values[j..n]);
    values.copy_from_slice(&buffer[..n]);
    swaps
}

trait SignumOrZero {
    fn signum_or_zero(self) -> i8;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> i8 {
        if self > 0.0 {
            1
        } else if self < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Dependence fit exposed by the CLI as `{theta, tau, n, n_pairs}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaytonFit {
    pub theta: f64,
    pub tau: f64,
    pub n: usize,
    pub n_pairs: u64,
}

/// Inverts `τ = θ / (θ + 2)`.
pub fn theta_from_tau(tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::ClaytonInapplicable(tau));
    }
    if tau >= 1.0 {
        return Err(Error::DegenerateDependence);
    }
    Ok(2.0 * tau / (1.0 - tau))
}

pub fn estimate_theta(points: &[[f64; 2]]) -> Result<ClaytonFit> {
    let estimate = kendall_tau(points)?;
    Ok(ClaytonFit {
        theta: theta_from_tau(estimate.tau)?,
        tau: estimate.tau,
        n: points.len(),
        n_pairs: estimate.n_pairs,
    })
}
