//! Translated generalized hyperbola `ψ₁·√(ψ₂ + ψ₃/(ψ₄ + t))`, real part only,
//! and the double-hyperbola keep/discard filter built from two of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Abscissae this close to `-ψ₄` count as the pole.
pub const POLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct HyperbolaParams([f64; 4]);

impl HyperbolaParams {
    pub fn new(psi: [f64; 4]) -> Result<Self> {
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hyperbola parameters must be finite, got {psi:?}"
            )));
        }
        if psi[0] == 0.0 {
            return Err(Error::InvalidParameter(
                "hyperbola amplitude psi1 must be non-zero".into(),
            ));
        }
        Ok(Self(psi))
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Real part of the hyperbola at abscissa `t`.
    pub fn eval_real(&self, t: f64) -> Result<f64> {
        let [a, b, c, d] = self.0;
        if (d + t).abs() <= POLE_TOLERANCE {
            return Err(Error::HyperbolaPole(t));
        }
        let radicand = b + c / (d + t);
        Ok(if radicand >= 0.0 { a * radicand.sqrt() } else { 0.0 })
    }

    /// Re-expresses parameters fitted on `(t / x_scale, v / y_scale)` in the
    /// unscaled coordinates. The map is exact for the curve.
    pub fn unscale(&self, x_scale: f64, y_scale: f64) -> Self {
        let [a, b, c, d] = self.0;
        Self([a * y_scale, b, c * x_scale, d * x_scale])
    }

    /// Inverse of [`HyperbolaParams::unscale`].
    pub fn scale(&self, x_scale: f64, y_scale: f64) -> Self {
        let [a, b, c, d] = self.0;
        Self([a / y_scale, b, c / x_scale, d / x_scale])
    }
}

impl TryFrom<[f64; 4]> for HyperbolaParams {
    type Error = Error;
    fn try_from(psi: [f64; 4]) -> Result<Self> {
        Self::new(psi)
    }
}

impl From<HyperbolaParams> for [f64; 4] {
    fn from(p: HyperbolaParams) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembershipMode {
    /// On or under the curve wherever the curve is positive.
    BelowUpperBranch,
    /// Within the curve's height of a horizontal center line.
    SymmetricBand,
}

/// Lobe membership of `(abscissa, ordinate)`. Pole points are outside.
pub fn inside_lobes(
    p: &HyperbolaParams,
    abscissa: f64,
    ordinate: f64,
    mode: MembershipMode,
    band_center: f64,
) -> Result<bool> {
    let height = p.eval_real(abscissa)?;
    if height <= 0.0 {
        return Ok(false);
    }
    Ok(match mode {
        MembershipMode::BelowUpperBranch => ordinate <= height,
        MembershipMode::SymmetricBand => (ordinate - band_center).abs() <= height,
    })
}

fn inside_or_pole(
    p: &HyperbolaParams,
    abscissa: f64,
    ordinate: f64,
    mode: MembershipMode,
    band_center: f64,
) -> (bool, bool) {
    match inside_lobes(p, abscissa, ordinate, mode, band_center) {
        Ok(inside) => (inside, false),
        Err(_) => (false, true),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleHyperbolaFilter {
    pub psi: HyperbolaParams,
    pub psi_perp: HyperbolaParams,
    pub mode: MembershipMode,
    #[serde(default)]
    pub band_center: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<[f64; 2]>,
    pub kept_mask: Vec<bool>,
    /// Rows discarded because they fell on a pole of either hyperbola.
    pub pole_rows: usize,
}

impl DoubleHyperbolaFilter {
    pub fn new(psi: HyperbolaParams, psi_perp: HyperbolaParams, mode: MembershipMode) -> Self {
        Self {
            psi,
            psi_perp,
            mode,
            band_center: 0.0,
        }
    }

    /// Keep decision for one row plus whether a pole was hit. The rotated
    /// hyperbola is the first one with the axes exchanged.
    pub fn classify(&self, point: [f64; 2]) -> (bool, bool) {
        let [y1, y2] = point;
        let (inside, pole) = inside_or_pole(&self.psi, y1, y2, self.mode, self.band_center);
        if pole {
            return (false, true);
        }
        if !inside {
            return (false, false);
        }
        let (inside_rotated, pole) = inside_or_pole(&self.psi_perp, y2, y1, self.mode, self.band_center);
        if pole {
            return (false, true);
        }
        (!inside_rotated, false)
    }

    pub fn keeps(&self, point: [f64; 2]) -> bool {
        self.classify(point).0
    }

    pub fn mask(&self, data: &[[f64; 2]]) -> Vec<bool> {
        data.iter().map(|&p| self.keeps(p)).collect()
    }

    pub fn apply(&self, data: &[[f64; 2]]) -> FilterOutcome {
        let decisions: Vec<(bool, bool)> = if data.len() > 50_000 {
            data.par_iter().map(|&p| self.classify(p)).collect()
        } else {
            data.iter().map(|&p| self.classify(p)).collect()
        };
        let kept_mask: Vec<bool> = decisions.iter().map(|d| d.0).collect();
        let kept = data
            .iter()
            .zip(&kept_mask)
            .filter(|(_, k)| **k)
            .map(|(p, _)| *p)
            .collect();
        FilterOutcome {
            kept,
            kept_mask,
            pole_rows: decisions.iter().filter(|d| d.1).count(),
        }
    }

    /// Parameters fitted on data divided column-wise by `scales` mapped back to
    /// the unscaled KPI plane.
    pub fn unscale(&self, scales: [f64; 2]) -> Self {
        Self {
            psi: self.psi.unscale(scales[0], scales[1]),
            psi_perp: self.psi_perp.unscale(scales[1], scales[0]),
            ..*self
        }
    }
}
