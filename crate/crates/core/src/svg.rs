//! Plain SVG figures: the filtered scatter with both hyperbolas, the swarm
//! convergence trace and the benchmark isolines.

use std::fmt::Write as _;

use crate::benchmark::BenchmarkSurface;
use crate::contour::linspace;
use crate::hyperbola::{DoubleHyperbolaFilter, HyperbolaParams, MembershipMode};
use crate::swarm::SwarmTrace;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: &[&str] = &["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self {
            x: widen(x),
            y: widen(y),
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn dot(&mut self, p: [f64; 2], color: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{color}" fill-opacity="0.6"/>"#,
            self.px(p[0]),
            self.py(p[1])
        );
    }

    fn path(&mut self, points: &[[f64; 2]], color: &str, dashed: bool) {
        if points.len() < 2 {
            return;
        }
        let d: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(k, p)| {
                format!(
                    "{}{:.2},{:.2}",
                    if k == 0 { 'M' } else { 'L' },
                    self.px(p[0]),
                    self.py(p[1])
                )
            })
            .collect();
        let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            d.join(" ")
        );
    }

    fn label(&mut self, x: f64, y: f64, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="12">{}</text>"#,
            escape(text)
        );
    }

    fn finish(mut self, title: &str, x_name: &str, y_name: &str) -> String {
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let mut out = format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        out.push('\n');
        let _ = writeln!(
            out,
            r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y1 - y0
        );
        for t in linspace(self.x.0, self.x.1, 5) {
            let x = self.px(t);
            self.label(x - 12.0, y1 + 16.0, &format!("{t:.3}"));
        }
        for t in linspace(self.y.0, self.y.1, 5) {
            let y = self.py(t);
            self.label(4.0, y + 4.0, &format!("{t:.3}"));
        }
        self.label(WIDTH / 2.0 - 40.0, HEIGHT - 12.0, x_name);
        self.label(4.0, MARGIN - 8.0, y_name);
        self.label(WIDTH / 2.0 - 80.0, 20.0, title);
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Pieces of the lobe boundary `ordinate = center ± height(abscissa)` where
/// the height is positive.
fn boundary(p: &HyperbolaParams, span: (f64, f64), mode: MembershipMode, center: f64) -> Vec<Vec<[f64; 2]>> {
    let signs: &[f64] = match mode {
        MembershipMode::BelowUpperBranch => &[1.0],
        MembershipMode::SymmetricBand => &[1.0, -1.0],
    };
    let mut pieces = Vec::new();
    for &sign in signs {
        let mut current = Vec::new();
        for t in linspace(span.0, span.1, 400) {
            match p.eval_real(t) {
                Ok(h) if h > 0.0 => {
                    let base = if mode == MembershipMode::SymmetricBand {
                        center
                    } else {
                        0.0
                    };
                    current.push([t, base + sign * h]);
                }
                _ => {
                    if !current.is_empty() {
                        pieces.push(std::mem::take(&mut current));
                    }
                }
            }
        }
        if !current.is_empty() {
            pieces.push(current);
        }
    }
    pieces
}

/// Kept and discarded points with both hyperbolas drawn over them.
pub fn filter_plot(points: &[[f64; 2]], kept: &[bool], filter: &DoubleHyperbolaFilter, names: [&str; 2]) -> String {
    let mut frame = Frame::new(range(points.iter().map(|p| p[0])), range(points.iter().map(|p| p[1])));
    for (p, &k) in points.iter().zip(kept) {
        frame.dot(*p, if k { "#1f78b4" } else { "#bbbbbb" });
    }
    let clip = |pts: Vec<[f64; 2]>, lo: f64, hi: f64, axis: usize| -> Vec<[f64; 2]> {
        pts.into_iter().filter(|p| p[axis] >= lo && p[axis] <= hi).collect()
    };
    let (xr, yr) = (frame.x, frame.y);
    for piece in boundary(&filter.psi, xr, filter.mode, filter.band_center) {
        frame.path(&clip(piece, yr.0, yr.1, 1), "#e31a1c", false);
    }
    for piece in boundary(&filter.psi_perp, yr, filter.mode, filter.band_center) {
        let swapped: Vec<[f64; 2]> = piece.into_iter().map(|[a, b]| [b, a]).collect();
        frame.path(&clip(swapped, xr.0, xr.1, 0), "#33a02c", true);
    }
    frame.finish("kept (blue) and discarded (grey) units", names[0], names[1])
}

/// Incumbent and per-sweep best θ against the sweep number.
pub fn convergence_plot(trace: &SwarmTrace) -> String {
    let sweeps = &trace.sweeps;
    let thetas = sweeps.iter().flat_map(|s| [s.best_theta, s.sweep_best_theta]);
    let x = range(sweeps.iter().map(|s| s.sweep as f64));
    let mut frame = Frame::new(x, range(thetas));
    let incumbent: Vec<[f64; 2]> = sweeps.iter().map(|s| [s.sweep as f64, s.best_theta]).collect();
    let per_sweep: Vec<[f64; 2]> = sweeps
        .iter()
        .filter(|s| s.sweep_best_theta.is_finite())
        .map(|s| [s.sweep as f64, s.sweep_best_theta])
        .collect();
    frame.path(&per_sweep, "#999999", true);
    frame.path(&incumbent, "#e31a1c", false);
    frame.finish(
        "swarm convergence: incumbent (solid), sweep best (dashed)",
        "sweep",
        "theta",
    )
}

/// Isolines of one benchmark surface.
pub fn contour_plot(surface: &BenchmarkSurface, names: [&str; 2]) -> String {
    let grid = &surface.grid;
    let mut frame = Frame::new(range(grid.xs.iter().copied()), range(grid.ys.iter().copied()));
    for (k, iso) in surface.isolines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for line in &iso.polylines {
            frame.path(&line.points, color, false);
        }
        let y = MARGIN + 16.0 * (k as f64 + 1.0);
        frame.label(WIDTH - MARGIN - 90.0, y, &format!("p = {}", iso.level));
    }
    let condition: Vec<String> = surface.conditioning.iter().map(|(n, v)| format!("{n} = {v}")).collect();
    let title = if condition.is_empty() {
        "success probability isolines".to_string()
    } else {
        format!("success probability isolines, {}", condition.join(", "))
    };
    frame.finish(&title, names[0], names[1])
}
