//! Marching-squares isolines on a rectilinear grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field sampled at `values[j][i] = f(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isoline {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

/// Cell edge: horizontal edges join (i, j)–(i+1, j), vertical ones
/// (i, j)–(i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

impl Grid {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2×2 nodes".into()));
        }
        if values.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: ys.len(),
                got: values.len(),
            });
        }
        if let Some(row) = values.iter().find(|r| r.len() != xs.len()) {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: row.len(),
            });
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&ys) {
            return Err(Error::InvalidParameter("grid axes must be strictly increasing".into()));
        }
        Ok(Self { xs, ys, values })
    }

    /// Evaluates `f` on the lattice of `xs × ys`.
    pub fn sample(xs: Vec<f64>, ys: Vec<f64>, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let values = ys.iter().map(|&y| xs.iter().map(|&x| f(x, y)).collect()).collect();
        Self::new(xs, ys, values)
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j][i]
    }

    fn crossing(&self, edge: Edge, level: f64) -> [f64; 2] {
        let (a, b, pa, pb) = match edge {
            Edge::H(i, j) => (
                self.value(i, j),
                self.value(i + 1, j),
                [self.xs[i], self.ys[j]],
                [self.xs[i + 1], self.ys[j]],
            ),
            Edge::V(i, j) => (
                self.value(i, j),
                self.value(i, j + 1),
                [self.xs[i], self.ys[j]],
                [self.xs[i], self.ys[j + 1]],
            ),
        };
        let t = if b == a {
            0.5
        } else {
            ((level - a) / (b - a)).clamp(0.0, 1.0)
        };
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    }

    fn segments(&self, level: f64) -> Vec<(Edge, Edge)> {
        let mut out = Vec::new();
        let above = |v: f64| v >= level;
        for j in 0..self.ys.len() - 1 {
            for i in 0..self.xs.len() - 1 {
                let bl = self.value(i, j);
                let br = self.value(i + 1, j);
                let tr = self.value(i + 1, j + 1);
                let tl = self.value(i, j + 1);
                if [bl, br, tr, tl].iter().any(|v| v.is_nan()) {
                    continue;
                }
                let case = (above(bl) as u8) | (above(br) as u8) << 1 | (above(tr) as u8) << 2 | (above(tl) as u8) << 3;
                let bottom = Edge::H(i, j);
                let top = Edge::H(i, j + 1);
                let left = Edge::V(i, j);
                let right = Edge::V(i + 1, j);
                let centre_above = above(0.25 * (bl + br + tr + tl));
                match case {
                    0 | 15 => {}
                    1 | 14 => out.push((left, bottom)),
                    2 | 13 => out.push((bottom, right)),
                    3 | 12 => out.push((left, right)),
                    4 | 11 => out.push((right, top)),
                    6 | 9 => out.push((bottom, top)),
                    7 | 8 => out.push((left, top)),
                    5 => {
                        // bl and tr above
                        if centre_above {
                            out.push((bottom, right));
                            out.push((left, top));
                        } else {
                            out.push((left, bottom));
                            out.push((right, top));
                        }
                    }
                    10 => {
                        // br and tl above
                        if centre_above {
                            out.push((left, bottom));
                            out.push((right, top));
                        } else {
                            out.push((bottom, right));
                            out.push((left, top));
                        }
                    }
                    _ => unreachable!("four corner bits"),
                }
            }
        }
        out
    }

    /// Isoline at `level`, stitched into maximal polylines.
    pub fn isoline(&self, level: f64) -> Isoline {
        let segments = self.segments(level);
        let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
        for (k, (a, b)) in segments.iter().enumerate() {
            by_edge.entry(*a).or_default().push(k);
            by_edge.entry(*b).or_default().push(k);
        }
        let mut used = vec![false; segments.len()];
        let other = |k: usize, e: Edge| {
            if segments[k].0 == e {
                segments[k].1
            } else {
                segments[k].0
            }
        };
        let next_segment = |used: &[bool], e: Edge| by_edge[&e].iter().copied().find(|&k| !used[k]);

        let mut polylines = Vec::new();
        // open chains start at edges touched once; loops are handled after
        let mut starts: Vec<Edge> = by_edge
            .iter()
            .filter(|(_, ks)| ks.len() == 1)
            .map(|(e, _)| *e)
            .collect();
        starts.sort_by_key(|e| match *e {
            Edge::H(i, j) => (0, j, i),
            Edge::V(i, j) => (1, j, i),
        });
        let walk = |start: Edge, used: &mut Vec<bool>| -> Option<Polyline> {
            let mut k = next_segment(used, start)?;
            let mut edges = vec![start];
            let mut at = start;
            loop {
                used[k] = true;
                at = other(k, at);
                edges.push(at);
                match next_segment(used, at) {
                    Some(n) => k = n,
                    None => break,
                }
            }
            let closed = edges.len() > 2 && edges.first() == edges.last();
            Some(Polyline {
                points: edges.iter().map(|e| self.crossing(*e, level)).collect(),
                closed,
            })
        };
        for start in starts {
            if let Some(p) = walk(start, &mut used) {
                polylines.push(p);
            }
        }
        for k in 0..segments.len() {
            if !used[k] {
                if let Some(p) = walk(segments[k].0, &mut used) {
                    polylines.push(p);
                }
            }
        }
        Isoline { level, polylines }
    }

    pub fn isolines(&self, levels: &[f64]) -> Vec<Isoline> {
        levels.iter().map(|&l| self.isoline(l)).collect()
    }

    /// Field value on the right boundary at height `y`, linear in `y`.
    fn right_edge_value(&self, y: f64) -> f64 {
        let i = self.xs.len() - 1;
        let j = match self.ys.iter().position(|&v| v >= y) {
            Some(0) => return self.value(i, 0),
            Some(j) => j,
            None => return self.value(i, self.ys.len() - 1),
        };
        let t = (y - self.ys[j - 1]) / (self.ys[j] - self.ys[j - 1]);
        self.value(i, j - 1) + t * (self.value(i, j) - self.value(i, j - 1))
    }

    /// Whether `point` lies in the region `{f ≥ level}` bounded by `isoline`.
    ///
    /// Casts a ray to the right grid boundary, starting from the membership
    /// at the boundary and toggling at every contour crossing.
    pub fn region_contains(&self, isoline: &Isoline, point: [f64; 2]) -> bool {
        let [px, py] = point;
        let mut inside = self.right_edge_value(py) >= isoline.level;
        for line in &isoline.polylines {
            for w in line.points.windows(2) {
                let ([x1, y1], [x2, y2]) = (w[0], w[1]);
                if (y1 > py) != (y2 > py) {
                    let x = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
                    if x > px {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_grid(n: usize) -> Grid {
        let axis = linspace(-2.0, 2.0, n);
        Grid::sample(axis.clone(), axis, |x, y| x * x + y * y).unwrap()
    }

    #[test]
    fn circle_is_one_closed_loop_on_the_radius() {
        let grid = circle_grid(81);
        let iso = grid.isoline(1.0);
        assert_eq!(iso.polylines.len(), 1);
        let line = &iso.polylines[0];
        assert!(line.closed);
        assert_eq!(line.points.first(), line.points.last());
        for p in &line.points {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 2e-3, "radius {r}");
        }
    }

    #[test]
    fn linear_field_is_exact() {
        let grid = Grid::sample(linspace(0.0, 1.0, 11), linspace(0.0, 1.0, 7), |x, y| x + 2.0 * y).unwrap();
        let iso = grid.isoline(1.3);
        assert_eq!(iso.polylines.len(), 1);
        assert!(!iso.polylines[0].closed);
        for p in &iso.polylines[0].points {
            assert!((p[0] + 2.0 * p[1] - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_has_no_isoline() {
        let grid = Grid::sample(linspace(0.0, 1.0, 5), linspace(0.0, 1.0, 5), |_, _| 0.4).unwrap();
        assert!(grid.isoline(0.8).polylines.is_empty());
        assert!(grid.isoline(0.1).polylines.is_empty());
    }

    #[test]
    fn saddle_keeps_segments_separate() {
        let grid = Grid::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let iso = grid.isoline(0.5);
        assert_eq!(iso.polylines.len(), 2);
        assert!(iso.polylines.iter().all(|p| p.points.len() == 2));
    }

    #[test]
    fn region_test_matches_field() {
        let grid = circle_grid(61);
        let iso = grid.isoline(1.0);
        for &(x, y) in &[(0.0, 0.0), (0.5, 0.5), (1.5, 0.0), (-1.2, -1.2), (0.0, 1.8)] {
            let expect = x * x + y * y >= 1.0;
            assert_eq!(grid.region_contains(&iso, [x, y]), expect, "({x}, {y})");
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![0.0], vec![0.0, 1.0], vec![vec![0.0]; 2]).is_err());
        assert!(Grid::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![vec![0.0; 2]; 2]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![0.0; 3]; 2]).is_err());
    }
}
