//! Orientation fields from crest lines.
//!
//! Each crest point gets the principal axis of a window of its neighbors
//! along the line. Windows shrink where the line turns, then one pass of
//! along-line smoothing blends in the neighbors' directions, again less where
//! the line turns. Directions are line directions: `d` and `-d` are the same
//! sample, and the stored sign is canonical only for storage.

use alloc::vec::Vec;
use thiserror::Error;

use crate::crest::{CrestLine, CrestSet};
use crate::geom::{Mat3, Vec3};
use crate::linalg::sym_eigen3;
use crate::spatial::PointGrid;

/// Turning angle at which windows reach their minimum size and smoothing
/// switches off.
pub const THETA_REF: f64 = core::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OrientError {
    #[error("degenerate window: all points identical")]
    DegenerateWindow,
    #[error("window needs at least 2 points")]
    TooFewPoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub position: Vec3,
    /// Unit line direction in canonical sign.
    pub direction: Vec3,
    pub weight: f64,
}

/// Sparse line-direction field with nearest-sample lookup inside a radius.
#[derive(Debug, Clone)]
pub struct OrientationField3D {
    points: Vec<OrientedPoint>,
    grid: PointGrid,
    radius: f64,
}

impl OrientationField3D {
    /// Index `points` for queries within `radius` (> 0).
    pub fn new(points: Vec<OrientedPoint>, radius: f64) -> Self {
        assert!(radius > 0.0, "field radius must be positive");
        let grid = PointGrid::new(points.iter().map(|p| p.position).collect(), radius);
        Self { points, grid, radius }
    }

    pub fn empty(radius: f64) -> Self {
        Self::new(Vec::new(), radius)
    }

    pub fn points(&self) -> &[OrientedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Nearest sample within the radius and its distance.
    pub fn query(&self, p: Vec3) -> Option<(&OrientedPoint, f64)> {
        self.grid.nearest_within(p, self.radius).map(|(i, d)| (&self.points[i], d))
    }

    /// Index-returning variant of [`query`](Self::query).
    pub fn query_index(&self, p: Vec3) -> Option<(usize, f64)> {
        self.grid.nearest_within(p, self.radius)
    }

    /// Concatenate fields, keeping the first field's radius.
    pub fn merge<I: IntoIterator<Item = OrientationField3D>>(fields: I, radius: f64) -> Self {
        let mut pts = Vec::new();
        for f in fields {
            pts.extend(f.points);
        }
        Self::new(pts, radius)
    }
}

/// Angle between the segments entering and leaving point `i`. Endpoints of
/// open lines use the single adjacent pair; closed lines wrap around.
pub fn local_turning(line: &[Vec3], closed: bool, i: usize) -> f64 {
    let n = line.len();
    if n < 3 {
        return 0.0;
    }
    let (a, b, c) = if closed {
        (line[(i + n - 1) % n], line[i], line[(i + 1) % n])
    } else if i == 0 {
        (line[0], line[1], line[2])
    } else if i == n - 1 {
        (line[n - 3], line[n - 2], line[n - 1])
    } else {
        (line[i - 1], line[i], line[i + 1])
    };
    let (u, v) = (b - a, c - b);
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    libm::acos((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Half-window size `round(w_max - (w_max - w_min)·min(1, turning/θ_ref))`.
pub fn adaptive_window(turning: f64, w_min: usize, w_max: usize) -> usize {
    let s = (turning / THETA_REF).clamp(0.0, 1.0);
    let w = w_max as f64 - (w_max as f64 - w_min as f64) * s;
    libm::round(w) as usize
}

/// Principal axis of `points`, canonical sign, plus the anisotropy
/// `1 - λ₂/λ₁` of the window.
///
/// When the two leading eigenvalues tie, the axis is the lexicographically
/// largest unit vector of their eigenplane (largest x, then y, then z).
pub fn pca_direction(points: &[Vec3]) -> Result<(Vec3, f64), OrientError> {
    if points.len() < 2 {
        return Err(OrientError::TooFewPoints);
    }
    let mean = points.iter().fold(Vec3::ZERO, |a, &p| a + p) / points.len() as f64;
    let mut cov = [[0.0f64; 3]; 3];
    for p in points {
        let d = *p - mean;
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    let m = Mat3::from_rows(Vec3::from_array(cov[0]), Vec3::from_array(cov[1]), Vec3::from_array(cov[2]));
    let (vals, vecs) = sym_eigen3(&m);
    if !(vals[0] > 0.0) {
        return Err(OrientError::DegenerateWindow);
    }
    let tie = vals[0] - vals[1] <= 1e-9 * vals[0];
    let dir = if tie {
        let (e1, e2) = (vecs[0], vecs[1]);
        let mut pick = None;
        for axis in [Vec3::X, Vec3::Y, Vec3::Z] {
            let proj = e1 * e1.dot(axis) + e2 * e2.dot(axis);
            if let Some(d) = proj.try_normalize() {
                if proj.norm() > 1e-12 {
                    pick = Some(d);
                    break;
                }
            }
        }
        pick.unwrap_or(e1)
    } else {
        vecs[0]
    };
    let weight = if vals[0] > 0.0 { (1.0 - vals[1].max(0.0) / vals[0]).clamp(0.0, 1.0) } else { 0.0 };
    Ok((dir.canonical_line_sign(), weight))
}

/// Field construction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    pub w_min: usize,
    pub w_max: usize,
    pub smooth_lambda: f64,
    /// Query radius, mm.
    pub radius: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self { w_min: 2, w_max: 8, smooth_lambda: 0.5, radius: 5.0 }
    }
}

/// Oriented samples of a single polyline.
pub fn line_directions(points: &[Vec3], closed: bool, params: &FieldParams) -> Vec<OrientedPoint> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let turning: Vec<f64> = (0..n).map(|i| local_turning(points, closed, i)).collect();
    let mut raw: Vec<(Vec3, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let w = adaptive_window(turning[i], params.w_min, params.w_max).max(1);
        let window: Vec<Vec3> = if closed {
            let w = w.min((n - 1) / 2).max(1);
            (0..=2 * w).map(|k| points[(i + n + k - w) % n]).collect()
        } else {
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(n - 1);
            points[lo..=hi].to_vec()
        };
        let (d, weight) = pca_direction(&window).unwrap_or_else(|_| {
            // Fall back to the local chord.
            let j = if i + 1 < n { i + 1 } else { i - 1 };
            ((points[j] - points[i]).normalize_or_zero().canonical_line_sign(), 0.0)
        });
        raw.push((d, weight));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = raw[i].0;
        let neighbors: Vec<Vec3> = if closed {
            alloc::vec![raw[(i + n - 1) % n].0, raw[(i + 1) % n].0]
        } else {
            let mut v = Vec::new();
            if i > 0 {
                v.push(raw[i - 1].0);
            }
            if i + 1 < n {
                v.push(raw[i + 1].0);
            }
            v
        };
        let mut mean = Vec3::ZERO;
        for nb in &neighbors {
            mean += if nb.dot(d) < 0.0 { -*nb } else { *nb };
        }
        mean = mean / neighbors.len().max(1) as f64;
        let lambda = params.smooth_lambda * (1.0 - (turning[i] / THETA_REF).min(1.0));
        let smoothed = (d * (1.0 - lambda) + mean * lambda).try_normalize().unwrap_or(d);
        out.push(OrientedPoint { position: points[i], direction: smoothed.canonical_line_sign(), weight: raw[i].1 });
    }
    out
}

/// Orientation field over every line of a crest set.
pub fn build_field(crest: &CrestSet, params: &FieldParams) -> OrientationField3D {
    let per_line = crate::par::map_indexed(crest.lines.len(), |i| {
        let l: &CrestLine = &crest.lines[i];
        line_directions(&l.points, l.closed, params)
    });
    OrientationField3D::new(per_line.into_iter().flatten().collect(), params.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn turning_angles() {
        let straight = [Vec3::ZERO, Vec3::X, Vec3::new(2.0, 0.0, 0.0)];
        assert_eq!(local_turning(&straight, false, 1), 0.0);
        let corner = [Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0)];
        assert!((local_turning(&corner, false, 1) - FRAC_PI_2).abs() < 1e-15);
        let n = 7;
        let poly: Vec<Vec3> = (0..n)
            .map(|k| Vec3::new(libm::cos(TAU * k as f64 / n as f64), libm::sin(TAU * k as f64 / n as f64), 0.0))
            .collect();
        for i in 0..n {
            assert!((local_turning(&poly, true, i) - TAU / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn window_sizes() {
        assert_eq!(adaptive_window(0.0, 2, 6), 6);
        assert_eq!(adaptive_window(PI / 3.0, 2, 6), 2);
        assert_eq!(adaptive_window(PI / 12.0, 2, 6), 4);
    }

    #[test]
    fn pca_line_and_tie() {
        let d = Vec3::new(1.0, 1.0, 0.0).normalize_or_zero();
        let pts: Vec<Vec3> = (0..5).map(|k| d * k as f64).collect();
        let (dir, w) = pca_direction(&pts).unwrap();
        assert!((dir.dot(d) - 1.0).abs() < 1e-12);
        assert!((w - 1.0).abs() < 1e-12);

        let blob = [Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y];
        let (dir, _) = pca_direction(&blob).unwrap();
        assert_eq!(dir, Vec3::X);
        assert_eq!(pca_direction(&[Vec3::X, Vec3::X]), Err(OrientError::DegenerateWindow));
    }

    #[test]
    fn arc_window_chord() {
        let r = 10.0;
        let pts: Vec<Vec3> = (0..5)
            .map(|k| {
                let a = 0.1 * (k as f64 - 2.0);
                Vec3::new(r * libm::cos(a), r * libm::sin(a), 0.0)
            })
            .collect();
        let (dir, _) = pca_direction(&pts).unwrap();
        assert!(crate::geom::line_angle(dir, Vec3::Y).to_degrees() < 5.0);
    }

    #[test]
    fn straight_line_field_is_exact() {
        let d = Vec3::new(1.0, 2.0, 2.0) / 3.0;
        let pts: Vec<Vec3> = (0..20).map(|k| d * k as f64).collect();
        for op in line_directions(&pts, false, &FieldParams::default()) {
            assert!((op.direction.dot(d) - 1.0).abs() < 1e-12);
            assert!((op.direction.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sharp_corner_not_smoothed() {
        let mut pts = Vec::new();
        for k in 0..10 {
            pts.push(Vec3::new(k as f64, 0.0, 0.0));
        }
        for k in 1..10 {
            pts.push(Vec3::new(9.0, k as f64, 0.0));
        }
        let params = FieldParams { w_min: 1, w_max: 1, smooth_lambda: 0.5, radius: 5.0 };
        let raw: Vec<Vec3> = (0..pts.len())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(pts.len() - 1);
                pca_direction(&pts[lo..=hi]).unwrap().0
            })
            .collect();
        let out = line_directions(&pts, false, &params);
        assert_eq!(out[9].direction, raw[9]);
    }

    #[test]
    fn helix_tangents() {
        let (r, pitch) = (5.0, 4.0);
        let pts: Vec<Vec3> = (0..200)
            .map(|k| {
                let t = 0.05 * k as f64;
                Vec3::new(r * libm::cos(t), r * libm::sin(t), pitch * t / TAU)
            })
            .collect();
        let out = line_directions(&pts, false, &FieldParams::default());
        // One-sided windows at the ends see a chord, not the tangent.
        for (k, op) in out.iter().enumerate().skip(8).take(200 - 16) {
            let t = 0.05 * k as f64;
            let tan = Vec3::new(-r * libm::sin(t), r * libm::cos(t), pitch / TAU);
            assert!(crate::geom::line_angle(op.direction, tan).to_degrees() < 5.0, "point {k}");
        }
    }

    #[test]
    fn query_hits_and_misses() {
        let f = OrientationField3D::new(
            vec![
                OrientedPoint { position: Vec3::ZERO, direction: Vec3::X, weight: 1.0 },
                OrientedPoint { position: Vec3::new(10.0, 0.0, 0.0), direction: Vec3::Y, weight: 1.0 },
            ],
            2.0,
        );
        let (p, d) = f.query(Vec3::ZERO).unwrap();
        assert_eq!((p.direction, d), (Vec3::X, 0.0));
        assert!(f.query(Vec3::new(5.0, 0.0, 0.0)).is_none());
    }
}
