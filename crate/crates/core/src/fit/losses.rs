//! Geometric losses on strand points with analytic gradients.

use alloc::vec::Vec;

use crate::geom::{Aabb, Vec3};
use crate::orient3d::OrientationField3D;
use crate::spatial::PointGrid;
use crate::strand::{directions, Hairstyle, Polylines};
use crate::udf::TriBvh;

use super::FitError;

/// Loss value and its gradient with respect to every strand point.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<Vec3>,
}

impl LossGrad {
    pub fn zero(n: usize) -> Self {
        Self { value: 0.0, grad: alloc::vec![Vec3::ZERO; n] }
    }
}

/// Sum of squared distances from every strand point to the hair surface.
/// The gradient at a point is `2 (p - closest)`.
pub fn loss_volume(h: &Hairstyle, bvh: &TriBvh) -> LossGrad {
    let closest = bvh.distances(&h.points);
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(h.points.len());
    for (p, c) in h.points.iter().zip(&closest) {
        value += c.distance * c.distance;
        grad.push((*p - c.point) * 2.0);
    }
    LossGrad { value, grad }
}

/// Cell size for a grid over `n` points in `bounds`: about one point per
/// cell for a 2D point distribution.
fn grid_cell(bounds: &Aabb, n: usize) -> f64 {
    let e = bounds.extent();
    let diag = e.norm();
    let cell = diag / libm::sqrt(n.max(1) as f64);
    if cell.is_finite() && cell > 0.0 {
        cell
    } else {
        1.0
    }
}

/// One-way Chamfer from surface samples to their nearest strand points.
/// Each sample pulls its match with gradient `2 (p - x)`.
pub fn loss_chamfer(h: &Hairstyle, samples: &[Vec3]) -> Result<LossGrad, FitError> {
    if h.points.is_empty() {
        return Err(FitError::EmptyHairstyle);
    }
    let bounds = Aabb::from_points(h.points.iter().copied());
    let grid = PointGrid::new(h.points.clone(), grid_cell(&bounds, h.points.len()));
    let matches = crate::par::map_indexed(samples.len(), |k| grid.nearest(samples[k]).expect("non-empty grid").0);
    let mut out = LossGrad::zero(h.points.len());
    for (x, &m) in samples.iter().zip(&matches) {
        let p = h.points[m];
        out.value += p.distance_squared(*x);
        out.grad[m] += (p - *x) * 2.0;
    }
    Ok(out)
}

/// Orientation loss split into its two fields.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientLoss {
    pub value: f64,
    pub l3d: f64,
    pub l2d: f64,
    /// Segments whose midpoint passed the near-surface gate.
    pub active: usize,
    pub grad: Vec<Vec3>,
}

/// `1 - |b·β|` and its gradient with respect to the segment vector `d`.
#[inline]
pub fn segment_term(d: Vec3, beta: Vec3) -> (f64, Vec3) {
    let len = d.norm();
    if len == 0.0 {
        return (1.0, Vec3::ZERO);
    }
    let b = d / len;
    let c = b.dot(beta);
    let s = if c >= 0.0 { 1.0 } else { -1.0 };
    // d(-|c|)/db = -s·β, projected through db/dd = (I - b bᵀ)/|d|.
    let gb = beta * (-s);
    (1.0 - libm::fabs(c), (gb - b * gb.dot(b)) / len)
}

/// `α·L3D + (1-α)·L2D`, each the sum of `1 - |b·β|` over segments whose
/// midpoint is within `near_mm` of the hair surface and has a field sample
/// within the field radius. Gating and lookups are held fixed when
/// differentiating.
pub fn loss_orient(
    h: &Hairstyle,
    f3d: &OrientationField3D,
    f2d: &OrientationField3D,
    bvh: &TriBvh,
    alpha: f64,
    near_mm: f64,
) -> OrientLoss {
    let l = h.points_per_strand();
    let per_strand = crate::par::map_indexed(h.len(), |i| {
        let s = h.strand(i);
        let dirs = directions(s);
        let mut terms = Vec::new();
        for k in 0..l - 1 {
            let mid = (s[k] + s[k + 1]) * 0.5;
            if bvh.distance(mid).distance > near_mm {
                continue;
            }
            let b3 = f3d.query(mid).map(|(q, _)| q.direction);
            let b2 = f2d.query(mid).map(|(q, _)| q.direction);
            terms.push((k, dirs.d[k], dirs.degenerate[k], dirs.b[k], b3, b2));
        }
        terms
    });
    let mut out =
        OrientLoss { value: 0.0, l3d: 0.0, l2d: 0.0, active: 0, grad: alloc::vec![Vec3::ZERO; h.points.len()] };
    for (i, terms) in per_strand.into_iter().enumerate() {
        for (k, d, degenerate, b, b3, b2) in terms {
            out.active += 1;
            for (beta, weight, is3d) in [(b3, alpha, true), (b2, 1.0 - alpha, false)] {
                let Some(beta) = beta else { continue };
                let (v, g) =
                    if degenerate { (1.0 - libm::fabs(b.dot(beta)), Vec3::ZERO) } else { segment_term(d, beta) };
                if is3d {
                    out.l3d += v;
                } else {
                    out.l2d += v;
                }
                let g = g * weight;
                out.grad[i * l + k + 1] += g;
                out.grad[i * l + k] -= g;
            }
        }
    }
    out.value = alpha * out.l3d + (1.0 - alpha) * out.l2d;
    out
}
