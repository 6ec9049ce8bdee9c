//! Synthetic inputs and strand metrics: strand voxelization to a mesh,
//! precision/recall/F-score on sampled line elements, and a straight-hair
//! generator on the hemisphere scalp.

use alloc::vec::Vec;
use hashbrown::HashMap;
use thiserror::Error;

use crate::geom::{Aabb, Vec3};
use crate::mesh::{clean, TriMesh};
use crate::spatial::PointGrid;
use crate::strand::{init_strands, sample_roots, Hairstyle, Polylines, ScalpMap, StrandError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no strands to voxelize")]
    EmptyHairstyle,
    #[error("voxel size must be positive and radius at least half a voxel (voxel {voxel}, radius {radius})")]
    BadVoxel { voxel: f64, radius: f64 },
    #[error("thresholds must be positive")]
    BadThreshold,
    #[error(transparent)]
    Strand(#[from] StrandError),
}

/// Distance from `p` to segment `ab`.
#[inline]
pub fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t).distance(p)
}

/// Node grid used by [`voxelize_strands`]: origin and node counts per axis.
pub fn voxel_grid<P: Polylines + ?Sized>(h: &P, voxel: f64, radius: f64) -> (Vec3, [usize; 3]) {
    let mut b = Aabb::EMPTY;
    for i in 0..h.strand_count() {
        for p in h.strand(i) {
            b.grow(*p);
        }
    }
    let pad = radius + voxel;
    let lo = b.min - Vec3::splat(pad);
    let e = b.extent() + Vec3::splat(2.0 * pad);
    let dims = [0, 1, 2].map(|a| libm::ceil(e[a] / voxel) as usize + 1);
    (lo, dims)
}

// Kuhn split of the unit cube into six tetrahedra along the 0–7 diagonal;
// corners are indexed by bits (x, y, z).
const KUHN: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]];

/// Tube surface around every strand: the capsule distance field
/// `dist − radius` is sampled on a `voxel`-spaced node grid and its zero set
/// extracted with marching tetrahedra. Faces are wound outward.
pub fn voxelize_strands<P: Polylines + ?Sized>(h: &P, voxel: f64, radius: f64) -> Result<TriMesh, EvalError> {
    if !(voxel > 0.0 && radius >= 0.5 * voxel && voxel.is_finite() && radius.is_finite()) {
        return Err(EvalError::BadVoxel { voxel, radius });
    }
    if h.strand_count() == 0 || h.total_points() == 0 {
        return Err(EvalError::EmptyHairstyle);
    }
    let (origin, [nx, ny, nz]) = voxel_grid(h, voxel, radius);
    let far = 2.0 * voxel;
    let mut field = alloc::vec![far; nx * ny * nz];
    let idx = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let band = radius + 2.0 * voxel;
    for s in 0..h.strand_count() {
        let pts = h.strand(s);
        let segs: Vec<(Vec3, Vec3)> =
            if pts.len() == 1 { alloc::vec![(pts[0], pts[0])] } else { pts.windows(2).map(|w| (w[0], w[1])).collect() };
        for (a, b) in segs {
            let lo = a.min(b) - Vec3::splat(band) - origin;
            let hi = a.max(b) + Vec3::splat(band) - origin;
            let r = |v: f64, n: usize| (libm::floor(v / voxel).max(0.0) as usize).min(n - 1);
            let (i0, i1) = (r(lo.x, nx), r(hi.x, nx) + 1);
            let (j0, j1) = (r(lo.y, ny), r(hi.y, ny) + 1);
            let (k0, k1) = (r(lo.z, nz), r(hi.z, nz) + 1);
            for k in k0..k1.min(nz) {
                for j in j0..j1.min(ny) {
                    for i in i0..i1.min(nx) {
                        let p = origin + Vec3::new(i as f64, j as f64, k as f64) * voxel;
                        let f = point_segment_distance(p, a, b) - radius;
                        let slot = &mut field[idx(i, j, k)];
                        if f < *slot {
                            *slot = f;
                        }
                    }
                }
            }
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();
    let node_pos = |n: usize| {
        let i = n % nx;
        let j = (n / nx) % ny;
        let k = n / (nx * ny);
        origin + Vec3::new(i as f64, j as f64, k as f64) * voxel
    };
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corners: [usize; 8] =
                    core::array::from_fn(|c| idx(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)));
                if corners.iter().all(|&c| field[c] >= 0.0) || corners.iter().all(|&c| field[c] < 0.0) {
                    continue;
                }
                for tet in KUHN {
                    let n = tet.map(|c| corners[c]);
                    let inside: Vec<usize> = n.iter().copied().filter(|&v| field[v] < 0.0).collect();
                    let outside: Vec<usize> = n.iter().copied().filter(|&v| field[v] >= 0.0).collect();
                    if inside.is_empty() || outside.is_empty() {
                        continue;
                    }
                    let mut cut = |a: usize, b: usize| -> u32 {
                        let key = (a.min(b), a.max(b));
                        *edge_vertex.entry(key).or_insert_with(|| {
                            let (fa, fb) = (field[a], field[b]);
                            let t = fa / (fa - fb);
                            vertices.push(node_pos(a).lerp(node_pos(b), t));
                            (vertices.len() - 1) as u32
                        })
                    };
                    let mut tris: Vec<[u32; 3]> = Vec::new();
                    match (inside.len(), outside.len()) {
                        (1, 3) => tris.push([
                            cut(inside[0], outside[0]),
                            cut(inside[0], outside[1]),
                            cut(inside[0], outside[2]),
                        ]),
                        (3, 1) => tris.push([
                            cut(inside[0], outside[0]),
                            cut(inside[1], outside[0]),
                            cut(inside[2], outside[0]),
                        ]),
                        _ => {
                            let (a, b, c, d) = (inside[0], inside[1], outside[0], outside[1]);
                            let q = [cut(a, c), cut(a, d), cut(b, d), cut(b, c)];
                            tris.push([q[0], q[1], q[2]]);
                            tris.push([q[0], q[2], q[3]]);
                        }
                    }
                    let cin = inside.iter().fold(Vec3::ZERO, |s, &v| s + node_pos(v)) / inside.len() as f64;
                    let cout = outside.iter().fold(Vec3::ZERO, |s, &v| s + node_pos(v)) / outside.len() as f64;
                    for t in tris {
                        let [a, b, c] = t.map(|v| vertices[v as usize]);
                        if (b - a).cross(c - a).dot(cout - cin) < 0.0 {
                            faces.push([t[0], t[2], t[1]]);
                        } else {
                            faces.push(t);
                        }
                    }
                }
            }
        }
    }
    Ok(clean(&TriMesh { vertices, faces, uvs: None }, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricThreshold {
    /// mm
    pub distance: f64,
    /// degrees
    pub angle: f64,
}

pub const DEFAULT_SAMPLES_PER_STRAND: usize = 32;
/// Voxel edge and tube radius used when no configuration overrides them, mm.
pub const DEFAULT_VOXEL: f64 = 1.0;
pub const DEFAULT_TUBE_RADIUS: f64 = 0.5;

pub const DEFAULT_THRESHOLDS: [MetricThreshold; 3] = [
    MetricThreshold { distance: 2.0, angle: 20.0 },
    MetricThreshold { distance: 3.0, angle: 30.0 },
    MetricThreshold { distance: 4.0, angle: 40.0 },
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub threshold: MetricThreshold,
    /// Percent.
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub pred_samples: usize,
    pub gt_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn at(&self, distance: f64, angle: f64) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.threshold.distance == distance && r.threshold.angle == angle)
    }
}

/// Oriented sample on a strand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    pub point: Vec3,
    pub direction: Vec3,
}

/// `n` samples per strand at the midpoints of `n` equal arc-length pieces,
/// each with the unit direction of the segment it falls on.
pub fn sample_strands<P: Polylines + ?Sized>(h: &P, n: usize) -> Vec<LineSample> {
    let mut out = Vec::with_capacity(h.strand_count() * n);
    for s in 0..h.strand_count() {
        let pts = h.strand(s);
        if pts.len() < 2 {
            continue;
        }
        let mut cum = Vec::with_capacity(pts.len());
        cum.push(0.0);
        for w in pts.windows(2) {
            cum.push(cum[cum.len() - 1] + w[0].distance(w[1]));
        }
        let total = cum[cum.len() - 1];
        if total <= 0.0 {
            continue;
        }
        let mut seg = 0;
        for k in 0..n {
            let t = (k as f64 + 0.5) / n as f64 * total;
            while seg + 2 < pts.len() && cum[seg + 1] < t {
                seg += 1;
            }
            // Skip zero-length segments for the direction.
            let mut ds = seg;
            while ds + 2 < pts.len() && cum[ds + 1] == cum[ds] {
                ds += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let u = if len > 0.0 { (t - cum[seg]) / len } else { 0.0 };
            out.push(LineSample {
                point: pts[seg].lerp(pts[seg + 1], u),
                direction: (pts[ds + 1] - pts[ds]).normalize_or_zero(),
            });
        }
    }
    out
}

/// Percent of `a` samples with some `b` sample within `distance` mm and
/// line angle at most `angle` degrees.
fn matched_percent(a: &[LineSample], b: &[LineSample], grid: &PointGrid, th: MetricThreshold) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let cos_max = libm::cos(th.angle.to_radians());
    let hits = crate::par::map_indexed(a.len(), |k| {
        let s = a[k];
        let mut found = false;
        grid.for_each_within(s.point, th.distance, |j, _| {
            if !found && libm::fabs(s.direction.dot(b[j].direction)) >= cos_max {
                found = true;
            }
        });
        found
    });
    100.0 * hits.iter().filter(|h| **h).count() as f64 / a.len() as f64
}

/// Precision, recall and F-score at each threshold between sampled line
/// elements of the prediction and the ground truth.
pub fn evaluate<P: Polylines + ?Sized, G: Polylines + ?Sized>(
    pred: &P,
    gt: &G,
    thresholds: &[MetricThreshold],
    samples_per_strand: usize,
) -> Result<MetricReport, EvalError> {
    if thresholds.iter().any(|t| !(t.distance > 0.0 && t.angle > 0.0)) {
        return Err(EvalError::BadThreshold);
    }
    let ps = sample_strands(pred, samples_per_strand);
    let gs = sample_strands(gt, samples_per_strand);
    let max_d = thresholds.iter().map(|t| t.distance).fold(1.0, f64::max);
    let pg = PointGrid::new(ps.iter().map(|s| s.point).collect(), max_d);
    let gg = PointGrid::new(gs.iter().map(|s| s.point).collect(), max_d);
    let rows = thresholds
        .iter()
        .map(|&th| {
            let precision = matched_percent(&ps, &gs, &gg, th);
            let recall = matched_percent(&gs, &ps, &pg, th);
            let fscore = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            MetricRow { threshold: th, precision, recall, fscore, pred_samples: ps.len(), gt_samples: gs.len() }
        })
        .collect();
    Ok(MetricReport { rows })
}

/// Parameters of the synthetic straight hairstyle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WigParams {
    pub strands: usize,
    pub points_per_strand: usize,
    /// Strand length, mm.
    pub length: f64,
    /// Arc length over which strands turn from the scalp normal to hanging
    /// straight down, mm.
    pub droop: f64,
    /// Height above the scalp sphere that strands never go below, mm.
    pub clearance: f64,
}

impl Default for WigParams {
    fn default() -> Self {
        Self { strands: 200, points_per_strand: 25, length: 100.0, droop: 20.0, clearance: 3.0 }
    }
}

/// Straight hair on a spherical scalp of radius `scalp_radius` centered at
/// the origin: each strand leaves its root along the normal, bends toward
/// −Z with an exponential blend over `droop` mm, and is pushed out to keep
/// `clearance` above the sphere.
pub fn straight_wig<R: rand::Rng + ?Sized>(
    map: &ScalpMap,
    scalp_radius: f64,
    params: &WigParams,
    rng: &mut R,
) -> Result<Hairstyle, EvalError> {
    let roots = sample_roots(map, params.strands, rng)?;
    let mut h = init_strands(&roots, params.points_per_strand, params.length, 0.0, rng)?;
    let l = params.points_per_strand;
    let step = params.length / (l - 1) as f64;
    for (i, r) in roots.iter().enumerate() {
        let s = h.strand_mut(i);
        let mut p = r.point;
        for (k, slot) in s.iter_mut().enumerate().skip(1) {
            let arc = step * (k as f64 - 0.5);
            let w = libm::exp(-arc / params.droop.max(1e-9));
            let dir = (r.normal * w + Vec3::new(0.0, 0.0, -1.0) * (1.0 - w)).normalize_or_zero();
            let mut q = p + dir * step;
            let min_r =
                scalp_radius + params.clearance * (1.0 - libm::exp(-(k as f64) * step / params.droop.max(1e-9)));
            let rho = q.norm();
            if rho < min_r && rho > 0.0 {
                q *= min_r / rho;
            }
            *slot = q;
            p = q;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strand::StrandSet;

    #[test]
    fn identical_sets_score_100() {
        let s = StrandSet::from_strands([
            alloc::vec![Vec3::ZERO, Vec3::X * 10.0],
            alloc::vec![Vec3::Y * 5.0, Vec3::new(0.0, 5.0, 10.0)],
        ]);
        let r = evaluate(&s, &s, &DEFAULT_THRESHOLDS, 32).unwrap();
        for row in &r.rows {
            assert_eq!((row.precision, row.recall, row.fscore), (100.0, 100.0, 100.0));
        }
    }

    #[test]
    fn shifted_set_scores_0() {
        let a = StrandSet::from_strands([alloc::vec![Vec3::ZERO, Vec3::X * 10.0]]);
        let b = StrandSet::from_strands([alloc::vec![Vec3::Z * 10.0, Vec3::new(10.0, 0.0, 10.0)]]);
        let r = evaluate(&a, &b, &DEFAULT_THRESHOLDS, 32).unwrap();
        assert!(r.rows.iter().all(|row| row.fscore == 0.0));
    }

    #[test]
    fn single_strand_tube() {
        let s = StrandSet::from_strands([alloc::vec![Vec3::ZERO, Vec3::Z * 10.0]]);
        let m = voxelize_strands(&s, 0.5, 1.0).unwrap();
        assert!(!m.faces.is_empty());
        for v in &m.vertices {
            let d = point_segment_distance(*v, Vec3::ZERO, Vec3::Z * 10.0);
            assert!(d <= 1.0 + 0.5 * 3f64.sqrt() / 2.0);
        }
        assert!(voxelize_strands(&s, 1.0, 0.4).is_err());
        assert!(voxelize_strands(&StrandSet::default(), 1.0, 1.0).is_err());
    }
}
