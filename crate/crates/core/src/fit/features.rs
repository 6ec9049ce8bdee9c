//! Low-resolution geometry feature map: for each texel of a coarse grid over
//! scalp UV, the nearest-rooted strand in its root's scalp frame.

use alloc::vec::Vec;

use crate::geom::Vec3;
use crate::strand::{texel_uv, Hairstyle, Polylines, ScalpMap};

/// Texel-to-strand assignment and frames, fixed for a run because roots are
/// pinned.
#[derive(Debug, Clone)]
pub struct FeatureLayout {
    pub grid: usize,
    pub points_per_strand: usize,
    /// Source strand per texel, `None` for invalid texels.
    pub source: Vec<Option<u32>>,
    /// Per-strand world-to-local rotation rows.
    frames: Vec<[Vec3; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFeatureMap {
    pub grid: usize,
    pub dim: usize,
    /// `grid² × dim` values, texel-major; invalid texels are zero.
    pub data: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FeatureLayout {
    /// A texel is valid when the scalp map is masked under its center; it
    /// takes the strand whose root texel is nearest in UV (lowest index on
    /// ties).
    pub fn new(h: &Hairstyle, map: &ScalpMap, grid: usize) -> Self {
        let res = map.resolution();
        let root_uv: Vec<[f64; 2]> =
            h.root_texels.iter().map(|t| texel_uv(t[0] as usize, t[1] as usize, res)).collect();
        let frames = h
            .root_texels
            .iter()
            .enumerate()
            .map(|(i, t)| match map.sample(*t) {
                Some(s) => s.frame(),
                None => {
                    let s = h.strand(i);
                    let n = (s[s.len() - 1] - s[0]).try_normalize().unwrap_or(Vec3::Z);
                    let f = crate::curvature::build_frame(s[0], n);
                    [f.u, f.v, f.n]
                }
            })
            .collect();
        let mut source = alloc::vec![None; grid * grid];
        for j in 0..grid {
            for i in 0..grid {
                let uv = texel_uv(i, j, grid);
                let hi = [((uv[0] * res as f64) as usize).min(res - 1), ((uv[1] * res as f64) as usize).min(res - 1)];
                if !*map.mask.get(hi[0], hi[1]) {
                    continue;
                }
                let mut best: Option<(f64, u32)> = None;
                for (s, r) in root_uv.iter().enumerate() {
                    let d = (r[0] - uv[0]) * (r[0] - uv[0]) + (r[1] - uv[1]) * (r[1] - uv[1]);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, s as u32));
                    }
                }
                source[j * grid + i] = best.map(|b| b.1);
            }
        }
        Self { grid, points_per_strand: h.points_per_strand(), source, frames }
    }

    pub fn dim(&self) -> usize {
        3 * self.points_per_strand
    }

    pub fn features(&self, h: &Hairstyle) -> GeometryFeatureMap {
        let dim = self.dim();
        let mut data = alloc::vec![0.0; self.grid * self.grid * dim];
        for (t, src) in self.source.iter().enumerate() {
            let Some(s) = src else { continue };
            let f = &self.frames[*s as usize];
            let pts = h.strand(*s as usize);
            let base = t * dim;
            for (l, p) in pts.iter().enumerate() {
                let q = *p - pts[0];
                data[base + 3 * l] = f[0].dot(q);
                data[base + 3 * l + 1] = f[1].dot(q);
                data[base + 3 * l + 2] = f[2].dot(q);
            }
        }
        GeometryFeatureMap { grid: self.grid, dim, data, valid: self.source.iter().map(Option::is_some).collect() }
    }

    /// Pull a gradient on the feature values back to strand points.
    pub fn backprop(&self, grad: &[f64], n_points: usize) -> Vec<Vec3> {
        let dim = self.dim();
        let l = self.points_per_strand;
        let mut out = alloc::vec![Vec3::ZERO; n_points];
        for (t, src) in self.source.iter().enumerate() {
            let Some(s) = src else { continue };
            let f = &self.frames[*s as usize];
            let base = t * dim;
            let start = *s as usize * l;
            for k in 0..l {
                let g = f[0] * grad[base + 3 * k] + f[1] * grad[base + 3 * k + 1] + f[2] * grad[base + 3 * k + 2];
                out[start + k] += g;
                out[start] -= g;
            }
        }
        out
    }
}

pub fn build_feature_map(h: &Hairstyle, map: &ScalpMap, grid: usize) -> GeometryFeatureMap {
    FeatureLayout::new(h, map, grid).features(h)
}
