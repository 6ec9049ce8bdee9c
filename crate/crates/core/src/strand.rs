//! Scalp maps, roots and the strand containers.

use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::geom::Vec3;
use crate::image::Grid;
use crate::mesh::{vertex_normals, TriMesh};
use crate::udf::TriBvh;

pub const SCALP_RES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrandError {
    #[error("scalp mesh has no UV coordinates")]
    NoUvs,
    #[error("no scalp coverage: the scalp mask is empty")]
    NoCoverage,
    #[error("hair mesh is empty")]
    EmptyHair,
    #[error("strands need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("strand {strand} has {got} points, expected {expected}")]
    LengthMismatch { strand: usize, expected: usize, got: usize },
}

/// Surface point, unit normal and unit u-tangent at a texel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelSample {
    pub point: Vec3,
    pub normal: Vec3,
    pub tangent: Vec3,
}

impl TexelSample {
    /// Rows of the world-to-local rotation: tangent, bitangent, normal.
    pub fn frame(&self) -> [Vec3; 3] {
        [self.tangent, self.normal.cross(self.tangent), self.normal]
    }
}

/// Where hair may grow, on a square texel grid over scalp UV.
#[derive(Debug, Clone)]
pub struct ScalpMap {
    pub mesh: TriMesh,
    pub mask: Grid<bool>,
    pub samples: Grid<Option<TexelSample>>,
}

/// UV of the center of texel `(i, j)` on a `res × res` grid.
#[inline]
pub fn texel_uv(i: usize, j: usize, res: usize) -> [f64; 2] {
    [(i as f64 + 0.5) / res as f64, (j as f64 + 0.5) / res as f64]
}

/// Surface lookup for every texel center covered by the mesh's UV layout.
/// Where UV triangles overlap, the lowest face index wins.
pub fn texel_samples(scalp: &TriMesh, res: usize) -> Result<Grid<Option<TexelSample>>, StrandError> {
    let uvs = scalp.uvs.as_ref().ok_or(StrandError::NoUvs)?;
    let normals = vertex_normals(scalp);
    let mut out: Grid<Option<TexelSample>> = Grid::new(res, res, None);
    for (fi, f) in scalp.faces.iter().enumerate() {
        let t = f.map(|v| uvs[v as usize]);
        let p = f.map(|v| scalp.vertices[v as usize]);
        let area = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]);
        if area.abs() < 1e-18 {
            continue;
        }
        // dP/du from the UV parametrization of this face.
        let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
        let (du1, dv1, du2, dv2) = (t[1][0] - t[0][0], t[1][1] - t[0][1], t[2][0] - t[0][0], t[2][1] - t[0][1]);
        let dpdu = (e1 * dv2 - e2 * dv1) / area;
        let dpdv = (e2 * du1 - e1 * du2) / area;
        let uv_sign = if area > 0.0 { 1.0 } else { -1.0 };
        let lo = |k: usize| t.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
        let hi = |k: usize| t.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
        let span = |a: f64, b: f64| {
            let s = libm::ceil(a * res as f64 - 0.5).max(0.0) as usize;
            let e = (libm::floor(b * res as f64 - 0.5) as i64).min(res as i64 - 1);
            (s, e)
        };
        let (i0, i1) = span(lo(0), hi(0));
        let (j0, j1) = span(lo(1), hi(1));
        if i1 < 0 || j1 < 0 {
            continue;
        }
        for j in j0..=j1 as usize {
            for i in i0..=i1 as usize {
                if out.get(i, j).is_some() {
                    continue;
                }
                let q = texel_uv(i, j, res);
                let w1 = ((q[0] - t[0][0]) * dv2 - (q[1] - t[0][1]) * du2) / area;
                let w2 = ((q[1] - t[0][1]) * du1 - (q[0] - t[0][0]) * dv1) / area;
                let w0 = 1.0 - w1 - w2;
                const TOL: f64 = -1e-12;
                if w0 < TOL || w1 < TOL || w2 < TOL {
                    continue;
                }
                let point = p[0] * w0 + p[1] * w1 + p[2] * w2;
                let n = (normals[f[0] as usize] * w0 + normals[f[1] as usize] * w1 + normals[f[2] as usize] * w2)
                    .try_normalize()
                    .unwrap_or_else(|| scalp.face_cross(fi).normalize_or_zero());
                // Where u collapses (a pole), take u ⟂ v in the UV orientation.
                let tangent = (dpdu - n * dpdu.dot(n))
                    .try_normalize()
                    .or_else(|| dpdv.cross(n * uv_sign).try_normalize())
                    .unwrap_or_else(|| crate::curvature::build_frame(point, n).u);
                out.set(i, j, Some(TexelSample { point, normal: n, tangent }));
            }
        }
    }
    Ok(out)
}

/// 3×3 closing (dilate, then erode with out-of-grid counted as set).
fn close3(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = mask.dims();
    let pass = |src: &Grid<bool>, dilate: bool| {
        let mut dst = Grid::new(w, h, false);
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut any = false;
                let mut all = true;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let v = src.get_signed(x + dx, y + dy).copied().unwrap_or(!dilate);
                        any |= v;
                        all &= v;
                    }
                }
                dst.set(x as usize, y as usize, if dilate { any } else { all });
            }
        }
        dst
    };
    pass(&pass(mask, true), false)
}

/// Mask texels whose scalp point lies within `tau` mm of the hair mesh, then
/// close 3×3 pinholes. Texels off the scalp's UV layout stay unmasked.
pub fn estimate_scalp_map(hair: &TriMesh, scalp: &TriMesh, tau: f64, res: usize) -> Result<ScalpMap, StrandError> {
    if !(tau > 0.0) {
        return Err(StrandError::BadThreshold(tau));
    }
    let samples = texel_samples(scalp, res)?;
    let bvh = TriBvh::build(hair).map_err(|_| StrandError::EmptyHair)?;
    let cells: Vec<usize> = (0..res * res).filter(|&k| samples.as_slice()[k].is_some()).collect();
    let near = crate::par::map_indexed(cells.len(), |c| {
        let s = samples.as_slice()[cells[c]].unwrap();
        bvh.distance(s.point).distance <= tau
    });
    let mut raw = Grid::new(res, res, false);
    for (c, ok) in cells.iter().zip(near) {
        raw.as_mut_slice()[*c] = ok;
    }
    let closed = close3(&raw);
    let mask = Grid::from_vec(
        res,
        res,
        closed.as_slice().iter().zip(samples.as_slice()).map(|(m, s)| *m && s.is_some()).collect(),
    );
    Ok(ScalpMap { mesh: scalp.clone(), mask, samples })
}

impl ScalpMap {
    /// Map with every texel on the UV layout masked.
    pub fn full(scalp: &TriMesh, res: usize) -> Result<Self, StrandError> {
        let samples = texel_samples(scalp, res)?;
        let mask = samples.map(|s| s.is_some());
        Ok(Self { mesh: scalp.clone(), mask, samples })
    }

    pub fn resolution(&self) -> usize {
        self.mask.width()
    }

    pub fn masked_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|m| **m).count()
    }

    pub fn sample(&self, texel: [u16; 2]) -> Option<TexelSample> {
        let (i, j) = (texel[0] as usize, texel[1] as usize);
        if i >= self.resolution() || j >= self.resolution() {
            return None;
        }
        *self.samples.get(i, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub point: Vec3,
    pub normal: Vec3,
    pub texel: [u16; 2],
}

impl Root {
    pub fn uv(&self, res: usize) -> [f64; 2] {
        texel_uv(self.texel[0] as usize, self.texel[1] as usize, res)
    }
}

/// `n` roots at masked texel centers: the masked texels in raster order are
/// split into `n` equal strata and one texel is drawn from each.
pub fn sample_roots<R: Rng + ?Sized>(map: &ScalpMap, n: usize, rng: &mut R) -> Result<Vec<Root>, StrandError> {
    let res = map.resolution();
    let masked: Vec<usize> = (0..res * res).filter(|&k| map.mask.as_slice()[k]).collect();
    if masked.is_empty() {
        return Err(StrandError::NoCoverage);
    }
    let m = masked.len() as f64;
    Ok((0..n)
        .map(|k| {
            let u: f64 = rng.random();
            let pos = ((k as f64 + u) / n as f64 * m) as usize;
            let cell = masked[pos.min(masked.len() - 1)];
            let s = map.samples.as_slice()[cell].expect("masked texels have samples");
            Root { point: s.point, normal: s.normal, texel: [(cell % res) as u16, (cell / res) as u16] }
        })
        .collect())
}

/// Read access shared by fixed- and variable-length strand containers.
pub trait Polylines {
    fn strand_count(&self) -> usize;
    fn strand(&self, i: usize) -> &[Vec3];

    fn total_points(&self) -> usize {
        (0..self.strand_count()).map(|i| self.strand(i).len()).sum()
    }
}

/// `N` strands of exactly `L` points each, rooted on scalp texels. Points are
/// stored strand-major in one flat array.
#[derive(Debug, Clone, PartialEq)]
pub struct Hairstyle {
    points_per_strand: usize,
    pub points: Vec<Vec3>,
    pub root_texels: Vec<[u16; 2]>,
}

impl Hairstyle {
    pub fn new(points_per_strand: usize, points: Vec<Vec3>, root_texels: Vec<[u16; 2]>) -> Result<Self, StrandError> {
        if points_per_strand < 2 {
            return Err(StrandError::TooFewPoints(points_per_strand));
        }
        if points.len() != points_per_strand * root_texels.len() {
            return Err(StrandError::LengthMismatch {
                strand: points.len() / points_per_strand,
                expected: points_per_strand * root_texels.len(),
                got: points.len(),
            });
        }
        Ok(Self { points_per_strand, points, root_texels })
    }

    pub fn points_per_strand(&self) -> usize {
        self.points_per_strand
    }

    pub fn len(&self) -> usize {
        self.root_texels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root_texels.is_empty()
    }

    pub fn strand_mut(&mut self, i: usize) -> &mut [Vec3] {
        let l = self.points_per_strand;
        &mut self.points[i * l..(i + 1) * l]
    }

    pub fn roots(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.chunks(self.points_per_strand).map(|s| s[0])
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.is_finite())
    }

    pub fn to_strand_set(&self) -> StrandSet {
        StrandSet::from_strands(self.points.chunks(self.points_per_strand).map(|s| s.to_vec()))
    }
}

impl Polylines for Hairstyle {
    fn strand_count(&self) -> usize {
        self.len()
    }

    fn strand(&self, i: usize) -> &[Vec3] {
        let l = self.points_per_strand;
        &self.points[i * l..(i + 1) * l]
    }
}

/// Strands of varying length, as read from interchange files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrandSet {
    pub points: Vec<Vec3>,
    /// `offsets[i]..offsets[i+1]` indexes strand `i`.
    pub offsets: Vec<usize>,
}

impl StrandSet {
    pub fn from_strands<I: IntoIterator<Item = Vec<Vec3>>>(strands: I) -> Self {
        let mut points = Vec::new();
        let mut offsets = alloc::vec![0];
        for s in strands {
            points.extend(s);
            offsets.push(points.len());
        }
        Self { points, offsets }
    }
}

impl Polylines for StrandSet {
    fn strand_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    fn strand(&self, i: usize) -> &[Vec3] {
        &self.points[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Straight strands along the root normals, `length` mm long with `l`
/// points, every point after the root displaced by isotropic Gaussian noise
/// of standard deviation `noise` mm.
pub fn init_strands<R: Rng + ?Sized>(
    roots: &[Root],
    l: usize,
    length: f64,
    noise: f64,
    rng: &mut R,
) -> Result<Hairstyle, StrandError> {
    if l < 2 {
        return Err(StrandError::TooFewPoints(l));
    }
    let step = length / (l - 1) as f64;
    let mut points = Vec::with_capacity(roots.len() * l);
    for r in roots {
        points.push(r.point);
        for k in 1..l {
            let mut p = r.point + r.normal * (step * k as f64);
            if noise > 0.0 {
                p += Vec3::new(crate::rng::normal(rng), crate::rng::normal(rng), crate::rng::normal(rng)) * noise;
            }
            points.push(p);
        }
    }
    Hairstyle::new(l, points, roots.iter().map(|r| r.texel).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrandDirections {
    /// Segment vectors `p[l+1] - p[l]`.
    pub d: Vec<Vec3>,
    /// Unit directions.
    pub b: Vec<Vec3>,
    /// Zero-length segments, whose `b` is borrowed from a neighbor.
    pub degenerate: Vec<bool>,
}

/// Segment vectors and unit directions. A zero-length segment takes the
/// previous segment's direction, or the next valid one at the start of the
/// strand, or +Z if the strand has none.
pub fn directions(strand: &[Vec3]) -> StrandDirections {
    let d: Vec<Vec3> = strand.windows(2).map(|w| w[1] - w[0]).collect();
    let raw: Vec<Option<Vec3>> = d.iter().map(|v| v.try_normalize()).collect();
    let first = raw.iter().flatten().next().copied().unwrap_or(Vec3::Z);
    let mut b = Vec::with_capacity(d.len());
    let mut last = first;
    for r in &raw {
        if let Some(v) = r {
            last = *v;
        }
        b.push(last);
    }
    StrandDirections { degenerate: raw.iter().map(Option::is_none).collect(), d, b }
}

/// Arc length of a polyline.
pub fn polyline_length(strand: &[Vec3]) -> f64 {
    strand.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::hemisphere_scalp;
    use crate::rng::{stream, Purpose};

    #[test]
    fn directions_examples() {
        let s = [Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0)];
        let d = directions(&s);
        assert_eq!(d.b, alloc::vec![Vec3::X, Vec3::Y]);
        let z: Vec<Vec3> = (0..5).map(|k| Vec3::Z * k as f64).collect();
        assert!(directions(&z).b.iter().all(|b| *b == Vec3::Z));
        let dup = [Vec3::ZERO, Vec3::ZERO, Vec3::X];
        let d = directions(&dup);
        assert_eq!(d.b, alloc::vec![Vec3::X, Vec3::X]);
        assert_eq!(d.degenerate, alloc::vec![true, false]);
    }

    #[test]
    fn init_geometry() {
        let roots = [Root { point: Vec3::ZERO, normal: Vec3::Z, texel: [0, 0] }];
        let mut rng = stream(1, Purpose::Init, 0);
        let h = init_strands(&roots, 2, 10.0, 0.0, &mut rng).unwrap();
        assert_eq!(h.strand(0), &[Vec3::ZERO, Vec3::Z * 10.0]);
        assert!(matches!(init_strands(&roots, 1, 10.0, 0.0, &mut rng), Err(StrandError::TooFewPoints(1))));
    }

    #[test]
    fn scalp_samples_lie_on_the_sphere() {
        let scalp = hemisphere_scalp(80.0);
        let s = texel_samples(&scalp, 64).unwrap();
        let mut count = 0;
        for t in s.as_slice().iter().flatten() {
            count += 1;
            assert!((t.point.norm() - 80.0).abs() < 0.1);
            assert!(t.normal.dot(t.point.normalize_or_zero()) > 0.99);
            assert!(t.tangent.dot(t.normal).abs() < 1e-9);
        }
        assert_eq!(count, 64 * 64);
        assert!(matches!(texel_samples(&TriMesh::default(), 8), Err(StrandError::NoUvs)));
    }

    #[test]
    fn closing_fills_pinholes() {
        let mut m = Grid::new(8, 8, true);
        m.set(3, 3, false);
        assert!(close3(&m).as_slice().iter().all(|v| *v));
        let mut single = Grid::new(8, 8, false);
        single.set(4, 4, true);
        assert_eq!(close3(&single).as_slice().iter().filter(|v| **v).count(), 1);
    }
}
