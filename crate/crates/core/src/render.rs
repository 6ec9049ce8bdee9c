//! Headlight shading and depth renders of a mesh from pinhole cameras.
//!
//! Camera space follows the usual computer-vision layout: x right, y down,
//! z forward. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)` with its center at
//! `(i + 0.5, j + 0.5)`. Depth is camera-space z in mm.

use alloc::vec::Vec;
use thiserror::Error;

use crate::geom::{Mat3, Vec3};
use crate::image::Grid;
use crate::mesh::{vertex_normals, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RenderError {
    #[error("focal lengths must be positive (fx={fx}, fy={fy})")]
    BadIntrinsics { fx: f64, fy: f64 },
    #[error("rotation is not orthonormal (error {0:e})")]
    NotOrthonormal(f64),
    #[error("depth must be finite and positive, got {0}")]
    BadDepth(f64),
    #[error("turntable needs at least one view")]
    NoViews,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Centered principal point and square pixels with the given horizontal
    /// field of view in degrees.
    pub fn from_fov(width: usize, height: usize, fov_deg: f64) -> Self {
        let f = 0.5 * width as f64 / libm::tan(0.5 * fov_deg.to_radians());
        Self { fx: f, fy: f, cx: 0.5 * width as f64, cy: 0.5 * height as f64, width, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    /// World-to-camera rotation; rows are the camera right, down and forward
    /// axes in world coordinates.
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, rotation: Mat3, translation: Vec3) -> Result<Self, RenderError> {
        if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) {
            return Err(RenderError::BadIntrinsics { fx: intrinsics.fx, fy: intrinsics.fy });
        }
        let err = rotation.orthonormality_error();
        if !(err <= 1e-6) {
            return Err(RenderError::NotOrthonormal(err));
        }
        Ok(Self { intrinsics, rotation, translation })
    }

    /// Camera at `eye` looking at `target` with world +Z up. Looking straight
    /// along ±Z uses +Y as the up hint instead.
    pub fn look_at(intrinsics: Intrinsics, eye: Vec3, target: Vec3) -> Result<Self, RenderError> {
        let forward = (target - eye).try_normalize().unwrap_or(Vec3::X);
        let mut right = forward.cross(Vec3::Z);
        if right.norm() < 1e-9 {
            right = forward.cross(Vec3::Y);
        }
        let right = right.normalize_or_zero();
        let down = forward.cross(right);
        let rotation = Mat3::from_rows(right, down, forward);
        Self::new(intrinsics, rotation, -rotation.mul_vec(eye))
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation.rows[2]
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// Continuous pixel coordinates and depth, or `None` behind the camera.
    pub fn project(&self, p: Vec3) -> Option<([f64; 2], f64)> {
        let c = self.to_camera(p);
        if !(c.z > 0.0) {
            return None;
        }
        let k = &self.intrinsics;
        Some(([k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy], c.z))
    }

    /// World point at camera-space depth `depth` seen at `pixel`.
    pub fn unproject(&self, pixel: [f64; 2], depth: f64) -> Result<Vec3, RenderError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(RenderError::BadDepth(depth));
        }
        let k = &self.intrinsics;
        let c = Vec3::new((pixel[0] - k.cx) / k.fx * depth, (pixel[1] - k.cy) / k.fy * depth, depth);
        Ok(self.rotation.transpose().mul_vec(c - self.translation))
    }
}

/// Center of pixel `(i, j)`.
#[inline]
pub fn pixel_center(i: usize, j: usize) -> [f64; 2] {
    [i as f64 + 0.5, j as f64 + 0.5]
}

/// `n` cameras on a horizontal ring around `target` at azimuths `360·i/n`
/// degrees, raised by `elevation_deg`, all at `distance` from the target.
pub fn make_turntable(
    n: usize,
    elevation_deg: f64,
    distance: f64,
    target: Vec3,
    intrinsics: Intrinsics,
) -> Result<Vec<Camera>, RenderError> {
    if n == 0 {
        return Err(RenderError::NoViews);
    }
    let el = elevation_deg.to_radians();
    (0..n)
        .map(|i| {
            let az = core::f64::consts::TAU * i as f64 / n as f64;
            let dir = Vec3::new(libm::cos(el) * libm::cos(az), libm::cos(el) * libm::sin(az), libm::sin(el));
            Camera::look_at(intrinsics, target + dir * distance, target)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    /// Shading in [0, 1]; exactly 0 on background.
    pub shading: Grid<f64>,
    /// Camera-space depth in mm; +inf on background.
    pub depth: Grid<f64>,
    pub face_id: Grid<Option<u32>>,
}

impl RenderBuffers {
    pub fn background(width: usize, height: usize) -> Self {
        Self {
            shading: Grid::new(width, height, 0.0),
            depth: Grid::new(width, height, f64::INFINITY),
            face_id: Grid::new(width, height, None),
        }
    }
}

/// Smallest shading written on a covered pixel, so coverage and shading agree.
pub const SHADING_FLOOR: f64 = 1e-6;

const NEAR: f64 = 1e-6;
const BAND: usize = 16;

struct ScreenTri {
    face: u32,
    s: [[f64; 2]; 3],
    inv_z: [f64; 3],
    /// Camera-space normals divided by depth, for perspective-correct
    /// interpolation.
    n_over_z: [Vec3; 3],
    face_normal: Vec3,
    inv_area: f64,
    rows: (usize, usize),
    cols: (usize, usize),
}

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let a = libm::ceil(lo - 0.5).max(0.0);
    let b = libm::floor(hi - 0.5).min(n as f64 - 1.0);
    if a > b {
        None
    } else {
        Some((a as usize, b as usize))
    }
}

/// Z-buffered headlight render. Both sides of a face are lit (`|n̂·v̂|`), so
/// open shells seen from behind still shade; interpolated vertex normals are
/// used and the face normal stands in where they cancel.
pub fn render(mesh: &TriMesh, camera: &Camera) -> RenderBuffers {
    let (w, h) = (camera.width(), camera.height());
    if mesh.is_empty() || w == 0 || h == 0 {
        return RenderBuffers::background(w, h);
    }
    let k = &camera.intrinsics;
    let normals = vertex_normals(mesh);
    let cam_pts: Vec<Vec3> = mesh.vertices.iter().map(|&p| camera.to_camera(p)).collect();
    let cam_n: Vec<Vec3> = normals.iter().map(|&n| camera.rotation.mul_vec(n)).collect();

    let mut tris = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let c = [cam_pts[f[0] as usize], cam_pts[f[1] as usize], cam_pts[f[2] as usize]];
        if c.iter().any(|p| !(p.z > NEAR)) {
            continue;
        }
        let s = c.map(|p| [k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy]);
        let area = edge(s[0], s[1], s[2]);
        if !(area.abs() > 1e-12) {
            continue;
        }
        let (xmin, xmax) = (s[0][0].min(s[1][0]).min(s[2][0]), s[0][0].max(s[1][0]).max(s[2][0]));
        let (ymin, ymax) = (s[0][1].min(s[1][1]).min(s[2][1]), s[0][1].max(s[1][1]).max(s[2][1]));
        let (Some(cols), Some(rows)) = (pixel_span(xmin, xmax, w), pixel_span(ymin, ymax, h)) else {
            continue;
        };
        let inv_z = c.map(|p| 1.0 / p.z);
        let n_over_z = [0, 1, 2].map(|i| cam_n[f[i] as usize] * inv_z[i]);
        tris.push(ScreenTri {
            face: fi as u32,
            s,
            inv_z,
            n_over_z,
            face_normal: (c[1] - c[0]).cross(c[2] - c[0]).normalize_or_zero(),
            inv_area: 1.0 / area,
            rows,
            cols,
        });
    }

    let n_bands = h.div_ceil(BAND);
    let mut bins: Vec<Vec<u32>> = (0..n_bands).map(|_| Vec::new()).collect();
    for (ti, t) in tris.iter().enumerate() {
        for b in t.rows.0 / BAND..=t.rows.1 / BAND {
            bins[b].push(ti as u32);
        }
    }

    let bands = crate::par::map_indexed(n_bands, |b| {
        let y0 = b * BAND;
        let y1 = (y0 + BAND).min(h);
        let len = (y1 - y0) * w;
        let mut depth = alloc::vec![f64::INFINITY; len];
        let mut shade = alloc::vec![0.0f64; len];
        let mut face = alloc::vec![None; len];
        for &ti in &bins[b] {
            let t = &tris[ti as usize];
            for y in t.rows.0.max(y0)..=t.rows.1.min(y1 - 1) {
                for x in t.cols.0..=t.cols.1 {
                    let p = pixel_center(x, y);
                    let l0 = edge(t.s[1], t.s[2], p) * t.inv_area;
                    let l1 = edge(t.s[2], t.s[0], p) * t.inv_area;
                    let l2 = edge(t.s[0], t.s[1], p) * t.inv_area;
                    if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                        continue;
                    }
                    let iz = l0 * t.inv_z[0] + l1 * t.inv_z[1] + l2 * t.inv_z[2];
                    let z = 1.0 / iz;
                    let idx = (y - y0) * w + x;
                    if !(z < depth[idx]) {
                        continue;
                    }
                    let n = (t.n_over_z[0] * l0 + t.n_over_z[1] * l1 + t.n_over_z[2] * l2) * z;
                    let n = n.try_normalize().unwrap_or(t.face_normal);
                    let ray = Vec3::new((p[0] - k.cx) / k.fx, (p[1] - k.cy) / k.fy, 1.0).normalize_or_zero();
                    depth[idx] = z;
                    shade[idx] = libm::fabs(n.dot(ray)).clamp(SHADING_FLOOR, 1.0);
                    face[idx] = Some(t.face);
                }
            }
        }
        (depth, shade, face)
    });

    let mut out = RenderBuffers::background(w, h);
    for (b, (depth, shade, face)) in bands.into_iter().enumerate() {
        let start = b * BAND * w;
        let end = start + depth.len();
        out.depth.as_mut_slice()[start..end].copy_from_slice(&depth);
        out.shading.as_mut_slice()[start..end].copy_from_slice(&shade);
        out.face_id.as_mut_slice()[start..end].copy_from_slice(&face);
    }
    out
}

/// One render per camera, in camera order.
pub fn render_views(mesh: &TriMesh, cameras: &[Camera]) -> Vec<RenderBuffers> {
    crate::par::map_indexed(cameras.len(), |i| render(mesh, &cameras[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::icosphere;

    fn intr() -> Intrinsics {
        Intrinsics::from_fov(64, 48, 60.0)
    }

    #[test]
    fn look_at_axes() {
        let cam = Camera::look_at(intr(), Vec3::new(-10.0, 0.0, 0.0), Vec3::ZERO).unwrap();
        assert_eq!(cam.rotation.rows[0], Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(cam.rotation.rows[1], Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(cam.forward(), Vec3::X);
        assert!(cam.center().distance(Vec3::new(-10.0, 0.0, 0.0)) < 1e-12);
        let top = Camera::look_at(intr(), Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO).unwrap();
        assert!(top.rotation.orthonormality_error() < 1e-12);
    }

    #[test]
    fn camera_validation() {
        let mut k = intr();
        k.fx = 0.0;
        assert!(matches!(Camera::new(k, Mat3::IDENTITY, Vec3::ZERO), Err(RenderError::BadIntrinsics { .. })));
        let skew = Mat3::from_rows(Vec3::X, Vec3::new(0.1, 1.0, 0.0), Vec3::Z);
        assert!(matches!(Camera::new(intr(), skew, Vec3::ZERO), Err(RenderError::NotOrthonormal(_))));
    }

    #[test]
    fn turntable_layout() {
        let target = Vec3::new(1.0, 2.0, 3.0);
        let cams = make_turntable(4, 0.0, 10.0, target, intr()).unwrap();
        for (i, a) in cams.iter().enumerate() {
            let (px, _) = a.project(target).unwrap();
            assert!((px[0] - a.intrinsics.cx).abs() < 1e-9 && (px[1] - a.intrinsics.cy).abs() < 1e-9);
            assert!(a.forward().z.abs() < 1e-12);
            for b in &cams[i + 1..] {
                let d = a.forward().dot(b.forward());
                assert!(d.abs() < 1e-12 || (d + 1.0).abs() < 1e-12);
            }
        }
        assert!(cams[0].center().distance(target + Vec3::X * 10.0) < 1e-12);
        assert!(cams[1].center().distance(target + Vec3::Y * 10.0) < 1e-12);
        assert_eq!(make_turntable(0, 0.0, 1.0, target, intr()), Err(RenderError::NoViews));
    }

    #[test]
    fn principal_point_unprojects_to_axis() {
        let cam = Camera::look_at(intr(), Vec3::new(3.0, 4.0, 0.0), Vec3::ZERO).unwrap();
        let p = cam.unproject([cam.intrinsics.cx, cam.intrinsics.cy], 5.0).unwrap();
        assert!(p.norm() < 1e-12);
        assert!(cam.unproject([0.0, 0.0], f64::NAN).is_err());
        assert!(cam.unproject([0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn empty_mesh_is_background() {
        let cam = Camera::look_at(intr(), Vec3::new(5.0, 0.0, 0.0), Vec3::ZERO).unwrap();
        let r = render(&TriMesh::default(), &cam);
        assert!(r.depth.as_slice().iter().all(|d| *d == f64::INFINITY));
        assert!(r.shading.as_slice().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn sphere_center_is_brightest() {
        let k = Intrinsics::from_fov(101, 101, 40.0);
        let cam = Camera::look_at(k, Vec3::new(0.0, -5.0, 0.0), Vec3::ZERO).unwrap();
        let r = render(&icosphere(4, 1.0), &cam);
        let s = r.shading.as_slice();
        let best = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        let (bx, by) = (best % 101, best / 101);
        assert!((bx as i64 - 50).abs() <= 1 && (by as i64 - 50).abs() <= 1);
        assert!((s[best] - 1.0).abs() <= 0.02);
        for i in 0..s.len() {
            let covered = r.face_id.as_slice()[i].is_some();
            assert_eq!(covered, r.depth.as_slice()[i].is_finite());
            assert_eq!(covered, s[i] > 0.0);
        }
    }
}
