//! Per-vertex cubic jets, principal curvatures and extremality coefficients.
//!
//! Around each vertex the surface is written as a height function over its
//! tangent plane,
//!
//! ```text
//! h(x, y) = ½(b0 x² + 2 b1 xy + b2 y²) + ⅙(d0 x³ + 3 d1 x²y + 3 d2 xy² + d3 y³)
//! ```
//!
//! fitted by Gaussian-weighted least squares over a k-ring. The second-order
//! form gives the principal curvatures, and the cubic form evaluated along a
//! principal direction gives its extremality coefficient.
//!
//! [`compute_all`] measures heights along the *inward* normal, so convex
//! regions (sphere, outside of a cylinder) have positive curvature.

use alloc::vec::Vec;
use thiserror::Error;

use crate::geom::Vec3;
use crate::linalg::{solve_dense, sym_eigen2};
use crate::mesh::{k_ring, vertex_normals, TriMesh, VertexAdjacency};

/// Minimum neighborhood size the expanding k-ring aims for.
pub const TARGET_SAMPLES: usize = 12;
const MAX_RING: usize = 6;
const UMBILIC_REL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum JetError {
    #[error("cubic jet needs at least 7 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("rank-deficient jet system (degenerate neighborhood)")]
    RankDeficient,
}

/// Tangent chart at a vertex: `{u, v, n}` orthonormal and right-handed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub n: Vec3,
}

impl LocalFrame {
    /// Coordinates of `p` in the frame.
    #[inline]
    pub fn local(&self, p: Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(self.u), d.dot(self.v), d.dot(self.n))
    }

    /// World direction for tangent coordinates `(x, y)`.
    #[inline]
    pub fn tangent_to_world(&self, xy: [f64; 2]) -> Vec3 {
        self.u * xy[0] + self.v * xy[1]
    }
}

/// Frame with normal `normal` (unit). `u` is the projection of the world axis
/// least aligned with the normal; exact ties go to the lower axis index.
pub fn build_frame(origin: Vec3, normal: Vec3) -> LocalFrame {
    let n = normal.normalize_or_zero();
    let a = [libm::fabs(n.x), libm::fabs(n.y), libm::fabs(n.z)];
    let mut axis = 0;
    for k in 1..3 {
        if a[k] < a[axis] {
            axis = k;
        }
    }
    let e = [Vec3::X, Vec3::Y, Vec3::Z][axis];
    let u = (e - n * e.dot(n)).normalize_or_zero();
    let v = n.cross(u);
    LocalFrame { origin, u, v, n }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetCoefficients {
    /// Second-order coefficients, 1/mm.
    pub b: [f64; 3],
    /// Third-order coefficients, 1/mm².
    pub d: [f64; 4],
    /// RMS height residual, mm.
    pub residual: f64,
    pub sample_count: usize,
}

/// Weighted least-squares cubic jet over `points` (world positions) in
/// `frame`. First-order terms are held at zero: the frame is the tangent
/// plane.
pub fn fit_cubic_jet_points(frame: &LocalFrame, points: &[Vec3]) -> Result<JetCoefficients, JetError> {
    if points.len() < 7 {
        return Err(JetError::InsufficientSamples(points.len()));
    }
    let local: Vec<Vec3> = points.iter().map(|&p| frame.local(p)).collect();
    let h = local.iter().map(|q| q.norm()).sum::<f64>() / local.len() as f64;
    if !(h > 0.0) {
        return Err(JetError::RankDeficient);
    }
    let mut ata = [[0.0f64; 7]; 7];
    let mut atb = [0.0f64; 7];
    for q in &local {
        let (x, y, z) = (q.x / h, q.y / h, q.z / h);
        let r2 = x * x + y * y + z * z;
        let w = libm::exp(-0.5 * r2);
        let phi = basis(x, y);
        for i in 0..7 {
            atb[i] += w * phi[i] * z;
            for j in i..7 {
                ata[i][j] += w * phi[i] * phi[j];
            }
        }
    }
    for i in 0..7 {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    let c = solve_dense(ata, atb, 1e-10).ok_or(JetError::RankDeficient)?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(JetError::RankDeficient);
    }
    let b = [c[0] / h, c[1] / h, c[2] / h];
    let d = [c[3] / (h * h), c[4] / (h * h), c[5] / (h * h), c[6] / (h * h)];
    let mut ss = 0.0;
    for q in &local {
        let r = q.z - eval_jet(&b, &d, q.x, q.y);
        ss += r * r;
    }
    Ok(JetCoefficients { b, d, residual: libm::sqrt(ss / local.len() as f64), sample_count: points.len() })
}

/// Jet at vertex `v` of `mesh` from the given neighbor indices.
pub fn fit_cubic_jet(mesh: &TriMesh, frame: &LocalFrame, neighbors: &[u32]) -> Result<JetCoefficients, JetError> {
    let pts: Vec<Vec3> = neighbors.iter().map(|&i| mesh.vertices[i as usize]).collect();
    fit_cubic_jet_points(frame, &pts)
}

#[inline]
fn basis(x: f64, y: f64) -> [f64; 7] {
    [0.5 * x * x, x * y, 0.5 * y * y, x * x * x / 6.0, 0.5 * x * x * y, 0.5 * x * y * y, y * y * y / 6.0]
}

/// Height of the jet at `(x, y)`.
pub fn eval_jet(b: &[f64; 3], d: &[f64; 4], x: f64, y: f64) -> f64 {
    let phi = basis(x, y);
    b[0] * phi[0] + b[1] * phi[1] + b[2] * phi[2] + d[0] * phi[3] + d[1] * phi[4] + d[2] * phi[5] + d[3] * phi[6]
}

/// Principal curvature data of one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCurvature {
    pub k_max: f64,
    pub k_min: f64,
    pub t_max: Vec3,
    pub t_min: Vec3,
    pub e_max: f64,
    pub e_min: f64,
    pub valid: bool,
    pub umbilic: bool,
}

impl VertexCurvature {
    pub const INVALID: VertexCurvature = VertexCurvature {
        k_max: 0.0,
        k_min: 0.0,
        t_max: Vec3::ZERO,
        t_min: Vec3::ZERO,
        e_max: 0.0,
        e_min: 0.0,
        valid: false,
        umbilic: false,
    };

    /// `√(e_max² + e_min²)`.
    pub fn cyclideness(&self) -> f64 {
        libm::hypot(self.e_max, self.e_min)
    }

    /// Usable for crest tracing.
    pub fn traceable(&self) -> bool {
        self.valid && !self.umbilic
    }
}

/// Principal curvatures and tangent-plane directions of a jet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalCurvatures {
    pub k_max: f64,
    pub k_min: f64,
    /// Directions in frame coordinates.
    pub dir_max: [f64; 2],
    pub dir_min: [f64; 2],
    pub t_max: Vec3,
    pub t_min: Vec3,
    pub umbilic: bool,
}

/// Eigen-decomposition of `[[b0, b1], [b1, b2]]`; the larger eigenvalue is
/// `k_max`. Repeated eigenvalues fall back to the frame axes and set the
/// umbilic flag.
pub fn principal_curvatures(jet: &JetCoefficients, frame: &LocalFrame) -> PrincipalCurvatures {
    let ([k_max, k_min], [e1, e2]) = sym_eigen2(jet.b[0], jet.b[1], jet.b[2]);
    let umbilic = libm::fabs(k_max - k_min) < UMBILIC_REL * libm::fabs(k_max).max(1e-6);
    PrincipalCurvatures {
        k_max,
        k_min,
        dir_max: e1,
        dir_min: e2,
        t_max: frame.tangent_to_world(e1),
        t_min: frame.tangent_to_world(e2),
        umbilic,
    }
}

/// Cubic form of the jet along the unit tangent direction `t = (x, y)`:
/// `d0 x³ + 3 d1 x²y + 3 d2 xy² + d3 y³`. Odd in `t`.
pub fn extremality(jet: &JetCoefficients, t: [f64; 2]) -> f64 {
    let (x, y) = (t[0], t[1]);
    let d = &jet.d;
    d[0] * x * x * x + 3.0 * d[1] * x * x * y + 3.0 * d[2] * x * y * y + d[3] * y * y * y
}

/// Curvature of one vertex: frame from the inward normal, jet over an
/// expanding k-ring, principal directions and extremalities.
pub fn vertex_curvature(
    mesh: &TriMesh,
    adjacency: &VertexAdjacency,
    normals: &[Vec3],
    v: usize,
    ring: usize,
) -> VertexCurvature {
    let mut k = ring.max(1);
    let mut nbrs = match k_ring(adjacency, v, k) {
        Ok(n) => n,
        Err(_) => return VertexCurvature::INVALID,
    };
    while nbrs.len() < TARGET_SAMPLES && k < MAX_RING {
        k += 1;
        let next = k_ring(adjacency, v, k).unwrap_or_default();
        if next.len() == nbrs.len() {
            break;
        }
        nbrs = next;
    }
    let frame = build_frame(mesh.vertices[v], -normals[v]);
    let jet = match fit_cubic_jet(mesh, &frame, &nbrs) {
        Ok(j) => j,
        Err(_) => return VertexCurvature::INVALID,
    };
    let pc = principal_curvatures(&jet, &frame);
    let out = VertexCurvature {
        k_max: pc.k_max,
        k_min: pc.k_min,
        t_max: pc.t_max,
        t_min: pc.t_min,
        e_max: extremality(&jet, pc.dir_max),
        e_min: extremality(&jet, pc.dir_min),
        valid: true,
        umbilic: pc.umbilic,
    };
    if [out.k_max, out.k_min, out.e_max, out.e_min].iter().all(|x| x.is_finite()) {
        out
    } else {
        VertexCurvature::INVALID
    }
}

/// Curvature for every vertex of a cleaned mesh. Vertices whose jet cannot
/// be fitted come back with `valid == false`.
pub fn compute_all(mesh: &TriMesh, adjacency: &VertexAdjacency, ring: usize) -> Vec<VertexCurvature> {
    let normals = vertex_normals(mesh);
    crate::par::map_indexed(mesh.vertices.len(), |v| vertex_curvature(mesh, adjacency, &normals, v, ring))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Mat3;

    fn patch<F: Fn(f64, f64) -> f64>(f: F, r: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for ring in 1..=3 {
            let rr = r * ring as f64 / 3.0;
            for k in 0..8 {
                let a = core::f64::consts::TAU * (k as f64 + 0.3 * ring as f64) / 8.0;
                let (x, y) = (rr * libm::cos(a), rr * libm::sin(a));
                pts.push(Vec3::new(x, y, f(x, y)));
            }
        }
        pts
    }

    fn z_frame() -> LocalFrame {
        build_frame(Vec3::ZERO, Vec3::Z)
    }

    #[test]
    fn frame_is_orthonormal_right_handed() {
        for n in [Vec3::Z, Vec3::new(1.0, 2.0, 3.0).normalize_or_zero(), Vec3::new(1.0, 1.0, 0.0).normalize_or_zero()] {
            let f = build_frame(Vec3::ZERO, n);
            let m = Mat3::from_rows(f.u, f.v, f.n);
            assert!(m.orthonormality_error() < 1e-12);
            assert!(f.u.cross(f.v).dot(f.n) > 0.0);
            assert_eq!(f, build_frame(Vec3::ZERO, n));
        }
        let f = z_frame();
        assert!(f.u.z.abs() < 1e-15 && f.v.z.abs() < 1e-15);
        // |x| = |y| tie resolves to x.
        let f = build_frame(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(f.u, Vec3::X);
    }

    #[test]
    fn exact_paraboloid() {
        let jet = fit_cubic_jet_points(&z_frame(), &patch(|x, y| 0.5 * (x * x + y * y), 0.5)).unwrap();
        assert!((jet.b[0] - 1.0).abs() < 1e-6 && (jet.b[2] - 1.0).abs() < 1e-6 && jet.b[1].abs() < 1e-6);
        assert!(jet.d.iter().all(|d| d.abs() < 1e-6));
        assert!(jet.residual < 1e-9);
    }

    #[test]
    fn exact_cylinder_term() {
        let jet = fit_cubic_jet_points(&z_frame(), &patch(|x, _| 0.5 * x * x, 0.5)).unwrap();
        assert!((jet.b[0] - 1.0).abs() < 1e-6);
        assert!(jet.b[1].abs() < 1e-6 && jet.b[2].abs() < 1e-6);
        assert!(jet.d.iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn exact_cubic_recovered() {
        let (b, d) = ([0.3, -0.2, 1.1], [0.7, -0.4, 0.25, 2.0]);
        let jet = fit_cubic_jet_points(&z_frame(), &patch(|x, y| eval_jet(&b, &d, x, y), 0.4)).unwrap();
        for k in 0..3 {
            assert!((jet.b[k] - b[k]).abs() < 1e-8);
        }
        for k in 0..4 {
            assert!((jet.d[k] - d[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn sphere_cap_oracle() {
        // Unit sphere seen from inside its cap: height along the inward
        // normal is 1 - sqrt(1 - ρ²).
        let jet = fit_cubic_jet_points(&z_frame(), &patch(|x, y| 1.0 - libm::sqrt(1.0 - x * x - y * y), 0.2)).unwrap();
        assert!((jet.b[0] - 1.0).abs() < 0.02 && (jet.b[2] - 1.0).abs() < 0.02);
    }

    #[test]
    fn too_few_or_collinear() {
        let pts: Vec<Vec3> = (0..6).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(fit_cubic_jet_points(&z_frame(), &pts), Err(JetError::InsufficientSamples(6)));
        let pts: Vec<Vec3> = (1..12).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(fit_cubic_jet_points(&z_frame(), &pts), Err(JetError::RankDeficient));
    }

    fn jet(b: [f64; 3], d: [f64; 4]) -> JetCoefficients {
        JetCoefficients { b, d, residual: 0.0, sample_count: 7 }
    }

    #[test]
    fn principal_diagonal_umbilic_saddle() {
        let f = z_frame();
        let pc = principal_curvatures(&jet([2.0, 0.0, 1.0], [0.0; 4]), &f);
        assert_eq!((pc.k_max, pc.k_min), (2.0, 1.0));
        assert!(pc.t_max.dot(f.u).abs() > 1.0 - 1e-12 && pc.t_min.dot(f.v).abs() > 1.0 - 1e-12);
        assert!(!pc.umbilic);

        let pc = principal_curvatures(&jet([1.0, 0.0, 1.0], [0.0; 4]), &f);
        assert_eq!((pc.k_max, pc.k_min), (1.0, 1.0));
        assert!(pc.umbilic);

        let pc = principal_curvatures(&jet([0.0, 1.0, 0.0], [0.0; 4]), &f);
        assert!((pc.k_max - 1.0).abs() < 1e-15 && (pc.k_min + 1.0).abs() < 1e-15);
        let diag = (f.u + f.v).normalize_or_zero();
        assert!(pc.t_max.dot(diag).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn extremality_cubic_form() {
        assert_eq!(extremality(&jet([1.0, 0.0, 0.0], [0.0; 4]), [1.0, 0.0]), 0.0);
        assert_eq!(extremality(&jet([0.0; 3], [6.0, 0.0, 0.0, 0.0]), [1.0, 0.0]), 6.0);
        let j = jet([0.0; 3], [0.3, -1.2, 0.7, 2.0]);
        let t = [0.6, 0.8];
        assert_eq!(extremality(&j, [-t[0], -t[1]]), -extremality(&j, t));
    }

    #[test]
    fn plane_is_flat() {
        let g = crate::mesh::shapes::grid(12, 12, 1.0);
        let adj = VertexAdjacency::build(&g);
        for c in compute_all(&g, &adj, 2) {
            if c.valid {
                assert!(c.k_max.abs() < 1e-9 && c.k_min.abs() < 1e-9);
                assert!(c.e_max.abs() < 1e-9 && c.e_min.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn directions_orthogonal_to_normal() {
        let s = crate::mesh::shapes::icosphere(3, 1.0);
        let adj = VertexAdjacency::build(&s);
        let n = vertex_normals(&s);
        for (c, nn) in compute_all(&s, &adj, 2).iter().zip(&n) {
            assert!(c.valid);
            assert!(c.k_max >= c.k_min);
            assert!(c.t_max.dot(c.t_min).abs() < 1e-5);
            assert!(c.t_max.dot(*nn).abs() < 1e-5 && c.t_min.dot(*nn).abs() < 1e-5);
        }
    }
}
