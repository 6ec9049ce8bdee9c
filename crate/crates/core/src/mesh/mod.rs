//! Triangle meshes: validation, cleaning, normals and vertex neighborhoods.
//!
//! Non-manifold input is accepted everywhere; neighborhoods are built from
//! vertex k-rings and never assume a half-edge structure.

pub mod shapes;

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use hashbrown::HashMap;
use thiserror::Error;

use crate::geom::{Aabb, Vec3};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("face {face}: index {index} out of range (vertex count {count})")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face} references vertex {index} more than once")]
    RepeatedVertex { face: usize, index: usize },
    #[error("uv count {uvs} does not match vertex count {vertices}")]
    UvCount { uvs: usize, vertices: usize },
    #[error("vertex {0} out of range")]
    InvalidVertex(usize),
    #[error("mesh has no faces")]
    Empty,
}

/// Triangle surface with optional per-vertex UVs. Units are millimeters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub uvs: Option<Vec<[f64; 2]>>,
}

impl TriMesh {
    /// Construct and validate.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let m = Self { vertices, faces, uvs: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_uvs(mut self, uvs: Vec<[f64; 2]>) -> Result<Self, MeshError> {
        if uvs.len() != self.vertices.len() {
            return Err(MeshError::UvCount { uvs: uvs.len(), vertices: self.vertices.len() });
        }
        self.uvs = Some(uvs);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfRange { face: fi, index: i as usize, count: n });
                }
            }
            if f[0] == f[1] || f[0] == f[2] {
                return Err(MeshError::RepeatedVertex { face: fi, index: f[0] as usize });
            }
            if f[1] == f[2] {
                return Err(MeshError::RepeatedVertex { face: fi, index: f[1] as usize });
            }
        }
        if let Some(uvs) = &self.uvs {
            if uvs.len() != n {
                return Err(MeshError::UvCount { uvs: uvs.len(), vertices: n });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalized face normal, length twice the face area.
    #[inline]
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(c - a)
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for f in &self.faces {
            for k in 0..3 {
                let a = self.vertices[f[k] as usize];
                let b = self.vertices[f[(k + 1) % 3] as usize];
                total += a.distance(b);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    /// Unique undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = Vec::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                e.push((a.min(b), a.max(b)));
            }
        }
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Apply `p ↦ R p + t` to every vertex.
    pub fn transformed(&self, r: &crate::geom::Mat3, t: Vec3) -> TriMesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v = r.mul_vec(*v) + t;
        }
        m
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v *= s;
        }
        m
    }

    /// Merge two meshes into one vertex/face list. UVs survive only when both
    /// inputs carry them.
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let off = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        let uvs = match (&self.uvs, &other.uvs) {
            (Some(a), Some(b)) => {
                let mut u = a.clone();
                u.extend_from_slice(b);
                Some(u)
            }
            _ => None,
        };
        TriMesh { vertices, faces, uvs }
    }
}

/// Weld vertices closer than `weld_epsilon`, drop degenerate faces and
/// unreferenced vertices.
///
/// Welding keeps the first vertex (by index) of each cluster. Surviving
/// vertices keep their relative order, so `clean` is idempotent.
pub fn clean(mesh: &TriMesh, weld_epsilon: f64) -> TriMesh {
    let eps = weld_epsilon.max(0.0);
    let n = mesh.vertices.len();
    let mut rep = vec![0u32; n];
    if eps == 0.0 {
        let mut seen: HashMap<[u64; 3], u32> = HashMap::with_capacity(n);
        for (i, v) in mesh.vertices.iter().enumerate() {
            // -0.0 and 0.0 are the same point.
            let key = [(v.x + 0.0).to_bits(), (v.y + 0.0).to_bits(), (v.z + 0.0).to_bits()];
            rep[i] = *seen.entry(key).or_insert(i as u32);
        }
    } else {
        let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::with_capacity(n);
        let key = |p: Vec3| -> [i64; 3] {
            [libm::floor(p.x / eps) as i64, libm::floor(p.y / eps) as i64, libm::floor(p.z / eps) as i64]
        };
        for (i, &v) in mesh.vertices.iter().enumerate() {
            let k = key(v);
            let mut found: Option<u32> = None;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &r in list {
                                if mesh.vertices[r as usize].distance(v) <= eps && found.is_none_or(|f| r < f) {
                                    found = Some(r);
                                }
                            }
                        }
                    }
                }
            }
            match found {
                Some(r) => rep[i] = r,
                None => {
                    rep[i] = i as u32;
                    grid.entry(k).or_default().push(i as u32);
                }
            }
        }
    }
    let mut faces = Vec::with_capacity(mesh.faces.len());
    for f in &mesh.faces {
        let g = [rep[f[0] as usize], rep[f[1] as usize], rep[f[2] as usize]];
        if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] {
            continue;
        }
        let (a, b, c) = (mesh.vertices[g[0] as usize], mesh.vertices[g[1] as usize], mesh.vertices[g[2] as usize]);
        let cross = (b - a).cross(c - a).norm();
        let scale = (b - a).norm_squared().max((c - a).norm_squared()).max((c - b).norm_squared());
        if !(cross > 1e-12 * scale) {
            continue;
        }
        faces.push(g);
    }
    let mut new_index = vec![u32::MAX; n];
    let mut used = vec![false; n];
    for f in &faces {
        for &i in f {
            used[i as usize] = true;
        }
    }
    let mut vertices = Vec::new();
    let mut uvs = mesh.uvs.as_ref().map(|_| Vec::new());
    for i in 0..n {
        if used[i] {
            new_index[i] = vertices.len() as u32;
            vertices.push(mesh.vertices[i]);
            if let (Some(out), Some(src)) = (uvs.as_mut(), mesh.uvs.as_ref()) {
                out.push(src[i]);
            }
        }
    }
    for f in &mut faces {
        for i in f.iter_mut() {
            *i = new_index[*i as usize];
        }
    }
    TriMesh { vertices, faces, uvs }
}

/// Area-weighted vertex normals. Vertices without a usable incident face get
/// `+Z`.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec3> {
    let mut acc = vec![Vec3::ZERO; mesh.vertices.len()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let c = mesh.face_cross(fi);
        for &i in f {
            acc[i as usize] += c;
        }
    }
    acc.into_iter().map(|n| n.try_normalize().unwrap_or(Vec3::Z)).collect()
}

/// Per-vertex incident faces and sorted one-ring neighbors.
#[derive(Debug, Clone)]
pub struct VertexAdjacency {
    pub faces: Vec<Vec<u32>>,
    pub neighbors: Vec<Vec<u32>>,
}

impl VertexAdjacency {
    pub fn build(mesh: &TriMesh) -> Self {
        let n = mesh.vertices.len();
        let mut faces = vec![Vec::new(); n];
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (fi, f) in mesh.faces.iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                faces[a as usize].push(fi as u32);
                neighbors[a as usize].push(f[(k + 1) % 3]);
                neighbors[a as usize].push(f[(k + 2) % 3]);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { faces, neighbors }
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }
}

/// All vertices within `k` edges of `v`, excluding `v`, sorted by index.
pub fn k_ring(adjacency: &VertexAdjacency, v: usize, k: usize) -> Result<Vec<u32>, MeshError> {
    if v >= adjacency.vertex_count() {
        return Err(MeshError::InvalidVertex(v));
    }
    let mut seen = BTreeSet::new();
    seen.insert(v as u32);
    let mut frontier = vec![v as u32];
    for _ in 0..k {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in &adjacency.neighbors[u as usize] {
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    seen.remove(&(v as u32));
    Ok(seen.into_iter().collect())
}

/// `n` points drawn uniformly by area, with their face indices.
pub fn sample_surface<R: Rng + ?Sized>(mesh: &TriMesh, n: usize, rng: &mut R) -> Vec<(Vec3, u32)> {
    if mesh.faces.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random::<f64>() * total;
        let f = cdf.partition_point(|&c| c <= t).min(mesh.faces.len() - 1);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = libm::sqrt(r1);
        let [a, b, c] = mesh.triangle(f);
        out.push((a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2), f as u32));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn validation_errors() {
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::Y];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 2]]).is_ok());
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 1, 3]]), Err(MeshError::IndexOutOfRange { index: 3, .. })));
        assert!(matches!(TriMesh::new(v, vec![[0, 1, 1]]), Err(MeshError::RepeatedVertex { .. })));
    }

    #[test]
    fn weld_coincident_vertices() {
        let m = TriMesh {
            vertices: vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::new(1e-7, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0)],
            faces: vec![[0, 1, 2], [3, 4, 2]],
            uvs: None,
        };
        let c = clean(&m, 1e-6);
        assert_eq!(c.vertices.len(), 4);
        assert_eq!(c.faces, vec![[0, 1, 2], [0, 3, 2]]);
    }

    #[test]
    fn degenerate_faces_removed() {
        let m = TriMesh {
            vertices: vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::new(2.0, 0.0, 0.0), Vec3::new(9.0, 9.0, 9.0)],
            // (a,a,b) and a collinear sliver.
            faces: vec![[0, 0, 1], [0, 1, 3], [0, 1, 2]],
            uvs: None,
        };
        let c = clean(&m, 0.0);
        assert_eq!(c.faces.len(), 1);
        assert_eq!(c.vertices.len(), 3);
        c.validate().unwrap();
    }

    #[test]
    fn clean_idempotent_on_sphere() {
        let s = shapes::icosphere(2, 1.0);
        let once = clean(&s, 1e-9);
        assert_eq!(clean(&once, 1e-9), once);
        let empty = clean(&TriMesh::default(), 1.0);
        assert!(empty.vertices.is_empty());
    }

    #[test]
    fn normals_square_and_isolated() {
        let m = TriMesh {
            vertices: vec![Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0), Vec3::Y, Vec3::splat(5.0)],
            faces: vec![[0, 1, 2], [0, 2, 3]],
            uvs: None,
        };
        let n = vertex_normals(&m);
        for k in 0..4 {
            assert_eq!(n[k], Vec3::Z);
        }
        assert_eq!(n[4], Vec3::Z);
    }

    #[test]
    fn normals_on_icosphere() {
        let s = shapes::icosphere(3, 2.0);
        let n = vertex_normals(&s);
        let mut worst: f64 = 0.0;
        for (p, nn) in s.vertices.iter().zip(&n) {
            assert!((nn.norm() - 1.0).abs() < 1e-12);
            worst = worst.max(crate::geom::line_angle(*nn, *p));
            assert!(nn.dot(*p) > 0.0);
        }
        assert!(worst.to_degrees() < 2.0, "worst angle {}", worst.to_degrees());
    }

    #[test]
    fn k_ring_fan_grid_boundary() {
        let fan = shapes::fan(6, 1.0);
        let adj = VertexAdjacency::build(&fan);
        assert_eq!(k_ring(&adj, 0, 1).unwrap().len(), 6);

        // Grid triangulated along one diagonal: the k-rings of an interior
        // vertex are hexagonal, 6 and then 6 + 12 vertices.
        let g = shapes::grid(9, 9, 1.0);
        let adj = VertexAdjacency::build(&g);
        let center = 4 * 9 + 4;
        assert_eq!(k_ring(&adj, center, 1).unwrap().len(), 6);
        assert_eq!(k_ring(&adj, center, 2).unwrap().len(), 18);
        let corner = k_ring(&adj, 0, 1).unwrap();
        assert!(corner.len() < 6 && !corner.is_empty());
        assert!(k_ring(&adj, 10_000, 1).is_err());
    }

    #[test]
    fn adjacency_is_symmetric() {
        let s = shapes::torus(2.0, 0.5, 24, 12);
        let adj = VertexAdjacency::build(&s);
        for (u, list) in adj.neighbors.iter().enumerate() {
            for &v in list {
                assert!(adj.neighbors[v as usize].binary_search(&(u as u32)).is_ok());
            }
        }
    }
}
