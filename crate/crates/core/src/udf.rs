//! Exact unsigned distance to a triangle mesh through a bounding volume
//! hierarchy.

use alloc::vec::Vec;
use thiserror::Error;

use crate::geom::{Aabb, Vec3};
use crate::mesh::TriMesh;

pub const LEAF_SIZE: usize = 4;

/// Below this distance a query is on the surface and has no gradient.
pub const GRADIENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UdfError {
    #[error("cannot build a distance field over an empty mesh")]
    EmptyMesh,
    #[error("bvh audit failed: {0}")]
    Audit(&'static str),
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest {
    pub distance: f64,
    pub point: Vec3,
    pub triangle: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

/// Binary BVH over the triangles of a mesh; node 0 is the root.
#[derive(Debug, Clone)]
pub struct TriBvh {
    nodes: Vec<BvhNode>,
    /// Triangle ids in leaf order.
    order: Vec<u32>,
    tris: Vec<[Vec3; 3]>,
}

impl TriBvh {
    /// Median split on the longest axis of each node's centroid box.
    pub fn build(mesh: &TriMesh) -> Result<Self, UdfError> {
        if mesh.faces.is_empty() {
            return Err(UdfError::EmptyMesh);
        }
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        nodes.push(BvhNode { bounds: Aabb::EMPTY, kind: NodeKind::Leaf { start: 0, count: 0 } });
        let mut stack = alloc::vec![(0usize, 0usize, tris.len())];
        while let Some((node, lo, hi)) = stack.pop() {
            let ids = &mut order[lo..hi];
            let mut bounds = Aabb::EMPTY;
            let mut cbox = Aabb::EMPTY;
            for &t in ids.iter() {
                for v in tris[t as usize] {
                    bounds.grow(v);
                }
                cbox.grow(centroids[t as usize]);
            }
            if ids.len() <= LEAF_SIZE {
                nodes[node] = BvhNode { bounds, kind: NodeKind::Leaf { start: lo as u32, count: ids.len() as u32 } };
                continue;
            }
            let axis = cbox.extent().max_axis();
            let mid = ids.len() / 2;
            ids.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis]).then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(BvhNode { bounds: Aabb::EMPTY, kind: NodeKind::Leaf { start: 0, count: 0 } });
            nodes.push(BvhNode { bounds: Aabb::EMPTY, kind: NodeKind::Leaf { start: 0, count: 0 } });
            nodes[node] = BvhNode { bounds, kind: NodeKind::Inner { left: left as u32, right: left as u32 + 1 } };
            stack.push((left + 1, lo + mid, hi));
            stack.push((left, lo, lo + mid));
        }
        Ok(Self { nodes, order, tris })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn height(&self) -> usize {
        let mut best = 0;
        let mut stack = alloc::vec![(0u32, 1usize)];
        while let Some((n, h)) = stack.pop() {
            best = best.max(h);
            if let NodeKind::Inner { left, right } = self.nodes[n as usize].kind {
                stack.push((left, h + 1));
                stack.push((right, h + 1));
            }
        }
        best
    }

    /// Structural checks: every triangle in exactly one leaf, leaves hold at
    /// most [`LEAF_SIZE`] triangles, children nest in their parent, leaf boxes
    /// contain their triangles, and the height is at most `2·log₂(n) + 16`.
    pub fn audit(&self) -> Result<(), UdfError> {
        let mut seen = alloc::vec![0u32; self.tris.len()];
        let mut stack = alloc::vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    if count as usize > LEAF_SIZE || count == 0 {
                        return Err(UdfError::Audit("leaf size out of range"));
                    }
                    for &t in &self.order[start as usize..(start + count) as usize] {
                        seen[t as usize] += 1;
                        let tb = Aabb::from_points(self.tris[t as usize]);
                        if !node.bounds.contains_box(&tb) {
                            return Err(UdfError::Audit("leaf box misses a triangle"));
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    for c in [left, right] {
                        if !node.bounds.contains_box(&self.nodes[c as usize].bounds) {
                            return Err(UdfError::Audit("child box escapes parent"));
                        }
                        stack.push(c);
                    }
                }
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(UdfError::Audit("triangle not in exactly one leaf"));
        }
        let limit = 2.0 * libm::log2(self.tris.len() as f64) + 16.0;
        if self.height() as f64 > limit {
            return Err(UdfError::Audit("tree too tall"));
        }
        Ok(())
    }

    /// Exact closest point on the mesh. Ties between triangles keep the one
    /// visited first, which is fixed by the tree.
    pub fn distance(&self, p: Vec3) -> Closest {
        let mut best = Closest { distance: f64::INFINITY, point: p, triangle: u32::MAX };
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((n, lb)) = stack.pop() {
            if lb >= best_d2 {
                continue;
            }
            match self.nodes[n as usize].kind {
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start as usize..(start + count) as usize] {
                        let [a, b, c] = self.tris[t as usize];
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d2 = q.distance_squared(p);
                        if d2 < best_d2 {
                            best_d2 = d2;
                            best = Closest { distance: 0.0, point: q, triangle: t };
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left as usize].bounds.distance_squared(p);
                    let dr = self.nodes[right as usize].bounds.distance_squared(p);
                    // Push the farther child first so the nearer one is popped next.
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best.distance = libm::sqrt(best_d2);
        best
    }

    /// Unit direction of increasing distance, `None` on the surface.
    pub fn distance_gradient(&self, p: Vec3) -> Option<Vec3> {
        let c = self.distance(p);
        if c.distance <= GRADIENT_EPS {
            None
        } else {
            Some((p - c.point) / c.distance)
        }
    }

    /// Batch query, parallel when enabled; results in input order.
    pub fn distances(&self, points: &[Vec3]) -> Vec<Closest> {
        crate::par::map_indexed(points.len(), |i| self.distance(points[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::icosphere;

    fn one_triangle() -> TriMesh {
        TriMesh::new(alloc::vec![Vec3::ZERO, Vec3::X * 3.0, Vec3::Y * 3.0], alloc::vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn single_leaf() {
        let b = TriBvh::build(&one_triangle()).unwrap();
        assert_eq!(b.nodes().len(), 1);
        assert!(matches!(b.nodes()[0].kind, NodeKind::Leaf { count: 1, .. }));
        b.audit().unwrap();
        assert!(matches!(TriBvh::build(&TriMesh::default()), Err(UdfError::EmptyMesh)));
    }

    #[test]
    fn offset_along_normal() {
        let b = TriBvh::build(&one_triangle()).unwrap();
        let c = b.distance(Vec3::new(1.0, 1.0, 3.0));
        assert!((c.distance - 3.0).abs() < 1e-15);
        assert_eq!(b.distance_gradient(Vec3::new(1.0, 1.0, 3.0)), Some(Vec3::Z));
        assert_eq!(b.distance(Vec3::X * 3.0).distance, 0.0);
        assert_eq!(b.distance_gradient(Vec3::new(1.0, 1.0, 0.0)), None);
    }

    #[test]
    fn sphere_audit() {
        let m = icosphere(3, 10.0);
        let b = TriBvh::build(&m).unwrap();
        b.audit().unwrap();
        for v in &m.vertices {
            assert!(b.distance(*v).distance < 1e-12);
        }
        let again = TriBvh::build(&m).unwrap();
        assert_eq!(b.order, again.order);
    }
}
