//! Uniform hash grid over a static point set.

use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::geom::{Aabb, Vec3};

type CellKey = [i64; 3];

/// Shell searches wider than this fall back to a linear scan.
const MAX_RING: i64 = 64;

/// Exact nearest-neighbor and radius queries over points bucketed into cubic
/// cells. Ties between equidistant points resolve to the lower index.
#[derive(Debug, Clone)]
pub struct PointGrid {
    cell: f64,
    points: Vec<Vec3>,
    /// Point indices sorted by cell.
    order: Vec<u32>,
    cells: HashMap<CellKey, (u32, u32)>,
    key_min: CellKey,
    key_max: CellKey,
}

impl PointGrid {
    /// Build over `points` with cubic cells of side `cell` (> 0).
    pub fn new(points: Vec<Vec3>, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell must be positive");
        let mut keyed: Vec<(CellKey, u32)> =
            points.iter().enumerate().map(|(i, &p)| (key_of(p, cell), i as u32)).collect();
        keyed.sort_unstable();
        let mut cells = HashMap::with_capacity(keyed.len() / 2 + 1);
        let mut order = Vec::with_capacity(keyed.len());
        let mut key_min = [i64::MAX; 3];
        let mut key_max = [i64::MIN; 3];
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == key {
                order.push(keyed[end].1);
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            for a in 0..3 {
                key_min[a] = key_min[a].min(key[a]);
                key_max[a] = key_max[a].max(key[a]);
            }
            start = end;
        }
        Self { cell, points, order, cells, key_min, key_max }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn bucket(&self, key: &CellKey) -> &[u32] {
        match self.cells.get(key) {
            Some(&(s, e)) => &self.order[s as usize..e as usize],
            None => &[],
        }
    }

    /// Visit every point within `radius` of `p` (inclusive), in no particular
    /// order.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, p: Vec3, radius: f64, mut f: F) {
        if self.points.is_empty() || !(radius >= 0.0) {
            return;
        }
        let lo = key_of(p - Vec3::splat(radius), self.cell);
        let hi = key_of(p + Vec3::splat(radius), self.cell);
        let r2 = radius * radius;
        for x in lo[0].max(self.key_min[0])..=hi[0].min(self.key_max[0]) {
            for y in lo[1].max(self.key_min[1])..=hi[1].min(self.key_max[1]) {
                for z in lo[2].max(self.key_min[2])..=hi[2].min(self.key_max[2]) {
                    for &i in self.bucket(&[x, y, z]) {
                        let d2 = self.points[i as usize].distance_squared(p);
                        if d2 <= r2 {
                            f(i as usize, libm::sqrt(d2));
                        }
                    }
                }
            }
        }
    }

    /// Nearest point within `radius` (inclusive).
    pub fn nearest_within(&self, p: Vec3, radius: f64) -> Option<(usize, f64)> {
        let mut best: Option<(f64, usize)> = None;
        self.for_each_within(p, radius, |i, d| {
            let cand = (d, i);
            if best.is_none_or(|b| lt(cand, b)) {
                best = Some(cand);
            }
        });
        best.map(|(d, i)| (i, d))
    }

    /// Exact nearest point with no radius limit.
    pub fn nearest(&self, p: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let c = key_of(p, self.cell);
        // Rings beyond the populated key range are empty; cap the search there.
        let mut max_ring = 0i64;
        for a in 0..3 {
            max_ring = max_ring
                .max(c[a].saturating_sub(self.key_min[a]).saturating_abs())
                .max(self.key_max[a].saturating_sub(c[a]).saturating_abs());
        }
        let mut best: Option<(f64, usize)> = None;
        let mut visited = 0usize;
        for ring in 0..=max_ring {
            // Past this many cells a linear scan is cheaper.
            if ring > MAX_RING || visited > self.points.len() {
                return self.nearest_brute(p);
            }
            let (x0, x1) = ((c[0] - ring).max(self.key_min[0]), (c[0] + ring).min(self.key_max[0]));
            let (y0, y1) = ((c[1] - ring).max(self.key_min[1]), (c[1] + ring).min(self.key_max[1]));
            for x in x0..=x1 {
                for y in y0..=y1 {
                    let side = (x - c[0]).abs() == ring || (y - c[1]).abs() == ring;
                    let mut visit = |z: i64| {
                        visited += 1;
                        for &i in self.bucket(&[x, y, z]) {
                            let d = self.points[i as usize].distance(p);
                            let cand = (d, i as usize);
                            if best.is_none_or(|b| lt(cand, b)) {
                                best = Some(cand);
                            }
                        }
                    };
                    if side {
                        let (z0, z1) = ((c[2] - ring).max(self.key_min[2]), (c[2] + ring).min(self.key_max[2]));
                        for z in z0..=z1 {
                            visit(z);
                        }
                    } else {
                        visit(c[2] - ring);
                        if ring > 0 {
                            visit(c[2] + ring);
                        }
                    }
                }
            }
            // Every unvisited cell is at least `ring` whole cells away.
            if let Some((d, _)) = best {
                if d < ring as f64 * self.cell {
                    break;
                }
            }
        }
        best.map(|(d, i)| (i, d))
    }

    fn nearest_brute(&self, p: Vec3) -> Option<(usize, f64)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, q) in self.points.iter().enumerate() {
            let cand = (q.distance(p), i);
            if best.is_none_or(|b| lt(cand, b)) {
                best = Some(cand);
            }
        }
        best.map(|(d, i)| (i, d))
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.points.iter().copied())
    }
}

#[inline]
fn lt(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[inline]
fn key_of(p: Vec3, cell: f64) -> CellKey {
    [libm::floor(p.x / cell) as i64, libm::floor(p.y / cell) as i64, libm::floor(p.z / cell) as i64]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose, Rng};

    fn brute(points: &[Vec3], p: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, q) in points.iter().enumerate() {
            let d = q.distance(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = stream(1, Purpose::Fixture, 0);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| {
                Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-1.0..1.0))
            })
            .collect();
        let grid = PointGrid::new(pts.clone(), 0.7);
        for _ in 0..500 {
            let q =
                Vec3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(-5.0..5.0));
            let (i, d) = grid.nearest(q).unwrap();
            let (bi, bd) = brute(&pts, q);
            assert_eq!(i, bi);
            assert_eq!(d, bd);
            match grid.nearest_within(q, 1.5) {
                Some((j, dj)) => {
                    assert_eq!(j, bi);
                    assert!(dj <= 1.5);
                }
                None => assert!(bd > 1.5),
            }
        }
    }

    #[test]
    fn empty_grid() {
        let grid = PointGrid::new(Vec::new(), 1.0);
        assert!(grid.nearest(Vec3::ZERO).is_none());
        assert!(grid.nearest_within(Vec3::ZERO, 3.0).is_none());
    }
}
