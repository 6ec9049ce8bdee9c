//! Crest lines: zero sets of the extremality coefficients, traced across
//! faces and filtered by cyclideness.
//!
//! A convex crest is where `e_max` vanishes on a region with
//! `k_max > |k_min|`; a concave crest is where `e_min` vanishes with
//! `k_min < -|k_max|`. Principal directions carry no sign, so before the
//! extremality signs at the two ends of an edge are compared, the far end's
//! direction is flipped into agreement with the near end's (which negates its
//! extremality).

use alloc::vec;
use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::curvature::VertexCurvature;
use crate::geom::Vec3;
use crate::mesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CrestKind {
    Convex,
    Concave,
}

/// Zero crossing of an extremality coefficient on a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Edge `(a, b)` with `a < b`.
    pub edge: (u32, u32),
    /// Position along the edge from `a` to `b`, in `(0, 1)`.
    pub t: f64,
    pub point: Vec3,
    /// Aligned extremality difference `e_b - e_a`; its sign is the gradient
    /// sign along the edge.
    pub slope: f64,
    /// Cyclideness interpolated at the crossing.
    pub cyclideness: f64,
}

/// Zero crossings of `e_max` (convex) or `e_min` (concave) on every edge.
/// Edges touching an invalid or umbilic vertex are skipped.
pub fn edge_zero_crossings(mesh: &TriMesh, curv: &[VertexCurvature], kind: CrestKind) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (a, b) in mesh.edges() {
        let (ca, cb) = (&curv[a as usize], &curv[b as usize]);
        if !ca.traceable() || !cb.traceable() {
            continue;
        }
        let ((ta, ea), (tb, eb)) = match kind {
            CrestKind::Convex => ((ca.t_max, ca.e_max), (cb.t_max, cb.e_max)),
            CrestKind::Concave => ((ca.t_min, ca.e_min), (cb.t_min, cb.e_min)),
        };
        let eb = if ta.dot(tb) < 0.0 { -eb } else { eb };
        if !(ea * eb < 0.0) {
            continue;
        }
        let t = ea / (ea - eb);
        let k_max = ca.k_max + t * (cb.k_max - ca.k_max);
        let k_min = ca.k_min + t * (cb.k_min - ca.k_min);
        let regular = match kind {
            CrestKind::Convex => k_max > libm::fabs(k_min) && k_max > 0.0,
            CrestKind::Concave => k_min < -libm::fabs(k_max),
        };
        if !regular {
            continue;
        }
        let pa = mesh.vertices[a as usize];
        let pb = mesh.vertices[b as usize];
        out.push(Crossing {
            edge: (a, b),
            t,
            point: pa.lerp(pb, t),
            slope: eb - ea,
            cyclideness: ca.cyclideness() + t * (cb.cyclideness() - ca.cyclideness()),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrestLine {
    pub points: Vec<Vec3>,
    /// Mesh edge holding each point.
    pub edges: Vec<(u32, u32)>,
    /// Cyclideness at each point.
    pub cyclideness: Vec<f64>,
    pub kind: CrestKind,
    /// Last point connects back to the first.
    pub closed: bool,
    /// Length-weighted mean cyclideness, 1/mm².
    pub strength: f64,
}

impl CrestLine {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polyline length including the closing segment of closed lines.
    pub fn length(&self) -> f64 {
        self.segments().map(|(i, j)| self.points[i].distance(self.points[j])).sum()
    }

    fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.points.len();
        let extra = if self.closed && n > 2 { 1 } else { 0 };
        (0..(n.saturating_sub(1) + extra)).map(move |i| (i, (i + 1) % n))
    }

    fn compute_strength(&mut self) {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, j) in self.segments() {
            let l = self.points[i].distance(self.points[j]);
            num += l * 0.5 * (self.cyclideness[i] + self.cyclideness[j]);
            den += l;
        }
        self.strength = if den > 0.0 {
            num / den
        } else if self.cyclideness.is_empty() {
            0.0
        } else {
            self.cyclideness.iter().sum::<f64>() / self.cyclideness.len() as f64
        };
    }
}

/// Identifies the mesh a crest set was traced on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MeshBinding {
    pub vertices: usize,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrestSet {
    pub lines: Vec<CrestLine>,
    pub mesh: MeshBinding,
}

impl CrestSet {
    pub fn total_points(&self) -> usize {
        self.lines.iter().map(|l| l.len()).sum()
    }

    pub fn merged(mut self, other: CrestSet) -> CrestSet {
        self.lines.extend(other.lines);
        self
    }
}

/// Connect crossings face by face and chain the segments into maximal
/// polylines.
///
/// Faces with two crossings get a segment. A face with three keeps the two
/// with the steepest extremality change and drops the third. Chains break at
/// crossings shared by more than two segments (non-manifold edges).
pub fn trace(mesh: &TriMesh, crossings: &[Crossing], kind: CrestKind) -> CrestSet {
    let by_edge: HashMap<(u32, u32), usize> = crossings.iter().enumerate().map(|(i, c)| (c.edge, i)).collect();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut dropped = 0usize;
    for f in &mesh.faces {
        let mut found: Vec<usize> = Vec::with_capacity(3);
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if let Some(&ci) = by_edge.get(&(a.min(b), a.max(b))) {
                found.push(ci);
            }
        }
        if found.len() == 3 {
            dropped += 1;
            let weakest = found
                .iter()
                .enumerate()
                .min_by(|(_, &x), (_, &y)| {
                    libm::fabs(crossings[x].slope)
                        .total_cmp(&libm::fabs(crossings[y].slope))
                        .then(crossings[x].edge.cmp(&crossings[y].edge))
                })
                .map(|(k, _)| k)
                .unwrap_or(0);
            found.remove(weakest);
        }
        if found.len() == 2 {
            segments.push((found[0].min(found[1]), found[0].max(found[1])));
        }
    }
    if dropped > 0 {
        log::debug!("crest trace: {dropped} faces with three crossings resolved");
    }

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); crossings.len()];
    for (si, &(a, b)) in segments.iter().enumerate() {
        incident[a].push(si);
        incident[b].push(si);
    }
    let mut used = vec![false; segments.len()];
    let mut chains: Vec<(Vec<usize>, bool)> = Vec::new();
    let other = |s: usize, c: usize| if segments[s].0 == c { segments[s].1 } else { segments[s].0 };

    // Open chains start at endpoints and junctions.
    for start in 0..crossings.len() {
        if incident[start].len() == 2 {
            continue;
        }
        for k in 0..incident[start].len() {
            let s0 = incident[start][k];
            if used[s0] {
                continue;
            }
            used[s0] = true;
            let mut chain = vec![start];
            let mut cur = other(s0, start);
            chain.push(cur);
            while incident[cur].len() == 2 {
                let next = incident[cur].iter().copied().find(|&s| !used[s]);
                match next {
                    Some(s) => {
                        used[s] = true;
                        cur = other(s, cur);
                        chain.push(cur);
                    }
                    None => break,
                }
            }
            chains.push((chain, false));
        }
    }
    // What is left are cycles through degree-2 crossings.
    for start in 0..crossings.len() {
        let Some(s0) = incident[start].iter().copied().find(|&s| !used[s]) else {
            continue;
        };
        used[s0] = true;
        let mut chain = vec![start];
        let mut cur = other(s0, start);
        while cur != start {
            chain.push(cur);
            match incident[cur].iter().copied().find(|&s| !used[s]) {
                Some(s) => {
                    used[s] = true;
                    cur = other(s, cur);
                }
                None => break,
            }
        }
        let closed = cur == start;
        chains.push((chain, closed));
    }

    let mut lines = Vec::with_capacity(chains.len());
    for (chain, closed) in chains {
        let mut line = CrestLine {
            points: Vec::with_capacity(chain.len()),
            edges: Vec::with_capacity(chain.len()),
            cyclideness: Vec::with_capacity(chain.len()),
            kind,
            closed,
            strength: 0.0,
        };
        for ci in chain {
            let c = &crossings[ci];
            if line.points.last() == Some(&c.point) {
                continue;
            }
            line.points.push(c.point);
            line.edges.push(c.edge);
            line.cyclideness.push(c.cyclideness);
        }
        if line.closed && line.points.len() > 1 && line.points.first() == line.points.last() {
            line.points.pop();
            line.edges.pop();
            line.cyclideness.pop();
        }
        if line.points.len() < 2 {
            continue;
        }
        if line.closed && line.points.len() < 3 {
            line.closed = false;
        }
        line.compute_strength();
        lines.push(line);
    }
    CrestSet { lines, mesh: MeshBinding { vertices: mesh.vertices.len(), faces: mesh.faces.len() } }
}

/// Cyclideness filter settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrestFilter {
    /// Quantile of line strengths a line must exceed, in `(0, 1]`.
    pub percentile: f64,
    pub min_points: usize,
    /// Absolute strength floor, 1/mm². Lines at or below it are noise.
    pub min_strength: f64,
}

impl Default for CrestFilter {
    fn default() -> Self {
        Self { percentile: 0.4, min_points: 5, min_strength: 0.0 }
    }
}

/// Linear-interpolation quantile of `values` at `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    v[lo] + frac * (v[hi] - v[lo])
}

/// Keep lines whose strength is strictly above the `percentile` quantile of
/// all strengths and above the absolute floor, with at least `min_points`
/// points.
pub fn filter_by_cyclideness(crest: &CrestSet, filter: &CrestFilter) -> CrestSet {
    let strengths: Vec<f64> = crest.lines.iter().map(|l| l.strength).collect();
    let threshold = quantile(&strengths, filter.percentile).max(filter.min_strength);
    let lines =
        crest.lines.iter().filter(|l| l.strength > threshold && l.len() >= filter.min_points).cloned().collect();
    CrestSet { lines, mesh: crest.mesh }
}

/// Which crest kinds feed the supervision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KindSelection {
    #[default]
    Both,
    Convex,
    Concave,
}

/// Detect, trace and filter crest lines of the selected kinds.
pub fn detect(mesh: &TriMesh, curv: &[VertexCurvature], kinds: KindSelection, filter: &CrestFilter) -> CrestSet {
    let wanted: &[CrestKind] = match kinds {
        KindSelection::Both => &[CrestKind::Convex, CrestKind::Concave],
        KindSelection::Convex => &[CrestKind::Convex],
        KindSelection::Concave => &[CrestKind::Concave],
    };
    let mut all =
        CrestSet { lines: Vec::new(), mesh: MeshBinding { vertices: mesh.vertices.len(), faces: mesh.faces.len() } };
    for &kind in wanted {
        let crossings = edge_zero_crossings(mesh, curv, kind);
        all = all.merged(trace(mesh, &crossings, kind));
    }
    filter_by_cyclideness(&all, filter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn vc(e: f64, t: Vec3) -> VertexCurvature {
        VertexCurvature {
            k_max: 1.0,
            k_min: 0.1,
            t_max: t,
            t_min: Vec3::Z,
            e_max: e,
            e_min: 0.0,
            valid: true,
            umbilic: false,
        }
    }

    fn segment_mesh() -> TriMesh {
        TriMesh::new(alloc::vec![Vec3::ZERO, Vec3::X, Vec3::Y], alloc::vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn crossing_at_midpoint() {
        let m = segment_mesh();
        let c = edge_zero_crossings(&m, &[vc(1.0, Vec3::X), vc(-1.0, Vec3::X), vc(1.0, Vec3::X)], CrestKind::Convex);
        let on01: Vec<_> = c.iter().filter(|c| c.edge == (0, 1)).collect();
        assert_eq!(on01.len(), 1);
        assert_eq!(on01[0].t, 0.5);
        assert_eq!(on01[0].point, Vec3::new(0.5, 0.0, 0.0));
    }

    #[test]
    fn same_sign_no_crossing_and_alignment() {
        let m = segment_mesh();
        let c = edge_zero_crossings(&m, &[vc(1.0, Vec3::X), vc(1.0, Vec3::X), vc(1.0, Vec3::X)], CrestKind::Convex);
        assert!(c.is_empty());
        // Opposite stored direction at vertex 1 means its extremality is
        // really -1 relative to vertex 0: a crossing.
        let c = edge_zero_crossings(&m, &[vc(1.0, Vec3::X), vc(1.0, -Vec3::X), vc(1.0, Vec3::X)], CrestKind::Convex);
        assert!(c.iter().any(|c| c.edge == (0, 1)));
    }

    #[test]
    fn regularity_and_umbilic_skip() {
        let m = segment_mesh();
        let mut flat = [vc(1.0, Vec3::X), vc(-1.0, Vec3::X), vc(1.0, Vec3::X)];
        for c in &mut flat {
            c.k_max = 0.1;
            c.k_min = -0.5;
        }
        assert!(edge_zero_crossings(&m, &flat, CrestKind::Convex).is_empty());
        let mut um = [vc(1.0, Vec3::X), vc(-1.0, Vec3::X), vc(1.0, Vec3::X)];
        um[1].umbilic = true;
        assert!(edge_zero_crossings(&m, &um, CrestKind::Convex).is_empty());
    }

    #[test]
    fn strip_gives_single_polyline() {
        // Strip of quads along x; e changes sign across y = 0.5.
        let g = shapes::grid(8, 2, 1.0);
        let curv: Vec<_> = g.vertices.iter().map(|p| vc(if p.y < 0.5 { 1.0 } else { -1.0 }, Vec3::Y)).collect();
        let c = edge_zero_crossings(&g, &curv, CrestKind::Convex);
        let set = trace(&g, &c, CrestKind::Convex);
        assert_eq!(set.lines.len(), 1);
        let line = &set.lines[0];
        assert!(!line.closed);
        assert_eq!(line.len(), c.len());
        for p in &line.points {
            assert!((p.y - 0.5).abs() < 1e-12);
        }
        for w in line.points.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn isolated_crossing_dropped() {
        let m = segment_mesh();
        let c = [Crossing { edge: (0, 1), t: 0.5, point: Vec3::new(0.5, 0.0, 0.0), slope: -2.0, cyclideness: 1.0 }];
        assert!(trace(&m, &c, CrestKind::Convex).lines.is_empty());
    }

    fn line(strength: f64, n: usize) -> CrestLine {
        CrestLine {
            points: (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect(),
            edges: alloc::vec![(0, 1); n],
            cyclideness: alloc::vec![strength; n],
            kind: CrestKind::Convex,
            closed: false,
            strength,
        }
    }

    #[test]
    fn percentile_filter() {
        let set = CrestSet { lines: alloc::vec![line(1.0, 6), line(10.0, 6)], mesh: MeshBinding::default() };
        let f = CrestFilter { percentile: 0.5, min_points: 5, min_strength: 0.0 };
        let out = filter_by_cyclideness(&set, &f);
        assert_eq!(out.lines.len(), 1);
        assert_eq!(out.lines[0].strength, 10.0);
        assert!(filter_by_cyclideness(&CrestSet::default(), &f).lines.is_empty());
        let zero = CrestSet { lines: alloc::vec![line(0.0, 9), line(0.0, 9)], mesh: MeshBinding::default() };
        assert!(filter_by_cyclideness(&zero, &f).lines.is_empty());
        let short = CrestSet { lines: alloc::vec![line(1.0, 3), line(10.0, 3)], mesh: MeshBinding::default() };
        assert!(filter_by_cyclideness(&short, &f).lines.is_empty());
    }

    #[test]
    fn strength_is_length_weighted() {
        let mut l = line(0.0, 3);
        l.points = alloc::vec![Vec3::ZERO, Vec3::X, Vec3::new(4.0, 0.0, 0.0)];
        l.cyclideness = alloc::vec![0.0, 2.0, 2.0];
        l.compute_strength();
        // (1·1 + 3·2) / 4
        assert!((l.strength - 1.75).abs() < 1e-15);
    }
}
