//! The 2D pathway: edges in shading renders, thinned to one-pixel curves,
//! split into long simple paths and lifted back onto the surface as line
//! directions.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::geom::Vec3;
use crate::image::{Grid, NEIGHBORS8};
use crate::orient3d::{pca_direction, OrientationField3D, OrientedPoint};
use crate::render::{pixel_center, Camera, RenderBuffers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Orient2dError {
    #[error("edge map is {got:?}, render is {expected:?}")]
    SizeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("image contains non-finite values")]
    NonFinite,
}

/// Per-pixel edge strength in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap(pub Grid<f64>);

impl EdgeMap {
    /// Wrap an externally produced map, clamping to [0, 1].
    pub fn from_grid(grid: Grid<f64>) -> Self {
        EdgeMap(grid.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
}

pub enum EdgeDetector<'a> {
    /// Sobel gradient, non-maximum suppression, hysteresis on the gradient
    /// magnitude divided by the stencil gain (a unit step scores 1).
    Builtin { low: f64, high: f64 },
    /// A precomputed map for this view.
    External(&'a EdgeMap),
}

const SOBEL_GAIN: f64 = 4.0;

fn sobel(img: &Grid<f64>) -> (Grid<f64>, Grid<f64>) {
    let (w, h) = img.dims();
    let mut gx = Grid::new(w, h, 0.0);
    let mut gy = Grid::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| img.get_clamped(x as isize + dx, y as isize + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx.set(x, y, sx);
            gy.set(x, y, sy);
        }
    }
    (gx, gy)
}

/// Edge map of a grayscale image.
pub fn detect_edges(image: &Grid<f64>, detector: EdgeDetector<'_>) -> Result<EdgeMap, Orient2dError> {
    if image.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Orient2dError::NonFinite);
    }
    match detector {
        EdgeDetector::External(map) => {
            if map.dims() != image.dims() {
                return Err(Orient2dError::SizeMismatch { expected: image.dims(), got: map.dims() });
            }
            Ok(map.clone())
        }
        EdgeDetector::Builtin { low, high } => Ok(canny(image, low, high)),
    }
}

fn canny(image: &Grid<f64>, low: f64, high: f64) -> EdgeMap {
    let (w, h) = image.dims();
    let (gx, gy) = sobel(image);
    let mag = Grid::from_vec(
        w,
        h,
        gx.as_slice().iter().zip(gy.as_slice()).map(|(a, b)| libm::hypot(*a, *b) / SOBEL_GAIN).collect(),
    );
    // Keep a pixel when it beats the neighbor behind it along the gradient
    // and at least ties the one ahead, so plateaus two pixels wide keep one.
    let mut nms = Grid::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let m = *mag.get(x, y);
            if m <= 0.0 {
                continue;
            }
            let mut a = libm::atan2(*gy.get(x, y), *gx.get(x, y)).to_degrees();
            if a < 0.0 {
                a += 180.0;
            }
            let (dx, dy) = if !(22.5..157.5).contains(&a) {
                (1, 0)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let behind = mag.get_signed(xi - dx, yi - dy).copied().unwrap_or(0.0);
            let ahead = mag.get_signed(xi + dx, yi + dy).copied().unwrap_or(0.0);
            if m > behind && m >= ahead {
                nms.set(x, y, m);
            }
        }
    }
    let mut keep = Grid::new(w, h, false);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if *nms.get(x, y) >= high {
                keep.set(x, y, true);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in NEIGHBORS8 {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if let Some(&v) = nms.get_signed(nx, ny) {
                let (nx, ny) = (nx as usize, ny as usize);
                if v >= low && !*keep.get(nx, ny) {
                    keep.set(nx, ny, true);
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    let out = Grid::from_vec(
        w,
        h,
        nms.as_slice().iter().zip(keep.as_slice()).map(|(v, k)| if *k { v.min(1.0) } else { 0.0 }).collect(),
    );
    EdgeMap(out)
}

/// Binary one-pixel-wide curves.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonMask(pub Grid<bool>);

#[inline]
fn fg(mask: &Grid<bool>, x: isize, y: isize) -> bool {
    mask.get_signed(x, y).copied().unwrap_or(false)
}

fn ring(mask: &Grid<bool>, x: usize, y: usize) -> [bool; 8] {
    NEIGHBORS8.map(|(dx, dy)| fg(mask, x as isize + dx, y as isize + dy))
}

/// Yokoi 8-connectivity number; a border pixel is simple when it is 1.
fn connectivity8(n: &[bool; 8]) -> u32 {
    let b = n.map(|v| u32::from(!v));
    let mut c = 0;
    for k in [0, 2, 4, 6] {
        c += b[k] - b[k] * b[(k + 1) % 8] * b[(k + 2) % 8];
    }
    c
}

fn removable(mask: &Grid<bool>, x: usize, y: usize) -> bool {
    let n = ring(mask, x, y);
    n.iter().any(|v| *v) && connectivity8(&n) == 1
}

fn neighbor_count(mask: &Grid<bool>, x: usize, y: usize) -> usize {
    ring(mask, x, y).iter().filter(|v| **v).count()
}

/// Thin to a fixpoint. Each pass peels north, south, east and west
/// borders in turn, re-checking candidates as they are removed so every
/// component stays connected. Pixels that were curve ends when the pass
/// started are kept, so open curves keep their length while blobs shrink to
/// a few pixels.
pub fn thin(mask: &mut Grid<bool>) {
    let (w, h) = mask.dims();
    let dirs = [(0isize, -1isize), (0, 1), (1, 0), (-1, 0)];
    loop {
        let mut changed = false;
        let ends = Grid::from_vec(
            w,
            h,
            (0..w * h).map(|i| *mask.get(i % w, i / w) && neighbor_count(mask, i % w, i / w) == 1).collect(),
        );
        for (dx, dy) in dirs {
            let mut cand = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if *mask.get(x, y)
                        && !*ends.get(x, y)
                        && !fg(mask, x as isize + dx, y as isize + dy)
                        && removable(mask, x, y)
                    {
                        cand.push((x, y));
                    }
                }
            }
            for (x, y) in cand {
                if removable(mask, x, y) {
                    mask.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// m-adjacency: diagonal steps only where no axis step connects the pair.
fn m_neighbors(mask: &Grid<bool>, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (xi, yi) = (x as isize, y as isize);
    NEIGHBORS8.into_iter().filter_map(move |(dx, dy)| {
        let (nx, ny) = (xi + dx, yi + dy);
        if !fg(mask, nx, ny) {
            return None;
        }
        if dx != 0 && dy != 0 && (fg(mask, xi + dx, yi) || fg(mask, xi, yi + dy)) {
            return None;
        }
        Some((nx as usize, ny as usize))
    })
}

/// Remove end branches shorter than `max_len` pixels that hang off a
/// junction. Isolated curves are left alone.
pub fn prune_spurs(mask: &mut Grid<bool>, max_len: usize) {
    if max_len == 0 {
        return;
    }
    let (w, h) = mask.dims();
    let snapshot = mask.clone();
    let degree = |x: usize, y: usize| m_neighbors(&snapshot, x, y).count();
    let mut doomed = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !*snapshot.get(x, y) || degree(x, y) != 1 {
                continue;
            }
            let mut path = vec![(x, y)];
            let mut prev = (x, y);
            let mut cur = (x, y);
            loop {
                let next: Vec<_> = m_neighbors(&snapshot, cur.0, cur.1).filter(|&p| p != prev).collect();
                if next.len() != 1 {
                    break;
                }
                let nx = next[0];
                if degree(nx.0, nx.1) >= 3 {
                    if path.len() < max_len {
                        doomed.extend_from_slice(&path);
                    }
                    break;
                }
                if degree(nx.0, nx.1) != 2 || path.len() >= max_len {
                    break;
                }
                path.push(nx);
                prev = cur;
                cur = nx;
            }
        }
    }
    for (x, y) in doomed {
        mask.set(x, y, false);
    }
}

/// Threshold, thin, prune spurs shorter than `spur_len`, thin again.
pub fn skeletonize(edges: &EdgeMap, threshold: f64, spur_len: usize) -> SkeletonMask {
    let mut mask = edges.0.map(|v| *v > threshold);
    thin(&mut mask);
    prune_spurs(&mut mask, spur_len);
    thin(&mut mask);
    SkeletonMask(mask)
}

/// 8-connected components of a binary grid.
pub fn count_components8(mask: &Grid<bool>) -> usize {
    let (w, h) = mask.dims();
    let mut seen = Grid::new(w, h, false);
    let mut count = 0;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) || *seen.get(x, y) {
                continue;
            }
            count += 1;
            seen.set(x, y, true);
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for (dx, dy) in NEIGHBORS8 {
                    let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                    if fg(mask, nx, ny) && !*seen.get(nx as usize, ny as usize) {
                        seen.set(nx as usize, ny as usize, true);
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
        }
    }
    count
}

/// Skeleton pixels as graph nodes in raster order, m-adjacent pairs as edges.
#[derive(Debug, Clone)]
pub struct PixelGraph {
    pub nodes: Vec<[u32; 2]>,
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<u32>>,
}

impl PixelGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

pub fn build_graph(mask: &SkeletonMask) -> PixelGraph {
    let m = &mask.0;
    let (w, h) = m.dims();
    let mut id = Grid::new(w, h, u32::MAX);
    let mut nodes = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if *m.get(x, y) {
                id.set(x, y, nodes.len() as u32);
                nodes.push([x as u32, y as u32]);
            }
        }
    }
    let adjacency = nodes
        .iter()
        .map(|&[x, y]| {
            let mut nb: Vec<u32> = m_neighbors(m, x as usize, y as usize).map(|(a, b)| *id.get(a, b)).collect();
            nb.sort_unstable();
            nb
        })
        .collect();
    PixelGraph { nodes, adjacency }
}

/// Simple path of 8-adjacent pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelPath {
    pub pixels: Vec<[u32; 2]>,
}

impl PixelPath {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// BFS over alive nodes; returns the farthest node (lowest index on ties)
/// and the parent array.
fn bfs(
    g: &PixelGraph,
    alive: &[bool],
    start: u32,
    dist: &mut [u32],
    parent: &mut [u32],
    touched: &mut Vec<u32>,
) -> u32 {
    for &t in touched.iter() {
        dist[t as usize] = u32::MAX;
    }
    touched.clear();
    let mut q = VecDeque::new();
    dist[start as usize] = 0;
    parent[start as usize] = u32::MAX;
    touched.push(start);
    q.push_back(start);
    let mut far = start;
    while let Some(u) = q.pop_front() {
        let du = dist[u as usize];
        if du > dist[far as usize] || (du == dist[far as usize] && u < far) {
            far = u;
        }
        for &v in &g.adjacency[u as usize] {
            if alive[v as usize] && dist[v as usize] == u32::MAX {
                dist[v as usize] = du + 1;
                parent[v as usize] = u;
                touched.push(v);
                q.push_back(v);
            }
        }
    }
    far
}

/// Longest simple paths, per component: the path between the ends of a
/// double breadth-first search (the exact diameter on trees), then the same
/// on what is left after removing it, until no path reaches `min_length`
/// pixels. Sorted by length, longest first.
pub fn extract_longest_paths(g: &PixelGraph, min_length: usize) -> Vec<PixelPath> {
    let n = g.len();
    let mut alive = vec![true; n];
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![u32::MAX; n];
    let mut touched = Vec::new();
    let mut comp_seen = vec![false; n];
    let mut out = Vec::new();
    loop {
        comp_seen.iter_mut().zip(&alive).for_each(|(s, a)| *s = !*a);
        let mut found = Vec::new();
        for s in 0..n as u32 {
            if comp_seen[s as usize] {
                continue;
            }
            let a = bfs(g, &alive, s, &mut dist, &mut parent, &mut touched);
            for &t in &touched {
                comp_seen[t as usize] = true;
            }
            let b = bfs(g, &alive, a, &mut dist, &mut parent, &mut touched);
            let mut path = Vec::with_capacity(dist[b as usize] as usize + 1);
            let mut cur = b;
            while cur != u32::MAX {
                path.push(cur);
                cur = parent[cur as usize];
            }
            if path.len() >= min_length.max(1) {
                found.push(path);
            }
        }
        if found.is_empty() {
            break;
        }
        for p in found {
            for &v in &p {
                alive[v as usize] = false;
            }
            out.push(PixelPath { pixels: p.iter().map(|&v| g.nodes[v as usize]).collect() });
        }
    }
    out.sort_by_key(|p| core::cmp::Reverse(p.len()));
    out
}

/// Angle in [0, π) of the total-least-squares line through `pts`, in pixel
/// coordinates (x right, y down).
pub fn tls_angle(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0] / n, b + p[1] / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let mut a = 0.5 * libm::atan2(2.0 * sxy, sxx - syy);
    if a < 0.0 {
        a += core::f64::consts::PI;
    }
    if a >= core::f64::consts::PI {
        a -= core::f64::consts::PI;
    }
    a
}

/// Per-pixel line angle over the `±window` neighborhood along the path.
pub fn path_orientations(path: &PixelPath, window: usize) -> Vec<f64> {
    let n = path.len();
    let pts: Vec<[f64; 2]> = path.pixels.iter().map(|p| [p[0] as f64, p[1] as f64]).collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(window.max(1));
            let hi = (i + window.max(1)).min(n - 1);
            tls_angle(&pts[lo..=hi])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftParams {
    /// Largest depth step between path neighbors, mm.
    pub discontinuity: f64,
    /// Half-window along the path for the 3D direction fit.
    pub window: usize,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self { discontinuity: 5.0, window: 4 }
    }
}

/// Lift paths of one view onto the rendered surface.
///
/// A pixel survives when it has finite depth and its depth is within the
/// discontinuity guard of both path neighbors. Its direction is the
/// principal axis of the surviving unprojected points within `±window`
/// along the path, stopping at the first dropped pixel on either side.
pub fn lift_view(
    paths: &[PixelPath],
    buffers: &RenderBuffers,
    camera: &Camera,
    params: &LiftParams,
) -> Vec<OrientedPoint> {
    let mut out = Vec::new();
    for path in paths {
        let n = path.len();
        let depth: Vec<f64> = path.pixels.iter().map(|p| *buffers.depth.get(p[0] as usize, p[1] as usize)).collect();
        let ok: Vec<bool> = (0..n)
            .map(|i| {
                let d = depth[i];
                if !d.is_finite() {
                    return false;
                }
                let close = |j: usize| libm::fabs(depth[j] - d) <= params.discontinuity;
                (i == 0 || close(i - 1)) && (i + 1 == n || close(i + 1))
            })
            .collect();
        let world: Vec<Option<Vec3>> = (0..n)
            .map(|i| {
                if !ok[i] {
                    return None;
                }
                let p = path.pixels[i];
                camera.unproject(pixel_center(p[0] as usize, p[1] as usize), depth[i]).ok()
            })
            .collect();
        let w = params.window.max(1);
        for i in 0..n {
            let Some(p) = world[i] else { continue };
            let mut lo = i;
            while lo > 0 && i - lo < w && world[lo - 1].is_some() {
                lo -= 1;
            }
            let mut hi = i;
            while hi + 1 < n && hi - i < w && world[hi + 1].is_some() {
                hi += 1;
            }
            if hi == lo {
                continue;
            }
            let pts: Vec<Vec3> = world[lo..=hi].iter().map(|q| q.unwrap()).collect();
            if let Ok((d, _)) = pca_direction(&pts) {
                out.push(OrientedPoint { position: p, direction: d, weight: 1.0 });
            }
        }
    }
    out
}

/// Per-view 2D settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orient2dParams {
    pub low: f64,
    pub high: f64,
    pub threshold: f64,
    pub spur_len: usize,
    pub min_path: usize,
    pub lift: LiftParams,
}

impl Default for Orient2dParams {
    fn default() -> Self {
        Self { low: 0.2, high: 0.4, threshold: 0.3, spur_len: 6, min_path: 12, lift: LiftParams::default() }
    }
}

/// Everything produced for one view, kept for dumps.
#[derive(Debug, Clone)]
pub struct ViewOrientation {
    pub edges: EdgeMap,
    pub skeleton: SkeletonMask,
    pub paths: Vec<PixelPath>,
    pub samples: Vec<OrientedPoint>,
}

pub fn process_view(
    buffers: &RenderBuffers,
    camera: &Camera,
    external: Option<&EdgeMap>,
    params: &Orient2dParams,
) -> Result<ViewOrientation, Orient2dError> {
    let det = match external {
        Some(m) => EdgeDetector::External(m),
        None => EdgeDetector::Builtin { low: params.low, high: params.high },
    };
    let edges = detect_edges(&buffers.shading, det)?;
    let skeleton = skeletonize(&edges, params.threshold, params.spur_len);
    let paths = extract_longest_paths(&build_graph(&skeleton), params.min_path);
    let samples = lift_view(&paths, buffers, camera, &params.lift);
    Ok(ViewOrientation { edges, skeleton, paths, samples })
}

/// Concatenate per-view samples in view order into one field.
pub fn merge_views(views: &[ViewOrientation], radius: f64) -> OrientationField3D {
    OrientationField3D::new(views.iter().flat_map(|v| v.samples.iter().copied()).collect(), radius)
}
