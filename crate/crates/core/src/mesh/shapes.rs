//! Procedural meshes used as fixtures and as the default scalp.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use hashbrown::HashMap;

use super::TriMesh;
use crate::geom::Vec3;

/// Subdivided icosahedron projected to a sphere of radius `r` at the origin.
/// `subdiv` 1 gives 42 vertices / 80 faces, 5 gives 10 242 / 20 480.
pub fn icosphere(subdiv: u32, r: f64) -> TriMesh {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize_or_zero())
    .collect();
    let mut faces: Vec<[u32; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = ((verts[a as usize] + verts[b as usize]) * 0.5).normalize_or_zero();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    for v in &mut verts {
        *v *= r;
    }
    TriMesh { vertices: verts, faces, uvs: None }
}

/// Open tube of radius `r` around the z axis, `z ∈ [-h/2, h/2]`.
pub fn cylinder(r: f64, h: f64, around: usize, along: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(around * (along + 1));
    for j in 0..=along {
        let z = -0.5 * h + h * j as f64 / along as f64;
        for i in 0..around {
            let a = TAU * i as f64 / around as f64;
            vertices.push(Vec3::new(r * libm::cos(a), r * libm::sin(a), z));
        }
    }
    let mut faces = Vec::with_capacity(2 * around * along);
    for j in 0..along {
        for i in 0..around {
            let a = (j * around + i) as u32;
            let b = (j * around + (i + 1) % around) as u32;
            let c = a + around as u32;
            let d = b + around as u32;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriMesh { vertices, faces, uvs: None }
}

/// Torus around the z axis: ring radius `big_r`, tube radius `r`, `nu`
/// samples around the ring and `nv` around the tube. Tube angle 0 is the
/// outer equator.
pub fn torus(big_r: f64, r: f64, nu: usize, nv: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let phi = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let theta = TAU * j as f64 / nv as f64;
            let rho = big_r + r * libm::cos(theta);
            vertices.push(Vec3::new(rho * libm::cos(phi), rho * libm::sin(phi), r * libm::sin(theta)));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh { vertices, faces, uvs: None }
}

/// `nx × ny` vertex grid in the z = 0 plane, row-major, each quad split along
/// its `(i, j)–(i+1, j+1)` diagonal.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let a = (j * nx + i) as u32;
            let b = a + 1;
            let c = a + nx as u32;
            let d = c + 1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriMesh { vertices, faces, uvs: None }
}

/// Planar fan: center vertex 0 and `n` rim vertices.
pub fn fan(n: usize, r: f64) -> TriMesh {
    let mut vertices = alloc::vec![Vec3::ZERO];
    for i in 0..n {
        let a = TAU * i as f64 / n as f64;
        vertices.push(Vec3::new(r * libm::cos(a), r * libm::sin(a), 0.0));
    }
    let faces = (0..n).map(|i| [0, 1 + i as u32, 1 + ((i + 1) % n) as u32]).collect();
    TriMesh { vertices, faces, uvs: None }
}

/// Latitude/longitude sphere cap of radius `r` at `center`, from the +z pole
/// down to polar angle `max_polar`, with UVs `u = longitude / 2π` and
/// `v = polar / max_polar` covering `[0, 1]²`.
///
/// The seam column and the pole row are duplicated so UVs stay continuous;
/// do not weld this mesh. The pole row keeps its zero-area triangles so the
/// UV layout covers the whole square.
pub fn uv_sphere_cap(center: Vec3, r: f64, max_polar: f64, n_lat: usize, n_lon: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity((n_lat + 1) * (n_lon + 1));
    let mut uvs = Vec::with_capacity(vertices.capacity());
    for j in 0..=n_lat {
        let v = j as f64 / n_lat as f64;
        let polar = v * max_polar;
        for i in 0..=n_lon {
            let u = i as f64 / n_lon as f64;
            let lon = u * TAU;
            let dir = Vec3::new(libm::sin(polar) * libm::cos(lon), libm::sin(polar) * libm::sin(lon), libm::cos(polar));
            vertices.push(center + dir * r);
            uvs.push([u, v]);
        }
    }
    let w = (n_lon + 1) as u32;
    let mut faces = Vec::new();
    for j in 0..n_lat as u32 {
        for i in 0..n_lon as u32 {
            let a = j * w + i;
            let b = a + 1;
            let c = a + w;
            let d = c + 1;
            faces.push([a, c, b]);
            faces.push([b, c, d]);
        }
    }
    TriMesh { vertices, faces, uvs: Some(uvs) }
}

/// Default synthetic scalp: a hemisphere of radius 80 mm at the origin.
pub fn hemisphere_scalp(radius: f64) -> TriMesh {
    uv_sphere_cap(Vec3::ZERO, radius, 0.5 * PI, 48, 96)
}
