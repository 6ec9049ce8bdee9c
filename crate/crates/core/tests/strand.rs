use core::f64::consts::PI;

use hairfit_core::mesh::shapes;
use hairfit_core::rng::{stream, Purpose};
use hairfit_core::strand::{
    directions, estimate_scalp_map, init_strands, polyline_length, sample_roots, texel_uv, Polylines, ScalpMap,
    StrandError,
};
use hairfit_core::udf::TriBvh;
use hairfit_core::Vec3;
use proptest::prelude::*;

const R: f64 = 80.0;

fn scalp() -> hairfit_core::TriMesh {
    shapes::hemisphere_scalp(R)
}

#[test]
fn roots_lie_on_the_scalp() {
    let s = scalp();
    let map = ScalpMap::full(&s, 256).unwrap();
    let bvh = TriBvh::build(&s).unwrap();
    let roots = sample_roots(&map, 500, &mut stream(1, Purpose::Roots, 0)).unwrap();
    for r in &roots {
        assert!(bvh.distance(r.point).distance <= 1e-3);
        assert!((r.normal.norm() - 1.0).abs() < 1e-9);
        assert!(r.normal.dot(r.point / R) > 0.99);
    }
    let again = sample_roots(&map, 500, &mut stream(1, Purpose::Roots, 0)).unwrap();
    assert_eq!(roots, again);
}

#[test]
fn roots_on_a_uniform_mask_fill_uv_octants_evenly() {
    let map = ScalpMap::full(&scalp(), 256).unwrap();
    let n = 1000;
    let roots = sample_roots(&map, n, &mut stream(9, Purpose::Roots, 0)).unwrap();
    // Octants of the UV square: four longitude quarters times two polar halves.
    let mut counts = [0usize; 8];
    for r in &roots {
        let [u, v] = r.uv(256);
        let k = ((u * 4.0) as usize).min(3) * 2 + usize::from(v >= 0.5);
        counts[k] += 1;
    }
    let mean = n as f64 / 8.0;
    let sigma = (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
    for c in counts {
        assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn offset_copy_covers_the_whole_map() {
    let s = scalp();
    let hair = shapes::hemisphere_scalp(R + 2.0);
    let map = estimate_scalp_map(&hair, &s, 5.0, 64).unwrap();
    assert_eq!(map.masked_count(), ScalpMap::full(&s, 64).unwrap().masked_count());
}

#[test]
fn distant_hair_covers_nothing() {
    let s = scalp();
    let hair = shapes::icosphere(2, 5.0).transformed(&hairfit_core::Mat3::IDENTITY, Vec3::new(0.0, 0.0, 400.0));
    let map = estimate_scalp_map(&hair, &s, 6.0, 64).unwrap();
    assert_eq!(map.masked_count(), 0);
    let err = sample_roots(&map, 10, &mut stream(0, Purpose::Roots, 0)).unwrap_err();
    assert!(matches!(err, StrandError::NoCoverage));
}

#[test]
fn cap_of_hair_masks_its_solid_angle() {
    // Hair shell 2 mm above the scalp over polar angles up to 45°.
    let s = scalp();
    let cap = 0.25 * PI;
    let hair = shapes::uv_sphere_cap(Vec3::ZERO, R + 2.0, cap, 24, 96);
    let res = 128;
    let tau = 3.0;
    let map = estimate_scalp_map(&hair, &s, tau, res).unwrap();
    // Texel area on the UV sphere is proportional to sin(polar).
    let (mut masked, mut total) = (0.0, 0.0);
    for j in 0..res {
        for i in 0..res {
            if map.samples.get(i, j).is_none() {
                continue;
            }
            let w = (texel_uv(i, j, res)[1] * 0.5 * PI).sin();
            total += w;
            if *map.mask.get(i, j) {
                masked += w;
            }
        }
    }
    let fraction = masked / total;
    let analytic = 1.0 - cap.cos();
    assert!((fraction - analytic).abs() <= 0.1 * analytic, "{fraction} vs {analytic}");
    // Closing can add a texel one neighbor away from a raw hit.
    let bvh = TriBvh::build(&hair).unwrap();
    let diag = (R * 2.0 * PI / res as f64).hypot(R * 0.5 * PI / res as f64);
    for j in 0..res {
        for i in 0..res {
            if *map.mask.get(i, j) {
                let p = map.samples.get(i, j).unwrap().point;
                assert!(bvh.distance(p).distance <= tau + diag);
            }
        }
    }
}

#[test]
fn init_lengths_match_with_small_noise() {
    let map = ScalpMap::full(&scalp(), 64).unwrap();
    let roots = sample_roots(&map, 100, &mut stream(2, Purpose::Roots, 0)).unwrap();
    let h = init_strands(&roots, 25, 100.0, 0.1, &mut stream(2, Purpose::Init, 0)).unwrap();
    let mean = (0..h.len()).map(|i| polyline_length(h.strand(i))).sum::<f64>() / h.len() as f64;
    assert!((mean - 100.0).abs() <= 5.0, "{mean}");
    for (i, r) in roots.iter().enumerate() {
        assert_eq!(h.strand(i)[0], r.point);
    }
    let flat = init_strands(&roots, 2, 10.0, 0.0, &mut stream(2, Purpose::Init, 0)).unwrap();
    assert!((polyline_length(flat.strand(0)) - 10.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn strand_directions_are_unit(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 2..30)) {
        let s: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p.0, p.1, p.2)).collect();
        let d = directions(&s);
        for (k, b) in d.b.iter().enumerate() {
            if (s[k + 1] - s[k]).norm() > 1e-9 {
                prop_assert!((b.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
