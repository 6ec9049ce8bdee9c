use hairfit::mesh_io::{read_obj, read_ply, write_obj, write_ply};
use hairfit::strands::{read_hair, read_native, write_hair, write_native, HAIR_HAS_POINTS, HAIR_HAS_SEGMENTS};
use hairfit_core::mesh::shapes;
use hairfit_core::strand::{Hairstyle, Polylines, StrandSet};
use hairfit_core::Vec3;
use proptest::prelude::*;

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes(b[o..o + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], o: usize) -> f32 {
    f32::from_le_bytes(b[o..o + 4].try_into().unwrap())
}

fn sample_set() -> StrandSet {
    StrandSet::from_strands([
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.5, 0.25), Vec3::new(2.0, 1.0, -0.5)],
        vec![Vec3::new(-3.0, 4.0, 5.0), Vec3::new(-3.5, 4.5, 6.0)],
    ])
}

#[test]
fn hair_header_matches_byte_layout() {
    let mut buf = Vec::new();
    write_hair(&sample_set(), &mut buf).unwrap();
    assert_eq!(&buf[0..4], b"HAIR");
    assert_eq!(u32_at(&buf, 4), 2, "strand count");
    assert_eq!(u32_at(&buf, 8), 5, "point count");
    assert_eq!(u32_at(&buf, 12), HAIR_HAS_SEGMENTS | HAIR_HAS_POINTS);
    assert_eq!(u32_at(&buf, 12) & 0b11, 0b11);
    assert_eq!(f32_at(&buf, 20), 1.0, "default thickness");
    assert_eq!(&buf[40..47], b"hairfit");
    assert!(buf[47..128].iter().all(|b| *b == 0));
    // Segment array, then points.
    assert_eq!(u16::from_le_bytes([buf[128], buf[129]]), 2);
    assert_eq!(u16::from_le_bytes([buf[130], buf[131]]), 1);
    let p = 132;
    assert_eq!([f32_at(&buf, p + 12), f32_at(&buf, p + 16), f32_at(&buf, p + 20)], [1.0, 0.5, 0.25]);
    assert_eq!(f32_at(&buf, p + 4 * 12 + 8), 6.0);
    assert_eq!(buf.len(), 128 + 2 * 2 + 5 * 12);
}

/// A file as an external writer with only a point array would produce.
fn foreign_hair(flags: u32, extra_per_point: usize) -> Vec<u8> {
    let mut b = vec![0u8; 128];
    b[0..4].copy_from_slice(b"HAIR");
    b[4..8].copy_from_slice(&2u32.to_le_bytes());
    b[8..12].copy_from_slice(&6u32.to_le_bytes());
    b[12..16].copy_from_slice(&flags.to_le_bytes());
    b[16..20].copy_from_slice(&2u32.to_le_bytes());
    for k in 0..18 {
        b.extend_from_slice(&(k as f32).to_le_bytes());
    }
    for _ in 0..6 * extra_per_point {
        b.extend_from_slice(&0.5f32.to_le_bytes());
    }
    b
}

#[test]
fn hair_without_segment_array_uses_default_count() {
    let s = read_hair(&foreign_hair(HAIR_HAS_POINTS, 0)[..]).unwrap();
    assert_eq!(s.strand_count(), 2);
    assert_eq!(s.strand(0).len(), 3);
    assert_eq!(s.strand(1)[0], Vec3::new(9.0, 10.0, 11.0));
}

#[test]
fn hair_skips_thickness_and_color_arrays() {
    // Thickness (1 float) and color (3 floats) per point.
    let s = read_hair(&foreign_hair(HAIR_HAS_POINTS | (1 << 2) | (1 << 4), 4)[..]).unwrap();
    assert_eq!(s.total_points(), 6);
    assert_eq!(s.strand(1)[2], Vec3::new(15.0, 16.0, 17.0));
}

#[test]
fn hair_rejects_inconsistent_counts_and_truncation() {
    let mut bad = foreign_hair(HAIR_HAS_POINTS, 0);
    bad[8..12].copy_from_slice(&7u32.to_le_bytes());
    assert!(read_hair(&bad[..]).is_err());
    let good = foreign_hair(HAIR_HAS_POINTS, 0);
    assert!(read_hair(&good[..good.len() - 1]).is_err());
    assert!(read_hair(&foreign_hair(HAIR_HAS_SEGMENTS, 0)[..]).is_err());
    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(read_hair(&magic[..]).is_err());
}

fn hairstyle() -> Hairstyle {
    let points = (0..12).map(|k| Vec3::new(k as f64 * 0.125, -(k as f64), 3.0 + k as f64 / 3.0)).collect();
    Hairstyle::new(4, points, vec![[0, 1], [255, 7], [12, 65535]]).unwrap()
}

#[test]
fn native_round_trip_and_size_checks() {
    let h = hairstyle();
    let mut buf = Vec::new();
    write_native(&h, &mut buf).unwrap();
    assert_eq!(&buf[0..4], b"STR1");
    assert_eq!(buf.len(), 12 + 12 * 12 + 3 * 4);
    let back = read_native(&buf[..]).unwrap();
    assert_eq!(back.root_texels, h.root_texels);
    let mut again = Vec::new();
    write_native(&back, &mut again).unwrap();
    assert_eq!(buf, again);

    // Header L disagrees with the payload.
    let mut wrong_l = buf.clone();
    wrong_l[8..12].copy_from_slice(&5u32.to_le_bytes());
    assert!(read_native(&wrong_l[..]).is_err());
    assert!(read_native(&buf[..buf.len() - 2]).is_err());
}

#[test]
fn native_to_hair_preserves_points() {
    let h = hairstyle();
    let mut native = Vec::new();
    write_native(&h, &mut native).unwrap();
    let back = read_native(&native[..]).unwrap();
    let mut hair = Vec::new();
    write_hair(&back, &mut hair).unwrap();
    let s = read_hair(&hair[..]).unwrap();
    assert_eq!(s, back.to_strand_set());
}

#[test]
fn meshes_round_trip_through_obj_and_ply() {
    // With UVs the OBJ reader splits vertices per (v, vt) pair, so compare
    // corners rather than indices.
    let scalp = shapes::hemisphere_scalp(10.0);
    let mut obj = Vec::new();
    write_obj(&scalp, &mut obj).unwrap();
    let a = read_obj(&obj[..]).unwrap();
    assert_eq!(a.faces.len(), scalp.faces.len());
    let (auv, suv) = (a.uvs.as_ref().unwrap(), scalp.uvs.as_ref().unwrap());
    for (fa, fs) in a.faces.iter().zip(&scalp.faces) {
        for k in 0..3 {
            let (i, j) = (fa[k] as usize, fs[k] as usize);
            assert!((a.vertices[i] - scalp.vertices[j]).norm() < 1e-5);
            assert!((auv[i][0] - suv[j][0]).abs() < 1e-6 && (auv[i][1] - suv[j][1]).abs() < 1e-6);
        }
    }

    let m = shapes::torus(3.0, 1.0, 24, 12);
    let mut obj = Vec::new();
    write_obj(&m, &mut obj).unwrap();
    assert_eq!(read_obj(&obj[..]).unwrap().faces, m.faces);
    for binary in [false, true] {
        let mut ply = Vec::new();
        write_ply(&m, &mut ply, binary).unwrap();
        let b = read_ply(&ply[..]).unwrap();
        assert_eq!(b.faces, m.faces);
        let tol = 1e-5;
        for (p, q) in b.vertices.iter().zip(&m.vertices) {
            assert!((*p - *q).norm() < tol);
        }
    }
}

fn strand_set() -> impl Strategy<Value = Vec<Vec<(f32, f32, f32)>>> {
    let pt = (-1e3f32..1e3, -1e3f32..1e3, -1e3f32..1e3);
    prop::collection::vec(prop::collection::vec(pt, 1..20), 0..12)
}

proptest! {
    #[test]
    fn hair_round_trip_is_bit_exact(strands in strand_set()) {
        let set = StrandSet::from_strands(strands.iter().map(|s| {
            s.iter().map(|p| Vec3::new(p.0 as f64, p.1 as f64, p.2 as f64)).collect::<Vec<_>>()
        }));
        let mut a = Vec::new();
        write_hair(&set, &mut a).unwrap();
        let back = read_hair(&a[..]).unwrap();
        prop_assert_eq!(&back, &set);
        let mut b = Vec::new();
        write_hair(&back, &mut b).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn native_round_trip_is_bit_exact(n in 1usize..8, l in 2usize..10, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = hairfit_core::rng::stream(seed, hairfit_core::rng::Purpose::Fixture, 0);
        let points = (0..n * l).map(|_| Vec3::new(
            rng.random_range(-500.0f32..500.0) as f64,
            rng.random_range(-500.0f32..500.0) as f64,
            rng.random_range(-500.0f32..500.0) as f64,
        )).collect();
        let texels = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let h = Hairstyle::new(l, points, texels).unwrap();
        let mut a = Vec::new();
        write_native(&h, &mut a).unwrap();
        let back = read_native(&a[..]).unwrap();
        prop_assert_eq!(&back, &h);
    }
}
