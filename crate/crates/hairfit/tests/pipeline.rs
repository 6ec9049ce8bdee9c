use std::path::{Path, PathBuf};
use std::process::Command;

use hairfit::config::{DenoiserKind, RunConfig};
use hairfit::mesh_io::save_mesh;
use hairfit::pipeline::{self, FIELD2D_FILE, FIELD3D_FILE, HAIR_FILE, STRANDS_FILE, TRACE_FILE};
use hairfit::strands::{load_native, save_hair};
use hairfit_core::eval::{straight_wig, voxelize_strands, WigParams};
use hairfit_core::mesh::shapes;
use hairfit_core::rng::{stream, Purpose};
use hairfit_core::strand::{Hairstyle, ScalpMap, StrandSet};
use hairfit_core::Vec3;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_hairfit");

fn small_wig() -> Hairstyle {
    let map = ScalpMap::full(&shapes::hemisphere_scalp(80.0), 64).unwrap();
    let params = WigParams { strands: 20, points_per_strand: 10, length: 30.0, droop: 20.0, clearance: 3.0 };
    straight_wig(&map, 80.0, &params, &mut stream(3, Purpose::Fixture, 0)).unwrap()
}

struct Fixture {
    _dir: TempDir,
    root: PathBuf,
    gt: PathBuf,
}

/// Voxelized small wig as the hair mesh, ground truth as `.hair`.
fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let root = dir.path().to_path_buf();
    let wig = small_wig();
    save_mesh(&root.join("hair.ply"), &voxelize_strands(&wig, 1.0, 1.0).unwrap()).unwrap();
    let gt = root.join("gt.hair");
    save_hair(&gt, &wig).unwrap();
    Fixture { _dir: dir, root, gt }
}

fn fit_config(f: &Fixture, out: &str) -> RunConfig {
    let mut c = RunConfig::default();
    c.input.hair_mesh = Some(f.root.join("hair.ply"));
    c.output.dir = f.root.join(out);
    c.scalp.tau = 3.0;
    c.scalp.resolution = 64;
    c.scalp.strands = 20;
    c.scalp.points_per_strand = 10;
    c.scalp.length = 30.0;
    c.fit.steps = 60;
    c.fit.lr = 0.2;
    c.fit.chamfer_samples = 500;
    c.fit.feature_grid = 8;
    c.prior.denoiser = DenoiserKind::None;
    c
}

/// Empty orientation dumps so `fit` can run without `orient`.
fn empty_fields(out: &Path) {
    std::fs::create_dir_all(out).unwrap();
    let empty = hairfit_core::orient3d::OrientationField3D::empty(5.0);
    hairfit::dumps::save_field(&out.join(FIELD3D_FILE), &empty).unwrap();
    hairfit::dumps::save_field(&out.join(FIELD2D_FILE), &empty).unwrap();
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn zero_views_is_a_config_error_before_any_work() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = Command::new(BIN)
        .args(["orient", "--views", "0", "--hair", "missing.ply", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("render.views"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_and_bad_values_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[fit]\nsteps = 10\nlearning_rate = 0.1\n").unwrap();
    let o = Command::new(BIN).arg("--config").arg(&cfg).arg("config").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));

    std::fs::write(&cfg, "[voxelize]\nvoxel = 1.0\nradius = 0.2\n").unwrap();
    let o = Command::new(BIN).arg("--config").arg(&cfg).arg("config").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("voxelize.radius"));
}

#[test]
fn missing_input_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(BIN)
        .args(["render", "--views", "1", "--resolution", "8", "--hair", "does-not-exist.obj", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_echo_shows_optimization_defaults() {
    let o = Command::new(BIN).arg("config").output().unwrap();
    assert!(o.status.success());
    let c = RunConfig::from_toml(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(c.fit.lr, 0.001);
    assert_eq!(c.fit.steps, 75_000);
    assert_eq!(c.fit.gamma, 0.5);
    assert_eq!((c.prior.sigma_max, c.prior.sigma_min), (80.0, 0.5));
    assert_eq!(c.prior.cfg_weight, 4.0);
    assert_eq!(c.weights.alpha, 0.5);
    assert_eq!(c.prior.denoise_steps_early, 2);
    assert_eq!(c.prior.early_iters, 10_000);
}

#[test]
fn orient_on_torus_finds_the_outer_ring_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let mesh = shapes::torus(20.0, 5.0, 160, 40);
    save_mesh(&dir.path().join("torus.ply"), &mesh).unwrap();
    let mut c = RunConfig::default();
    c.input.hair_mesh = Some(dir.path().join("torus.ply"));
    c.render.views = 2;
    c.render.width = 96;
    c.render.height = 96;
    c.output.views = false;
    let run = |name: &str| {
        let mut c = c.clone();
        c.output.dir = dir.path().join(name);
        pipeline::cmd_orient(&c).unwrap()
    };
    let a = run("a");
    assert!(!a.field3d.is_empty());
    // The traced rings lie on the outer (radius 25) or inner (15) equator.
    let outer = a
        .field3d
        .points()
        .iter()
        .filter(|p| (Vec3::new(p.position.x, p.position.y, 0.0).norm() - 25.0).abs() < 0.5 && p.position.z.abs() < 0.5)
        .count();
    let inner = a
        .field3d
        .points()
        .iter()
        .filter(|p| (Vec3::new(p.position.x, p.position.y, 0.0).norm() - 15.0).abs() < 0.5)
        .count();
    assert!(outer + inner >= a.field3d.len() * 9 / 10, "outer {outer} inner {inner} of {}", a.field3d.len());
    assert!(!a.field2d.is_empty());
    run("b");
    for f in [FIELD3D_FILE, FIELD2D_FILE, "curvature.crv", "crest_convex.ply"] {
        assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn fit_without_field_dumps_is_an_input_error() {
    let f = fixture();
    let err = pipeline::cmd_fit(&fit_config(&f, "out")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn fit_is_deterministic_and_writes_all_outputs() {
    let f = fixture();
    let mut outs = Vec::new();
    for name in ["a", "b"] {
        let mut c = fit_config(&f, name);
        c.prior.denoiser = DenoiserKind::Smoothing;
        c.weights.diff = 0.01;
        c.fit.checkpoint_every = 30;
        empty_fields(&c.output.dir);
        pipeline::cmd_fit(&c).unwrap();
        outs.push(c.output.dir);
    }
    for file in [STRANDS_FILE, HAIR_FILE, TRACE_FILE, "scalp_map.pgm", "checkpoints/step_000060.str"] {
        assert_eq!(read(&outs[0].join(file)), read(&outs[1].join(file)), "{file}");
    }
    let h = load_native(&outs[0].join(STRANDS_FILE)).unwrap();
    assert_eq!((h.len(), h.points_per_strand()), (20, 10));
    let trace = String::from_utf8(read(&outs[0].join(TRACE_FILE))).unwrap();
    assert_eq!(trace.lines().count(), 61);
    assert!(trace.lines().nth(1).unwrap().split(',').nth(5).unwrap().parse::<f64>().unwrap() > 0.0);
}

#[test]
fn zero_diffusion_weight_matches_no_denoiser() {
    let f = fixture();
    let mut a = fit_config(&f, "a");
    a.prior.denoiser = DenoiserKind::Smoothing;
    a.weights.diff = 0.0;
    let b = fit_config(&f, "b");
    for c in [&a, &b] {
        empty_fields(&c.output.dir);
        pipeline::cmd_fit(c).unwrap();
    }
    for file in [STRANDS_FILE, TRACE_FILE] {
        assert_eq!(read(&a.output.dir.join(file)), read(&b.output.dir.join(file)), "{file}");
    }
}

#[test]
fn fit_reduces_volume_loss_tenfold() {
    let f = fixture();
    let mut c = fit_config(&f, "out");
    c.fit.steps = 2000;
    c.fit.lr = 0.05;
    empty_fields(&c.output.dir);
    let r = pipeline::cmd_fit(&c).unwrap();
    let first = r.trace[0].vol;
    let last = r.trace.last().unwrap().vol;
    assert!(last < first / 10.0, "L_vol {first} -> {last}");
}

#[test]
fn diverging_fit_exits_4() {
    let f = fixture();
    let out = f.root.join("out");
    empty_fields(&out);
    let o = Command::new(BIN)
        .args(["fit", "--denoiser", "none", "--strands", "5", "--steps", "50", "--lr", "1e300", "--resolution", "8"])
        .arg("--hair")
        .arg(f.root.join("hair.ply"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

fn metrics_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let f = fixture();
    let c = fit_config(&f, "eval");
    let r = pipeline::cmd_eval(&c, &f.gt, &f.gt).unwrap();
    assert!(r.rows.iter().all(|r| r.precision == 100.0 && r.recall == 100.0 && r.fscore == 100.0));
    let text = std::fs::read_to_string(c.output.dir.join("metrics.csv")).unwrap();
    assert!(text.starts_with("# thresholds: distance in mm, angle in degrees\n"));
    assert_eq!(metrics_rows(&c.output.dir.join("metrics.csv")).len(), 3);
}

#[test]
fn eval_reports_hand_computed_fixtures() {
    let dir = TempDir::new().unwrap();
    let line = |y: f64| (0..=10).map(|k| Vec3::new(k as f64, y, 0.0)).collect::<Vec<_>>();
    let gt = dir.path().join("gt.hair");
    save_hair(&gt, &StrandSet::from_strands([line(0.0)])).unwrap();

    // Parallel copy 2.5 mm away: outside 2 mm, inside 3 and 4 mm.
    let shifted = dir.path().join("shifted.hair");
    save_hair(&shifted, &StrandSet::from_strands([line(2.5)])).unwrap();
    let mut c = RunConfig::default();
    c.output.dir = dir.path().join("a");
    pipeline::cmd_eval(&c, &shifted, &gt).unwrap();
    let rows = metrics_rows(&c.output.dir.join("metrics.csv"));
    assert_eq!(rows[0], vec![2.0, 20.0, 0.0, 0.0, 0.0, 32.0, 32.0]);
    assert_eq!(rows[1], vec![3.0, 30.0, 100.0, 100.0, 100.0, 32.0, 32.0]);
    assert_eq!(rows[2], vec![4.0, 40.0, 100.0, 100.0, 100.0, 32.0, 32.0]);

    // An exact copy plus a stray strand 50 mm away: P 50, R 100, F 66.67.
    let extra = dir.path().join("extra.hair");
    save_hair(&extra, &StrandSet::from_strands([line(0.0), line(50.0)])).unwrap();
    c.output.dir = dir.path().join("b");
    pipeline::cmd_eval(&c, &extra, &gt).unwrap();
    for row in metrics_rows(&c.output.dir.join("metrics.csv")) {
        assert_eq!(&row[2..], &[50.0, 100.0, 66.6667, 64.0, 32.0]);
    }
}

#[test]
fn voxelize_command_writes_a_tube() {
    let dir = TempDir::new().unwrap();
    let strands = dir.path().join("one.hair");
    save_hair(
        &strands,
        &StrandSet::from_strands([(0..=20).map(|k| Vec3::new(0.0, 0.0, k as f64)).collect::<Vec<_>>()]),
    )
    .unwrap();
    let mesh = dir.path().join("tube.ply");
    let o = Command::new(BIN)
        .args(["voxelize", "--voxel", "0.5", "--radius", "1"])
        .arg(&strands)
        .arg(&mesh)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = hairfit::mesh_io::load_mesh(&mesh).unwrap();
    assert!(!m.faces.is_empty());
    for v in &m.vertices {
        let axial = v.z.clamp(0.0, 20.0);
        let d = (*v - Vec3::new(0.0, 0.0, axial)).norm();
        assert!((d - 1.0).abs() < 0.5, "vertex {v:?} at distance {d}");
    }

    let empty = dir.path().join("empty.hair");
    save_hair(&empty, &StrandSet::from_strands(Vec::<Vec<Vec3>>::new())).unwrap();
    let o = Command::new(BIN).arg("voxelize").arg(&empty).arg(dir.path().join("e.ply")).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}
