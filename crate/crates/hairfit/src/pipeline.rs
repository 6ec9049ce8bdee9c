//! Subcommand implementations. Each writes its artifacts under the
//! configured output directory:
//!
//! | file | written by |
//! |------|------------|
//! | `config.toml` | every command (resolved configuration) |
//! | `curvature.crv`, `crest_convex.ply`, `crest_concave.ply` | `orient` |
//! | `field3d.fld`, `field3d.ply`, `field2d.fld`, `field2d.ply` | `orient` |
//! | `views/shading_NNN.png`, `views/depth_NNN.dpt` | `orient`, `render` |
//! | `views/edges_NNN.png`, `views/skeleton_NNN.png` | `orient` |
//! | `scalp_map.pgm`, `strands.str`, `strands.hair`, `trace.csv` | `fit` |
//! | `checkpoints/step_NNNNNN.str` | `fit` with `fit.checkpoint_every > 0` |
//! | `metrics.csv` | `eval`, `all` with `input.gt_strands` |

use std::path::{Path, PathBuf};

use log::info;

use hairfit_core::crest::{self, CrestKind, KindSelection};
use hairfit_core::curvature::compute_all;
use hairfit_core::eval::{evaluate, voxelize_strands, MetricReport};
use hairfit_core::fit::{
    fit_with, gaussian_toy, Denoiser, FeatureLayout, FitContext, FitResult, Prior, SmoothingDenoiser,
};
use hairfit_core::image::Grid;
use hairfit_core::mesh::{clean, shapes, TriMesh, VertexAdjacency};
use hairfit_core::orient2d::{merge_views, process_view, EdgeMap, ViewOrientation};
use hairfit_core::orient3d::{build_field, OrientationField3D};
use hairfit_core::render::{make_turntable, render_views, Camera, Intrinsics, RenderBuffers};
use hairfit_core::rng::{stream, Purpose};
use hairfit_core::strand::{estimate_scalp_map, init_strands, sample_roots, Hairstyle, Polylines, ScalpMap};
use hairfit_core::udf::TriBvh;

use crate::config::{DenoiserKind, RunConfig};
use crate::dumps;
use crate::error::{ConfigError, Error, Result};
use crate::mesh_io::{load_mesh, save_mesh};
use crate::raster::{load_gray, save_dpt1, save_gray};
use crate::strands::{load_strands, save_hair, save_native};

pub const FIELD3D_FILE: &str = "field3d.fld";
pub const FIELD2D_FILE: &str = "field2d.fld";
pub const STRANDS_FILE: &str = "strands.str";
pub const HAIR_FILE: &str = "strands.hair";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.csv";

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::file(path, e.into()))
}

fn prepare(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let out = cfg.output.dir.clone();
    ensure_dir(&out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())
        .map_err(|e| Error::file(&out.join("config.toml"), e.into()))?;
    Ok(out)
}

fn hair_mesh(cfg: &RunConfig) -> Result<TriMesh> {
    let path = cfg.input.hair_mesh.as_ref().ok_or_else(|| ConfigError::new("input.hair_mesh", "required"))?;
    let mesh = clean(&load_mesh(path)?, cfg.mesh.weld_epsilon);
    if mesh.faces.is_empty() {
        return Err(Error::stage("mesh", format!("{} has no usable faces", path.display())));
    }
    Ok(mesh)
}

fn scalp_mesh(cfg: &RunConfig) -> Result<TriMesh> {
    match &cfg.input.scalp_mesh {
        Some(p) => load_mesh(p),
        None => Ok(shapes::hemisphere_scalp(cfg.scalp.radius)),
    }
}

/// Turntable cameras framing the mesh bounding sphere unless a distance is set.
pub fn cameras(cfg: &RunConfig, mesh: &TriMesh) -> Result<Vec<Camera>> {
    let r = &cfg.render;
    let bounds = mesh.bounds();
    let target = bounds.center();
    let distance = if r.distance > 0.0 {
        r.distance
    } else {
        let radius = 0.5 * bounds.extent().norm();
        1.1 * radius / (0.5 * r.fov_deg.to_radians()).sin()
    };
    let intr = Intrinsics::from_fov(r.width, r.height, r.fov_deg);
    make_turntable(r.views, r.elevation_deg, distance, target, intr).map_err(|e| Error::stage("render", e))
}

fn view_path(out: &Path, kind: &str, i: usize, ext: &str) -> PathBuf {
    out.join("views").join(format!("{kind}_{i:03}.{ext}"))
}

fn save_buffers(out: &Path, views: &[RenderBuffers]) -> Result<()> {
    ensure_dir(&out.join("views"))?;
    for (i, b) in views.iter().enumerate() {
        save_gray(&view_path(out, "shading", i, "png"), &b.shading)?;
        save_dpt1(&view_path(out, "depth", i, "dpt"), &b.depth)?;
    }
    Ok(())
}

/// Render the hair mesh from every turntable view.
pub fn cmd_render(cfg: &RunConfig) -> Result<Vec<RenderBuffers>> {
    let out = prepare(cfg)?;
    let mesh = hair_mesh(cfg)?;
    let cams = cameras(cfg, &mesh)?;
    let views = render_views(&mesh, &cams);
    if cfg.output.views {
        save_buffers(&out, &views)?;
    }
    info!("rendered {} views", views.len());
    Ok(views)
}

#[derive(Debug, Clone)]
pub struct Orientations {
    pub field3d: OrientationField3D,
    pub field2d: OrientationField3D,
}

fn external_edges(cfg: &RunConfig, views: usize) -> Result<Option<Vec<EdgeMap>>> {
    let Some(dir) = &cfg.input.edge_maps else { return Ok(None) };
    (0..views)
        .map(|i| load_gray(&dir.join(format!("edge_{i:03}.png"))).map(EdgeMap::from_grid))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Curvature, crest lines and the 3D field, then renders and the 2D field.
pub fn cmd_orient(cfg: &RunConfig) -> Result<Orientations> {
    let out = prepare(cfg)?;
    let mesh = hair_mesh(cfg)?;

    let adj = VertexAdjacency::build(&mesh);
    let curv = compute_all(&mesh, &adj, cfg.curvature.ring);
    dumps::save_curvature(&out.join("curvature.crv"), &curv)?;
    let crest = crest::detect(&mesh, &curv, KindSelection::Both, &cfg.crest_filter());
    dumps::save_crest_ply(&out.join("crest_convex.ply"), &crest, CrestKind::Convex)?;
    dumps::save_crest_ply(&out.join("crest_concave.ply"), &crest, CrestKind::Concave)?;
    let field3d = build_field(&crest, &cfg.field_params());
    info!("crest: {} lines, field3d: {} samples", crest.lines.len(), field3d.len());
    dumps::save_field(&out.join(FIELD3D_FILE), &field3d)?;
    dumps::save_field_ply(&out.join("field3d.ply"), &field3d)?;

    let cams = cameras(cfg, &mesh)?;
    let buffers = render_views(&mesh, &cams);
    let external = external_edges(cfg, cams.len())?;
    let params = cfg.orient2d_params();
    let views: Vec<ViewOrientation> = buffers
        .iter()
        .zip(&cams)
        .enumerate()
        .map(|(i, (b, c))| {
            let ext = external.as_ref().map(|e| &e[i]);
            process_view(b, c, ext, &params).map_err(|e| Error::stage("orient2d", format!("view {i}: {e}")))
        })
        .collect::<Result<_>>()?;
    if cfg.output.views {
        save_buffers(&out, &buffers)?;
        for (i, v) in views.iter().enumerate() {
            save_gray(&view_path(&out, "edges", i, "png"), &v.edges.0)?;
            save_gray(&view_path(&out, "skeleton", i, "png"), &v.skeleton.0.map(|b| if *b { 1.0 } else { 0.0 }))?;
        }
    }
    let field2d = merge_views(&views, cfg.orient2d.field_radius);
    info!("field2d: {} samples from {} views", field2d.len(), views.len());
    dumps::save_field(&out.join(FIELD2D_FILE), &field2d)?;
    dumps::save_field_ply(&out.join("field2d.ply"), &field2d)?;
    Ok(Orientations { field3d, field2d })
}

fn load_orientations(out: &Path) -> Result<Orientations> {
    Ok(Orientations {
        field3d: dumps::load_field(&out.join(FIELD3D_FILE))?,
        field2d: dumps::load_field(&out.join(FIELD2D_FILE))?,
    })
}

fn scalp_map_image(map: &ScalpMap) -> Grid<f64> {
    map.mask.map(|m| if *m { 1.0 } else { 0.0 })
}

/// Scalp map, roots, initial strands and the optimization. Uses the field
/// dumps from a previous `orient` run in the output directory.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitResult> {
    let out = prepare(cfg)?;
    let orient = load_orientations(&out)?;
    fit_stage(cfg, &out, &orient)
}

fn fit_stage(cfg: &RunConfig, out: &Path, orient: &Orientations) -> Result<FitResult> {
    let hair = hair_mesh(cfg)?;
    let scalp = scalp_mesh(cfg)?;
    let s = &cfg.scalp;
    let map = estimate_scalp_map(&hair, &scalp, s.tau, s.resolution).map_err(|e| Error::stage("scalp", e))?;
    info!("scalp map: {} of {} texels", map.masked_count(), s.resolution * s.resolution);
    save_gray(&out.join("scalp_map.pgm"), &scalp_map_image(&map))?;
    let roots = sample_roots(&map, s.strands, &mut stream(cfg.seed, Purpose::Roots, 0))
        .map_err(|e| Error::stage("roots", e))?;
    let init =
        init_strands(&roots, s.points_per_strand, s.length, s.init_noise, &mut stream(cfg.seed, Purpose::Init, 0))
            .map_err(|e| Error::stage("init", e))?;
    let bvh = TriBvh::build(&hair).map_err(|e| Error::stage("udf", e))?;

    let condition = match &cfg.input.condition {
        Some(p) => Some(dumps::load_embedding(p)?),
        None => None,
    };
    let toy;
    let smooth;
    let denoiser: Option<&dyn Denoiser> = match cfg.prior.denoiser {
        DenoiserKind::None => None,
        DenoiserKind::GaussianToy => {
            toy = gaussian_toy(cfg.prior.toy_mean, cfg.prior.toy_variance, cfg.prior.sigma_data);
            Some(&toy)
        }
        DenoiserKind::Smoothing => {
            let dim = FeatureLayout::new(&init, &map, cfg.fit.feature_grid).dim();
            smooth = SmoothingDenoiser { grid: cfg.fit.feature_grid, dim, sigma_data: cfg.prior.sigma_data };
            Some(&smooth)
        }
    };
    let ctx = FitContext {
        hair: &hair,
        bvh: &bvh,
        field3d: &orient.field3d,
        field2d: &orient.field2d,
        scalp: &map,
        prior: denoiser.map(|d| Prior { denoiser: d, schedule: cfg.schedule(), condition: condition.as_deref() }),
    };

    let every = cfg.fit.checkpoint_every;
    let ckpt_dir = out.join("checkpoints");
    if every > 0 {
        ensure_dir(&ckpt_dir)?;
    }
    let mut ckpt_err = None;
    let mut on_step = |step: usize, h: &Hairstyle| {
        if every > 0 && (step + 1) % every == 0 && ckpt_err.is_none() {
            if let Err(e) = save_native(&ckpt_dir.join(format!("step_{:06}.str", step + 1)), h) {
                ckpt_err = Some(e);
            }
        }
        if (step + 1) % 1000 == 0 {
            info!("step {}", step + 1);
        }
    };
    let result = fit_with(init, &ctx, &cfg.loss_weights(), &cfg.fit_config(), &mut on_step)?;
    if let Some(e) = ckpt_err {
        return Err(e);
    }
    save_native(&out.join(STRANDS_FILE), &result.hairstyle)?;
    save_hair(&out.join(HAIR_FILE), &result.hairstyle)?;
    dumps::save_with(&out.join(TRACE_FILE), |w| dumps::write_trace(&result.trace, w))?;
    Ok(result)
}

/// Precision, recall and F-score of `pred` against `gt`.
pub fn cmd_eval(cfg: &RunConfig, pred: &Path, gt: &Path) -> Result<MetricReport> {
    let out = prepare(cfg)?;
    let p = load_strands(pred)?;
    let g = load_strands(gt)?;
    eval_stage(cfg, &out, &p, &g)
}

fn eval_stage<P: Polylines + ?Sized, G: Polylines + ?Sized>(
    cfg: &RunConfig,
    out: &Path,
    pred: &P,
    gt: &G,
) -> Result<MetricReport> {
    let report =
        evaluate(pred, gt, &cfg.thresholds(), cfg.eval.samples_per_strand).map_err(|e| Error::stage("eval", e))?;
    for r in &report.rows {
        info!(
            "{} mm / {} deg: P {:.2} R {:.2} F {:.2}",
            r.threshold.distance, r.threshold.angle, r.precision, r.recall, r.fscore
        );
    }
    dumps::save_with(&out.join(METRICS_FILE), |w| dumps::write_metrics(&report, w))?;
    Ok(report)
}

/// Tube surface around every strand, written to `mesh_out`.
pub fn cmd_voxelize(cfg: &RunConfig, strands: &Path, mesh_out: &Path) -> Result<TriMesh> {
    cfg.validate()?;
    let s = load_strands(strands)?;
    let mesh =
        voxelize_strands(&s, cfg.voxelize.voxel, cfg.voxelize.radius).map_err(|e| Error::stage("voxelize", e))?;
    save_mesh(mesh_out, &mesh)?;
    info!("voxelized {} strands: {} vertices, {} faces", s.strand_count(), mesh.vertices.len(), mesh.faces.len());
    Ok(mesh)
}

/// `orient`, then `fit`, then `eval` when ground truth is configured.
pub fn cmd_all(cfg: &RunConfig) -> Result<(FitResult, Option<MetricReport>)> {
    let orient = cmd_orient(cfg)?;
    let out = cfg.output.dir.clone();
    let result = fit_stage(cfg, &out, &orient)?;
    let report = match &cfg.input.gt_strands {
        Some(gt) => Some(eval_stage(cfg, &out, &result.hairstyle, &load_strands(gt)?)?),
        None => None,
    };
    Ok((result, report))
}
