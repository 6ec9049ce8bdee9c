//! Intermediate artifacts: curvature tables, orientation fields, crest
//! line sets, loss traces and metric reports.
//!
//! Field files (`FLD1`): magic, u32 record count, f32 lookup radius, u32
//! reserved, then per record position f32×3, direction f32×3, weight f32.
//!
//! Curvature files (`CRV1`): magic, u32 vertex count, then per vertex u32
//! id, f32 k_max, f32 k_min, f32×3 t_max, f32×3 t_min, f32 e_max, f32 e_min
//! and a u8 flag byte (bit0 valid, bit1 umbilic).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use hairfit_core::crest::{CrestKind, CrestSet};
use hairfit_core::curvature::VertexCurvature;
use hairfit_core::eval::MetricReport;
use hairfit_core::fit::TraceRow;
use hairfit_core::orient3d::{OrientationField3D, OrientedPoint};
use hairfit_core::Vec3;

use crate::error::{Error, FormatError};
use crate::mesh_io::{write_ply_lines, write_ply_points};

pub(crate) fn save_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<(), FormatError>,
) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::file(path, e.into()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush().map_err(FormatError::from)).map_err(|e| Error::file(path, e))
}

fn put_f32(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

pub fn write_curvature<W: Write>(curv: &[VertexCurvature], mut w: W) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(8 + 45 * curv.len());
    buf.extend_from_slice(b"CRV1");
    buf.extend_from_slice(&(curv.len() as u32).to_le_bytes());
    for (i, c) in curv.iter().enumerate() {
        buf.extend_from_slice(&(i as u32).to_le_bytes());
        for v in [c.k_max, c.k_min, c.t_max.x, c.t_max.y, c.t_max.z, c.t_min.x, c.t_min.y, c.t_min.z, c.e_max, c.e_min]
        {
            put_f32(&mut buf, v);
        }
        buf.push(u8::from(c.valid) | (u8::from(c.umbilic) << 1));
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_field<W: Write>(field: &OrientationField3D, mut w: W) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(16 + 28 * field.len());
    buf.extend_from_slice(b"FLD1");
    buf.extend_from_slice(&(field.len() as u32).to_le_bytes());
    put_f32(&mut buf, field.radius());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for p in field.points() {
        for v in [p.position.x, p.position.y, p.position.z, p.direction.x, p.direction.y, p.direction.z, p.weight] {
            put_f32(&mut buf, v);
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<OrientationField3D, FormatError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(FormatError::truncated)?;
    if &head[0..4] != b"FLD1" {
        return Err(FormatError::invalid("bad magic, expected FLD1"));
    }
    let n = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
    let radius = f32::from_le_bytes([head[8], head[9], head[10], head[11]]) as f64;
    if !(radius > 0.0) {
        return Err(FormatError::invalid("field radius must be positive"));
    }
    let mut buf = vec![0u8; 28 * n];
    r.read_exact(&mut buf).map_err(FormatError::truncated)?;
    let vals: Vec<f64> = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    let points = vals
        .chunks_exact(7)
        .map(|v| OrientedPoint {
            position: Vec3::new(v[0], v[1], v[2]),
            direction: Vec3::new(v[3], v[4], v[5]),
            weight: v[6],
        })
        .collect();
    Ok(OrientationField3D::new(points, radius))
}

pub fn save_field(path: &Path, field: &OrientationField3D) -> Result<(), Error> {
    save_with(path, |w| write_field(field, w))
}

pub fn load_field(path: &Path) -> Result<OrientationField3D, Error> {
    let f = File::open(path).map_err(|e| Error::file(path, e.into()))?;
    read_field(BufReader::new(f)).map_err(|e| Error::file(path, e))
}

/// Field as a point cloud whose normals are the line directions.
pub fn save_field_ply(path: &Path, field: &OrientationField3D) -> Result<(), Error> {
    let pos: Vec<Vec3> = field.points().iter().map(|p| p.position).collect();
    let dir: Vec<Vec3> = field.points().iter().map(|p| p.direction).collect();
    save_with(path, |w| write_ply_points(&pos, Some(&dir), w))
}

pub fn save_curvature(path: &Path, curv: &[VertexCurvature]) -> Result<(), Error> {
    save_with(path, |w| write_curvature(curv, w))
}

/// Crest lines of one kind as a PLY line set.
pub fn save_crest_ply(path: &Path, crest: &CrestSet, kind: CrestKind) -> Result<(), Error> {
    let lines: Vec<(&[Vec3], bool)> =
        crest.lines.iter().filter(|l| l.kind == kind).map(|l| (l.points.as_slice(), l.closed)).collect();
    save_with(path, |w| write_ply_lines(&lines, w))
}

pub const TRACE_HEADER: &str = "step,L_vol,L_chm,L_orient3D,L_orient2D,L_diff,total,sigma,lr";

pub fn write_trace<W: Write>(rows: &[TraceRow], mut w: W) -> Result<(), FormatError> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.step, r.vol, r.chm, r.orient3d, r.orient2d, r.diff, r.total, r.sigma, r.lr
        )?;
    }
    Ok(())
}

pub const METRICS_HEADER: &str = "threshold_d,threshold_deg,precision,recall,fscore,pred_samples,gt_samples";

/// Metric CSV. The leading comment records the threshold units.
pub fn write_metrics<W: Write>(report: &MetricReport, mut w: W) -> Result<(), FormatError> {
    writeln!(w, "# thresholds: distance in mm, angle in degrees")?;
    writeln!(w, "{METRICS_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{:.4},{:.4},{:.4},{},{}",
            r.threshold.distance, r.threshold.angle, r.precision, r.recall, r.fscore, r.pred_samples, r.gt_samples
        )?;
    }
    Ok(())
}

/// Whitespace- or comma-separated floats.
pub fn load_embedding(path: &Path) -> Result<Vec<f64>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e.into()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::file(path, FormatError::invalid(format!("bad number '{t}'")))))
        .collect()
}
