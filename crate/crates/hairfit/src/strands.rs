//! Strand files: the Cem Yuksel `.hair` format and the native `STR1` format.
//!
//! `.hair` (little-endian): a 128-byte header
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `HAIR` |
//! | 4 | 4 | u32 strand count |
//! | 8 | 4 | u32 total point count |
//! | 12 | 4 | u32 flags: bit0 segments, bit1 points, bit2 thickness, bit3 transparency, bit4 color |
//! | 16 | 4 | u32 default segment count |
//! | 20 | 4 | f32 default thickness |
//! | 24 | 4 | f32 default transparency |
//! | 28 | 12 | f32×3 default color |
//! | 40 | 88 | info string, NUL padded |
//!
//! followed by the arrays whose flag is set, in flag order: u16 segments per
//! strand, f32 xyz per point, f32 thickness per point, f32 transparency per
//! point, f32 rgb per point.
//!
//! `STR1`: magic, u32 strand count `N`, u32 points per strand `L`, `N·L`
//! f32 xyz points strand-major, then `N` u16 pairs of root texel coordinates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use hairfit_core::strand::{Hairstyle, Polylines, StrandSet};
use hairfit_core::Vec3;

use crate::error::{Error, FormatError};

pub const HAIR_HEADER_LEN: usize = 128;
pub const HAIR_HAS_SEGMENTS: u32 = 1 << 0;
pub const HAIR_HAS_POINTS: u32 = 1 << 1;
pub const HAIR_HAS_THICKNESS: u32 = 1 << 2;
pub const HAIR_HAS_TRANSPARENCY: u32 = 1 << 3;
pub const HAIR_HAS_COLOR: u32 = 1 << 4;

const HAIR_INFO: &[u8] = b"hairfit";

#[derive(Debug, Clone, PartialEq)]
pub struct HairHeader {
    pub strands: u32,
    pub points: u32,
    pub flags: u32,
    pub default_segments: u32,
    pub default_thickness: f32,
    pub default_transparency: f32,
    pub default_color: [f32; 3],
    pub info: [u8; 88],
}

impl HairHeader {
    pub fn to_bytes(&self) -> [u8; HAIR_HEADER_LEN] {
        let mut b = [0u8; HAIR_HEADER_LEN];
        b[0..4].copy_from_slice(b"HAIR");
        b[4..8].copy_from_slice(&self.strands.to_le_bytes());
        b[8..12].copy_from_slice(&self.points.to_le_bytes());
        b[12..16].copy_from_slice(&self.flags.to_le_bytes());
        b[16..20].copy_from_slice(&self.default_segments.to_le_bytes());
        b[20..24].copy_from_slice(&self.default_thickness.to_le_bytes());
        b[24..28].copy_from_slice(&self.default_transparency.to_le_bytes());
        for k in 0..3 {
            b[28 + 4 * k..32 + 4 * k].copy_from_slice(&self.default_color[k].to_le_bytes());
        }
        b[40..128].copy_from_slice(&self.info);
        b
    }

    pub fn from_bytes(b: &[u8; HAIR_HEADER_LEN]) -> Result<Self, FormatError> {
        if &b[0..4] != b"HAIR" {
            return Err(FormatError::invalid("bad magic, expected HAIR"));
        }
        let u = |o: usize| u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
        let f = |o: usize| f32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
        let mut info = [0u8; 88];
        info.copy_from_slice(&b[40..128]);
        Ok(Self {
            strands: u(4),
            points: u(8),
            flags: u(12),
            default_segments: u(16),
            default_thickness: f(20),
            default_transparency: f(24),
            default_color: [f(28), f(32), f(36)],
            info,
        })
    }
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>, FormatError> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf).map_err(FormatError::truncated)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn read_u16s<R: Read>(r: &mut R, n: usize) -> Result<Vec<u16>, FormatError> {
    let mut buf = vec![0u8; n * 2];
    r.read_exact(&mut buf).map_err(FormatError::truncated)?;
    Ok(buf.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
}

/// Read a `.hair` stream. Thickness, transparency and color arrays are
/// skipped; without a segments array every strand gets the default count.
pub fn read_hair<R: Read>(mut r: R) -> Result<StrandSet, FormatError> {
    let mut hb = [0u8; HAIR_HEADER_LEN];
    r.read_exact(&mut hb).map_err(FormatError::truncated)?;
    let h = HairHeader::from_bytes(&hb)?;
    if h.flags & HAIR_HAS_POINTS == 0 {
        return Err(FormatError::invalid("flags declare no point array"));
    }
    let n = h.strands as usize;
    let segments: Vec<usize> = if h.flags & HAIR_HAS_SEGMENTS != 0 {
        read_u16s(&mut r, n)?.into_iter().map(usize::from).collect()
    } else {
        vec![h.default_segments as usize; n]
    };
    let expected: usize = segments.iter().map(|s| s + 1).sum();
    if expected != h.points as usize {
        return Err(FormatError::invalid(format!(
            "segment counts imply {expected} points, header declares {}",
            h.points
        )));
    }
    let xyz = read_f32s(&mut r, 3 * expected)?;
    let mut strands = Vec::with_capacity(n);
    let mut k = 0;
    for s in segments {
        strands.push(
            (0..=s)
                .map(|_| {
                    let p = Vec3::new(xyz[k] as f64, xyz[k + 1] as f64, xyz[k + 2] as f64);
                    k += 3;
                    p
                })
                .collect(),
        );
    }
    Ok(StrandSet::from_strands(strands))
}

/// Write points and per-strand segment counts.
pub fn write_hair<P: Polylines + ?Sized, W: Write>(h: &P, mut w: W) -> Result<(), FormatError> {
    let n = h.strand_count();
    let mut segments = Vec::with_capacity(n);
    for i in 0..n {
        let len = h.strand(i).len();
        if len == 0 || len - 1 > u16::MAX as usize {
            return Err(FormatError::invalid(format!("strand {i} has {len} points; .hair needs 1..=65536")));
        }
        segments.push((len - 1) as u16);
    }
    let total = h.total_points();
    let mut info = [0u8; 88];
    info[..HAIR_INFO.len()].copy_from_slice(HAIR_INFO);
    let header = HairHeader {
        strands: u32::try_from(n).map_err(|_| FormatError::invalid("too many strands"))?,
        points: u32::try_from(total).map_err(|_| FormatError::invalid("too many points"))?,
        flags: HAIR_HAS_SEGMENTS | HAIR_HAS_POINTS,
        default_segments: segments.first().copied().unwrap_or(0) as u32,
        default_thickness: 1.0,
        default_transparency: 0.0,
        default_color: [0.0; 3],
        info,
    };
    w.write_all(&header.to_bytes())?;
    let mut buf = Vec::with_capacity(2 * n + 12 * total);
    for s in &segments {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    for i in 0..n {
        for p in h.strand(i) {
            for c in [p.x, p.y, p.z] {
                buf.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_native<R: Read>(mut r: R) -> Result<Hairstyle, FormatError> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head).map_err(FormatError::truncated)?;
    if &head[0..4] != b"STR1" {
        return Err(FormatError::invalid("bad magic, expected STR1"));
    }
    let n = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
    let l = u32::from_le_bytes([head[8], head[9], head[10], head[11]]) as usize;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let expected = n * l * 12 + n * 4;
    if rest.len() != expected {
        return Err(FormatError::invalid(format!(
            "payload is {} bytes, header N={n} L={l} needs {expected}",
            rest.len()
        )));
    }
    let mut cur = &rest[..];
    let xyz = read_f32s(&mut cur, 3 * n * l)?;
    let texels = read_u16s(&mut cur, 2 * n)?;
    let points = xyz.chunks_exact(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect();
    let roots = texels.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    Hairstyle::new(l, points, roots).map_err(|e| FormatError::invalid(e.to_string()))
}

pub fn write_native<W: Write>(h: &Hairstyle, mut w: W) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(12 + h.points.len() * 12 + h.len() * 4);
    buf.extend_from_slice(b"STR1");
    buf.extend_from_slice(&(h.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(h.points_per_strand() as u32).to_le_bytes());
    for p in &h.points {
        for c in [p.x, p.y, p.z] {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    for t in &h.root_texels {
        buf.extend_from_slice(&t[0].to_le_bytes());
        buf.extend_from_slice(&t[1].to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path).map(BufReader::new).map_err(|e| Error::file(path, e.into()))
}

fn save_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), FormatError>) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::file(path, e.into()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush().map_err(FormatError::from)).map_err(|e| Error::file(path, e))
}

pub fn load_hair(path: &Path) -> Result<StrandSet, Error> {
    read_hair(open(path)?).map_err(|e| Error::file(path, e))
}

pub fn save_hair<P: Polylines + ?Sized>(path: &Path, h: &P) -> Result<(), Error> {
    save_with(path, |w| write_hair(h, w))
}

pub fn load_native(path: &Path) -> Result<Hairstyle, Error> {
    read_native(open(path)?).map_err(|e| Error::file(path, e))
}

pub fn save_native(path: &Path, h: &Hairstyle) -> Result<(), Error> {
    save_with(path, |w| write_native(h, w))
}

/// Load `.hair` or `.str` by extension as variable-length strands.
pub fn load_strands(path: &Path) -> Result<StrandSet, Error> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hair") => load_hair(path),
        _ => load_native(path).map(|h| h.to_strand_set()),
    }
}
