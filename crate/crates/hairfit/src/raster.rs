//! Grayscale images (binary PGM and PNG) and `DPT1` float grids.
//!
//! `DPT1` is a 16-byte header (magic, u32 width, u32 height, u32 reserved
//! = 0) followed by row-major little-endian f32 values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use hairfit_core::image::Grid;

use crate::error::{Error, FormatError};

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary (`P5`) 8-bit PGM of values in `[0, 1]`.
pub fn write_pgm<W: Write>(img: &Grid<f64>, mut w: W) -> Result<(), FormatError> {
    write!(w, "P5\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img.as_slice().iter().map(|v| to_u8(*v)).collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Binary or ASCII PGM with maxval up to 255, scaled to `[0, 1]`.
pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Grid<f64>, FormatError> {
    let mut header = Vec::new();
    let mut fields = Vec::new();
    // Magic, width, height and maxval, with '#' comments.
    while fields.len() < 4 {
        header.clear();
        if r.read_until(b'\n', &mut header)? == 0 {
            return Err(FormatError::invalid("truncated PGM header"));
        }
        let line = String::from_utf8_lossy(&header);
        let line = line.split('#').next().unwrap_or("");
        fields.extend(line.split_whitespace().map(str::to_string));
    }
    let ascii = match fields[0].as_str() {
        "P5" => false,
        "P2" => true,
        m => return Err(FormatError::invalid(format!("unsupported PGM magic {m}"))),
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| FormatError::invalid("bad PGM header"));
    let (w, h, max) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if max == 0 || max > 255 {
        return Err(FormatError::invalid("only 8-bit PGM is supported"));
    }
    let mut vals: Vec<f64> = Vec::with_capacity(w * h);
    vals.extend(fields[4..].iter().map(|s| num(s).map(|v| v as f64)).collect::<Result<Vec<_>, _>>()?);
    if ascii {
        let mut rest = String::new();
        r.read_to_string(&mut rest)?;
        for t in rest.split_whitespace() {
            vals.push(num(t)? as f64);
        }
    } else {
        let mut buf = vec![0u8; w * h];
        r.read_exact(&mut buf).map_err(FormatError::truncated)?;
        vals.extend(buf.iter().map(|b| *b as f64));
    }
    if vals.len() < w * h {
        return Err(FormatError::invalid("truncated file"));
    }
    vals.truncate(w * h);
    Ok(Grid::from_vec(w, h, vals.into_iter().map(|v| v / max as f64).collect()))
}

pub fn save_gray(path: &Path, img: &Grid<f64>) -> Result<(), Error> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let res = if ext == "png" {
        let bytes: Vec<u8> = img.as_slice().iter().map(|v| to_u8(*v)).collect();
        image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
            .ok_or_else(|| FormatError::invalid("image size overflow"))
            .and_then(|g| g.save(path).map_err(|e| FormatError::invalid(e.to_string())))
    } else {
        File::create(path).map_err(FormatError::from).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_pgm(img, &mut w)?;
            w.flush().map_err(FormatError::from)
        })
    };
    res.map_err(|e| Error::file(path, e))
}

/// Load an 8-bit grayscale PNG or PGM into `[0, 1]`.
pub fn load_gray(path: &Path) -> Result<Grid<f64>, Error> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let res = if ext == "png" {
        image::open(path).map_err(|e| FormatError::invalid(e.to_string())).map(|img| {
            let g = img.to_luma8();
            Grid::from_vec(
                g.width() as usize,
                g.height() as usize,
                g.into_raw().into_iter().map(|b| b as f64 / 255.0).collect(),
            )
        })
    } else {
        File::open(path).map_err(FormatError::from).and_then(|f| read_pgm(BufReader::new(f)))
    };
    res.map_err(|e| Error::file(path, e))
}

/// `DPT1` grid; non-finite values (background depth) are kept as is.
pub fn write_dpt1<W: Write>(grid: &Grid<f64>, mut w: W) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(16 + 4 * grid.as_slice().len());
    buf.extend_from_slice(b"DPT1");
    buf.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for v in grid.as_slice() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dpt1<R: Read>(mut r: R) -> Result<Grid<f64>, FormatError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(FormatError::truncated)?;
    if &head[0..4] != b"DPT1" {
        return Err(FormatError::invalid("bad magic, expected DPT1"));
    }
    let w = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
    let h = u32::from_le_bytes([head[8], head[9], head[10], head[11]]) as usize;
    let mut buf = vec![0u8; 4 * w * h];
    r.read_exact(&mut buf).map_err(FormatError::truncated)?;
    Ok(Grid::from_vec(w, h, buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect()))
}

pub fn save_dpt1(path: &Path, grid: &Grid<f64>) -> Result<(), Error> {
    File::create(path)
        .map_err(FormatError::from)
        .and_then(|f| {
            let mut w = BufWriter::new(f);
            write_dpt1(grid, &mut w)?;
            w.flush().map_err(FormatError::from)
        })
        .map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_quantizes_to_8_bits() {
        let g = Grid::from_vec(3, 2, vec![0.0, 0.5, 1.0, 0.25, 2.0, -1.0]);
        let mut buf = Vec::new();
        write_pgm(&g, &mut buf).unwrap();
        let back = read_pgm(&buf[..]).unwrap();
        assert_eq!(back.dims(), (3, 2));
        let want = [0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0, 1.0, 0.0];
        for (a, b) in back.as_slice().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ascii_pgm_with_comments() {
        let g = read_pgm("P2\n# note\n2 1\n# max\n4\n0 4\n".as_bytes()).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn dpt1_round_trip() {
        let g = Grid::from_vec(2, 2, vec![1.5, f64::INFINITY, -3.25, 0.0]);
        let mut buf = Vec::new();
        write_dpt1(&g, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16);
        assert_eq!(read_dpt1(&buf[..]).unwrap(), g);
        assert!(read_dpt1(&buf[..20]).is_err());
    }
}
