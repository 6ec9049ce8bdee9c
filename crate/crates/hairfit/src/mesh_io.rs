//! OBJ and PLY triangle meshes, plus PLY point and line-set exports.
//!
//! Coordinates are stored as f32 on disk. OBJ faces with more than three
//! corners are fan-triangulated; a vertex used with several texture
//! coordinates is split so that every mesh vertex carries one UV.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use hairfit_core::{TriMesh, Vec3};

use crate::error::{Error, FormatError};

pub fn read_obj<R: BufRead>(r: R) -> Result<TriMesh, FormatError> {
    let mut positions = Vec::new();
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    let mut corners: Vec<[(usize, Option<usize>); 3]> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |what: &str| FormatError::invalid(format!("line {}: {what}", lineno + 1));
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> =
                    tok.take(3).map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad vertex"))?;
                if c.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("vt") => {
                let c: Vec<f64> =
                    tok.take(2).map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad texture coordinate"))?;
                if c.len() != 2 {
                    return Err(bad("texture coordinate needs u and v"));
                }
                texcoords.push([c[0], c[1]]);
            }
            Some("f") => {
                let resolve = |s: &str, n: usize| -> Result<usize, FormatError> {
                    let i: i64 = s.parse().map_err(|_| bad("bad face index"))?;
                    let k = if i < 0 { n as i64 + i } else { i - 1 };
                    if k < 0 || k >= n as i64 {
                        return Err(bad("face index out of range"));
                    }
                    Ok(k as usize)
                };
                let mut poly = Vec::new();
                for t in tok {
                    let mut parts = t.split('/');
                    let v = resolve(parts.next().unwrap_or(""), positions.len())?;
                    let vt = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve(s, texcoords.len())?),
                        _ => None,
                    };
                    poly.push((v, vt));
                }
                if poly.len() < 3 {
                    return Err(bad("face needs at least three corners"));
                }
                for k in 1..poly.len() - 1 {
                    corners.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let with_uv = !corners.is_empty() && corners.iter().flatten().all(|c| c.1.is_some());
    if !with_uv {
        let faces = corners.iter().map(|f| f.map(|c| c.0 as u32)).collect();
        return TriMesh::new(positions, faces).map_err(|e| FormatError::invalid(e.to_string()));
    }
    let mut remap: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::with_capacity(corners.len());
    for f in &corners {
        faces.push(f.map(|(v, vt)| {
            let vt = vt.expect("checked above");
            *remap.entry((v, vt)).or_insert_with(|| {
                vertices.push(positions[v]);
                uvs.push(texcoords[vt]);
                (vertices.len() - 1) as u32
            })
        }));
    }
    TriMesh::new(vertices, faces).and_then(|m| m.with_uvs(uvs)).map_err(|e| FormatError::invalid(e.to_string()))
}

pub fn write_obj<W: Write>(mesh: &TriMesh, mut w: W) -> Result<(), FormatError> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x as f32, v.y as f32, v.z as f32)?;
    }
    if let Some(uvs) = &mesh.uvs {
        for uv in uvs {
            writeln!(w, "vt {} {}", uv[0] as f32, uv[1] as f32)?;
        }
        for f in &mesh.faces {
            writeln!(w, "f {0}/{0} {1}/{1} {2}/{2}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
    } else {
        for f in &mesh.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn read_le<R: Read>(self, r: &mut R) -> Result<f64, FormatError> {
        let mut b = [0u8; 8];
        let n = match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        };
        r.read_exact(&mut b[..n]).map_err(FormatError::truncated)?;
        Ok(match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b),
        })
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Values of one element record: scalars and lists in property order.
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

fn read_header<R: BufRead>(r: &mut R) -> Result<(bool, Vec<Element>), FormatError> {
    let mut line = String::new();
    let mut next = |r: &mut R| -> Result<String, FormatError> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(FormatError::invalid("truncated PLY header"));
        }
        Ok(line.trim_end().to_string())
    };
    if next(r)? != "ply" {
        return Err(FormatError::invalid("missing PLY magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next(r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(FormatError::invalid(format!("unsupported PLY format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| FormatError::invalid("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(FormatError::invalid("bad list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| FormatError::invalid("property before element"))?
                    .props
                    .push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| FormatError::invalid(format!("bad property type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| FormatError::invalid("property before element"))?
                    .props
                    .push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    Ok((binary.ok_or_else(|| FormatError::invalid("missing PLY format line"))?, elements))
}

pub fn read_ply<R: BufRead>(mut r: R) -> Result<TriMesh, FormatError> {
    let (binary, elements) = read_header(&mut r)?;
    let mut tokens: Vec<String> = Vec::new();
    let mut cursor = 0usize;
    if !binary {
        let mut rest = String::new();
        r.read_to_string(&mut rest)?;
        tokens = rest.split_whitespace().map(str::to_string).collect();
    }
    let ascii_next = |cursor: &mut usize| -> Result<f64, FormatError> {
        let t = tokens.get(*cursor).ok_or_else(|| FormatError::invalid("truncated file"))?;
        *cursor += 1;
        t.parse::<f64>().map_err(|_| FormatError::invalid(format!("bad number {t}")))
    };
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut has_uv = false;
    let mut faces = Vec::new();
    for el in &elements {
        let names: Vec<&str> = el
            .props
            .iter()
            .map(|p| match p {
                Property::Scalar(n, _) | Property::List(n, _, _) => n.as_str(),
            })
            .collect();
        let find = |cands: &[&str]| names.iter().position(|n| cands.contains(n));
        let (xi, yi, zi) = (find(&["x"]), find(&["y"]), find(&["z"]));
        let (ui, vi) = (find(&["u", "s", "texture_u"]), find(&["v", "t", "texture_v"]));
        let fi = find(&["vertex_indices", "vertex_index"]);
        if el.name == "vertex" {
            if xi.is_none() || yi.is_none() || zi.is_none() {
                return Err(FormatError::invalid("vertex element lacks x, y, z"));
            }
            has_uv = ui.is_some() && vi.is_some();
        }
        for _ in 0..el.count {
            let mut rec = Vec::with_capacity(el.props.len());
            for p in &el.props {
                rec.push(match (p, binary) {
                    (Property::Scalar(_, t), true) => Value::Scalar(t.read_le(&mut r)?),
                    (Property::Scalar(_, _), false) => Value::Scalar(ascii_next(&mut cursor)?),
                    (Property::List(_, ct, it), true) => {
                        let n = ct.read_le(&mut r)? as usize;
                        Value::List((0..n).map(|_| it.read_le(&mut r)).collect::<Result<_, _>>()?)
                    }
                    (Property::List(_, _, _), false) => {
                        let n = ascii_next(&mut cursor)? as usize;
                        Value::List((0..n).map(|_| ascii_next(&mut cursor)).collect::<Result<_, _>>()?)
                    }
                });
            }
            let scalar = |i: Option<usize>| match i.map(|i| &rec[i]) {
                Some(Value::Scalar(v)) => Ok(*v),
                _ => Err(FormatError::invalid("expected a scalar property")),
            };
            if el.name == "vertex" {
                vertices.push(Vec3::new(scalar(xi)?, scalar(yi)?, scalar(zi)?));
                if has_uv {
                    uvs.push([scalar(ui)?, scalar(vi)?]);
                }
            } else if el.name == "face" {
                let Some(Value::List(idx)) = fi.map(|i| &rec[i]) else {
                    return Err(FormatError::invalid("face element lacks vertex_indices"));
                };
                if idx.len() < 3 {
                    return Err(FormatError::invalid("face needs at least three corners"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                }
            }
        }
    }
    let mesh = TriMesh::new(vertices, faces).map_err(|e| FormatError::invalid(e.to_string()))?;
    if has_uv {
        mesh.with_uvs(uvs).map_err(|e| FormatError::invalid(e.to_string()))
    } else {
        Ok(mesh)
    }
}

pub fn write_ply<W: Write>(mesh: &TriMesh, mut w: W, binary: bool) -> Result<(), FormatError> {
    let format = if binary { "binary_little_endian" } else { "ascii" };
    writeln!(w, "ply\nformat {format} 1.0\nelement vertex {}", mesh.vertices.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    if mesh.uvs.is_some() {
        writeln!(w, "property float u\nproperty float v")?;
    }
    writeln!(w, "element face {}\nproperty list uchar int vertex_indices\nend_header", mesh.faces.len())?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let mut vals = vec![v.x as f32, v.y as f32, v.z as f32];
        if let Some(uvs) = &mesh.uvs {
            vals.extend([uvs[i][0] as f32, uvs[i][1] as f32]);
        }
        write_f32_row(&mut w, &vals, binary)?;
    }
    for f in &mesh.faces {
        if binary {
            w.write_all(&[3u8])?;
            for i in f {
                w.write_all(&(*i as i32).to_le_bytes())?;
            }
        } else {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
    }
    Ok(())
}

fn write_f32_row<W: Write>(w: &mut W, vals: &[f32], binary: bool) -> Result<(), FormatError> {
    if binary {
        for v in vals {
            w.write_all(&v.to_le_bytes())?;
        }
    } else {
        let s: Vec<String> = vals.iter().map(f32::to_string).collect();
        writeln!(w, "{}", s.join(" "))?;
    }
    Ok(())
}

/// Binary point cloud; `normals` become `nx ny nz` properties.
pub fn write_ply_points<W: Write>(points: &[Vec3], normals: Option<&[Vec3]>, mut w: W) -> Result<(), FormatError> {
    writeln!(w, "ply\nformat binary_little_endian 1.0\nelement vertex {}", points.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    if normals.is_some() {
        writeln!(w, "property float nx\nproperty float ny\nproperty float nz")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in points.iter().enumerate() {
        let mut vals = vec![p.x as f32, p.y as f32, p.z as f32];
        if let Some(n) = normals {
            vals.extend([n[i].x as f32, n[i].y as f32, n[i].z as f32]);
        }
        write_f32_row(&mut w, &vals, true)?;
    }
    Ok(())
}

/// Polylines as a PLY line set: one vertex per point and one edge per
/// segment (closing segment included for closed lines).
pub fn write_ply_lines<W: Write>(lines: &[(&[Vec3], bool)], mut w: W) -> Result<(), FormatError> {
    let nv: usize = lines.iter().map(|l| l.0.len()).sum();
    let ne: usize = lines
        .iter()
        .map(|(p, closed)| if p.len() < 2 { 0 } else { p.len() - 1 + usize::from(*closed && p.len() > 2) })
        .sum();
    writeln!(w, "ply\nformat binary_little_endian 1.0\nelement vertex {nv}")?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    writeln!(w, "element edge {ne}\nproperty int vertex1\nproperty int vertex2\nend_header")?;
    for (pts, _) in lines {
        for p in pts.iter() {
            write_f32_row(&mut w, &[p.x as f32, p.y as f32, p.z as f32], true)?;
        }
    }
    let mut base = 0i32;
    for (pts, closed) in lines {
        let n = pts.len() as i32;
        if n >= 2 {
            for k in 0..n - 1 {
                w.write_all(&(base + k).to_le_bytes())?;
                w.write_all(&(base + k + 1).to_le_bytes())?;
            }
            if *closed && n > 2 {
                w.write_all(&(base + n - 1).to_le_bytes())?;
                w.write_all(&base.to_le_bytes())?;
            }
        }
        base += n;
    }
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Load an `.obj` or `.ply` mesh.
pub fn load_mesh(path: &Path) -> Result<TriMesh, Error> {
    let f = File::open(path).map_err(|e| Error::file(path, e.into()))?;
    let r = BufReader::new(f);
    match extension(path).as_str() {
        "obj" => read_obj(r),
        "ply" => read_ply(r),
        other => Err(FormatError::invalid(format!("unknown mesh extension '{other}'"))),
    }
    .map_err(|e| Error::file(path, e))
}

/// Save as `.obj` or binary `.ply` by extension.
pub fn save_mesh(path: &Path, mesh: &TriMesh) -> Result<(), Error> {
    let f = File::create(path).map_err(|e| Error::file(path, e.into()))?;
    let mut w = BufWriter::new(f);
    match extension(path).as_str() {
        "obj" => write_obj(mesh, &mut w),
        "ply" => write_ply(mesh, &mut w, true),
        other => Err(FormatError::invalid(format!("unknown mesh extension '{other}'"))),
    }
    .and_then(|_| w.flush().map_err(FormatError::from))
    .map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hairfit_core::mesh::shapes;

    fn same(a: &TriMesh, b: &TriMesh) {
        assert_eq!(a.faces, b.faces);
        assert_eq!(a.vertices.len(), b.vertices.len());
        for (p, q) in a.vertices.iter().zip(&b.vertices) {
            assert!(p.distance(*q) < 1e-4);
        }
    }

    #[test]
    fn ply_round_trips() {
        let m = shapes::uv_sphere_cap(Vec3::ZERO, 10.0, 1.0, 4, 8);
        for binary in [false, true] {
            let mut buf = Vec::new();
            write_ply(&m, &mut buf, binary).unwrap();
            let back = read_ply(&buf[..]).unwrap();
            same(&m, &back);
            assert_eq!(back.uvs.as_ref().unwrap().len(), m.vertices.len());
        }
    }

    #[test]
    fn obj_round_trips_and_splits_uv_seams() {
        let m = shapes::icosphere(1, 2.0);
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        same(&m, &read_obj(&buf[..]).unwrap());

        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvt 1 1\nvt 0.5 0.5\nf 1/1 2/2 3/3\nf 2/5 4/4 3/3\n";
        let m = read_obj(text.as_bytes()).unwrap();
        assert_eq!(m.vertices.len(), 5);
        assert_eq!(m.uvs.unwrap()[3], [0.5, 0.5]);
    }

    #[test]
    fn obj_quads_and_negative_indices() {
        let m = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n".as_bytes()).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(read_obj("v 0 0 0\nf 1 2 3\n".as_bytes()).is_err());
    }

    #[test]
    fn ply_skips_unknown_elements_and_rejects_truncation() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_index\nelement extra 1\nproperty int q\nend_header\n0 0 0 1\n1 0 0 2\n0 1 0 3\n3 0 1 2\n7\n";
        let m = read_ply(text.as_bytes()).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        let mut buf = Vec::new();
        write_ply(&m, &mut buf, true).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_ply(&buf[..]).is_err());
    }
}
