//! OFF / OBJ readers and writers.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so `read(write(mesh))` reproduces every vertex bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

/// Loads a mesh, inferring the format from the file extension.
pub fn load(path: &Path) -> Result<TriMesh> {
    let format = MeshFormat::from_path(path).ok_or_else(|| {
        Error::InvalidInput(format!("unknown mesh extension: {}", path.display()))
    })?;
    load_mesh(path, format)
}

pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let text = match format {
        MeshFormat::Off => to_off(mesh),
        MeshFormat::Obj => to_obj(mesh),
    };
    fs::write(path, text)?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid number {tok:?}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid index {tok:?}")))
}

pub fn parse_off(text: &str) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(parse_err(ln, "missing OFF header"));
    }
    let rest: Vec<&str> = header_tokens.collect();
    let (ln, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "missing counts line"))?;
        (ln, l.split_whitespace().collect())
    } else {
        (ln, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(ln, "counts line needs V F E"));
    }
    let nv = parse_usize(counts[0], ln)?;
    let nf = parse_usize(counts[1], ln)?;

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of vertex list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(ln, "vertex line needs x y z"));
        }
        positions.push(Vec3::new(parse_f64(t[0], ln)?, parse_f64(t[1], ln)?, parse_f64(t[2], ln)?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.is_empty() || t[0] != "3" || t.len() < 4 {
            return Err(parse_err(ln, "only triangular faces \"3 i j k\" are supported"));
        }
        let mut face = [0; 3];
        for k in 0..3 {
            face[k] = parse_usize(t[k + 1], ln)?;
            if face[k] >= nv {
                return Err(parse_err(ln, format!("vertex index {} out of range", face[k])));
            }
        }
        faces.push(face);
    }
    TriMesh::new(positions, faces)
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut positions = Vec::new();
    let mut raw_faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut t = line.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex line needs x y z"));
                }
                positions.push(Vec3::new(parse_f64(c[0], ln)?, parse_f64(c[1], ln)?, parse_f64(c[2], ln)?));
            }
            Some("f") => {
                let c: Vec<&str> = t.collect();
                if c.len() != 3 {
                    return Err(parse_err(ln, "only triangular faces are supported"));
                }
                let mut face = [0i64; 3];
                for k in 0..3 {
                    let tok = c[k].split('/').next().unwrap_or("");
                    face[k] = tok
                        .parse()
                        .map_err(|_| parse_err(ln, format!("invalid index {tok:?}")))?;
                }
                raw_faces.push((ln, face, positions.len()));
            }
            _ => {}
        }
    }
    let nv = positions.len() as i64;
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (ln, face, seen) in raw_faces {
        let mut out = [0usize; 3];
        for k in 0..3 {
            // 1-based, negative indices count back from the last vertex read
            let idx = match face[k] {
                i if i > 0 => i - 1,
                i if i < 0 => seen as i64 + i,
                _ => return Err(parse_err(ln, "index 0 is invalid in OBJ")),
            };
            if idx < 0 || idx >= nv {
                return Err(parse_err(ln, format!("vertex index {} out of range", face[k])));
            }
            out[k] = idx as usize;
        }
        faces.push(out);
    }
    TriMesh::new(positions, faces)
}

pub fn to_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF").unwrap();
    writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_faces(), mesh.num_edges()).unwrap();
    for p in mesh.positions() {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

pub fn to_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for p in mesh.positions() {
        writeln!(s, "v {} {} {}", p.x, p.y, p.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;

    #[test]
    fn tetrahedron_off() {
        let text = "OFF\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
        let m = parse_off(text).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn off_missing_twin_is_open_boundary() {
        let text = "OFF\n4 3 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n";
        assert!(matches!(parse_off(text), Err(Error::OpenBoundary(..))));
    }

    #[test]
    fn obj_icosphere_level2() {
        let text = to_obj(&shapes::icosphere(2, 1.0));
        let m = parse_obj(&text).unwrap();
        assert_eq!(m.num_vertices(), 162);
        assert_eq!(m.num_faces(), 320);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_off("OFF\n1 1 0\n0 0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_off("PLY\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_obj("v 0 0 0\nf 1 2 3\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn obj_face_with_texture_indices() {
        let base = to_obj(&shapes::tetrahedron());
        let text = base.replace("f 1 ", "f 1/1/1 ");
        assert_eq!(parse_obj(&text).unwrap().num_faces(), 4);
    }

    proptest! {
        #[test]
        fn write_read_is_bit_exact(seed in 0u64..1000, level in 0u32..2) {
            let s = seed as f64;
            let m = shapes::icosphere(level, 1.0)
                .map_positions(|p| p * (1.0 + 1e-3 * (s + p.x * 7.13).sin()) + Vec3::new(s.sqrt(), 1.0 / 3.0, -s))
                .unwrap();
            let off = parse_off(&to_off(&m)).unwrap();
            let obj = parse_obj(&to_obj(&m)).unwrap();
            for (a, (b, c)) in m.positions().iter().zip(off.positions().iter().zip(obj.positions())) {
                for k in 0..3 {
                    prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
                    prop_assert_eq!(a[k].to_bits(), c[k].to_bits());
                }
            }
            prop_assert_eq!(off.faces(), m.faces());
        }
    }
}
