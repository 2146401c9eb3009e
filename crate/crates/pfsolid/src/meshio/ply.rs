//! Binary little-endian PLY output (and a strict reader used by tests and
//! the mesh-export round trip): binary32 vertex positions, faces as an
//! 8-bit count plus 32-bit signed indices.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::TriMesh;
use crate::error::{Result, SimError};

/// Write `mesh` as binary little-endian PLY.
pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| SimError::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    write!(
        w,
        "ply\r\nformat binary_little_endian 1.0\r\n\
         comment phase {}\r\n\
         element vertex {}\r\n\
         property float x\r\nproperty float y\r\nproperty float z\r\n\
         element face {}\r\n\
         property list uchar int vertex_indices\r\n\
         end_header\r\n",
        mesh.phase_id,
        mesh.positions.len(),
        mesh.triangles.len()
    )
    .map_err(io)?;
    for p in &mesh.positions {
        for c in p {
            w.write_all(&(*c as f32).to_le_bytes()).map_err(io)?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8]).map_err(io)?;
        for &v in t {
            w.write_all(&(v as i32).to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Read a PLY file written by [`write_mesh`]. Only that exact layout is
/// accepted; anything else is a format error.
pub fn read_ply(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| SimError::io(path, e))?;
    let header_end = data
        .windows(12)
        .position(|w| w == b"end_header\r\n")
        .ok_or_else(|| SimError::Format("missing PLY end_header".into()))?
        + 12;
    let header = std::str::from_utf8(&data[..header_end])
        .map_err(|_| SimError::Format("non-text PLY header".into()))?;
    let mut nvert = None;
    let mut nface = None;
    let mut phase_id = 0;
    for line in header.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["element", "vertex", n] => nvert = n.parse::<usize>().ok(),
            ["element", "face", n] => nface = n.parse::<usize>().ok(),
            ["comment", "phase", p] => phase_id = p.parse().unwrap_or(0),
            ["format", f, "1.0"] if *f != "binary_little_endian" => {
                return Err(SimError::Format(format!("unsupported PLY format {f}")));
            }
            _ => {}
        }
    }
    let (nvert, nface) = match (nvert, nface) {
        (Some(v), Some(f)) => (v, f),
        _ => return Err(SimError::Format("PLY header missing element counts".into())),
    };
    let body = &data[header_end..];
    let want = nvert * 12 + nface * 13;
    if body.len() != want {
        return Err(SimError::Format(format!(
            "PLY body has {} bytes, expected {want}",
            body.len()
        )));
    }
    let mut mesh = TriMesh {
        phase_id,
        ..TriMesh::default()
    };
    let mut off = 0;
    for _ in 0..nvert {
        let p: [f64; 3] = std::array::from_fn(|d| {
            f32::from_le_bytes(body[off + 4 * d..off + 4 * d + 4].try_into().unwrap()) as f64
        });
        off += 12;
        mesh.positions.push(p);
        mesh.boundary.push(false);
    }
    for _ in 0..nface {
        if body[off] != 3 {
            return Err(SimError::Format("non-triangle PLY face".into()));
        }
        off += 1;
        let t: [u32; 3] = std::array::from_fn(|d| {
            i32::from_le_bytes(body[off + 4 * d..off + 4 * d + 4].try_into().unwrap()) as u32
        });
        off += 12;
        if t.iter().any(|&v| v as usize >= nvert) {
            return Err(SimError::Format("PLY face index out of range".into()));
        }
        mesh.triangles.push(t);
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::super::marching::marching_cubes;
    use super::*;

    fn sphere_mesh() -> TriMesh {
        let c = [13.5; 3];
        marching_cubes(
            [27; 3],
            |i, j, k| {
                let p = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
                10.0 - ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2))
                    .sqrt()
            },
            [0; 3],
            1.0,
            0.0,
            2,
        )
    }

    #[test]
    fn empty_mesh_writes_a_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.ply");
        write_mesh(&TriMesh::default(), &path).unwrap();
        let back = read_ply(&path).unwrap();
        assert!(back.positions.is_empty() && back.triangles.is_empty());
    }

    #[test]
    fn round_trip_preserves_geometry_at_single_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.ply");
        let m = sphere_mesh();
        write_mesh(&m, &path).unwrap();
        let back = read_ply(&path).unwrap();
        assert_eq!(back.phase_id, 2);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.positions.len(), m.positions.len());
        for (got, want) in back.positions.iter().zip(&m.positions) {
            for d in 0..3 {
                assert_eq!(got[d], (want[d] as f32) as f64);
            }
        }
    }

    #[test]
    fn file_parses_in_an_independent_ply_reader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.ply");
        let m = sphere_mesh();
        write_mesh(&m, &path).unwrap();

        let parser = ply_rs::parser::Parser::<ply_rs::ply::DefaultElement>::new();
        let mut file = std::fs::File::open(&path).unwrap();
        let ply = parser.read_ply(&mut file).unwrap();
        assert_eq!(ply.payload["vertex"].len(), m.positions.len());
        assert_eq!(ply.payload["face"].len(), m.triangles.len());
        // Spot-check the first vertex coordinate against our writer.
        use ply_rs::ply::Property;
        let v0 = &ply.payload["vertex"][0];
        match v0["x"] {
            Property::Float(x) => assert_eq!(x, m.positions[0][0] as f32),
            ref p => panic!("unexpected property type {p:?}"),
        }
    }
}
