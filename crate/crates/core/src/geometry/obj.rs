use std::path::Path;

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Loads a Wavefront OBJ, triangulating faces and unifying the index buffer.
///
/// Missing normals are computed by area weighting; missing UVs become zero.
/// All triangles get `material_id`.
pub fn load_obj(path: &Path, material_id: u32) -> Result<TriangleMesh> {
    let opts = tobj::LoadOptions { single_index: true, triangulate: true, ignore_points: true, ignore_lines: true };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| match e {
        tobj::LoadError::OpenFileFailed => {
            Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "cannot open OBJ file"))
        }
        other => Error::Data(format!("{}: {other}", path.display())),
    })?;
    let mut mesh = TriangleMesh::default();
    for model in models {
        let m = model.mesh;
        let nv = m.positions.len() / 3;
        let has_normals = m.normals.len() == m.positions.len();
        let has_uvs = m.texcoords.len() == nv * 2;
        let mut part = TriangleMesh::default();
        for i in 0..nv {
            let p = |k: usize| m.positions[3 * i + k] as f64;
            part.positions.push(Vec3::new(p(0), p(1), p(2)));
            part.uvs.push(if has_uvs { [m.texcoords[2 * i] as f64, m.texcoords[2 * i + 1] as f64] } else { [0.0, 0.0] });
        }
        part.indices = m.indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        part.material_ids = vec![material_id; part.indices.len()];
        part.remove_degenerate();
        if has_normals {
            part.normals = (0..nv)
                .map(|i| {
                    let n = Vec3::new(m.normals[3 * i] as f64, m.normals[3 * i + 1] as f64, m.normals[3 * i + 2] as f64);
                    if n.length() > 0.0 { n.normalize() } else { Vec3::Z }
                })
                .collect();
        } else {
            part.compute_normals();
        }
        mesh.append(&part);
    }
    if mesh.is_empty() {
        return Err(Error::Data(format!("{}: no triangles", path.display())));
    }
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn loads_quad_without_normals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1 2/2 3/3 4/4").unwrap();
        drop(f);
        let m = load_obj(&path, 2).unwrap();
        assert_eq!(m.triangle_count(), 2);
        assert!(m.material_ids.iter().all(|&id| id == 2));
        assert!(m.normals.iter().all(|n| (*n - Vec3::Z).length() < 1e-12));
        assert_eq!(m.uvs[2], [1.0, 1.0]);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_obj(Path::new("/nonexistent/x.obj"), 0), Err(Error::Io { .. })));
    }
}
