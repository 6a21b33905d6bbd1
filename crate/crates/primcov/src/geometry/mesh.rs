//! Triangle mesh ingestion: OBJ (ASCII) and STL (ASCII + binary) readers,
//! degenerate-triangle filtering, normals, and basic audits.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{point_triangle_distance_sq, vec3, Vec3};

/// Triangles below this area are dropped at load time.
const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    /// Vertex index triples, right-hand winding (counter-clockwise seen from
    /// outside).
    pub triangles: Vec<[u32; 3]>,
    /// Per-triangle outward unit normal.
    pub normals: Vec<Vec3>,
}

/// What `load_mesh` had to clean up.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadReport {
    pub dropped_degenerate: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reverse the winding (and thus the normals) of every face.
    pub flip_winding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlAscii,
    StlBinary,
}

impl TriangleMesh {
    /// Build a mesh from raw vertices and index triples, dropping degenerate
    /// triangles and computing normals.
    pub fn from_parts(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        options: &LoadOptions,
    ) -> Result<(TriangleMesh, LoadReport)> {
        let n = vertices.len() as u32;
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut dropped = 0usize;

        for tri in triangles {
            let mut tri = tri;
            if options.flip_winding {
                tri.swap(1, 2);
            }
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::MeshParse {
                    path: Default::default(),
                    reason: format!("triangle index out of range: {:?}", tri),
                });
            }
            let [a, b, c] = [
                vertices[tri[0] as usize],
                vertices[tri[1] as usize],
                vertices[tri[2] as usize],
            ];
            let cross = (b - a).cross(c - a);
            let area = 0.5 * cross.norm();
            if area < DEGENERATE_AREA {
                dropped += 1;
                continue;
            }
            kept.push(tri);
            normals.push(cross.normalized().expect("non-degenerate triangle"));
        }

        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if dropped > 0 {
            log::warn!("dropped {} degenerate triangle(s) at load", dropped);
        }
        Ok((
            TriangleMesh {
                vertices,
                triangles: kept,
                normals,
            },
            LoadReport {
                dropped_degenerate: dropped,
            },
        ))
    }

    pub fn triangle_vertices(&self, idx: usize) -> [Vec3; 3] {
        let t = self.triangles[idx];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn triangle_area(&self, idx: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(idx);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = vec3(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = vec3(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &v in &self.vertices {
            lo = lo.min_componentwise(v);
            hi = hi.max_componentwise(v);
        }
        (lo, hi)
    }

    /// Distance from a point to the closest point on the surface.
    pub fn distance_to_surface(&self, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(i);
            best = best.min(point_triangle_distance_sq(p, a, b, c));
        }
        best.sqrt()
    }

    /// Euler characteristic V - E + F over unique undirected edges; 2 for a
    /// closed genus-0 mesh.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let mut used = std::collections::HashSet::new();
        for t in &self.triangles {
            used.extend(t.iter().copied());
        }
        used.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Concatenate another mesh into this one (indices re-based).
    pub fn merge(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        self.normals.extend_from_slice(&other.normals);
    }

    pub fn save_obj(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Detect the on-disk format from extension and content.
pub fn detect_format(path: &Path, bytes: &[u8]) -> MeshFormat {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("obj") => MeshFormat::Obj,
        Some("stl") => {
            // ASCII STL starts with "solid" AND contains "facet"; binary
            // files may also start with "solid" in the 80-byte header.
            let head = &bytes[..bytes.len().min(512)];
            let looks_ascii = head.starts_with(b"solid")
                && std::str::from_utf8(head).is_ok_and(|s| s.contains("facet"));
            if looks_ascii {
                MeshFormat::StlAscii
            } else {
                MeshFormat::StlBinary
            }
        }
        _ => MeshFormat::Obj,
    }
}

/// Load a triangle mesh from OBJ or STL. Units are assumed to be meters;
/// polygons in OBJ files are fan-triangulated; degenerate triangles are
/// dropped (count reported); watertightness is not required.
pub fn load_mesh(path: &Path, options: &LoadOptions) -> Result<(TriangleMesh, LoadReport)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    let (vertices, triangles) = match detect_format(path, &bytes) {
        MeshFormat::Obj => parse_obj(path, &bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(path, &bytes)?,
        MeshFormat::StlBinary => parse_stl_binary(path, &bytes)?,
    };

    TriangleMesh::from_parts(vertices, triangles, options).map_err(|e| match e {
        Error::MeshParse { reason, .. } => Error::MeshParse {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MeshParse {
        path: path.to_path_buf(),
        reason: "OBJ file is not valid UTF-8".into(),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coord = |what: &str| -> Result<f64> {
                    fields
                        .next()
                        .and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| Error::MeshParse {
                            path: path.to_path_buf(),
                            reason: format!("line {}: bad vertex {}", lineno + 1, what),
                        })
                };
                let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                vertices.push(vec3(x, y, z));
            }
            Some("f") => {
                let mut indices = Vec::new();
                for field in fields {
                    // "v", "v/vt", "v//vn", "v/vt/vn"; 1-based, negative
                    // means relative to the end.
                    let first = field.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| Error::MeshParse {
                        path: path.to_path_buf(),
                        reason: format!("line {}: bad face index {:?}", lineno + 1, field),
                    })?;
                    let resolved = if raw < 0 {
                        vertices.len() as i64 + raw
                    } else {
                        raw - 1
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(Error::MeshParse {
                            path: path.to_path_buf(),
                            reason: format!("line {}: face index out of range", lineno + 1),
                        });
                    }
                    indices.push(resolved as u32);
                }
                if indices.len() < 3 {
                    return Err(Error::MeshParse {
                        path: path.to_path_buf(),
                        reason: format!("line {}: face with fewer than 3 vertices", lineno + 1),
                    });
                }
                for k in 1..indices.len() - 1 {
                    triangles.push([indices[0], indices[k], indices[k + 1]]);
                }
            }
            _ => {} // comments, groups, normals, texcoords
        }
    }

    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok((vertices, triangles))
}

/// Shared between the STL readers: dedup bit-identical vertices into indices.
struct VertexPool {
    vertices: Vec<Vec3>,
    index: HashMap<[u64; 3], u32>,
}

impl VertexPool {
    fn new() -> Self {
        VertexPool {
            vertices: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn insert(&mut self, v: Vec3) -> u32 {
        let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(v);
            (self.vertices.len() - 1) as u32
        })
    }
}

fn parse_stl_ascii(path: &Path, bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MeshParse {
        path: path.to_path_buf(),
        reason: "ASCII STL is not valid UTF-8".into(),
    })?;
    let mut pool = VertexPool::new();
    let mut triangles = Vec::new();
    let mut current: Vec<u32> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("vertex") => {
                let mut coord = || -> Result<f64> {
                    fields
                        .next()
                        .and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| Error::MeshParse {
                            path: path.to_path_buf(),
                            reason: format!("line {}: bad vertex", lineno + 1),
                        })
                };
                let v = vec3(coord()?, coord()?, coord()?);
                current.push(pool.insert(v));
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(Error::MeshParse {
                        path: path.to_path_buf(),
                        reason: format!("facet ending at line {} has {} vertices", lineno + 1, current.len()),
                    });
                }
                triangles.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }

    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok((pool.vertices, triangles))
}

fn parse_stl_binary(path: &Path, bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    if bytes.len() < 84 {
        return Err(Error::MeshParse {
            path: path.to_path_buf(),
            reason: "binary STL shorter than its 84-byte header".into(),
        });
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = 84 + count * 50;
    if bytes.len() < expected {
        return Err(Error::MeshParse {
            path: path.to_path_buf(),
            reason: format!(
                "binary STL truncated: header promises {} facets ({} bytes), file has {}",
                count,
                expected,
                bytes.len()
            ),
        });
    }

    let mut pool = VertexPool::new();
    let mut triangles = Vec::with_capacity(count);
    let read_f32 = |offset: usize| f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());

    for i in 0..count {
        let base = 84 + i * 50;
        // Skip the 12-byte facet normal; we recompute normals from winding.
        let mut idx = [0u32; 3];
        for (k, slot) in idx.iter_mut().enumerate() {
            let off = base + 12 + k * 12;
            let v = vec3(
                read_f32(off) as f64,
                read_f32(off + 4) as f64,
                read_f32(off + 8) as f64,
            );
            *slot = pool.insert(v);
        }
        triangles.push(idx);
    }

    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok((pool.vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) const UNIT_CUBE_OBJ: &str = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    fn write_temp(content: &[u8], ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_unit_cube_obj() {
        let f = write_temp(UNIT_CUBE_OBJ.as_bytes(), ".obj");
        let (mesh, report) = load_mesh(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(mesh.triangles.len(), 12);
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(report.dropped_degenerate, 0);
        assert!((mesh.surface_area() - 6.0).abs() < 1e-12);
        assert_eq!(mesh.euler_characteristic(), 2);
        for n in &mesh.normals {
            assert!(n.is_unit(1e-6));
        }
    }

    #[test]
    fn drops_degenerate_triangle_with_warning_count() {
        let content = format!("{}f 1 1 2\n", UNIT_CUBE_OBJ);
        let f = write_temp(content.as_bytes(), ".obj");
        let (mesh, report) = load_mesh(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(mesh.triangles.len(), 12);
        assert_eq!(report.dropped_degenerate, 1);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_mesh(Path::new("/nonexistent/mesh.obj"), &LoadOptions::default());
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn all_degenerate_mesh_rejected() {
        let content = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n";
        let f = write_temp(content.as_bytes(), ".obj");
        assert!(matches!(
            load_mesh(f.path(), &LoadOptions::default()),
            Err(Error::EmptyMesh)
        ));
    }

    #[test]
    fn flip_winding_negates_normals() {
        let f = write_temp(UNIT_CUBE_OBJ.as_bytes(), ".obj");
        let (mesh, _) = load_mesh(f.path(), &LoadOptions::default()).unwrap();
        let (flipped, _) = load_mesh(
            f.path(),
            &LoadOptions {
                flip_winding: true,
            },
        )
        .unwrap();
        for (a, b) in mesh.normals.iter().zip(&flipped.normals) {
            assert!((*a + *b).norm() < 1e-12);
        }
    }

    #[test]
    fn quad_faces_are_fan_triangulated() {
        let content = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let f = write_temp(content.as_bytes(), ".obj");
        let (mesh, _) = load_mesh(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        assert!((mesh.surface_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stl_ascii_round_trip() {
        let stl = "\
solid tri
  facet normal 0 0 1
    outer loop
      vertex 0 0 0
      vertex 1 0 0
      vertex 0 1 0
    endloop
  endfacet
endsolid tri
";
        let f = write_temp(stl.as_bytes(), ".stl");
        let (mesh, _) = load_mesh(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(mesh.triangles.len(), 1);
        assert_eq!(mesh.vertices.len(), 3);
        assert!((mesh.normals[0] - vec3(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn stl_binary_round_trip() {
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&2u32.to_le_bytes());
        let tri = |vs: [[f32; 3]; 3], out: &mut Vec<u8>| {
            out.extend_from_slice(&[0u8; 12]); // normal, ignored
            for v in vs {
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            out.extend_from_slice(&[0u8; 2]); // attribute byte count
        };
        tri([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &mut bytes);
        tri([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]], &mut bytes);
        let f = write_temp(&bytes, ".stl");
        let (mesh, _) = load_mesh(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        // Shared vertices dedup to 4.
        assert_eq!(mesh.vertices.len(), 4);
        assert!((mesh.surface_area() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncated_binary_stl_rejected() {
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 50]); // only one facet present
        let f = write_temp(&bytes, ".stl");
        assert!(matches!(
            load_mesh(f.path(), &LoadOptions::default()),
            Err(Error::MeshParse { .. })
        ));
    }
}
