//! Parametric synthetic structures: closed triangle meshes standing in for
//! real target buildings so the benchmark methodology is reproducible.
//!
//! All three kinds are unions of axis-aligned boxes built as extruded
//! rectangle decompositions, so shared boundaries stay vertex-matched and
//! the result is a closed 2-manifold (Euler characteristic 2).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::mesh::{LoadOptions, TriangleMesh};
use crate::math::{vec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    /// Rectangular box: dims `[size_x, size_y, size_z]`.
    Box,
    /// L-shaped footprint extruded along z: dims
    /// `[outer_x, outer_y, arm_x, arm_y, height]` where the footprint is the
    /// union of `outer_x × arm_y` and `arm_x × outer_y`.
    LShape,
    /// Tall tower with a lower annex along +x: dims
    /// `[tower_x, depth_y, tower_height, annex_x, annex_height]`.
    TowerAnnex,
}

impl StructureKind {
    pub fn parse(name: &str) -> Result<StructureKind> {
        match name {
            "box" => Ok(StructureKind::Box),
            "l-shape" | "lshape" => Ok(StructureKind::LShape),
            "tower-annex" | "tower+annex" => Ok(StructureKind::TowerAnnex),
            other => Err(Error::InvalidParam(format!(
                "unknown structure kind {:?} (expected box, l-shape, tower-annex)",
                other
            ))),
        }
    }

    pub fn expected_dims(&self) -> usize {
        match self {
            StructureKind::Box => 3,
            StructureKind::LShape | StructureKind::TowerAnnex => 5,
        }
    }
}

/// Generate a closed mesh of the requested kind.
pub fn generate_structure(kind: StructureKind, dims: &[f64]) -> Result<TriangleMesh> {
    if dims.len() != kind.expected_dims() {
        return Err(Error::InvalidParam(format!(
            "{:?} expects {} dimensions, got {}",
            kind,
            kind.expected_dims(),
            dims.len()
        )));
    }
    if dims.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidParam("all dimensions must be > 0".into()));
    }
    match kind {
        StructureKind::Box => Ok(box_mesh(vec3(dims[0], dims[1], dims[2]), Vec3::ZERO)),
        StructureKind::LShape => {
            let [outer_x, outer_y, arm_x, arm_y, height] =
                [dims[0], dims[1], dims[2], dims[3], dims[4]];
            if arm_x >= outer_x || arm_y >= outer_y {
                return Err(Error::InvalidParam(
                    "l-shape arms must be thinner than the outer extents".into(),
                ));
            }
            // Vertex-matched rectangle decomposition of the L footprint.
            let rects = [
                Rect2 { lo: [0.0, 0.0], hi: [arm_x, arm_y] },
                Rect2 { lo: [arm_x, 0.0], hi: [outer_x, arm_y] },
                Rect2 { lo: [0.0, arm_y], hi: [arm_x, outer_y] },
            ];
            Ok(extruded_rects(&rects, height, |u, v, w| vec3(u, v, w)))
        }
        StructureKind::TowerAnnex => {
            let [tower_x, depth, tower_h, annex_x, annex_h] =
                [dims[0], dims[1], dims[2], dims[3], dims[4]];
            if annex_h >= tower_h {
                return Err(Error::InvalidParam(
                    "annex must be lower than the tower".into(),
                ));
            }
            // Vertical L in the x-z plane extruded along y; footprint u is
            // world z and footprint v is world x, a cyclic (orientation
            // preserving) axis permutation.
            let rects = [
                Rect2 { lo: [0.0, 0.0], hi: [annex_h, tower_x] },
                Rect2 { lo: [0.0, tower_x], hi: [annex_h, tower_x + annex_x] },
                Rect2 { lo: [annex_h, 0.0], hi: [tower_h, tower_x] },
            ];
            Ok(extruded_rects(&rects, depth, |u, v, w| vec3(v, w, u)))
        }
    }
}

/// Axis-aligned box with the given extents, lower corner at `origin`.
pub fn box_mesh(extents: Vec3, origin: Vec3) -> TriangleMesh {
    let rects = [Rect2 {
        lo: [0.0, 0.0],
        hi: [extents.x, extents.y],
    }];
    let mut mesh = extruded_rects(&rects, extents.z, |u, v, w| vec3(u, v, w));
    for v in &mut mesh.vertices {
        *v += origin;
    }
    mesh
}

#[derive(Debug, Clone, Copy)]
struct Rect2 {
    lo: [f64; 2],
    hi: [f64; 2],
}

/// Extrude a set of non-overlapping, edge-matched rectangles into a closed
/// prism. `map(u, v, w)` places footprint coordinates (u,v) at extrusion
/// height w in world space and must be orientation-preserving.
fn extruded_rects(rects: &[Rect2], height: f64, map: impl Fn(f64, f64, f64) -> Vec3) -> TriangleMesh {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    let vertex = |p: Vec3, vertices: &mut Vec<Vec3>, index: &mut HashMap<[u64; 3], u32>| {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *index.entry(key).or_insert_with(|| {
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };

    // Boundary edges appear in exactly one rectangle (interior edges are
    // shared and cancel). Count directed footprint edges.
    let mut edge_count: HashMap<([u64; 2], [u64; 2]), i32> = HashMap::new();
    let add_edge = |a: [f64; 2], b: [f64; 2], counts: &mut HashMap<([u64; 2], [u64; 2]), i32>| {
        let ka = [a[0].to_bits(), a[1].to_bits()];
        let kb = [b[0].to_bits(), b[1].to_bits()];
        // Store undirected, remember orientation sign.
        if ka <= kb {
            *counts.entry((ka, kb)).or_insert(0) += 1;
        } else {
            *counts.entry((kb, ka)).or_insert(0) -= 1;
        }
    };

    for rect in rects {
        let [x0, y0] = rect.lo;
        let [x1, y1] = rect.hi;
        // Counter-clockwise footprint loop.
        add_edge([x0, y0], [x1, y0], &mut edge_count);
        add_edge([x1, y0], [x1, y1], &mut edge_count);
        add_edge([x1, y1], [x0, y1], &mut edge_count);
        add_edge([x0, y1], [x0, y0], &mut edge_count);

        // Top (w = height) and bottom (w = 0) faces.
        let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
        let top: Vec<u32> = corners
            .iter()
            .map(|&[u, v]| vertex(map(u, v, height), &mut vertices, &mut index))
            .collect();
        triangles.push([top[0], top[1], top[2]]);
        triangles.push([top[0], top[2], top[3]]);
        let bottom: Vec<u32> = corners
            .iter()
            .map(|&[u, v]| vertex(map(u, v, 0.0), &mut vertices, &mut index))
            .collect();
        triangles.push([bottom[0], bottom[2], bottom[1]]);
        triangles.push([bottom[0], bottom[3], bottom[2]]);
    }

    // Walls along outline edges, wound so normals face outward (interior is
    // on the left of a CCW boundary edge).
    for ((ka, kb), count) in edge_count {
        if count == 0 {
            continue; // interior edge shared by two rects
        }
        let a = [f64::from_bits(ka[0]), f64::from_bits(ka[1])];
        let b = [f64::from_bits(kb[0]), f64::from_bits(kb[1])];
        let (from, to) = if count > 0 { (a, b) } else { (b, a) };
        let p00 = vertex(map(from[0], from[1], 0.0), &mut vertices, &mut index);
        let p10 = vertex(map(to[0], to[1], 0.0), &mut vertices, &mut index);
        let p11 = vertex(map(to[0], to[1], height), &mut vertices, &mut index);
        let p01 = vertex(map(from[0], from[1], height), &mut vertices, &mut index);
        triangles.push([p00, p10, p11]);
        triangles.push([p00, p11, p01]);
    }

    let (mesh, _) = TriangleMesh::from_parts(vertices, triangles, &LoadOptions::default())
        .expect("generated structure is non-degenerate");
    mesh
}

/// The squat box used by small visibility scenes: at max patch area 0.1 its
/// twelve triangles subdivide into exactly 96 patches.
pub fn ninety_six_patch_box() -> TriangleMesh {
    box_mesh(vec3(1.0, 1.0, 0.6), Vec3::ZERO)
}

/// Signed volume via the divergence theorem; positive for outward-oriented
/// closed meshes.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle_vertices(t);
        total += a.dot(b.cross(c)) / 6.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_patches;

    #[test]
    fn box_mesh_is_a_closed_cuboid() {
        let mesh = generate_structure(StructureKind::Box, &[20.0, 20.0, 30.0]).unwrap();
        assert_eq!(mesh.triangles.len(), 12);
        let area = mesh.surface_area();
        assert!((area - 3200.0).abs() < 1e-9, "area {}", area);
        assert_eq!(mesh.euler_characteristic(), 2);
        assert!((signed_volume(&mesh) - 12000.0).abs() < 1e-6);
    }

    #[test]
    fn l_shape_is_closed_and_outward() {
        let mesh =
            generate_structure(StructureKind::LShape, &[20.0, 20.0, 8.0, 8.0, 30.0]).unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        // Footprint area: 20*8 + 8*12 = 256.
        let volume = signed_volume(&mesh);
        assert!((volume - 256.0 * 30.0).abs() < 1e-6, "volume {}", volume);
    }

    #[test]
    fn tower_annex_is_closed_and_outward() {
        let mesh =
            generate_structure(StructureKind::TowerAnnex, &[10.0, 12.0, 30.0, 8.0, 10.0]).unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        // Volume: tower 10*12*30 plus annex 8*12*10.
        let volume = signed_volume(&mesh);
        assert!((volume - (3600.0 + 960.0)).abs() < 1e-6, "volume {}", volume);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            generate_structure(StructureKind::Box, &[0.0, 1.0, 1.0]),
            Err(Error::InvalidParam(_))
        ));
        assert!(matches!(
            generate_structure(StructureKind::Box, &[1.0, 1.0]),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn ninety_six_patch_box_has_96_patches() {
        let mesh = ninety_six_patch_box();
        let patches = make_patches(&mesh, 0.1).unwrap();
        assert_eq!(patches.len(), 96);
    }
}
