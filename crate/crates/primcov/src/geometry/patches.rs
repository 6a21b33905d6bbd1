//! Uniform surface patches: recursive 4-way midpoint subdivision of every
//! mesh triangle until each patch area drops below a threshold.
//!
//! Patches are the unit of coverage accounting. Patch `k` is the canonical
//! index used by every visibility vector, so the enumeration order here is
//! load-bearing: parents in mesh order, children depth-first in the fixed
//! child order 0..3.

use crate::error::{Error, Result};
use crate::math::Vec3;

use super::mesh::TriangleMesh;

#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub centroid: Vec3,
    /// Outward unit normal, inherited from the parent triangle.
    pub normal: Vec3,
    pub area: f64,
    /// Index of the parent triangle in the source mesh.
    pub parent: u32,
}

#[derive(Debug, Clone, Copy)]
struct ParentRange {
    first: u32,
    depth: u32,
}

#[derive(Debug, Clone)]
pub struct SurfacePatchSet {
    patches: Vec<SurfacePatch>,
    per_parent: Vec<ParentRange>,
    max_area: f64,
}

impl SurfacePatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[SurfacePatch] {
        &self.patches
    }

    pub fn patch(&self, k: usize) -> &SurfacePatch {
        &self.patches[k]
    }

    pub fn max_area(&self) -> f64 {
        self.max_area
    }

    pub fn areas(&self) -> Vec<f64> {
        self.patches.iter().map(|p| p.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.patches.iter().map(|p| p.area).sum()
    }

    /// Subdivision depth of one parent triangle (all its patches share it).
    pub fn parent_depth(&self, parent: usize) -> u32 {
        self.per_parent[parent].depth
    }

    /// Map a point on parent triangle `parent` to the patch containing it by
    /// descending the midpoint subdivision in barycentric coordinates.
    pub fn locate(&self, mesh: &TriangleMesh, parent: usize, point: Vec3) -> usize {
        let range = self.per_parent[parent];
        let [a, b, c] = mesh.triangle_vertices(parent);
        let (mut u, mut v, mut w) = barycentric(point, a, b, c);
        let mut index = 0usize;
        for _ in 0..range.depth {
            let child;
            if u >= 0.5 {
                child = 0;
                (u, v, w) = (2.0 * u - 1.0, 2.0 * v, 2.0 * w);
            } else if v >= 0.5 {
                child = 1;
                (u, v, w) = (2.0 * u, 2.0 * v - 1.0, 2.0 * w);
            } else if w >= 0.5 {
                child = 2;
                (u, v, w) = (2.0 * u, 2.0 * v, 2.0 * w - 1.0);
            } else {
                child = 3;
                (u, v, w) = (1.0 - 2.0 * w, 1.0 - 2.0 * u, 1.0 - 2.0 * v);
            }
            index = index * 4 + child;
        }
        range.first as usize + index
    }
}

/// Subdivide every triangle of `mesh` into uniform patches of area at most
/// `max_area`. Each level of subdivision quarters the area, so this always
/// terminates; a triangle already below the threshold is kept as one patch.
pub fn make_patches(mesh: &TriangleMesh, max_area: f64) -> Result<SurfacePatchSet> {
    if !(max_area > 0.0) {
        return Err(Error::InvalidParam("max patch area must be > 0".into()));
    }

    let mut patches = Vec::new();
    let mut per_parent = Vec::with_capacity(mesh.triangles.len());

    for (idx, _) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = mesh.triangle_vertices(idx);
        let area = mesh.triangle_area(idx);
        let mut depth = 0u32;
        let mut patch_area = area;
        while patch_area > max_area {
            patch_area /= 4.0;
            depth += 1;
        }
        per_parent.push(ParentRange {
            first: patches.len() as u32,
            depth,
        });
        let normal = mesh.normals[idx];
        emit_patches(a, b, c, depth, normal, idx as u32, &mut patches);
    }

    Ok(SurfacePatchSet {
        patches,
        per_parent,
        max_area,
    })
}

fn emit_patches(
    a: Vec3,
    b: Vec3,
    c: Vec3,
    depth: u32,
    normal: Vec3,
    parent: u32,
    out: &mut Vec<SurfacePatch>,
) {
    if depth == 0 {
        let area = 0.5 * (b - a).cross(c - a).norm();
        out.push(SurfacePatch {
            centroid: (a + b + c) / 3.0,
            normal,
            area,
            parent,
        });
        return;
    }
    let mab = (a + b) * 0.5;
    let mbc = (b + c) * 0.5;
    let mac = (a + c) * 0.5;
    // Child order must match `SurfacePatchSet::locate`.
    emit_patches(a, mab, mac, depth - 1, normal, parent, out);
    emit_patches(mab, b, mbc, depth - 1, normal, parent, out);
    emit_patches(mac, mbc, c, depth - 1, normal, parent, out);
    emit_patches(mab, mbc, mac, depth - 1, normal, parent, out);
}

fn barycentric(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (f64, f64, f64) {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(v0);
    let d01 = v0.dot(v1);
    let d11 = v1.dot(v1);
    let d20 = v2.dot(v0);
    let d21 = v2.dot(v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    (1.0 - v - w, v, w)
}
