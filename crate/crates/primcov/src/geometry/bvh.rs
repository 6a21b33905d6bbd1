//! Bounding volume hierarchy for ray/triangle queries.
//!
//! Traversal is exact with respect to the brute-force all-triangles loop:
//! identical per-triangle intersection code, identical (distance, index)
//! tie-breaking, and pruning only on strictly-worse node entry distances.

use crate::math::{vec3, Vec3};

use super::mesh::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub direction: Vec3,
    pub max_t: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, max_t: f64) -> Ray {
        debug_assert!(direction.is_unit(1e-6));
        Ray {
            origin,
            direction,
            max_t,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Index of the triangle in the source mesh.
    pub triangle: u32,
    pub t: f64,
    pub point: Vec3,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Aabb {
        Aabb {
            min: vec3(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: vec3(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow_point(&mut self, p: Vec3) {
        self.min = self.min.min_componentwise(p);
        self.max = self.max.max_componentwise(p);
    }

    fn grow_triangle(&mut self, t: &[Vec3; 3]) {
        for &v in t {
            self.grow_point(v);
        }
    }

    fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Entry distance of the ray, or `None` when the slab test fails within
    /// `[0, t_limit]`.
    fn entry(&self, ray: &Ray, inv_dir: Vec3, t_limit: f64) -> Option<f64> {
        let mut tmin = 0.0f64;
        let mut tmax = t_limit;
        for axis in 0..3 {
            let o = ray.origin.component(axis);
            let inv = inv_dir.component(axis);
            let t1 = (self.min.component(axis) - o) * inv;
            let t2 = (self.max.component(axis) - o) * inv;
            // f64::min/max drop NaNs from on-boundary zero-direction cases,
            // leaving the slab unconstrained (conservative).
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
            if tmin > tmax {
                return None;
            }
        }
        Some(tmin)
    }
}

#[derive(Debug, Clone)]
struct Node {
    aabb: Aabb,
    /// Leaf: index of the first triangle; internal: index of the left child
    /// (right child is `index + 1`... see `build_node`).
    index: u32,
    /// Leaf: triangle count; internal: 0.
    len: u32,
    /// Internal nodes only: right child index.
    right: u32,
}

/// Flat BVH over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle vertices in BVH order.
    tris: Vec<[Vec3; 3]>,
    /// Original mesh index per BVH-ordered triangle.
    ids: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = (0..mesh.triangles.len())
            .map(|i| {
                let [a, b, c] = mesh.triangle_vertices(i);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::new(),
            tris: Vec::new(),
            ids: Vec::new(),
        };
        bvh.build_node(mesh, &centroids, &mut order, 0);
        // Materialize triangles in final order.
        bvh.tris = bvh
            .ids
            .iter()
            .map(|&id| mesh.triangle_vertices(id as usize))
            .collect();
        bvh
    }

    fn build_node(&mut self, mesh: &TriangleMesh, centroids: &[Vec3], order: &mut [u32], base: usize) -> u32 {
        let mut aabb = Aabb::empty();
        let mut centroid_bounds = Aabb::empty();
        for &id in order.iter() {
            aabb.grow_triangle(&mesh.triangle_vertices(id as usize));
            centroid_bounds.grow_point(centroids[id as usize]);
        }

        let node_idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            aabb,
            index: 0,
            len: 0,
            right: 0,
        });

        let axis = centroid_bounds.longest_axis();
        let spread = centroid_bounds.max.component(axis) - centroid_bounds.min.component(axis);
        if order.len() <= LEAF_SIZE || spread <= 0.0 {
            self.nodes[node_idx as usize].index = base as u32;
            self.nodes[node_idx as usize].len = order.len() as u32;
            self.ids.extend_from_slice(order);
            return node_idx;
        }

        order.sort_unstable_by(|&a, &b| {
            centroids[a as usize]
                .component(axis)
                .total_cmp(&centroids[b as usize].component(axis))
        });
        let mid = order.len() / 2;
        let (left, right) = order.split_at_mut(mid);
        let left_idx = self.build_node(mesh, centroids, left, base);
        let right_idx = self.build_node(mesh, centroids, right, base + mid);
        self.nodes[node_idx as usize].index = left_idx;
        self.nodes[node_idx as usize].right = right_idx;
        node_idx
    }

    /// Nearest triangle intersection within `ray.max_t`; ties in distance go
    /// to the lower original triangle index. Exactly matches a brute-force
    /// loop over all triangles.
    pub fn ray_hit(&self, ray: &Ray) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = vec3(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut best: Option<(f64, u32)> = None;
        let mut stack = [0u32; 64];
        let mut top = 0usize;
        stack[top] = 0;
        top += 1;

        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            let limit = best.map_or(ray.max_t, |(t, _)| t.min(ray.max_t));
            // Prune only strictly-worse subtrees so equal-distance hits with
            // lower triangle ids are still found.
            match node.aabb.entry(ray, inv_dir, ray.max_t) {
                Some(entry) if entry <= limit => {}
                _ => continue,
            }

            if node.len > 0 {
                let start = node.index as usize;
                for offset in 0..node.len as usize {
                    let tri = &self.tris[start + offset];
                    let id = self.ids[start + offset];
                    if let Some(t) = intersect_triangle(ray.origin, ray.direction, tri[0], tri[1], tri[2]) {
                        if t <= ray.max_t {
                            let better = match best {
                                None => true,
                                Some((bt, bid)) => t < bt || (t == bt && id < bid),
                            };
                            if better {
                                best = Some((t, id));
                            }
                        }
                    }
                }
            } else {
                stack[top] = node.right;
                top += 1;
                stack[top] = node.index;
                top += 1;
            }
        }

        best.map(|(t, id)| RayHit {
            triangle: id,
            t,
            point: ray.at(t),
        })
    }
}

/// Möller-Trumbore ray/triangle intersection. Returns the ray parameter of
/// the hit when `t >= 0`; back faces are hit too.
pub fn intersect_triangle(origin: Vec3, dir: Vec3, v0: Vec3, v1: Vec3, v2: Vec3) -> Option<f64> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t >= 0.0 {
        Some(t)
    } else {
        None
    }
}

/// Brute-force reference: scan every triangle with the same intersection
/// code and tie rule. Used by tests and kept here so the planner-side BVH
/// and the oracle cannot drift apart on per-triangle semantics.
pub fn ray_hit_brute_force(mesh: &TriangleMesh, ray: &Ray) -> Option<RayHit> {
    let mut best: Option<(f64, u32)> = None;
    for (id, _) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = mesh.triangle_vertices(id);
        if let Some(t) = intersect_triangle(ray.origin, ray.direction, a, b, c) {
            if t <= ray.max_t {
                let better = match best {
                    None => true,
                    Some((bt, bid)) => t < bt || (t == bt && (id as u32) < bid),
                };
                if better {
                    best = Some((t, id as u32));
                }
            }
        }
    }
    best.map(|(t, id)| RayHit {
        triangle: id,
        t,
        point: ray.at(t),
    })
}
