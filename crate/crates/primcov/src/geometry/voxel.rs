//! Binary voxel occupancy grids: surface voxelization, morphological
//! dilation/subtraction, interior fill, and segment traversal queries.

use std::io::Write;

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::math::{vec3, Vec3};

use super::mesh::TriangleMesh;

/// Hard cap so a typo'd resolution fails fast instead of exhausting memory.
pub const DEFAULT_MAX_VOXELS: usize = 200_000_000;

#[derive(Debug, Clone, Copy)]
pub struct VoxelizeOptions {
    /// Flood-fill the enclosed interior after surface voxelization.
    pub fill_interior: bool,
    pub max_voxels: usize,
}

impl Default for VoxelizeOptions {
    fn default() -> Self {
        VoxelizeOptions {
            fill_interior: false,
            max_voxels: DEFAULT_MAX_VOXELS,
        }
    }
}

/// Dense binary occupancy grid. `origin` is the lower corner of voxel
/// (0,0,0); voxel (i,j,k) spans `origin + [i,j,k]*r .. origin + [i+1,j+1,k+1]*r`.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
    occ: Bitset,
}

/// A straight segment between two points, used for clearance queries.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub start: Vec3,
    pub end: Vec3,
}

impl VoxelGrid {
    pub fn empty(origin: Vec3, resolution: f64, dims: [usize; 3]) -> VoxelGrid {
        VoxelGrid {
            origin,
            resolution,
            dims,
            occ: Bitset::new(dims[0] * dims[1] * dims[2]),
        }
    }

    #[inline]
    fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occ.get(self.linear(i, j, k))
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.linear(i, j, k);
        self.occ.set(idx, value);
    }

    pub fn occupied_count(&self) -> usize {
        self.occ.count_ones()
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Center of voxel (i,j,k) in world coordinates.
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + vec3(
                (i as f64 + 0.5) * self.resolution,
                (j as f64 + 0.5) * self.resolution,
                (k as f64 + 0.5) * self.resolution,
            )
    }

    /// Voxel containing `p` under the floor convention, if inside the grid.
    pub fn voxel_of(&self, p: Vec3) -> Option<[usize; 3]> {
        let g = (p - self.origin) / self.resolution;
        let (i, j, k) = (g.x.floor(), g.y.floor(), g.z.floor());
        if i < 0.0 || j < 0.0 || k < 0.0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return None;
        }
        Some([i, j, k])
    }

    pub fn is_point_occupied(&self, p: Vec3) -> bool {
        match self.voxel_of(p) {
            Some([i, j, k]) => self.get(i, j, k),
            None => false,
        }
    }

    pub fn occupied_indices(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(self.occupied_count());
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if self.get(i, j, k) {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    /// Morphological dilation with a Euclidean (spherical) structuring
    /// element: an output voxel is occupied iff the distance between its
    /// center and some occupied input voxel center is at most `d`. The grid
    /// expands by `ceil(d/r)` voxels on every side.
    pub fn dilate(&self, d: f64) -> VoxelGrid {
        assert!(d >= 0.0, "dilation distance must be non-negative");
        let r = self.resolution;
        let margin = if d == 0.0 { 0 } else { (d / r).ceil() as usize };
        let dims = [
            self.dims[0] + 2 * margin,
            self.dims[1] + 2 * margin,
            self.dims[2] + 2 * margin,
        ];
        let origin = self.origin - vec3(1.0, 1.0, 1.0) * (margin as f64 * r);

        // Exact squared Euclidean distance transform in voxel-index units,
        // then threshold. Distances in index space are integers, which the
        // lower-envelope transform reproduces exactly.
        let n = dims[0] * dims[1] * dims[2];
        let mut field = vec![f64::INFINITY; n];
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if self.get(i, j, k) {
                        let idx = ((k + margin) * dims[1] + (j + margin)) * dims[0] + (i + margin);
                        field[idx] = 0.0;
                    }
                }
            }
        }
        squared_edt_3d(&mut field, dims);

        let mut out = VoxelGrid::empty(origin, r, dims);
        for (idx, &d2) in field.iter().enumerate() {
            if d2.is_finite() && r * d2.sqrt() <= d {
                out.occ.set(idx, true);
            }
        }
        out
    }

    /// Occupied iff occupied in `self` and not in `other`. Both grids must
    /// share the resolution and sit on a common voxel lattice; the result is
    /// expressed in `self`'s frame.
    pub fn subtract(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        if (self.resolution - other.resolution).abs() > 1e-12 {
            return Err(Error::ResolutionMismatch(self.resolution, other.resolution));
        }
        let r = self.resolution;
        let shift = (other.origin - self.origin) / r;
        let mut offset = [0i64; 3];
        for (a, raw) in offset.iter_mut().zip([shift.x, shift.y, shift.z]) {
            let rounded = raw.round();
            if (raw - rounded).abs() > 1e-6 {
                return Err(Error::GridMisaligned);
            }
            *a = rounded as i64;
        }

        let mut out = self.clone();
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if !self.get(i, j, k) {
                        continue;
                    }
                    let oi = i as i64 - offset[0];
                    let oj = j as i64 - offset[1];
                    let ok = k as i64 - offset[2];
                    let inside = oi >= 0
                        && oj >= 0
                        && ok >= 0
                        && (oi as usize) < other.dims[0]
                        && (oj as usize) < other.dims[1]
                        && (ok as usize) < other.dims[2];
                    if inside && other.get(oi as usize, oj as usize, ok as usize) {
                        out.set(i, j, k, false);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Mark every voxel enclosed by the occupied shell as occupied
    /// (flood fill from the grid boundary; out-of-grid counts as exterior).
    pub fn fill_interior(&mut self) {
        let [nx, ny, nz] = self.dims;
        let mut exterior = Bitset::new(self.voxel_count());
        let mut queue = std::collections::VecDeque::new();

        let try_seed = |grid: &VoxelGrid, ext: &mut Bitset, q: &mut std::collections::VecDeque<[usize; 3]>, i: usize, j: usize, k: usize| {
            let idx = grid.linear(i, j, k);
            if !grid.occ.get(idx) && !ext.get(idx) {
                ext.set(idx, true);
                q.push_back([i, j, k]);
            }
        };

        for j in 0..ny {
            for i in 0..nx {
                try_seed(self, &mut exterior, &mut queue, i, j, 0);
                try_seed(self, &mut exterior, &mut queue, i, j, nz - 1);
            }
        }
        for k in 0..nz {
            for i in 0..nx {
                try_seed(self, &mut exterior, &mut queue, i, 0, k);
                try_seed(self, &mut exterior, &mut queue, i, ny - 1, k);
            }
        }
        for k in 0..nz {
            for j in 0..ny {
                try_seed(self, &mut exterior, &mut queue, 0, j, k);
                try_seed(self, &mut exterior, &mut queue, nx - 1, j, k);
            }
        }

        while let Some([i, j, k]) = queue.pop_front() {
            let visit = |ni: i64, nj: i64, nk: i64, grid: &VoxelGrid, ext: &mut Bitset, q: &mut std::collections::VecDeque<[usize; 3]>| {
                if ni < 0 || nj < 0 || nk < 0 {
                    return;
                }
                let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
                if ni >= nx || nj >= ny || nk >= nz {
                    return;
                }
                let idx = grid.linear(ni, nj, nk);
                if !grid.occ.get(idx) && !ext.get(idx) {
                    ext.set(idx, true);
                    q.push_back([ni, nj, nk]);
                }
            };
            let (i, j, k) = (i as i64, j as i64, k as i64);
            visit(i - 1, j, k, self, &mut exterior, &mut queue);
            visit(i + 1, j, k, self, &mut exterior, &mut queue);
            visit(i, j - 1, k, self, &mut exterior, &mut queue);
            visit(i, j + 1, k, self, &mut exterior, &mut queue);
            visit(i, j, k - 1, self, &mut exterior, &mut queue);
            visit(i, j, k + 1, self, &mut exterior, &mut queue);
        }

        for idx in 0..self.voxel_count() {
            if !exterior.get(idx) {
                self.occ.set(idx, true);
            }
        }
    }

    /// True iff the segment's voxel traversal touches no occupied voxel.
    /// Portions outside the grid count as clear space. The traversal visits
    /// exactly the voxels that contain segment points under the floor
    /// convention; on exact boundary ties it steps diagonally.
    pub fn segment_clear(&self, seg: &Segment) -> bool {
        let r = self.resolution;
        let a = (seg.start - self.origin) / r;
        let b = (seg.end - self.origin) / r;
        let dir = b - a;

        // Clip the parameter range to the grid box.
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for axis in 0..3 {
            let (p, d, n) = (a.component(axis), dir.component(axis), self.dims[axis] as f64);
            if d.abs() < 1e-300 {
                if p < 0.0 || p > n {
                    return true;
                }
            } else {
                let (mut ta, mut tb) = ((0.0 - p) / d, (n - p) / d);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return true;
                }
            }
        }

        let entry = a + dir * t0;
        let clamp_cell = |v: f64, n: usize| -> i64 { (v.floor() as i64).clamp(0, n as i64 - 1) };
        let mut cell = [
            clamp_cell(entry.x, self.dims[0]),
            clamp_cell(entry.y, self.dims[1]),
            clamp_cell(entry.z, self.dims[2]),
        ];

        let mut step = [0i64; 3];
        let mut t_next = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for axis in 0..3 {
            let d = dir.component(axis);
            let p = entry.component(axis);
            if d > 0.0 {
                step[axis] = 1;
                t_next[axis] = t0 + ((cell[axis] + 1) as f64 - p) / d;
                t_delta[axis] = 1.0 / d;
            } else if d < 0.0 {
                step[axis] = -1;
                t_next[axis] = t0 + (cell[axis] as f64 - p) / d;
                t_delta[axis] = -1.0 / d;
            }
        }

        let in_bounds = |c: &[i64; 3], dims: &[usize; 3]| {
            (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < dims[a])
        };

        loop {
            if in_bounds(&cell, &self.dims)
                && self.get(cell[0] as usize, cell[1] as usize, cell[2] as usize)
            {
                return false;
            }
            let tmin = t_next[0].min(t_next[1]).min(t_next[2]);
            if tmin > t1 {
                break;
            }
            if tmin == t1 {
                // The segment ends exactly on a boundary; the endpoint itself
                // belongs to the upper cell only when moving in +direction.
                let mut moved = false;
                for axis in 0..3 {
                    if t_next[axis] == tmin && step[axis] > 0 {
                        cell[axis] += 1;
                        moved = true;
                    }
                }
                if moved
                    && in_bounds(&cell, &self.dims)
                    && self.get(cell[0] as usize, cell[1] as usize, cell[2] as usize)
                {
                    return false;
                }
                break;
            }
            for axis in 0..3 {
                if t_next[axis] == tmin {
                    cell[axis] += step[axis];
                    t_next[axis] += t_delta[axis];
                }
            }
            if !in_bounds(&cell, &self.dims) {
                break;
            }
        }
        true
    }

    /// Sparse debug dump: one `x y z` line of integer voxel coordinates per
    /// occupied voxel, in linear scan order.
    pub fn write_sparse(&self, mut w: impl Write) -> std::io::Result<()> {
        for [i, j, k] in self.occupied_indices() {
            writeln!(w, "{} {} {}", i, j, k)?;
        }
        Ok(())
    }
}

/// Surface voxelization: a voxel is occupied iff its (closed) cube intersects
/// some triangle of the mesh.
pub fn voxelize(mesh: &TriangleMesh, resolution: f64, options: &VoxelizeOptions) -> Result<VoxelGrid> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParam("voxel resolution must be > 0".into()));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (lo, hi) = mesh.bounding_box();
    let extent = hi - lo;
    let dims = [
        ((extent.x / resolution).ceil() as usize).max(1),
        ((extent.y / resolution).ceil() as usize).max(1),
        ((extent.z / resolution).ceil() as usize).max(1),
    ];
    let total = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or(Error::GridTooLarge {
            requested: usize::MAX,
            limit: options.max_voxels,
        })?;
    if total > options.max_voxels {
        return Err(Error::GridTooLarge {
            requested: total,
            limit: options.max_voxels,
        });
    }

    let mut grid = VoxelGrid::empty(lo, resolution, dims);
    let half = resolution * 0.5;
    for t in 0..mesh.triangles.len() {
        let verts = mesh.triangle_vertices(t);
        let tlo = verts[0].min_componentwise(verts[1]).min_componentwise(verts[2]);
        let thi = verts[0].max_componentwise(verts[1]).max_componentwise(verts[2]);
        let cell_range = |vlo: f64, vhi: f64, olo: f64, n: usize| {
            let a = (((vlo - olo) / resolution).floor() as i64).clamp(0, n as i64 - 1) as usize;
            let b = (((vhi - olo) / resolution).floor() as i64).clamp(0, n as i64 - 1) as usize;
            a..=b
        };
        for k in cell_range(tlo.z, thi.z, lo.z, dims[2]) {
            for j in cell_range(tlo.y, thi.y, lo.y, dims[1]) {
                for i in cell_range(tlo.x, thi.x, lo.x, dims[0]) {
                    if grid.get(i, j, k) {
                        continue;
                    }
                    let center = grid.center(i, j, k);
                    if triangle_box_overlap(center, half, &verts) {
                        grid.set(i, j, k, true);
                    }
                }
            }
        }
    }

    if options.fill_interior {
        grid.fill_interior();
    }
    Ok(grid)
}

/// Separating-axis triangle/cube overlap test (closed sets: touching counts).
pub fn triangle_box_overlap(box_center: Vec3, half: f64, verts: &[Vec3; 3]) -> bool {
    let v0 = verts[0] - box_center;
    let v1 = verts[1] - box_center;
    let v2 = verts[2] - box_center;

    // Box axes.
    for axis in 0..3 {
        let (a, b, c) = (v0.component(axis), v1.component(axis), v2.component(axis));
        if a.min(b).min(c) > half || a.max(b).max(c) < -half {
            return false;
        }
    }

    let e0 = v1 - v0;
    let e1 = v2 - v1;
    let e2 = v0 - v2;

    // Nine edge cross-product axes.
    let axes = [
        vec3(0.0, -e0.z, e0.y),
        vec3(0.0, -e1.z, e1.y),
        vec3(0.0, -e2.z, e2.y),
        vec3(e0.z, 0.0, -e0.x),
        vec3(e1.z, 0.0, -e1.x),
        vec3(e2.z, 0.0, -e2.x),
        vec3(-e0.y, e0.x, 0.0),
        vec3(-e1.y, e1.x, 0.0),
        vec3(-e2.y, e2.x, 0.0),
    ];
    for axis in axes {
        let p0 = v0.dot(axis);
        let p1 = v1.dot(axis);
        let p2 = v2.dot(axis);
        let rad = half * (axis.x.abs() + axis.y.abs() + axis.z.abs());
        if p0.min(p1).min(p2) > rad || p0.max(p1).max(p2) < -rad {
            return false;
        }
    }

    // Triangle plane.
    let normal = e0.cross(e1);
    let d = normal.dot(v0);
    let rad = half * (normal.x.abs() + normal.y.abs() + normal.z.abs());
    d.abs() <= rad
}

/// In-place exact squared Euclidean distance transform over a 3D field in
/// index units (Felzenszwalb-Huttenlocher lower envelope, separable passes).
fn squared_edt_3d(field: &mut [f64], dims: [usize; 3]) {
    let [nx, ny, nz] = dims;
    let nmax = nx.max(ny).max(nz);
    let mut f = vec![0.0f64; nmax];
    let mut d = vec![0.0f64; nmax];
    let mut v = vec![0usize; nmax];
    let mut z = vec![0.0f64; nmax + 1];

    // Along x.
    for k in 0..nz {
        for j in 0..ny {
            let base = (k * ny + j) * nx;
            f[..nx].copy_from_slice(&field[base..base + nx]);
            dt_1d(&f[..nx], &mut d[..nx], &mut v, &mut z);
            field[base..base + nx].copy_from_slice(&d[..nx]);
        }
    }
    // Along y.
    for k in 0..nz {
        for i in 0..nx {
            for j in 0..ny {
                f[j] = field[(k * ny + j) * nx + i];
            }
            dt_1d(&f[..ny], &mut d[..ny], &mut v, &mut z);
            for j in 0..ny {
                field[(k * ny + j) * nx + i] = d[j];
            }
        }
    }
    // Along z.
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                f[k] = field[(k * ny + j) * nx + i];
            }
            dt_1d(&f[..nz], &mut d[..nz], &mut v, &mut z);
            for k in 0..nz {
                field[(k * ny + j) * nx + i] = d[k];
            }
        }
    }
}

/// 1D squared distance transform of a sampled function (lower envelope of
/// parabolas).
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;

    for q in 1..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        loop {
            let p = v[k];
            let s = if f[p] == f64::INFINITY {
                // Any parabola beats an infinite one everywhere to its left.
                f64::NEG_INFINITY
            } else {
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
            };
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }

    // Degenerate all-infinite row.
    if f[v[0]] == f64::INFINITY {
        d[..n].fill(f64::INFINITY);
        return;
    }

    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}
