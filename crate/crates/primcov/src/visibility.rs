//! The four-condition binary visibility model between camera poses and
//! surface patches, and its aggregation over a path primitive's sampled
//! poses.
//!
//! A patch is visible from a pose iff all of:
//! 1. its centroid lies inside the rectangular camera frustum,
//! 2. it is within the sensor's viewing range,
//! 3. the angle between its outward normal and the patch-to-camera vector
//!    is within the sensor's max viewing angle,
//! 4. the ray from the camera to the centroid reaches the patch without
//!    occlusion.

use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::geometry::{Bvh, Ray, RayHit, SurfacePatch, SurfacePatchSet};
use crate::math::{Vec3};
use crate::sampling::{PathPrimitive, Pose};

/// Camera/sensor description. Field of view is given as the diagonal angle
/// plus the image aspect, mirroring typical datasheets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModel {
    pub fov_diag_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub max_view_angle_deg: f64,
    pub max_view_range: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            fov_diag_deg: 94.0,
            image_width: 4000,
            image_height: 3000,
            max_view_angle_deg: 75.0,
            max_view_range: 50.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.fov_diag_deg > 0.0 && self.fov_diag_deg < 180.0) {
            return Err(crate::Error::InvalidParam(
                "diagonal field of view must be in (0, 180) degrees".into(),
            ));
        }
        if !(self.max_view_angle_deg > 0.0 && self.max_view_angle_deg < 90.0) {
            return Err(crate::Error::InvalidParam(
                "max viewing angle must be in (0, 90) degrees".into(),
            ));
        }
        if !(self.max_view_range > 0.0) {
            return Err(crate::Error::InvalidParam(
                "max viewing range must be > 0".into(),
            ));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(crate::Error::InvalidParam(
                "image resolution must be nonzero".into(),
            ));
        }
        Ok(())
    }

    /// Per-axis half angles (radians) of the rectangular frustum from the
    /// pinhole relation: the diagonal half-angle's tangent splits across the
    /// axes by the aspect ratio.
    pub fn half_angles(&self) -> (f64, f64) {
        let tan_diag = (self.fov_diag_deg.to_radians() / 2.0).tan();
        let w = self.image_width as f64;
        let h = self.image_height as f64;
        let diag = (w * w + h * h).sqrt();
        ((tan_diag * w / diag).atan(), (tan_diag * h / diag).atan())
    }
}

/// Derived per-axis frustum half angles, in radians.
pub fn derive_fov_half_angles(sensor: &SensorModel) -> (f64, f64) {
    sensor.half_angles()
}

/// Orthonormal right-handed camera frame at a pose. The up vector is world-z
/// projected orthogonal to the optical axis (gimbal yaw/pitch, zero roll);
/// within 1 degree of vertical the reference switches to world-x.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl CameraFrame {
    pub fn from_pose(pose: &Pose) -> CameraFrame {
        let forward = pose
            .direction
            .normalized()
            .expect("pose direction must be a unit vector");
        let vertical_cos = 1.0f64.to_radians().cos();
        let hint = if forward.dot(Vec3::Z).abs() >= vertical_cos {
            Vec3::X
        } else {
            Vec3::Z
        };
        let up = (hint - forward * hint.dot(forward))
            .normalized()
            .expect("up reference is not parallel to the axis");
        let right = up.cross(forward);
        CameraFrame {
            position: pose.position,
            forward,
            right,
            up,
        }
    }

    /// World point -> camera coordinates (right, up, forward).
    pub fn to_camera(&self, world: Vec3) -> Vec3 {
        let rel = world - self.position;
        crate::math::vec3(rel.dot(self.right), rel.dot(self.up), rel.dot(self.forward))
    }

    /// Camera coordinates -> world point (the pose transform of a simulated
    /// depth return).
    pub fn to_world(&self, cam: Vec3) -> Vec3 {
        self.position + self.right * cam.x + self.up * cam.y + self.forward * cam.z
    }
}

/// Precomputed thresholds for the four-condition test.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityModel {
    pub sensor: SensorModel,
    /// Hit-point tolerance absorbing self-intersection noise in the
    /// occlusion condition.
    pub occlusion_tolerance: f64,
    tan_half_h: f64,
    tan_half_v: f64,
    cos_max_angle: f64,
}

impl VisibilityModel {
    pub fn new(sensor: SensorModel, occlusion_tolerance: f64) -> VisibilityModel {
        let (th, tv) = sensor.half_angles();
        VisibilityModel {
            sensor,
            occlusion_tolerance,
            tan_half_h: th.tan(),
            tan_half_v: tv.tan(),
            cos_max_angle: sensor.max_view_angle_deg.to_radians().cos(),
        }
    }

    /// Frustum containment of a world point (condition 1).
    pub fn in_frustum(&self, frame: &CameraFrame, point: Vec3) -> bool {
        let c = frame.to_camera(point);
        c.z > 0.0 && c.x.abs() <= self.tan_half_h * c.z && c.y.abs() <= self.tan_half_v * c.z
    }
}

/// The four-condition test with a caller-supplied ray-cast routine, so the
/// BVH-accelerated path and a brute-force all-triangles path share every
/// other line of code.
pub fn pose_sees_patch_with(
    model: &VisibilityModel,
    frame: &CameraFrame,
    patch: &SurfacePatch,
    cast: &mut dyn FnMut(&Ray) -> Option<RayHit>,
) -> bool {
    let to_patch = patch.centroid - frame.position;
    let dist = to_patch.norm();

    // (2) viewing range
    if dist > model.sensor.max_view_range {
        return false;
    }
    // (1) field of view
    if !model.in_frustum(frame, patch.centroid) {
        return false;
    }
    // (3) viewing angle between patch normal and patch-to-camera vector
    if dist < 1e-12 {
        return false;
    }
    let to_camera = -to_patch / dist;
    if patch.normal.dot(to_camera) < model.cos_max_angle {
        return false;
    }
    // (4) occlusion: the first surface the ray meets must be this patch's
    // parent triangle, or at least a hit within tolerance of the centroid.
    let direction = to_patch / dist;
    let ray = Ray::new(frame.position, direction, dist + model.occlusion_tolerance);
    match cast(&ray) {
        Some(hit) => {
            hit.triangle == patch.parent
                || (hit.point - patch.centroid).norm() <= model.occlusion_tolerance
        }
        None => false,
    }
}

/// BVH-accelerated four-condition visibility of one patch from one pose.
pub fn pose_sees_patch(
    model: &VisibilityModel,
    pose: &Pose,
    patch: &SurfacePatch,
    bvh: &Bvh,
) -> bool {
    let frame = CameraFrame::from_pose(pose);
    pose_sees_patch_with(model, &frame, patch, &mut |ray| bvh.ray_hit(ray))
}

/// Visibility vector of a single pose over all patches.
pub fn pose_visibility(
    model: &VisibilityModel,
    pose: &Pose,
    patches: &SurfacePatchSet,
    bvh: &Bvh,
) -> Bitset {
    let frame = CameraFrame::from_pose(pose);
    let mut bits = Bitset::new(patches.len());
    for (k, patch) in patches.patches().iter().enumerate() {
        if pose_sees_patch_with(model, &frame, patch, &mut |ray| bvh.ray_hit(ray)) {
            bits.set(k, true);
        }
    }
    bits
}

/// Per-primitive visibility vector: bit k is set iff some sampled pose on
/// the primitive sees patch k (OR aggregation).
pub fn primitive_visibility(
    model: &VisibilityModel,
    primitive: &PathPrimitive,
    patches: &SurfacePatchSet,
    bvh: &Bvh,
) -> Bitset {
    let mut bits = Bitset::new(patches.len());
    for pose in &primitive.sample_poses {
        let frame = CameraFrame::from_pose(pose);
        for k in 0..patches.len() {
            if bits.get(k) {
                continue;
            }
            if pose_sees_patch_with(model, &frame, patches.patch(k), &mut |ray| bvh.ray_hit(ray)) {
                bits.set(k, true);
            }
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::LoadOptions;
    use crate::geometry::{make_patches, ray_hit_brute_force, TriangleMesh};
    use crate::math::vec3;

    fn floor_scene() -> (TriangleMesh, SurfacePatchSet) {
        // A 4 x 4 m floor square at z = 0, normal +z.
        let mesh = TriangleMesh::from_parts(
            vec![
                vec3(-2.0, -2.0, 0.0),
                vec3(2.0, -2.0, 0.0),
                vec3(2.0, 2.0, 0.0),
                vec3(-2.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            &LoadOptions::default(),
        )
        .unwrap()
        .0;
        let patches = make_patches(&mesh, 100.0).unwrap(); // one patch per triangle
        (mesh, patches)
    }

    fn model() -> VisibilityModel {
        VisibilityModel::new(SensorModel::default(), 0.1)
    }

    #[test]
    fn half_angles_match_closed_form() {
        let sensor = SensorModel::default();
        let (th, tv) = sensor.half_angles();
        // Closed form: tan(47 deg) split by 0.8 / 0.6 aspect factors.
        let tan_diag = 47.0f64.to_radians().tan();
        assert!((th - (tan_diag * 0.8).atan()).abs() < 1e-12);
        assert!((tv - (tan_diag * 0.6).atan()).abs() < 1e-12);
        assert!((th.to_degrees() - 40.63).abs() < 0.01);
        assert!((tv.to_degrees() - 32.76).abs() < 0.01);
    }

    #[test]
    fn square_sensor_half_angles_are_symmetric() {
        let sensor = SensorModel {
            fov_diag_deg: 90.0,
            image_width: 1000,
            image_height: 1000,
            ..SensorModel::default()
        };
        let (th, tv) = sensor.half_angles();
        assert_eq!(th, tv);
        let expected = (45.0f64.to_radians().tan() / 2.0f64.sqrt()).atan();
        assert!((th - expected).abs() < 1e-12);
        assert!((th.to_degrees() - 35.264).abs() < 0.01);
    }

    #[test]
    fn vanishing_fov_gives_vanishing_half_angles() {
        let sensor = SensorModel {
            fov_diag_deg: 1e-6,
            ..SensorModel::default()
        };
        let (th, tv) = sensor.half_angles();
        assert!(th < 1e-6 && tv < 1e-6);
        assert!(th > 0.0 && tv > 0.0);
    }

    #[test]
    fn camera_frame_is_orthonormal_right_handed() {
        let pose = Pose {
            position: vec3(1.0, 2.0, 3.0),
            direction: vec3(1.0, 1.0, -0.5).normalized().unwrap(),
        };
        let f = CameraFrame::from_pose(&pose);
        assert!(f.forward.is_unit(1e-12));
        assert!(f.right.is_unit(1e-12));
        assert!(f.up.is_unit(1e-12));
        assert!(f.right.dot(f.up).abs() < 1e-12);
        assert!(f.right.dot(f.forward).abs() < 1e-12);
        assert!(f.up.dot(f.forward).abs() < 1e-12);
        assert!((f.right.cross(f.up) - f.forward).norm() < 1e-12);

        // Vertical axis switches the up reference instead of degenerating.
        let down = Pose {
            position: Vec3::ZERO,
            direction: -Vec3::Z,
        };
        let f = CameraFrame::from_pose(&down);
        assert!((f.right.cross(f.up) - f.forward).norm() < 1e-12);
    }

    #[test]
    fn frame_transform_round_trips() {
        let pose = Pose {
            position: vec3(5.0, -3.0, 7.0),
            direction: vec3(0.3, -0.8, 0.5).normalized().unwrap(),
        };
        let f = CameraFrame::from_pose(&pose);
        let p = vec3(1.25, 9.5, -4.0);
        let back = f.to_world(f.to_camera(p));
        assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn overhead_camera_sees_floor_patch() {
        let (mesh, patches) = floor_scene();
        let bvh = Bvh::build(&mesh);
        let pose = Pose {
            position: vec3(0.0, 0.0, 10.0),
            direction: -Vec3::Z,
        };
        assert!(pose_sees_patch(&model(), &pose, patches.patch(0), &bvh));
        assert!(pose_sees_patch(&model(), &pose, patches.patch(1), &bvh));
    }

    #[test]
    fn range_condition_cuts_off_at_max_view_range() {
        let (mesh, patches) = floor_scene();
        let bvh = Bvh::build(&mesh);
        let pose = Pose {
            position: vec3(0.0, 0.0, 60.0),
            direction: -Vec3::Z,
        };
        assert!(!pose_sees_patch(&model(), &pose, patches.patch(0), &bvh));
    }

    #[test]
    fn occluder_blocks_the_patch() {
        let (mut mesh, _) = floor_scene();
        // A wall between camera and floor.
        let wall = TriangleMesh::from_parts(
            vec![
                vec3(-3.0, -3.0, 5.0),
                vec3(3.0, -3.0, 5.0),
                vec3(3.0, 3.0, 5.0),
                vec3(-3.0, 3.0, 5.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            &LoadOptions::default(),
        )
        .unwrap()
        .0;
        mesh.merge(&wall);
        let patches = make_patches(&mesh, 100.0).unwrap();
        let bvh = Bvh::build(&mesh);
        let pose = Pose {
            position: vec3(0.0, 0.0, 10.0),
            direction: -Vec3::Z,
        };
        // Floor patches (parents 0 and 1) are occluded by the wall.
        assert!(!pose_sees_patch(&model(), &pose, patches.patch(0), &bvh));
        // The wall itself is visible.
        let wall_patch = patches
            .patches()
            .iter()
            .position(|p| p.parent >= 2)
            .unwrap();
        assert!(pose_sees_patch(&model(), &pose, patches.patch(wall_patch), &bvh));
    }

    #[test]
    fn grazing_viewing_angle_rejected() {
        let (mesh, patches) = floor_scene();
        let bvh = Bvh::build(&mesh);
        let centroid = patches.patch(0).centroid;
        // Camera at 80 degrees from the normal, 10 m away, looking at the
        // centroid: beyond the 75-degree limit.
        let angle = 80.0f64.to_radians();
        let position = centroid + vec3(angle.sin(), 0.0, angle.cos()) * 10.0;
        let pose = Pose {
            position,
            direction: (centroid - position).normalized().unwrap(),
        };
        assert!(!pose_sees_patch(&model(), &pose, patches.patch(0), &bvh));

        // At 70 degrees the same setup passes.
        let angle = 70.0f64.to_radians();
        let position = centroid + vec3(angle.sin(), 0.0, angle.cos()) * 10.0;
        let pose = Pose {
            position,
            direction: (centroid - position).normalized().unwrap(),
        };
        assert!(pose_sees_patch(&model(), &pose, patches.patch(0), &bvh));
    }

    #[test]
    fn primitive_facing_away_sees_nothing() {
        let (mesh, patches) = floor_scene();
        let bvh = Bvh::build(&mesh);
        let up = Pose {
            position: vec3(0.0, 0.0, 5.0),
            direction: Vec3::Z,
        };
        let up2 = Pose {
            position: vec3(1.0, 0.0, 5.0),
            direction: Vec3::Z,
        };
        let prim = PathPrimitive {
            id: 0,
            i: 0,
            j: 1,
            polyline: vec![up.position, up2.position],
            length: 1.0,
            sample_poses: vec![up, up2],
        };
        let bits = primitive_visibility(&model(), &prim, &patches, &bvh);
        assert_eq!(bits.count_ones(), 0);
    }

    #[test]
    fn primitive_visibility_is_the_union_of_pose_visibility() {
        use crate::structures::ninety_six_patch_box;
        let mesh = ninety_six_patch_box();
        let patches = make_patches(&mesh, 0.1).unwrap();
        assert_eq!(patches.len(), 96);
        let bvh = Bvh::build(&mesh);
        let m = VisibilityModel::new(
            SensorModel {
                max_view_range: 20.0,
                ..SensorModel::default()
            },
            0.05,
        );

        let start = Pose {
            position: vec3(-2.0, 0.5, 2.0),
            direction: (vec3(0.5, 0.5, 0.3) - vec3(-2.0, 0.5, 2.0)).normalized().unwrap(),
        };
        let end = Pose {
            position: vec3(3.0, 0.5, 2.0),
            direction: (vec3(0.5, 0.5, 0.3) - vec3(3.0, 0.5, 2.0)).normalized().unwrap(),
        };
        let poses = crate::sampling::sample_poses_on_segment(&start, &end, 1.0);
        let prim = PathPrimitive {
            id: 0,
            i: 0,
            j: 1,
            polyline: vec![start.position, end.position],
            length: 5.0,
            sample_poses: poses.clone(),
        };
        let combined = primitive_visibility(&m, &prim, &patches, &bvh);
        let mut union = Bitset::new(patches.len());
        for pose in &poses {
            let bits = pose_visibility(&m, pose, &patches, &bvh);
            assert!(bits.is_subset_of(&combined));
            union.union_with(&bits);
        }
        assert_eq!(union, combined);
        assert!(combined.any(), "primitive should see something");
    }

    #[test]
    fn bvh_path_matches_brute_force_path() {
        use crate::structures::ninety_six_patch_box;
        use rand::{Rng, SeedableRng};
        let mesh = ninety_six_patch_box();
        let patches = make_patches(&mesh, 0.1).unwrap();
        let bvh = Bvh::build(&mesh);
        let m = model();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let position = vec3(
                rng.random::<f64>() * 8.0 - 4.0,
                rng.random::<f64>() * 8.0 - 4.0,
                rng.random::<f64>() * 8.0 - 4.0,
            );
            let target = vec3(
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>() * 0.6,
            );
            let Some(direction) = (target - position).normalized() else {
                continue;
            };
            let pose = Pose { position, direction };
            let frame = CameraFrame::from_pose(&pose);
            for patch in patches.patches() {
                let fast = pose_sees_patch_with(&m, &frame, patch, &mut |ray| bvh.ray_hit(ray));
                let brute =
                    pose_sees_patch_with(&m, &frame, patch, &mut |ray| ray_hit_brute_force(&mesh, ray));
                assert_eq!(fast, brute);
            }
        }
    }
}
