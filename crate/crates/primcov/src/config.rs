//! Versioned TOML configuration with strict unknown-key rejection, plus the
//! benchmark specification.
//!
//! Unset values resolve from the structure-independent defaults: pairing
//! distance is half the viewing range, the potential-field range equals the
//! viewing range, voxel resolution is `min(safety_distance, 2 m) / 2` (the
//! safety shell stays at least two voxels thick), and pose spacing is two
//! voxels.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::DEFAULT_MAX_VOXELS;
use crate::sampling::SamplingParams;
use crate::search::{SearchParams, TieBreak};
use crate::verify::VerifyParams;
use crate::visibility::SensorModel;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub version: u32,
    /// Target mesh path; may instead come from the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub voxel: VoxelConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            version: CONFIG_VERSION,
            mesh: None,
            seed: 0,
            out_dir: None,
            sensor: SensorModel::default(),
            sampling: SamplingConfig::default(),
            voxel: VoxelConfig::default(),
            search: SearchConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub via_point_count: usize,
    /// Defaults to half the sensor's viewing range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_distance: Option<f64>,
    /// Defaults to the sensor's viewing range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_range: Option<f64>,
    pub safety_distance: f64,
    /// Defaults to two voxels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose_spacing: Option<f64>,
    /// Maximum surface patch area for coverage accounting.
    pub max_patch_area: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            via_point_count: 300,
            pair_distance: None,
            field_range: None,
            safety_distance: 2.0,
            pose_spacing: None,
            max_patch_area: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoxelConfig {
    /// Defaults to `min(safety_distance, 2) / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    pub fill_interior: bool,
    pub max_voxels: usize,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        VoxelConfig {
            resolution: None,
            fill_interior: true,
            max_voxels: DEFAULT_MAX_VOXELS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub target_coverage: f64,
    pub max_iterations: usize,
    pub area_weighted: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            target_coverage: 0.99,
            max_iterations: 100_000,
            area_weighted: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub ray_width: usize,
    pub ray_height: usize,
    /// Defaults to the sampling pose spacing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose_spacing: Option<f64>,
    /// Defaults to the voxel resolution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            ray_width: 160,
            ray_height: 120,
            pose_spacing: None,
            grid_resolution: None,
        }
    }
}

/// A fully-resolved configuration: every optional knob replaced by its
/// derived value and validated.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub mesh: PathBuf,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub sensor: SensorModel,
    pub sampling: SamplingParams,
    pub search: SearchParams,
    pub verify: VerifyParams,
    pub resolution: f64,
    pub fill_interior: bool,
    pub max_voxels: usize,
    pub max_patch_area: f64,
    pub area_weighted: bool,
}

impl PlanConfig {
    pub fn from_toml(text: &str) -> Result<PlanConfig> {
        let config: PlanConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {})",
                config.version, CONFIG_VERSION
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<PlanConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        self.sensor.validate()?;
        let mesh = self
            .mesh
            .clone()
            .ok_or_else(|| Error::Config("no mesh given (config `mesh` or --mesh)".into()))?;

        let safety = self.sampling.safety_distance;
        let view_range = self.sensor.max_view_range;
        let resolution = self
            .voxel
            .resolution
            .unwrap_or_else(|| safety.min(2.0) / 2.0);
        if !(resolution > 0.0) {
            return Err(Error::Config("voxel resolution must be > 0".into()));
        }
        let pose_spacing = self.sampling.pose_spacing.unwrap_or(2.0 * resolution);

        let sampling = SamplingParams {
            n_via_points: self.sampling.via_point_count,
            pair_distance: self.sampling.pair_distance.unwrap_or(view_range / 2.0),
            field_range: self.sampling.field_range.unwrap_or(view_range),
            view_range,
            safety_distance: safety,
            seed: self.seed,
            pose_spacing,
        };
        sampling.validate()?;

        let search = SearchParams {
            target_coverage: self.search.target_coverage,
            tie_break: TieBreak::SmallestEdgeId,
            max_iterations: self.search.max_iterations,
            area_weights: None, // filled from the patch set when area_weighted
        };
        search.validate()?;

        let verify = VerifyParams {
            ray_width: self.verify.ray_width,
            ray_height: self.verify.ray_height,
            pose_spacing: self.verify.pose_spacing.unwrap_or(pose_spacing),
            grid_resolution: self.verify.grid_resolution.unwrap_or(resolution),
        };
        if verify.ray_width == 0 || verify.ray_height == 0 {
            return Err(Error::Config("verify ray grid must be nonzero".into()));
        }

        if !(self.sampling.max_patch_area > 0.0) {
            return Err(Error::Config("max_patch_area must be > 0".into()));
        }

        Ok(ResolvedConfig {
            mesh,
            seed: self.seed,
            out_dir: self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            sensor: self.sensor,
            sampling,
            search,
            verify,
            resolution,
            fill_interior: self.voxel.fill_interior,
            max_voxels: self.voxel.max_voxels,
            max_patch_area: self.sampling.max_patch_area,
            area_weighted: self.search.area_weighted,
        })
    }

    /// A copy with every derived value pinned, so the manifest echoes the
    /// exact numbers the run used and re-parses to the same resolution.
    pub fn canonicalized(&self) -> Result<PlanConfig> {
        let resolved = self.resolve()?;
        let mut out = self.clone();
        out.mesh = Some(resolved.mesh.clone());
        out.out_dir = Some(resolved.out_dir.clone());
        out.sampling.pair_distance = Some(resolved.sampling.pair_distance);
        out.sampling.field_range = Some(resolved.sampling.field_range);
        out.sampling.pose_spacing = Some(resolved.sampling.pose_spacing);
        out.voxel.resolution = Some(resolved.resolution);
        out.verify.pose_spacing = Some(resolved.verify.pose_spacing);
        out.verify.grid_resolution = Some(resolved.verify.grid_resolution);
        Ok(out)
    }
}

/// Which planners a benchmark run compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    Gns,
    Greedy,
    VppTsp,
}

impl BenchMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BenchMethod::Gns => "gns",
            BenchMethod::Greedy => "greedy",
            BenchMethod::VppTsp => "vpp-tsp",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchStructure {
    pub name: String,
    pub mesh: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub version: u32,
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<BenchMethod>,
    /// One seed per trial; defaults to `0..trials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub config: PlanConfig,
    pub structures: Vec<BenchStructure>,
}

fn default_methods() -> Vec<BenchMethod> {
    vec![BenchMethod::Gns, BenchMethod::Greedy, BenchMethod::VppTsp]
}

impl BenchSpec {
    pub fn from_toml(text: &str) -> Result<BenchSpec> {
        let spec: BenchSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if spec.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported bench spec version {}",
                spec.version
            )));
        }
        if spec.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if spec.structures.is_empty() {
            return Err(Error::Config("at least one structure required".into()));
        }
        if let Some(seeds) = &spec.seeds {
            if seeds.len() != spec.trials {
                return Err(Error::Config(format!(
                    "{} seeds given for {} trials",
                    seeds.len(),
                    spec.trials
                )));
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<BenchSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.trials as u64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_table_values() {
        let config = PlanConfig {
            mesh: Some(PathBuf::from("box.obj")),
            ..Default::default()
        };
        let r = config.resolve().unwrap();
        assert_eq!(r.sensor.fov_diag_deg, 94.0);
        assert_eq!(r.sensor.max_view_angle_deg, 75.0);
        assert_eq!(r.sensor.max_view_range, 50.0);
        assert_eq!(r.search.target_coverage, 0.99);
        assert_eq!(r.sampling.safety_distance, 2.0);
        assert_eq!(r.resolution, 1.0); // min(2, 2) / 2
        assert_eq!(r.sampling.pair_distance, 25.0); // view range / 2
        assert_eq!(r.sampling.field_range, 50.0);
        assert_eq!(r.sampling.pose_spacing, 2.0); // two voxels
        assert_eq!(r.verify.ray_width, 160);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "version = 1\nmesh = \"m.obj\"\ntypo_key = 3\n";
        assert!(matches!(PlanConfig::from_toml(text), Err(Error::Config(_))));

        let nested = "version = 1\n[sensor]\nfov_diag_deg = 94.0\nbogus = 1\n";
        assert!(matches!(PlanConfig::from_toml(nested), Err(Error::Config(_))));
    }

    #[test]
    fn version_gate() {
        let text = "version = 99\n";
        assert!(matches!(PlanConfig::from_toml(text), Err(Error::Config(_))));
    }

    #[test]
    fn canonicalized_round_trips_through_the_parser() {
        let text = "\
version = 1
mesh = \"box.obj\"
seed = 7

[sensor]
fov_diag_deg = 94.0
image_width = 4000
image_height = 3000
max_view_angle_deg = 75.0
max_view_range = 50.0

[sampling]
via_point_count = 120
safety_distance = 2.0
";
        let config = PlanConfig::from_toml(text).unwrap();
        let canonical = config.canonicalized().unwrap();
        let serialized = toml::to_string(&canonical).unwrap();
        let reparsed = PlanConfig::from_toml(&serialized).unwrap();
        let a = reparsed.resolve().unwrap();
        let b = canonical.resolve().unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.resolution, b.resolution);
        assert_eq!(a.sampling.pair_distance, b.sampling.pair_distance);
        assert_eq!(a.sampling.pose_spacing, b.sampling.pose_spacing);
        assert_eq!(a.verify.pose_spacing, b.verify.pose_spacing);
    }

    #[test]
    fn bench_spec_parses_with_defaults() {
        let text = "\
version = 1
trials = 3

[config]
version = 1

[[structures]]
name = \"box\"
mesh = \"box.obj\"
";
        let spec = BenchSpec::from_toml(text).unwrap();
        assert_eq!(spec.methods.len(), 3);
        assert_eq!(spec.trial_seeds(), vec![0, 1, 2]);
    }

    #[test]
    fn bench_seed_count_must_match_trials() {
        let text = "\
version = 1
trials = 3
seeds = [1, 2]

[config]
version = 1

[[structures]]
name = \"box\"
mesh = \"box.obj\"
";
        assert!(matches!(BenchSpec::from_toml(text), Err(Error::Config(_))));
    }
}
