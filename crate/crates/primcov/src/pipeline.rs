//! End-to-end orchestration: scene preparation, planning, artifact I/O,
//! verification, and the benchmark harness. The CLI is a thin wrapper over
//! these functions; tests and examples call them directly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::bitset::Bitset;
use crate::config::{BenchMethod, BenchSpec, PlanConfig, ResolvedConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    load_mesh, make_patches, Bvh, LoadOptions, LoadReport, SurfacePatchSet,
    TriangleMesh, VoxelGrid, VoxelizeOptions,
};
use crate::pcg::{build_pcg, PcgMeta, PrimitiveCoverageGraph};
use crate::sampling::{
    sample_primitives, sample_via_points, PathPrimitive, Pose, SamplingParams,
    StraightLinePlanner, ViaPoint,
};
use crate::search::{baseline_greedy_viewpoints, baseline_vpp_tsp, gns, InspectionPath};
use crate::verify::{verify_path, walk_pose_stream, write_hit_cloud_ply, CoverageReport};
use crate::visibility::{pose_visibility, VisibilityModel};

pub const PATH_FORMAT: &str = "path/1";
pub const MANIFEST_FORMAT: &str = "manifest/1";
/// Accepted shortfall of measured vs planned coverage: the planner evaluates
/// patch centroids while the verifier samples patch area by rays, so they
/// disagree near patch edges.
pub const VERIFY_TOLERANCE: f64 = 0.04;

/// Run a closure inside a rayon pool of the given size (0 = library
/// default). All parallel stages reduce deterministically, so the artifacts
/// do not depend on the worker count.
pub fn run_with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build thread pool");
    pool.install(f)
}

pub fn mesh_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Occlusion hit tolerance from the voxel resolution.
pub fn occlusion_tolerance(resolution: f64) -> f64 {
    (resolution / 10.0).max(0.05)
}

/// Everything derived from the mesh alone (seed-independent).
pub struct PreparedScene {
    pub mesh: TriangleMesh,
    pub load_report: LoadReport,
    pub mesh_hash: String,
    pub bvh: Bvh,
    pub patches: SurfacePatchSet,
    pub region: VoxelGrid,
    pub safety: VoxelGrid,
    pub resolution: f64,
}

pub fn prepare_scene(config: &ResolvedConfig) -> Result<PreparedScene> {
    let mesh_hash = mesh_sha256(&config.mesh)?;
    let (mesh, load_report) = load_mesh(&config.mesh, &LoadOptions::default())?;
    let patches = make_patches(&mesh, config.max_patch_area)?;
    let bvh = Bvh::build(&mesh);
    let voxel_options = VoxelizeOptions {
        fill_interior: config.fill_interior,
        max_voxels: config.max_voxels,
    };
    let (region, safety) = crate::sampling::build_region_and_safety(
        &mesh,
        &config.sampling,
        config.resolution,
        &voxel_options,
    )?;
    Ok(PreparedScene {
        mesh,
        load_report,
        mesh_hash,
        bvh,
        patches,
        region,
        safety,
        resolution: config.resolution,
    })
}

/// Seed-dependent products: samples and the finished coverage graph.
pub struct PlanProducts {
    pub via_points: Vec<ViaPoint>,
    pub primitives: Vec<PathPrimitive>,
    pub graph: PrimitiveCoverageGraph,
    pub delta_max: f64,
}

/// Build via-points, primitives, and the PCG for one seed.
pub fn build_graph_with_sensor(
    scene: &PreparedScene,
    sampling: &SamplingParams,
    sensor: &crate::visibility::SensorModel,
) -> Result<PlanProducts> {
    let via_points = sample_via_points(&scene.region, &scene.patches, sampling)?;
    let primitives = sample_primitives(&via_points, &scene.safety, sampling, &StraightLinePlanner);
    let model = VisibilityModel::new(*sensor, occlusion_tolerance(scene.resolution));
    let graph = build_pcg(&via_points, &primitives, &scene.patches, &scene.bvh, &model)?;
    let (_, delta_max) = graph.max_coverage();
    Ok(PlanProducts {
        via_points,
        primitives,
        graph,
        delta_max,
    })
}

/// Per-via-point single-pose visibility vectors (the discrete-viewpoint view
/// of the same scene, used by the baseline planners).
pub fn viewpoint_visibility(
    scene: &PreparedScene,
    via_points: &[ViaPoint],
    sensor: &crate::visibility::SensorModel,
) -> Vec<Bitset> {
    use rayon::prelude::*;
    let model = VisibilityModel::new(*sensor, occlusion_tolerance(scene.resolution));
    via_points
        .par_iter()
        .map(|vp| pose_visibility(&model, &vp.pose(), &scene.patches, &scene.bvh))
        .collect()
}

// ---------------------------------------------------------------------------
// Path artifact

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathFileNode {
    id: u32,
    p: [f64; 3],
    dir: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathFileEdge {
    id: u32,
    i: u32,
    j: u32,
    length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathFileStep {
    edge: u32,
    gain: f64,
    coverage: f64,
    escape: bool,
}

/// Self-contained inspection-path artifact: every visited node carries its
/// pose so verification does not need the graph file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathFile {
    format: String,
    pub method: String,
    pub mesh_hash: String,
    pub m: usize,
    pub target_coverage: f64,
    pub delta: f64,
    pub total_length: f64,
    via_points: Vec<PathFileNode>,
    pub node_sequence: Vec<u32>,
    edges: Vec<PathFileEdge>,
    steps: Vec<PathFileStep>,
    covered: String,
}

impl PathFile {
    pub fn from_path(
        graph: &PrimitiveCoverageGraph,
        path: &InspectionPath,
        mesh_hash: &str,
        target_coverage: f64,
    ) -> PathFile {
        let mut ids: Vec<u32> = path.node_sequence.clone();
        ids.sort_unstable();
        ids.dedup();
        PathFile {
            format: PATH_FORMAT.into(),
            method: path.method.clone(),
            mesh_hash: mesh_hash.into(),
            m: graph.patch_count(),
            target_coverage,
            delta: path.coverage,
            total_length: path.total_length,
            via_points: ids
                .iter()
                .map(|&id| {
                    let n = graph.node(id);
                    PathFileNode {
                        id,
                        p: n.position.into(),
                        dir: n.direction.into(),
                    }
                })
                .collect(),
            node_sequence: path.node_sequence.clone(),
            edges: path
                .edge_sequence
                .iter()
                .map(|&eid| {
                    let e = graph.edge(eid);
                    PathFileEdge {
                        id: e.id,
                        i: e.i,
                        j: e.j,
                        length: e.length,
                    }
                })
                .collect(),
            steps: path
                .steps
                .iter()
                .map(|s| PathFileStep {
                    edge: s.edge,
                    gain: s.gain,
                    coverage: s.cumulative_coverage,
                    escape: s.escape,
                })
                .collect(),
            covered: path.covered.to_hex(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<PathFile> {
        let file: PathFile = serde_json::from_str(text)?;
        if file.format != PATH_FORMAT {
            return Err(Error::MalformedArtifact {
                what: "path file".into(),
                reason: format!("unsupported format tag {:?}", file.format),
            });
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<PathFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn node_pose(&self, id: u32) -> Result<Pose> {
        self.via_points
            .iter()
            .find(|n| n.id == id)
            .map(|n| Pose {
                position: n.p.into(),
                direction: n.dir.into(),
            })
            .ok_or_else(|| Error::MalformedArtifact {
                what: "path file".into(),
                reason: format!("node {} missing from via_points", id),
            })
    }

    /// Resampled pose stream along the stored walk.
    pub fn pose_stream(&self, spacing: f64) -> Result<Vec<Pose>> {
        for &id in &self.node_sequence {
            self.node_pose(id)?; // validate up front
        }
        walk_pose_stream(
            &self.node_sequence,
            |id| {
                self.node_pose(id)
                    .expect("node poses validated above")
            },
            spacing,
        )
    }
}

/// Flat waypoint stream `x,y,z,dx,dy,dz` resampled along the walk.
pub fn write_waypoints_csv(poses: &[Pose], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "x,y,z,dx,dy,dz")?;
    for pose in poses {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            pose.position.x,
            pose.position.y,
            pose.position.z,
            pose.direction.x,
            pose.direction.y,
            pose.direction.z
        )?;
    }
    Ok(())
}

/// ASCII PLY polyline of the walk for mesh viewers.
pub fn write_path_ply(
    graph: &PrimitiveCoverageGraph,
    path: &InspectionPath,
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", path.node_sequence.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(
        w,
        "element edge {}",
        path.node_sequence.len().saturating_sub(1)
    )?;
    writeln!(w, "property int vertex1")?;
    writeln!(w, "property int vertex2")?;
    writeln!(w, "end_header")?;
    for &id in &path.node_sequence {
        let p = graph.node(id).position;
        writeln!(w, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?;
    }
    for k in 0..path.node_sequence.len().saturating_sub(1) {
        writeln!(w, "{} {}", k, k + 1)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub triangles: usize,
    pub dropped_degenerate: usize,
    pub patches: usize,
    pub via_points: usize,
    pub primitives: usize,
    pub edges: usize,
    pub region_voxels: usize,
}

/// Run record tying every artifact to the exact configuration and inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config: PlanConfig,
    pub mesh_hash: String,
    pub seed: u64,
    pub counts: ManifestCounts,
    /// Achieved coverage ratio; absent when the target was unreachable.
    pub delta: Option<f64>,
    /// Maximum achievable coverage on the sampled graph.
    pub delta_max: f64,
    pub total_length: Option<f64>,
    pub error: Option<String>,
    pub timings_ms: BTreeMap<String, u64>,
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub struct PlanOutcome {
    pub manifest: Manifest,
    pub path: Option<InspectionPath>,
    pub graph: PrimitiveCoverageGraph,
    /// True when the coverage target was unreachable (manifest still
    /// written, exit code 3).
    pub unreachable: bool,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// The full planning pipeline: geometry, sampling, visibility, graph, and
/// search, with artifacts and a manifest written to the output directory.
pub fn run_plan(
    config: &PlanConfig,
    threads: usize,
    dump_samples: bool,
) -> Result<PlanOutcome> {
    let resolved = config.resolve()?;
    run_with_threads(threads, || run_plan_inner(config, &resolved, dump_samples))
}

fn run_plan_inner(
    original: &PlanConfig,
    config: &ResolvedConfig,
    dump_samples: bool,
) -> Result<PlanOutcome> {
    let out_dir = &config.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut timings: BTreeMap<String, u64> = BTreeMap::new();
    let stage = |name: &str, start: Instant, timings: &mut BTreeMap<String, u64>| {
        timings.insert(name.to_string(), start.elapsed().as_millis() as u64);
    };

    let t = Instant::now();
    let scene = prepare_scene(config)?;
    stage("prepare_scene", t, &mut timings);

    let t = Instant::now();
    let products = build_graph_with_sensor(&scene, &config.sampling, &config.sensor)?;
    stage("build_graph", t, &mut timings);

    let mut search_params = config.search.clone();
    if config.area_weighted {
        search_params.area_weights = Some(scene.patches.areas());
    }

    let t = Instant::now();
    let search_result = gns(&products.graph, &search_params);
    stage("search", t, &mut timings);

    let counts = ManifestCounts {
        triangles: scene.mesh.triangles.len(),
        dropped_degenerate: scene.load_report.dropped_degenerate,
        patches: scene.patches.len(),
        via_points: products.via_points.len(),
        primitives: products.primitives.len(),
        edges: products.graph.edge_count(),
        region_voxels: scene.region.occupied_count(),
    };

    let mut artifacts: BTreeMap<String, String> = BTreeMap::new();

    // The graph artifact is written regardless of search success.
    let t = Instant::now();
    let meta = PcgMeta {
        m: scene.patches.len(),
        mesh_hash: scene.mesh_hash.clone(),
        params: serde_json::to_value(original.canonicalized()?)?,
    };
    write_file(&out_dir.join("pcg.json"), &products.graph.to_json(&meta)?)?;
    artifacts.insert("pcg".into(), "pcg.json".into());

    if dump_samples {
        let mut buf = Vec::new();
        crate::sampling::write_via_points_jsonl(&products.via_points, &mut buf)
            .map_err(|e| Error::io(out_dir.join("via_points.jsonl"), e))?;
        write_file(&out_dir.join("via_points.jsonl"), &String::from_utf8_lossy(&buf))?;
        artifacts.insert("via_points".into(), "via_points.jsonl".into());

        let mut buf = Vec::new();
        crate::sampling::write_primitives_jsonl(&products.primitives, &mut buf)
            .map_err(|e| Error::io(out_dir.join("primitives.jsonl"), e))?;
        write_file(&out_dir.join("primitives.jsonl"), &String::from_utf8_lossy(&buf))?;
        artifacts.insert("primitives".into(), "primitives.jsonl".into());
    }

    let (path, error, unreachable) = match search_result {
        Ok(path) => (Some(path), None, false),
        Err(Error::UnreachableCoverage { target, max }) => (
            None,
            Some(format!(
                "coverage target {:.4} unreachable, max achievable {:.4}",
                target, max
            )),
            true,
        ),
        Err(other) => return Err(other),
    };

    if let Some(path) = &path {
        let file = PathFile::from_path(
            &products.graph,
            path,
            &scene.mesh_hash,
            config.search.target_coverage,
        );
        write_file(&out_dir.join("path.json"), &file.to_json()?)?;
        artifacts.insert("path".into(), "path.json".into());

        let poses = file.pose_stream(config.sampling.pose_spacing)?;
        let mut buf = Vec::new();
        write_waypoints_csv(&poses, &mut buf)
            .map_err(|e| Error::io(out_dir.join("waypoints.csv"), e))?;
        write_file(&out_dir.join("waypoints.csv"), &String::from_utf8_lossy(&buf))?;
        artifacts.insert("waypoints".into(), "waypoints.csv".into());

        let mut buf = Vec::new();
        write_path_ply(&products.graph, path, &mut buf)
            .map_err(|e| Error::io(out_dir.join("path.ply"), e))?;
        write_file(&out_dir.join("path.ply"), &String::from_utf8_lossy(&buf))?;
        artifacts.insert("polyline".into(), "path.ply".into());
    }
    stage("artifacts", t, &mut timings);

    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        config: original.canonicalized()?,
        mesh_hash: scene.mesh_hash.clone(),
        seed: config.seed,
        counts,
        delta: path.as_ref().map(|p| p.coverage),
        delta_max: products.delta_max,
        total_length: path.as_ref().map(|p| p.total_length),
        error,
        timings_ms: timings,
        artifacts,
    };
    write_file(
        &out_dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;

    Ok(PlanOutcome {
        manifest,
        path,
        graph: products.graph,
        unreachable,
    })
}

// ---------------------------------------------------------------------------
// Verification entry point

pub struct VerifyOutcome {
    pub report: CoverageReport,
    /// δ_meas within tolerance of the planner's claim.
    pub passed: bool,
}

/// Re-simulate a finished path against the mesh and compare measured
/// coverage with the planner's claim. The mesh hash in the path artifact
/// must match the mesh on disk.
pub fn run_verify(
    path_file: &Path,
    mesh_path: &Path,
    config: &PlanConfig,
    threads: usize,
    write_hits: bool,
) -> Result<VerifyOutcome> {
    let resolved = {
        let mut c = config.clone();
        if c.mesh.is_none() {
            c.mesh = Some(mesh_path.to_path_buf());
        }
        c.resolve()?
    };
    let file = PathFile::load(path_file)?;

    let actual_hash = mesh_sha256(mesh_path)?;
    if actual_hash != file.mesh_hash {
        return Err(Error::HashMismatch {
            expected: file.mesh_hash,
            actual: actual_hash,
        });
    }

    let (mesh, _) = load_mesh(mesh_path, &LoadOptions::default())?;
    let patches = make_patches(&mesh, resolved.max_patch_area)?;
    if patches.len() != file.m {
        return Err(Error::Config(format!(
            "patch count {} does not match the path artifact's m = {} (different max_patch_area?)",
            patches.len(),
            file.m
        )));
    }
    let bvh = Bvh::build(&mesh);

    let poses = file.pose_stream(resolved.verify.pose_spacing)?;
    let report = run_with_threads(threads, || {
        verify_path(
            &poses,
            &mesh,
            &bvh,
            &patches,
            &resolved.sensor,
            &resolved.verify,
            file.delta,
        )
    });

    let out_dir = &resolved.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("coverage.json"), &report.to_json()?)?;
    let mut buf = Vec::new();
    report
        .occupancy
        .write_sparse(&mut buf)
        .map_err(|e| Error::io(out_dir.join("coverage_voxels.txt"), e))?;
    write_file(&out_dir.join("coverage_voxels.txt"), &String::from_utf8_lossy(&buf))?;
    if write_hits {
        let mut buf = Vec::new();
        write_hit_cloud_ply(&report.occupancy, &mut buf)
            .map_err(|e| Error::io(out_dir.join("hits.ply"), e))?;
        write_file(&out_dir.join("hits.ply"), &String::from_utf8_lossy(&buf))?;
    }

    let passed = report.delta_meas >= report.delta_plan - VERIFY_TOLERANCE;
    Ok(VerifyOutcome { report, passed })
}

// ---------------------------------------------------------------------------
// Benchmark harness

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub structure: String,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub length: Option<f64>,
    pub delta: Option<f64>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchMethodSummary {
    pub structure: String,
    pub method: String,
    pub trials_ok: usize,
    pub mean_length: f64,
    pub mean_delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub rows: usize,
    pub methods: Vec<BenchMethodSummary>,
    /// Percent length reduction of GNS vs each baseline, averaged over
    /// structures.
    pub reduction_vs: BTreeMap<String, f64>,
    /// GNS mean length strictly below every baseline on every structure.
    pub gns_shortest_everywhere: bool,
}

/// Run every (structure, trial, method) case, write `bench.csv` and
/// `summary.json`, and return the summary. Per-case failures are recorded
/// in their row and the run continues.
pub fn run_bench(spec: &BenchSpec, out_dir: &Path, threads: usize) -> Result<BenchSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let seeds = spec.trial_seeds();

    let rows = run_with_threads(threads, || -> Result<Vec<BenchRow>> {
        let mut rows = Vec::new();
        for structure in &spec.structures {
            let mut config = spec.config.clone();
            config.mesh = Some(structure.mesh.clone());
            let resolved = config.resolve()?;
            let scene = prepare_scene(&resolved)?;

            for (trial, &seed) in seeds.iter().enumerate() {
                let mut sampling = resolved.sampling.clone();
                sampling.seed = seed;
                let built = build_graph_with_sensor(&scene, &sampling, &resolved.sensor);
                let (products, vp_vis) = match built {
                    Ok(p) => {
                        let vis = viewpoint_visibility(&scene, &p.via_points, &resolved.sensor);
                        (Some(p), vis)
                    }
                    Err(e) => {
                        for method in &spec.methods {
                            rows.push(BenchRow {
                                structure: structure.name.clone(),
                                method: method.name().into(),
                                trial,
                                seed,
                                length: None,
                                delta: None,
                                wall_ms: 0,
                                error: Some(e.to_string()),
                            });
                        }
                        continue;
                    }
                };
                let products = products.unwrap();

                let mut search_params = resolved.search.clone();
                if resolved.area_weighted {
                    search_params.area_weights = Some(scene.patches.areas());
                }

                for method in &spec.methods {
                    let start = Instant::now();
                    let outcome: Result<InspectionPath> = match method {
                        BenchMethod::Gns => gns(&products.graph, &search_params),
                        BenchMethod::Greedy => {
                            baseline_greedy_viewpoints(&products.graph, &vp_vis, &search_params)
                        }
                        BenchMethod::VppTsp => {
                            baseline_vpp_tsp(&products.graph, &vp_vis, &search_params)
                        }
                    };
                    let wall_ms = start.elapsed().as_millis() as u64;
                    match outcome {
                        Ok(path) => rows.push(BenchRow {
                            structure: structure.name.clone(),
                            method: method.name().into(),
                            trial,
                            seed,
                            length: Some(path.total_length),
                            delta: Some(path.coverage),
                            wall_ms,
                            error: None,
                        }),
                        Err(e) => rows.push(BenchRow {
                            structure: structure.name.clone(),
                            method: method.name().into(),
                            trial,
                            seed,
                            length: None,
                            delta: None,
                            wall_ms,
                            error: Some(e.to_string()),
                        }),
                    }
                }
            }
        }
        Ok(rows)
    })?;

    // CSV
    let mut csv = String::from("structure,method,trial,seed,length,delta,wall_ms,error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.structure,
            r.method,
            r.trial,
            r.seed,
            r.length.map_or(String::new(), |v| v.to_string()),
            r.delta.map_or(String::new(), |v| v.to_string()),
            r.wall_ms,
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    write_file(&out_dir.join("bench.csv"), &csv)?;

    // Per-(structure, method) means.
    let mut summaries: Vec<BenchMethodSummary> = Vec::new();
    for structure in &spec.structures {
        for method in &spec.methods {
            let ok: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| {
                    r.structure == structure.name
                        && r.method == method.name()
                        && r.error.is_none()
                })
                .collect();
            if ok.is_empty() {
                continue;
            }
            let mean_length =
                ok.iter().map(|r| r.length.unwrap()).sum::<f64>() / ok.len() as f64;
            let mean_delta = ok.iter().map(|r| r.delta.unwrap()).sum::<f64>() / ok.len() as f64;
            summaries.push(BenchMethodSummary {
                structure: structure.name.clone(),
                method: method.name().into(),
                trials_ok: ok.len(),
                mean_length,
                mean_delta,
            });
        }
    }

    // GNS-vs-baseline ordering and average reductions.
    let mean_of = |structure: &str, method: &str| -> Option<f64> {
        summaries
            .iter()
            .find(|s| s.structure == structure && s.method == method)
            .map(|s| s.mean_length)
    };
    let mut reduction_vs = BTreeMap::new();
    let mut shortest = true;
    for method in &spec.methods {
        if *method == BenchMethod::Gns {
            continue;
        }
        let mut reductions = Vec::new();
        for structure in &spec.structures {
            if let (Some(g), Some(b)) = (
                mean_of(&structure.name, "gns"),
                mean_of(&structure.name, method.name()),
            ) {
                if g >= b {
                    shortest = false;
                }
                if b > 0.0 {
                    reductions.push((1.0 - g / b) * 100.0);
                }
            }
        }
        if !reductions.is_empty() {
            reduction_vs.insert(
                method.name().to_string(),
                reductions.iter().sum::<f64>() / reductions.len() as f64,
            );
        }
    }

    let summary = BenchSummary {
        rows: rows.len(),
        methods: summaries,
        reduction_vs,
        gns_shortest_everywhere: shortest,
    };
    write_file(
        &out_dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occlusion_tolerance_floors_at_5cm() {
        assert_eq!(occlusion_tolerance(1.0), 0.1);
        assert_eq!(occlusion_tolerance(0.2), 0.05);
    }
}
