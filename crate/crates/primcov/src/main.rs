//! `primcov` command line: thin argument handling over the library pipeline.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use primcov::config::{BenchSpec, PlanConfig};
use primcov::error::Error;
use primcov::geometry::{load_mesh, LoadOptions};
use primcov::pcg::PrimitiveCoverageGraph;
use primcov::pipeline;
use primcov::structures::{generate_structure, StructureKind};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNREACHABLE: u8 = 3;
const EXIT_COVERAGE_GAP: u8 = 4;

#[derive(Parser)]
#[command(
    name = "primcov",
    about = "Coverage path planning for structural inspection",
    version
)]
struct Cli {
    /// Plan configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker thread count (0 = library default). Falls back to the
    /// PRIMCOV_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log level: error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full planning pipeline and write artifacts.
    Plan {
        /// Target mesh (overrides the config's `mesh`).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Also dump via-point and primitive JSONL samples.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Re-simulate a planned path and compare measured coverage.
    Verify {
        /// Path artifact produced by `plan` (path.json).
        path: PathBuf,
        /// The mesh the path was planned against.
        #[arg(long)]
        mesh: PathBuf,
        /// Also write a PLY point cloud of simulated hits.
        #[arg(long)]
        hits_ply: bool,
    },
    /// Run the benchmark matrix from a bench spec (TOML).
    Bench {
        spec: PathBuf,
    },
    /// Write a synthetic closed structure mesh.
    GenStructure {
        /// box, l-shape, or tower-annex.
        #[arg(long)]
        kind: String,
        /// Comma-separated dimensions in meters
        /// (box: sx,sy,sz; l-shape: outer_x,outer_y,arm_x,arm_y,height;
        /// tower-annex: tower_x,depth,tower_h,annex_x,annex_h).
        #[arg(long)]
        dims: String,
        /// Output OBJ path.
        #[arg(long)]
        out_file: PathBuf,
    },
    /// Print mesh or coverage-graph statistics.
    Inspect {
        /// Mesh (OBJ/STL) or PCG JSON file.
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();

    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParam(_) | Error::HashMismatch { .. } => EXIT_CONFIG,
        Error::UnreachableCoverage { .. } => EXIT_UNREACHABLE,
        _ => EXIT_IO,
    }
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<PlanConfig, Error> {
    match cli_config {
        Some(path) => PlanConfig::load(path),
        None => Ok(PlanConfig::default()),
    }
}

fn threads_from(cli: &Option<usize>) -> usize {
    cli.or_else(|| {
        std::env::var("PRIMCOV_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let threads = threads_from(&cli.threads);
    match cli.command {
        Command::Plan { mesh, dump_samples } => {
            let mut config = load_config(&cli.config)?;
            if let Some(mesh) = mesh {
                config.mesh = Some(mesh);
            }
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(out) = cli.out {
                config.out_dir = Some(out);
            }
            let outcome = pipeline::run_plan(&config, threads, dump_samples)?;
            let m = &outcome.manifest;
            if outcome.unreachable {
                eprintln!(
                    "coverage target unreachable: max achievable {:.4} (manifest written)",
                    m.delta_max
                );
                return Ok(ExitCode::from(EXIT_UNREACHABLE));
            }
            println!(
                "planned: delta {:.4} (target {:.2}), length {:.1} m, {} edges over {} via-points",
                m.delta.unwrap_or(0.0),
                config.search.target_coverage,
                m.total_length.unwrap_or(0.0),
                m.counts.edges,
                m.counts.via_points,
            );
            println!("artifacts in {}", m.config.out_dir.as_ref().unwrap().display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { path, mesh, hits_ply } => {
            let mut config = load_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(out) = cli.out {
                config.out_dir = Some(out);
            }
            if config.mesh.is_none() {
                config.mesh = Some(mesh.clone());
            }
            let outcome = pipeline::run_verify(&path, &mesh, &config, threads, hits_ply)?;
            println!(
                "measured delta {:.4} vs planned {:.4} ({} poses, {} hits)",
                outcome.report.delta_meas,
                outcome.report.delta_plan,
                outcome.report.pose_count,
                outcome.report.hit_count,
            );
            if outcome.passed {
                println!("verification PASSED (tolerance {})", pipeline::VERIFY_TOLERANCE);
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "verification FAILED: measured {:.4} < planned {:.4} - {}",
                    outcome.report.delta_meas,
                    outcome.report.delta_plan,
                    pipeline::VERIFY_TOLERANCE
                );
                Ok(ExitCode::from(EXIT_COVERAGE_GAP))
            }
        }

        Command::Bench { spec } => {
            let spec = BenchSpec::load(&spec)?;
            let out_dir = cli.out.unwrap_or_else(|| PathBuf::from("bench-out"));
            let summary = pipeline::run_bench(&spec, &out_dir, threads)?;
            println!("{} rows written to {}", summary.rows, out_dir.join("bench.csv").display());
            for s in &summary.methods {
                println!(
                    "  {:10} {:8}  mean length {:8.1} m  mean delta {:.4}  ({} trials)",
                    s.structure, s.method, s.mean_length, s.mean_delta, s.trials_ok
                );
            }
            for (method, reduction) in &summary.reduction_vs {
                println!("  gns vs {:8}: {:.1}% mean length reduction", method, reduction);
            }
            println!(
                "  gns shortest on every structure: {}",
                if summary.gns_shortest_everywhere { "yes" } else { "no" }
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::GenStructure { kind, dims, out_file } => {
            let kind = StructureKind::parse(&kind)?;
            let dims: Result<Vec<f64>, _> = dims.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let dims = dims.map_err(|e| Error::InvalidParam(format!("bad dims: {}", e)))?;
            let mesh = generate_structure(kind, &dims)?;
            mesh.save_obj(&out_file)?;
            println!(
                "wrote {} ({} triangles, {:.1} m^2 surface area)",
                out_file.display(),
                mesh.triangles.len(),
                mesh.surface_area()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Inspect { file } => {
            let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext.eq_ignore_ascii_case("json") {
                let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
                let (graph, meta) = PrimitiveCoverageGraph::from_json(&text)?;
                let (_, delta_max) = graph.max_coverage();
                let lengths: Vec<f64> = graph.edges().iter().map(|e| e.length).collect();
                let total: f64 = lengths.iter().sum();
                println!("primitive coverage graph: {}", file.display());
                println!("  nodes:       {}", graph.node_count());
                println!("  edges:       {}", graph.edge_count());
                println!("  patches (m): {}", meta.m);
                println!("  max coverage: {:.4}", delta_max);
                if !lengths.is_empty() {
                    println!(
                        "  edge length: mean {:.2} m, total {:.1} m",
                        total / lengths.len() as f64,
                        total
                    );
                }
                println!("  mesh hash:   {}", meta.mesh_hash);
            } else {
                let (mesh, report) = load_mesh(&file, &LoadOptions::default())?;
                let (lo, hi) = mesh.bounding_box();
                println!("mesh: {}", file.display());
                println!("  vertices:   {}", mesh.vertices.len());
                println!("  triangles:  {}", mesh.triangles.len());
                println!("  dropped:    {} degenerate", report.dropped_degenerate);
                println!("  area:       {:.3} m^2", mesh.surface_area());
                println!(
                    "  bounds:     [{:.2}, {:.2}, {:.2}] .. [{:.2}, {:.2}, {:.2}]",
                    lo.x, lo.y, lo.z, hi.x, hi.y, hi.z
                );
                println!("  euler char: {}", mesh.euler_characteristic());
                println!("  sha256:     {}", pipeline::mesh_sha256(&file)?);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
