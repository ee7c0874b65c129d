//! `partpack` command-line entry point.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use partpack::bipartite_contraction::bipartize;
use partpack::contact_graph::ContactGraph;
use partpack::curation::dataset_stats;
use partpack::fixtures::{write_fixture, FixtureSpec};
use partpack::mesh_io::{load_object, write_obj};
use partpack::pipeline::{
    collect_reports, default_workers, object_id, part_contacts, prepare_parts, process_meshes, run_batch, run_pack,
    PipelineConfig, RunRecord, WORKERS_ENV,
};
use partpack::volume_packing::assign_volumes;
use partpack::watertight_field::{compute_sdf_grid, marching_cubes};

const DEFAULT_OUT: &str = "partpack-out";
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "partpack", version, about = "Pack part-annotated meshes into two collision-free volumes")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one mesh file.
    Pack {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the pipeline on every mesh file in a directory.
    Batch {
        dir: PathBuf,
        /// Worker threads.
        #[arg(short = 'j', long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Extract parts and write the contact graph (JSON and DOT).
    Graph {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Bipartize a contact graph file and write the plan and volume assignment.
    Contract {
        graph: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Signed distance grid and watertight mesh of a whole object.
    Voxelize {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Watertight mesh and sample sets of a whole object treated as one volume.
    Sample {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Dataset statistics over the `report.json` files below a directory.
    Stats {
        dir: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Synthetic test inputs.
    Fixtures {
        #[command(subcommand)]
        command: FixtureCommand,
    },
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Write one fixture to a file.
    Emit {
        /// One of the names printed by `fixtures list`.
        kind: String,
        /// Output file; the extension picks the format (.obj, .glb, .json).
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FixtureFormat>,
        /// Grid resolution the box fixtures are laid out for.
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the available fixture kinds.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureFormat {
    Obj,
    Glb,
    Json,
}

impl FixtureFormat {
    fn extension(self) -> &'static str {
        match self {
            FixtureFormat::Obj => "obj",
            FixtureFormat::Glb => "glb",
            FixtureFormat::Json => "json",
        }
    }
}

/// Flags mirroring the pipeline configuration. Flags override the file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Run directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    edge_limit: Option<usize>,
    #[arg(long)]
    dilation_voxels: Option<usize>,
    /// Dihedral angle threshold in degrees.
    #[arg(long)]
    angle_threshold: Option<f64>,
    #[arg(long)]
    small_face_count: Option<usize>,
    #[arg(long)]
    small_diagonal_voxels: Option<f64>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    surface_samples: Option<usize>,
    #[arg(long)]
    salient_samples: Option<usize>,
    #[arg(long)]
    sdf_uniform: Option<usize>,
    #[arg(long)]
    sdf_near_surface: Option<usize>,
    #[arg(long)]
    sdf_near_salient: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    write_grids: bool,
    #[arg(long)]
    write_ply: bool,
    #[arg(long)]
    emit_diagnostics: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<(PipelineConfig, PathBuf)> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            resolution => c.resolution,
            edge_limit => c.edge_limit,
            dilation_voxels => c.dilation_voxels,
            angle_threshold => c.angle_threshold,
            small_face_count => c.small_face_count,
            small_diagonal_voxels => c.small_diagonal_voxels,
            iou_threshold => c.iou_threshold,
            surface_samples => c.surface_samples,
            salient_samples => c.salient_samples,
            sdf_uniform => c.sdf_counts.uniform,
            sdf_near_surface => c.sdf_counts.near_surface,
            sdf_near_salient => c.sdf_counts.near_salient,
            sigma => c.sigma,
            seed => c.seed,
        );
        c.write_grids |= self.write_grids;
        c.write_ply |= self.write_ply;
        c.emit_diagnostics |= self.emit_diagnostics;
        if let Some(out) = &self.out {
            c.output_dir = Some(out.clone());
        }
        c.validate()?;
        let out = c.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((c, out))
    }
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn finish_run(command: &str, inputs: &[&Path], workers: usize, cfg: &PipelineConfig, out: &Path, start: Instant, failed: usize) -> Result<()> {
    let mut run = RunRecord::new(command, inputs.iter().map(|p| p.display().to_string()).collect(), workers, cfg);
    run.objects = inputs.len();
    run.failed = failed;
    run.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    run.write(out)?;
    Ok(())
}

fn object_dir(out: &Path, input: &Path) -> Result<PathBuf> {
    let dir = out.join(object_id(input));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn run(cli: Cli) -> Result<u8> {
    let start = Instant::now();
    match cli.command {
        Command::Pack { input, config } => {
            let (cfg, out) = config.resolve()?;
            let outcome = run_pack(&input, &cfg, &out)?;
            finish_run("pack", &[&input], 1, &cfg, &out, start, 0)?;
            let r = &outcome.report;
            println!(
                "{}: parts={} o1={:.6} o2={:.6} kept={} reason={:?}",
                r.object, r.part_count, r.o1, r.o2, r.kept, r.reason
            );
            Ok(outcome.exit_code() as u8)
        }
        Command::Batch { dir, workers, config } => {
            let (cfg, out) = config.resolve()?;
            let workers = workers.filter(|&w| w > 0).unwrap_or_else(default_workers);
            let summary = run_batch(&dir, &cfg, workers, &out)?;
            println!(
                "{} objects, {} succeeded, {} failed",
                summary.objects, summary.succeeded, summary.failed
            );
            if let Some(s) = &summary.stats {
                println!("kept {} of {} ({:.1}%)", s.kept, s.objects, 100.0 * s.keep_rate);
            }
            for f in &summary.failures {
                eprintln!("failed: {} [{}] {}", f.object, f.stage, f.error);
            }
            Ok(0)
        }
        Command::Graph { input, config } => {
            let (cfg, out) = config.resolve()?;
            let prepared = prepare_parts(load_object(&input)?, &cfg)?;
            let (graph, _) = part_contacts(&prepared.parts.parts, &cfg)?;
            let dir = object_dir(&out, &input)?;
            fs::write(dir.join("contact_graph.json"), graph.to_json()?)?;
            fs::write(dir.join("contact_graph.dot"), graph.to_dot())?;
            finish_run("graph", &[&input], 1, &cfg, &out, start, 0)?;
            println!(
                "{}: {} parts, {} contacts, bipartite={}",
                object_id(&input),
                graph.num_vertices(),
                graph.num_edges(),
                graph.is_bipartite()
            );
            Ok(0)
        }
        Command::Contract { graph, config } => {
            let (cfg, out) = config.resolve()?;
            let text = fs::read_to_string(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let g = ContactGraph::from_json(&text)?;
            let plan = bipartize(&g, cfg.edge_limit);
            let parts: usize = g.vertex_parts.iter().map(Vec::len).sum();
            let assignment = assign_volumes(&g, &plan, &vec![1; parts])?;
            let dir = object_dir(&out, &graph)?;
            fs::write(dir.join("plan.json"), plan.to_json()?)?;
            write_json(&dir.join("assignment.json"), &assignment)?;
            finish_run("contract", &[&graph], 1, &cfg, &out, start, 0)?;
            println!(
                "{}: {} contractions ({:?}), {} groups",
                object_id(&graph),
                plan.len(),
                plan.strategy,
                assignment.groups.len()
            );
            Ok(0)
        }
        Command::Voxelize { input, config } => {
            let (cfg, out) = config.resolve()?;
            let prepared = prepare_parts(load_object(&input)?, &cfg)?;
            let grid = compute_sdf_grid(&prepared.parts.parts, cfg.resolution)?;
            let dir = object_dir(&out, &input)?;
            grid.write_raw(&dir.join("grid.raw"))?;
            write_obj(&marching_cubes(&grid, 0.0), &dir.join("watertight.obj"))?;
            finish_run("voxelize", &[&input], 1, &cfg, &out, start, 0)?;
            println!(
                "{}: {} occupied voxels, ratio {:.6}",
                object_id(&input),
                grid.occupied_voxels,
                grid.occupancy_ratio
            );
            Ok(0)
        }
        Command::Sample { input, config } => {
            let (cfg, out) = config.resolve()?;
            let prepared = prepare_parts(load_object(&input)?, &cfg)?;
            let parts = &prepared.parts.parts;
            let dir = object_dir(&out, &input)?;
            let summary = process_meshes(parts, (0..parts.len()).collect(), 0, &cfg, &dir)?;
            write_json(&dir.join("samples.json"), &summary)?;
            finish_run("sample", &[&input], 1, &cfg, &out, start, 0)?;
            match &summary.samples {
                Some(s) => println!(
                    "{}: surface={} salient={} (fallback={}) sdf={}+{}+{}",
                    object_id(&input),
                    s.surface,
                    s.salient,
                    s.salient_fallback,
                    s.sdf_uniform,
                    s.sdf_near_surface,
                    s.sdf_near_salient
                ),
                None => println!("{}: empty volume, nothing sampled", object_id(&input)),
            }
            Ok(0)
        }
        Command::Stats { dir, out } => {
            let reports = collect_reports(&dir)?;
            let stats = dataset_stats(&reports)?;
            let out = out.unwrap_or(dir);
            fs::create_dir_all(&out)?;
            write_json(&out.join("stats.json"), &stats)?;
            fs::write(out.join("histogram.csv"), stats.histogram_csv())?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(0)
        }
        Command::Fixtures { command } => match command {
            FixtureCommand::List => {
                for k in FixtureSpec::KINDS {
                    println!("{k}");
                }
                Ok(0)
            }
            FixtureCommand::Emit {
                kind,
                out,
                format,
                resolution,
                seed,
            } => {
                let Some(spec) = FixtureSpec::named(&kind, resolution, seed) else {
                    bail!("unknown fixture kind {kind:?}; see `partpack fixtures list`");
                };
                let is_graph = matches!(spec, FixtureSpec::RandomGraph { .. });
                let default_ext = if is_graph {
                    "json"
                } else if matches!(spec, FixtureSpec::SeamSplitSphere { .. }) {
                    "glb"
                } else {
                    "obj"
                };
                let from_path = out
                    .as_ref()
                    .and_then(|p| p.extension())
                    .map(|e| e.to_string_lossy().to_ascii_lowercase());
                let ext = match (format, from_path.as_deref()) {
                    (Some(f), _) => f.extension(),
                    (None, Some(e @ ("obj" | "glb" | "json"))) => e,
                    (None, _) => default_ext,
                };
                let ext = ext.to_string();
                let ext = ext.as_str();
                if is_graph != (ext == "json") {
                    bail!("fixture {kind} cannot be written as .{ext}");
                }
                let path = match out {
                    Some(p) => p.with_extension(ext),
                    None => PathBuf::from(format!("{}.{ext}", spec.kind())),
                };
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                write_fixture(&spec, &path)?;
                println!("{}", path.display());
                Ok(0)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
