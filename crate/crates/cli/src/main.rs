use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use eikonal_fv::config::{Mode, RunConfig};
use eikonal_fv::study::{Example, Perturbation};

mod commands;

#[derive(Parser)]
#[command(
    name = "eikonal-fv",
    version,
    about = "Distance fields on polyhedral meshes via the regularized eikonal equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one mesh and write the field as VTK.
    Solve(SolveArgs),
    /// Run a convergence study over several refinement levels.
    Study(StudyArgs),
    /// Generate or inspect mesh files.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Evaluate the reference distance at points read from a file or stdin.
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset problem, EX1 to EX10.
    #[arg(long)]
    example: Option<Example>,
    /// Worker threads.
    #[arg(long, env = "EIKONAL_FV_THREADS")]
    threads: Option<usize>,
    /// Deterministic reductions: repeated runs give identical output.
    #[arg(long)]
    repro: bool,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Perturb mesh vertices by this fraction of the local edge length.
    #[arg(long)]
    perturb: Option<f64>,
    /// Seed of the mesh perturbation.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Cells along the longest extent of the domain.
    #[arg(long)]
    resolution: Option<usize>,
    /// Solve on a mesh file instead of a generated mesh.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Write the last stage's matrix in coordinate format to this file.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated resolutions, one per level.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a generated mesh to a file.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
        /// Mesh file to write.
        #[arg(long)]
        file: PathBuf,
        /// Binary instead of ASCII encoding.
        #[arg(long)]
        binary: bool,
        /// Also write a VTK file of the mesh.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Print counts and geometric statistics of a mesh file.
    Inspect { file: PathBuf },
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Whitespace-separated `x y z` per line; stdin if absent.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Geodesic grid spacing on non-convex domains.
    #[arg(long)]
    spacing: Option<f64>,
}

fn build_config(common: &Common, mode: Mode) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if common.example.is_some() {
        cfg.example = common.example;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if common.repro {
        cfg.repro = true;
    }
    if let Some(out) = &common.output {
        cfg.output_dir = out.clone();
    }
    if let Some(amplitude) = common.perturb {
        cfg.perturbation = Some(Perturbation { amplitude, seed: common.seed });
    }
    Ok(cfg)
}

fn init_threads(cfg: &RunConfig) -> Result<()> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => {
            let mut cfg = build_config(&args.common, Mode::Solve)?;
            if let Some(n) = args.resolution {
                cfg.levels = vec![n];
            }
            if args.mesh.is_some() {
                cfg.mesh_file = args.mesh;
            }
            init_threads(&cfg)?;
            commands::solve(&cfg, args.dump_matrix.as_deref())
        }
        Command::Study(args) => {
            let mut cfg = build_config(&args.common, Mode::Study)?;
            if let Some(levels) = args.levels {
                cfg.levels = levels;
            }
            init_threads(&cfg)?;
            commands::study(&cfg)
        }
        Command::Mesh(MeshCommand::Generate { common, resolution, file, binary, vtk }) => {
            let mut cfg = build_config(&common, Mode::Solve)?;
            if let Some(n) = resolution {
                cfg.levels = vec![n];
            }
            init_threads(&cfg)?;
            commands::mesh_generate(&cfg, &file, binary, vtk.as_deref())
        }
        Command::Mesh(MeshCommand::Inspect { file }) => commands::mesh_inspect(&file),
        Command::Oracle(args) => {
            let cfg = build_config(&args.common, Mode::Solve)?;
            init_threads(&cfg)?;
            commands::oracle(&cfg, args.points.as_deref(), args.spacing)
        }
    }
}
