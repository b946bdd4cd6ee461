//! `pbrboost`: segment, assign materials, refine normals, relight, export
//! and serve a live preview, all from files on disk.
//!
//! Exit status is 0 on success, 2 for input errors and 3 for numeric
//! failures. Failures print a single `error: ...` line to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pbrboost", version, about = "PBR material boosting for textured triangle meshes")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse per-view labels (or k-means fallback labels) into a per-face mask.
    Mask(MaskArgs),
    /// Bake roughness and metalness maps from a mask and a recommendation file.
    Assign(AssignArgs),
    /// Refine shading normals against an oracle and bake a normal map.
    Refine(RefineArgs),
    /// Render a relit image.
    Relight(RelightArgs),
    /// Write a glTF 2.0 bundle.
    Export(ExportArgs),
    /// Run the preview service.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Directory with cameras.json and view_<i>.png label images.
    #[arg(long, conflicts_with = "fallback_k", required_unless_present = "fallback_k")]
    pub labels: Option<PathBuf>,
    /// Segment the default views by k-means on albedo with this many clusters.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub fallback_k: Option<u32>,
    /// Albedo texture used by the fallback.
    #[arg(long)]
    pub albedo: Option<PathBuf>,
    /// View size for the fallback renders.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(16..))]
    pub size: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Recommendation JSON. Every segment gets the default values if omitted.
    #[arg(long)]
    pub recommendations: Option<PathBuf>,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(64..))]
    pub res: u32,
    /// Output directory for roughness.png and metalness.png.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Directory with cameras.json and target normal images view_<i>.png.
    #[arg(long, conflicts_with = "reference_mesh", required_unless_present = "reference_mesh")]
    pub oracle_dir: Option<PathBuf>,
    /// High-resolution mesh whose rendered normals serve as targets.
    #[arg(long)]
    pub reference_mesh: Option<PathBuf>,
    /// Blend strength toward the oracle, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub rounds: u64,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Pixels per optimization step; 0 uses all of them.
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
    /// Edge length of the optimization views (reference-mesh oracle only).
    #[arg(long, default_value_t = 192, value_parser = clap::value_parser!(u32).range(16..))]
    pub view_size: u32,
    /// Normal map resolution.
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(16..))]
    pub res: u32,
    /// Output directory for normal_uv.png and metrics.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RelightArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub albedo: PathBuf,
    #[arg(long)]
    pub roughness: PathBuf,
    #[arg(long)]
    pub metalness: PathBuf,
    /// Tangent-space normal map.
    #[arg(long)]
    pub normal: Option<PathBuf>,
    /// Light rig JSON file, or a preset name (studio, sun, rim, ambient).
    #[arg(long, default_value = "studio")]
    pub rig: String,
    /// Camera JSON: one camera object, or a list whose first entry is used.
    #[arg(long)]
    pub camera: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub albedo: PathBuf,
    #[arg(long)]
    pub roughness: PathBuf,
    #[arg(long)]
    pub metalness: PathBuf,
    #[arg(long)]
    pub normal: Option<PathBuf>,
    /// Material table (recommendation JSON schema).
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Without a mesh the service starts with no session.
    #[arg(long, requires_all = ["mask", "albedo"])]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub albedo: Option<PathBuf>,
    #[arg(long)]
    pub normal: Option<PathBuf>,
    #[arg(long)]
    pub recommendations: Option<PathBuf>,
    /// Material map resolution.
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(64..))]
    pub res: u32,
    /// Preview image size.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(16..))]
    pub size: u32,
    #[arg(long, default_value_t = pbrboost_service::DEFAULT_PORT)]
    pub port: u16,
    /// Directory holding the editor bundle served at /.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "export")]
    pub export_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("PBRBOOST_THREADS").ok().and_then(|v| v.parse().ok());
    pbrboost_core::exec::init_thread_pool(threads);
    let result = match cli.command {
        Command::Mask(a) => commands::mask(&a, cli.seed),
        Command::Assign(a) => commands::assign(&a),
        Command::Refine(a) => commands::refine(&a, cli.seed),
        Command::Relight(a) => commands::relight(&a),
        Command::Export(a) => commands::export(&a),
        Command::Serve(a) => commands::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            let numeric = e
                .chain()
                .any(|c| c.downcast_ref::<pbrboost_core::Error>().is_some_and(|e| e.is_numeric()));
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}
