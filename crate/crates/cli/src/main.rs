#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use blocksworld::dataset::{cmd_generate, cmd_stats, cmd_validate, DatasetConfig, FamilySet};
use blocksworld::geometry::read_stl;
use blocksworld::occlusion::{OcclusionScene, DEFAULT_MAX_EDGE};
use blocksworld::viewsphere::{fibonacci_lattice, look_at, view_records, DEFAULT_VIEW_COUNT};
use blocksworld::{Error, Point3};
use clap::{Args, Parser, Subcommand};

const EXIT_INVALID: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "blocksworld",
    version,
    about = "Blocks-world object families, self-occlusion and datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory.
    Generate(GenerateArgs),
    /// Write SO summary tables to <dir>/stats.
    Stats { dir: PathBuf },
    /// Re-check a dataset directory; exits 1 on any violation.
    Validate { dir: PathBuf },
    /// Self-occlusion of one closed STL mesh from one camera.
    So {
        #[arg(long)]
        stl: PathBuf,
        /// Camera position "x,y,z".
        #[arg(long, value_parser = parse_point)]
        camera: Point3,
        /// Look-at target "x,y,z"; defaults to the origin.
        #[arg(long, value_parser = parse_point)]
        target: Option<Point3>,
        #[arg(long, default_value_t = DEFAULT_MAX_EDGE)]
        max_edge: f64,
    },
    /// Print the Fibonacci view lattice as CSV.
    Views {
        #[arg(long, default_value_t = DEFAULT_VIEW_COUNT)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Flat JSON config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Decimal or 0x-prefixed hex.
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    #[arg(long)]
    family: Option<FamilySet>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    radius_factor: Option<f64>,
    #[arg(long)]
    max_edge: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("bad seed {s:?}: {e}"))
}

fn parse_point(s: &str) -> Result<Point3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad coordinate in {s:?}: {e}"))?;
    match v[..] {
        [x, y, z] => Ok(Point3::new(x, y, z)),
        _ => Err(format!("expected three comma-separated numbers, got {s:?}")),
    }
}

fn config_from(args: GenerateArgs) -> anyhow::Result<DatasetConfig> {
    let mut c = match &args.config {
        Some(p) => DatasetConfig::from_json_file(p)?,
        None => DatasetConfig::default(),
    };
    c.seed = args.seed.unwrap_or(c.seed);
    c.family = args.family.unwrap_or(c.family);
    c.views = args.views.unwrap_or(c.views);
    c.radius_factor = args.radius_factor.unwrap_or(c.radius_factor);
    c.max_edge = args.max_edge.unwrap_or(c.max_edge);
    c.resolution = args.resolution.unwrap_or(c.resolution);
    c.out = args.out.unwrap_or(c.out);
    c.check()?;
    Ok(c)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Generate(args) => {
            let config = config_from(args)?;
            let report = cmd_generate(&config)?;
            println!(
                "wrote {} objects, {} views each, {} rows to {}",
                report.manifest.objects.len(),
                config.views,
                report.manifest.rows,
                config.out.display()
            );
        }
        Command::Stats { dir } => {
            let report = cmd_stats(&dir)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            let o = &report.by_class.overall;
            println!(
                "rows {} mean {:.4} min {:.4} max {:.4}",
                o.count, o.mean, o.min, o.max
            );
        }
        Command::Validate { dir } => match cmd_validate(&dir) {
            Ok(()) => println!("ok"),
            Err(issues) => {
                for i in &issues {
                    eprintln!("{i}");
                }
                eprintln!("{} violation(s)", issues.len());
                return Ok(EXIT_INVALID);
            }
        },
        Command::So {
            stl,
            camera,
            target,
            max_edge,
        } => {
            let mesh = read_stl(&stl)?;
            let pose = look_at(&camera, &target.unwrap_or_else(Point3::origin))?;
            let scene = OcclusionScene::new(&mesh, max_edge)
                .with_context(|| format!("preparing {}", stl.display()))?;
            let part = scene.partition(&pose)?;
            println!(
                "{}",
                serde_json::json!({
                    "so": part.self_occlusion(),
                    "visible_area": part.visible_area,
                    "hidden_area": part.hidden_area,
                    "surface_area": scene.total_area(),
                })
            );
        }
        Command::Views { n, radius } => {
            if !(radius > 0.0) {
                bail!(Error::InvalidArgument(format!(
                    "radius {radius} must be positive"
                )));
            }
            println!("index,x,y,z,tile");
            for r in view_records(&fibonacci_lattice(n, radius)?)? {
                println!("{},{},{},{},{}", r.index, r.x, r.y, r.z, r.tile.id());
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<Error>(), Some(Error::InvalidArgument(_)));
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_INVALID })
        }
    }
}
