use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bikeability::config::RunConfig;
use bikeability::pipeline::{run_pipeline, PipelineError, RunOutcome, Stage, StageStatus};
use bikeability::Error;
use clap::{Args, Parser, Subcommand};

const OUTPUT_ENV: &str = "BIKEABILITY_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "bikeability", version, about = "Composite bikeability index pipeline")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set extraction.area_radius=250`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; beats BIKEABILITY_OUTPUT_DIR and the config.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Download a street network for a bounding box.
    Fetch {
        /// min_lon,min_lat,max_lon,max_lat
        #[arg(long, value_delimiter = ',', num_args = 4)]
        bbox: Vec<f64>,
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw sample points and bind them to images.
    Sample(RunArgs),
    /// Extract and scale indicator values.
    Extract(RunArgs),
    /// Aggregate the survey and train the perception models.
    Perception(RunArgs),
    /// Assemble indicator vectors and compose the index variants.
    Compose(RunArgs),
    /// Compare index variants.
    Compare(RunArgs),
    /// Write the GeoJSON layer, reports and models.
    Export(RunArgs),
    /// Every stage, end to end.
    Run(RunArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Configuration(_) | Error::InvalidArgument(_) => 2,
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::Integrity { .. }
        | Error::InvalidGeometry(_)
        | Error::Io { .. } => 3,
        Error::Numerical(_) | Error::NotComputable(_) | Error::Alignment(_) | Error::Fetch(_) | Error::Size { .. } => 4,
    }
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

/// Config file, then the env var, then `--set`, then `--output-dir`.
fn load_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Configuration(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Configuration(format!("{}: invalid JSON: {e}", args.config.display())))?;
    if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        if let Some(obj) = doc.as_object_mut() {
            let dir = absolute(Path::new(&dir));
            obj.insert("output_dir".into(), serde_json::Value::String(dir.to_string_lossy().into_owned()));
        }
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut config = RunConfig::from_value(doc, &args.overrides, base)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = absolute(dir);
    }
    Ok(config)
}

fn print_summary(outcome: &RunOutcome, last: Stage) {
    for (stage, status) in &outcome.report {
        let s = match status {
            StageStatus::Computed => "computed",
            StageStatus::Cached => "cached",
        };
        println!("{stage:<10} {s}");
    }
    match last {
        Stage::Sample => {
            for c in outcome.sample.iter().flatten() {
                let bound = c.points.iter().filter(|p| p.image_id.is_some()).count();
                println!("{}: {} points, {bound} with images", c.city, c.points.len());
            }
        }
        Stage::Scale => {
            if let Some(t) = &outcome.scale {
                for (j, name) in t.names.iter().enumerate() {
                    let missing = t.rows.iter().filter(|r| r.values[j].is_none()).count();
                    if missing > 0 {
                        println!("{name}: missing at {missing} of {} points", t.rows.len());
                    }
                }
                println!("{} points x {} indicators", t.rows.len(), t.names.len());
            }
        }
        Stage::Perception => {
            if let Some(p) = &outcome.perception {
                for (d, m) in &p.metrics {
                    let mape = m.mape.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                    println!("{d}: MAE {:.4} MAPE {mape} RMSE {:.4} R2 {:.4} (n={})", m.mae, m.rmse, m.r2, m.n);
                }
                let sig = p.ttests.iter().filter(|t| t.significant).count();
                println!("{sig} of {} feature tests significant", p.ttests.len());
            }
        }
        Stage::Compose => {
            if let Some(a) = &outcome.assemble {
                println!("{} points kept, {} dropped", a.vectors.len(), a.dropped.len());
                for w in &a.warnings {
                    println!("warning: {w}");
                }
            }
            for (v, s) in outcome.compose.iter().flatten() {
                let mean = s.iter().map(|c| c.total).sum::<f64>() / s.len().max(1) as f64;
                println!("{v}: {} points, mean {mean:.4}", s.len());
            }
        }
        Stage::Compare => {
            if let Some(c) = &outcome.compare {
                for s in &c.comparison.summaries {
                    println!("{}: n={} mean {:.4} sd {:.4}", s.variant, s.n, s.mean, s.sd);
                }
                for p in &c.comparison.pairs {
                    let r2 = p.r2.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                    println!("{} vs {}: R2 {r2}", p.variant_a, p.variant_b);
                }
            }
        }
        Stage::Export => {
            let verb = match outcome.status(Stage::Export) {
                Some(StageStatus::Cached) => "unchanged",
                _ => "wrote",
            };
            for f in outcome.export.iter().flat_map(|e| e.files.keys()) {
                println!("{verb} {f}");
            }
        }
        _ => {}
    }
}

#[cfg(feature = "fetch")]
fn fetch(bbox: &[f64], endpoint: &str, out: &Path) -> Result<(), Error> {
    use bikeability::ingest::{fetch_street_network, BoundingBox, FetchOptions};
    let b = BoundingBox::new(bbox[0], bbox[1], bbox[2], bbox[3])?;
    let g = fetch_street_network(b, endpoint, out, &FetchOptions::default())?;
    println!("{} nodes, {} edges written to {}", g.value.nodes().len(), g.value.edges().len(), out.display());
    Ok(())
}

#[cfg(not(feature = "fetch"))]
fn fetch(_: &[f64], _: &str, _: &Path) -> Result<(), Error> {
    Err(Error::Configuration("built without network support".into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (args, last) = match &cli.command {
        Command::Fetch { bbox, endpoint, out } => {
            return match fetch(bbox, endpoint, out) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: fetch: {e}");
                    ExitCode::from(exit_code(&e))
                }
            };
        }
        Command::Sample(a) => (a, Stage::Sample),
        Command::Extract(a) => (a, Stage::Scale),
        Command::Perception(a) => (a, Stage::Perception),
        Command::Compose(a) => (a, Stage::Compose),
        Command::Compare(a) => (a, Stage::Compare),
        Command::Export(a) | Command::Run(a) => (a, Stage::Export),
    };
    let config = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_pipeline(config, last) {
        Ok(outcome) => {
            print_summary(&outcome, last);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                PipelineError::Config(_) => 2,
                PipelineError::Stage { ref error, .. } => exit_code(error),
            };
            ExitCode::from(code)
        }
    }
}
