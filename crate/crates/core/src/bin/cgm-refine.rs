use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cgm_refine::synthetic::{generate_csv, FixtureSpec};
use cgm_refine::window_file::load_window_file;
use cgm_refine::{run_pipeline, PipelineConfig, Stage, Target};

/// Environment variable holding the worker thread count.
const WORKERS_ENV: &str = "CGM_REFINE_WORKERS";

#[derive(Parser)]
#[command(
    name = "cgm-refine",
    version,
    about = "CGM quality refinement and hypoglycemia dataset builder"
)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra input CSV files, appended to the configured ones.
    #[arg(long = "input", global = true)]
    inputs: Vec<PathBuf>,
    /// Overrides the configured undersampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skip outlier masking and imputation.
    #[arg(long, global = true)]
    raw_mode: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align inputs to the grid; write canonical series and the inventory.
    Ingest,
    /// Ingest, then mask zeros and outliers.
    Clean,
    /// Clean, then impute short and medium gaps.
    Impute,
    /// Impute, then assign time-to-hypoglycemia classes.
    Label,
    /// Label, then build balanced train/val/test window files.
    Windows,
    /// Label, then write correlation and missingness reports.
    Analyze,
    /// Every stage and report.
    All,
    /// Write the synthetic fixture CSV to stdout.
    Synth {
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        #[arg(long, default_value_t = 7)]
        days: usize,
        #[arg(long, default_value_t = FixtureSpec::default().seed)]
        fixture_seed: u64,
    },
    /// Print the header and class counts of a window file.
    Inspect { file: PathBuf },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Ok(n) = std::env::var(WORKERS_ENV) {
        let n: usize = n.parse().with_context(|| format!("{WORKERS_ENV}={n} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    let target = match cli.command {
        Command::Ingest => Target::Through(Stage::Ingest),
        Command::Clean => Target::Through(Stage::Clean),
        Command::Impute => Target::Through(Stage::Impute),
        Command::Label => Target::Through(Stage::Label),
        Command::Windows => Target::Through(Stage::Windows),
        Command::Analyze => Target::Through(Stage::Analyze),
        Command::All => Target::All,
        Command::Synth {
            subjects,
            days,
            fixture_seed,
        } => {
            print!(
                "{}",
                generate_csv(&FixtureSpec {
                    subjects,
                    days,
                    seed: fixture_seed
                })
            );
            return Ok(());
        }
        Command::Inspect { file } => {
            let set = load_window_file(&file).with_context(|| format!("reading {}", file.display()))?;
            let h = set.header;
            println!(
                "version {} channels {} length {} windows {} label set {}",
                h.version, h.channels, h.window_length, h.window_count, h.label_set_size
            );
            for class in 0..h.label_set_size {
                println!("class {class}: {}", set.labels.iter().filter(|l| **l == class).count());
            }
            return Ok(());
        }
    };

    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.input.paths.extend(cli.inputs);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.raw_mode |= cli.raw_mode;
    if cfg.input.paths.is_empty() {
        bail!("no input files: pass --config with [input] paths or --input <csv>");
    }

    let artifacts = run_pipeline(&cfg, target)?;
    artifacts.write_to(&cli.out)?;
    log::info!("wrote {} files to {}", artifacts.files.len(), cli.out.display());
    Ok(())
}
