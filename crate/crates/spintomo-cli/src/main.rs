//! Command-line pipeline for magnetic-gradient spin tomography:
//! geometry and field reports, echo-signal synthesis, spectral
//! reconstruction (FFT, aliasing zoom, L1), analysis, localization, demo
//! workflows, and plot-data export.

mod config;
mod demo;
mod export;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{validate_config, ConfigError, RunConfig};
use export::ExportKind;
use pipeline::{LockConflict, PipelineRun, Stage};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_LOCK: u8 = 4;

#[derive(Parser)]
#[command(name = "spintomo", version, about = "Magnetic-gradient spin tomography pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOpts {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated stage subset: field,synth,recon,analyze.
    #[arg(long)]
    stages: Option<String>,
    /// Override the sequence seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured pipeline (all stages unless --stages).
    Run(RunOpts),
    /// Build the geometry and write the field/sensitivity report.
    Field(RunOpts),
    /// Synthesize echo-signal grids.
    Synth(RunOpts),
    /// Reconstruct spectra and extract peaks.
    Recon(RunOpts),
    /// Spectrogram, band SNR, and decay fit of a 1D signal.
    Analyze(RunOpts),
    /// Compute and store the aliasing-zoom plan for the configured bands.
    ZoomPlan(RunOpts),
    /// Invert measured frequencies (or the strongest peak) to a position.
    Localize(RunOpts),
    /// Write and run a bundled demonstration config.
    Demo {
        /// One of: fig1, fig2, fig3, fig4.
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the demo's sequence seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        verbose: bool,
    },
    /// Export an artifact as plot-ready CSV bundles.
    Export {
        /// Artifact basename (the path without .json/.f64).
        #[arg(long)]
        artifact: PathBuf,
        /// timeseries | heatmap | volume.
        #[arg(long)]
        kind: String,
        /// Output prefix (defaults to the artifact basename).
        #[arg(long)]
        out_prefix: Option<PathBuf>,
    },
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn load_config(opts: &RunOpts) -> Result<RunConfig, ConfigError> {
    let mut config = validate_config(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.sequence.seed = seed;
    }
    if let Some(out) = &opts.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.is::<LockConflict>() || err.downcast_ref::<LockConflict>().is_some() {
        EXIT_LOCK
    } else {
        EXIT_STAGE
    }
}

fn run_stages(opts: &RunOpts, stages: Vec<Stage>) -> ExitCode {
    init_threads(opts.threads);
    let config = match load_config(opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut run = PipelineRun::new(&config, opts.verbose);
    match run.run(&stages) {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pipeline failed: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run_localize(opts: &RunOpts) -> ExitCode {
    init_threads(opts.threads);
    let config = match load_config(opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut run = PipelineRun::new(&config, opts.verbose);
    match run.run_localize() {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("localization failed: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run_zoom_plan(opts: &RunOpts) -> ExitCode {
    let config = match load_config(opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = (|| -> anyhow::Result<PathBuf> {
        let spec = config::build_sequence_spec(&config.sequence)?;
        let bands: Vec<(f64, f64)> = config
            .recon
            .zoom
            .bands_hz
            .iter()
            .map(|b| (b[0], b[1]))
            .collect();
        if bands.is_empty() {
            anyhow::bail!("recon.zoom.bands_hz is empty; nothing to plan");
        }
        let dts: Vec<f64> = spec.durations.iter().map(|a| a.step).collect();
        let plan = match &config.recon.zoom.factors {
            Some(factors) => spintomo::recon::plan_zoom_with_factors(&bands, &dts, factors)?,
            None => spintomo::recon::plan_zoom(&bands, &dts)?,
        };
        let path = config.output_dir.join("zoom_plan.json");
        spintomo::io::write_atomic(&path, &serde_json::to_vec_pretty(&plan)?)?;
        for (k, axis) in plan.axes.iter().enumerate() {
            println!(
                "axis {k}: factor {} (nyquist {:.6e} Hz, N = {}, flipped = {}, zoomed = {})",
                axis.undersample_factor, axis.nyquist_hz, axis.alias_index, axis.flipped,
                axis.zoomed
            );
        }
        Ok(path)
    })();
    match result {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("zoom planning failed: {e:#}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}

fn run_demo(
    name: &str,
    out: &std::path::Path,
    seed: Option<u64>,
    threads: Option<usize>,
    verbose: bool,
) -> ExitCode {
    init_threads(threads);
    let result = (|| -> anyhow::Result<PathBuf> {
        let (mut config, stages) = demo::demo_config(name)?;
        config.output_dir = out.to_path_buf();
        if let Some(seed) = seed {
            config.sequence.seed = seed;
        }
        std::fs::create_dir_all(out)?;
        spintomo::io::write_atomic(
            &out.join("config.json"),
            &serde_json::to_vec_pretty(&config)?,
        )?;
        let mut run = PipelineRun::new(&config, verbose);
        run.run(&stages)
    })();
    match result {
        Ok(manifest) => {
            println!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("demo failed: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(opts) => {
            let stages = match &opts.stages {
                Some(list) => match Stage::parse_list(list) {
                    Ok(stages) => stages,
                    Err(e) => {
                        eprintln!("{e}");
                        return ExitCode::from(EXIT_CONFIG);
                    }
                },
                None => Stage::ALL.to_vec(),
            };
            run_stages(&opts, stages)
        }
        Command::Field(opts) => run_stages(&opts, vec![Stage::Field]),
        Command::Synth(opts) => run_stages(&opts, vec![Stage::Synth]),
        Command::Recon(opts) => run_stages(&opts, vec![Stage::Recon]),
        Command::Analyze(opts) => run_stages(&opts, vec![Stage::Analyze]),
        Command::ZoomPlan(opts) => run_zoom_plan(&opts),
        Command::Localize(opts) => run_localize(&opts),
        Command::Demo {
            name,
            out,
            seed,
            threads,
            verbose,
        } => run_demo(&name, &out, seed, threads, verbose),
        Command::Export {
            artifact,
            kind,
            out_prefix,
        } => {
            let result = ExportKind::parse(&kind)
                .and_then(|k| export::export_plotdata(&artifact, k, out_prefix.as_deref()));
            match result {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("export failed: {e:#}");
                    ExitCode::from(EXIT_STAGE)
                }
            }
        }
    }
}
