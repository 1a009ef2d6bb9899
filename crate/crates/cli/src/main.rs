use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sim_uplink::channel::{export_channels, import_channels};
use sim_uplink::harness::output::{write_json, write_results, write_summary};
use sim_uplink::harness::{
    gradient_check, run_experiment, sweep_layers, sweep_power, CampaignResults, ExperimentConfig, OutputFormat, Receiver,
    Scenario,
};
use sim_uplink::{Error, Result};

#[derive(Parser)]
#[command(name = "sim-uplink", version, about = "Stacked intelligent metasurface uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReceiverArg {
    Sim,
    DpaEqualAperture,
    DpaEqualRf,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker-thread count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full campaign described by the config.
    Run(RunArgs),
    /// Sweep the layer count at the first configured transmit power.
    SweepLayers(RunArgs),
    /// Sweep the transmit power at the first configured layer count.
    SweepPower(RunArgs),
    /// Compare the analytic gradient with finite differences.
    GradCheck {
        /// Reads the `[grad_check]` table; built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Draw the configured channels and write them to a channel file.
    ExportChannels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "sim")]
        receiver: ReceiverArg,
    },
    /// Read a channel file and print a summary of its contents.
    ImportChannels {
        #[arg(long)]
        file: PathBuf,
        /// Expected rows (receive elements) per channel matrix.
        #[arg(long, requires = "users")]
        rows: Option<usize>,
        /// Expected users per channel matrix.
        #[arg(long, requires = "rows")]
        users: Option<usize>,
    },
    /// Parse and validate a config without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(workers) = workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn emit(results: &CampaignResults, out: Option<&Path>, format: OutputFormat, summary_name: &str) -> Result<()> {
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_results(create(&dir.join(format!("trials.{ext}")))?, results, format)?;
            write_summary(create(&dir.join(format!("{summary_name}.{ext}")))?, &results.aggregates, format)?;
        }
        None => write_summary(io::stdout().lock(), &results.aggregates, format)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let cfg = load(&a.config, a.seed, a.workers)?;
            emit(&run_experiment(&cfg)?, a.out.as_deref(), a.format.into(), "summary")
        }
        Command::SweepLayers(a) => {
            let cfg = load(&a.config, a.seed, a.workers)?;
            emit(&sweep_layers(&cfg)?, a.out.as_deref(), a.format.into(), "sweep_layers")
        }
        Command::SweepPower(a) => {
            let cfg = load(&a.config, a.seed, a.workers)?;
            emit(&sweep_power(&cfg)?, a.out.as_deref(), a.format.into(), "sweep_power")
        }
        Command::GradCheck { config, seed, format } => {
            let mut gc = match config {
                Some(p) => ExperimentConfig::load(p)?.grad_check,
                None => Default::default(),
            };
            if let Some(seed) = seed {
                gc.seed = seed;
            }
            let report = gradient_check(&gc)?;
            let mut out = io::stdout().lock();
            match format {
                Format::Json => write_json(&mut out, &report)?,
                Format::Csv => {
                    writeln!(out, "layers,cells,users,max_relative_error")?;
                    for i in &report.instances {
                        writeln!(out, "{},{},{},{:e}", i.layers, i.cells, i.users, i.max_relative_error)?;
                    }
                }
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Numerical(format!(
                    "gradient check failed: worst relative error {:e} exceeds {:e}",
                    report.worst(),
                    report.tolerance
                )))
            }
        }
        Command::ExportChannels { config, out, seed, receiver } => {
            let cfg = load(&config, seed, None)?;
            let receiver = match receiver {
                ReceiverArg::Sim => Receiver::Sim,
                ReceiverArg::DpaEqualAperture => Receiver::DpaEqualAperture,
                ReceiverArg::DpaEqualRf => Receiver::DpaEqualRf,
            };
            let channels = Scenario::new(&cfg)?.channels(receiver)?;
            export_channels(&channels, &out)?;
            eprintln!("wrote {} channel matrices to {}", channels.len(), out.display());
            Ok(())
        }
        Command::ImportChannels { file, rows, users } => {
            let channels = import_channels(&file, rows.zip(users))?;
            let mut out = io::stdout().lock();
            writeln!(out, "matrices: {}", channels.len())?;
            if let Some(first) = channels.first() {
                writeln!(out, "shape: {} x {}", first.rows(), first.users())?;
            }
            Ok(())
        }
        Command::ValidateConfig { config } => {
            ExperimentConfig::load(&config)?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
