//! `dopsar`: run the simulation/imaging/interferometry/height pipeline.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 runtime
//! error, 3 reference checks failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dopsar_cli::config::{ConfigError, RunConfig};
use dopsar_cli::{checks, pipeline};

#[derive(Parser)]
#[command(
    name = "dopsar",
    version,
    about = "Wideband and Doppler SAR interferometry: simulate, image, interfere, solve"
)]
struct Cli {
    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the configuration's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the configured sample counts as written. Without this flag every
    /// sample count is halved (the desk-scale profile).
    #[arg(long)]
    full: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: simulate, image, interfere, solve, manifest.
    Run(ConfigArgs),
    /// Synthesize the configured datasets only.
    Simulate(ConfigArgs),
    /// Backproject one serialized dataset.
    Image {
        #[command(flatten)]
        common: ConfigArgs,
        /// Dataset container produced by `simulate`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Co-register two images and form their interferogram.
    Interferogram {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        image1: PathBuf,
        #[arg(long)]
        image2: PathBuf,
    },
    /// Recover the scatterer position from an image pair.
    Solve {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        image1: PathBuf,
        #[arg(long)]
        image2: PathBuf,
    },
    /// Run both shipped reference configurations and check the published
    /// peaks and solutions.
    ReproducePaper {
        /// Output directory (default "out/reproduce-paper").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full-scale sampling instead of the desk-scale default.
        #[arg(long)]
        full: bool,
    },
    /// Convert a container file to CSV or PGM.
    Export {
        /// Any container file (dataset, image, interferogram, residual map).
        #[arg(long)]
        input: PathBuf,
        /// "csv" or "pgm".
        #[arg(long)]
        format: String,
        /// Output directory (default: alongside the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &ConfigArgs) -> Result<(RunConfig, String, PathBuf), ConfigError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ConfigError {
        context: args.config.display().to_string(),
        message: e.to_string(),
    })?;
    let config = RunConfig::from_toml_str(&text, &args.config.display().to_string())?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.run.output_dir));
    Ok((config, text, out))
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run(args) => {
            let (config, text, out) = load(&args)?;
            let outcome = pipeline::run(&config, &text, &out, !args.full)?;
            println!("manifest: {}", outcome.manifest_path.display());
            if let Some(w) = &outcome.wideband {
                println!(
                    "wideband peaks ({:.1}, {:.1}) / ({:.1}, {:.1}), solution ({:.2}, {:.2}, {:.2})",
                    w.peak1_m[0], w.peak1_m[1], w.peak2_m[0], w.peak2_m[1],
                    w.solution_position.x, w.solution_position.y, w.solution_position.z
                );
            }
            if let Some(u) = &outcome.unb {
                println!(
                    "unb peaks ({:.1}, {:.1}) / ({:.1}, {:.1}), solution ({:.2}, {:.2}, {:.2})",
                    u.peak1_m[0], u.peak1_m[1], u.peak2_m[0], u.peak2_m[1],
                    u.solution_position.x, u.solution_position.y, u.solution_position.z
                );
            }
            Ok(0)
        }
        Command::Simulate(args) => {
            let (config, _, out) = load(&args)?;
            for path in pipeline::stage_simulate(&config, &out, !args.full)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Image { common, data } => {
            let (config, text, out) = load(&common)?;
            let hash = dopsar_cli::manifest::sha256_hex(text.as_bytes());
            let path = pipeline::stage_image(&config, &hash, &data, &out)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Interferogram { common, image1, image2 } => {
            let (config, _, out) = load(&common)?;
            let path = pipeline::stage_interferogram(&config, &image1, &image2, &out)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Solve { common, image1, image2 } => {
            let (config, _, out) = load(&common)?;
            let position = pipeline::stage_solve(&config, &image1, &image2, &out)?;
            println!("solution: ({:.3}, {:.3}, {:.3}) m", position.x, position.y, position.z);
            Ok(0)
        }
        Command::ReproducePaper { out, full } => {
            let out = out.unwrap_or_else(|| PathBuf::from("out/reproduce-paper"));
            let (table, _, _) = checks::run_reference(&out, full)?;
            checks::print_table(&table);
            if table.iter().all(|c| c.pass) {
                Ok(0)
            } else {
                Ok(3)
            }
        }
        Command::Export { input, format, out } => {
            let out = out
                .or_else(|| input.parent().map(|p| p.to_path_buf()))
                .unwrap_or_else(|| PathBuf::from("."));
            for path in pipeline::stage_export(&input, &format, &out)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();

    let threads = cli.threads;
    let run = move || -> anyhow::Result<u8> {
        match threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
                pool.install(|| dispatch(cli))
            }
            None => dispatch(cli),
        }
    };

    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation =
                e.is::<ConfigError>() || e.chain().any(|c| c.to_string().starts_with("domain error"));
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
