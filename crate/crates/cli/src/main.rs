//! `lrprecode`: Monte Carlo sweeps and self-checks for low-resolution ADC precoding.
//!
//!   lrprecode sweep --preset desk --axis bits --values 1,2,3,4 --out runs/bits
//!   lrprecode sweep --config sweep.toml --traces
//!   lrprecode validate --channels 5

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lowres_precoding::harness::{emit, run_sweep, Axis, Preset, Scheme, SweepSpec};
use lowres_precoding::validation::run_validation;

#[derive(Parser)]
#[command(name = "lrprecode", version, about = "Precoding sweeps for links with low-resolution ADCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write results.csv and spec.json.
    Sweep(SweepArgs),
    /// Run the invariant suite on a few channels.
    Validate {
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Snr,
    Bits,
    Xi,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Full,
    Desk,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// TOML sweep description; flags given alongside override its fields.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    qd_samples: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also write per-run records (runs.csv) and optimizer traces (traces.csv).
    #[arg(long)]
    traces: bool,
    /// Record wall time per run in the mean_ms column.
    #[arg(long)]
    timing: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn default_values(axis: Axis) -> Vec<f64> {
    match axis {
        Axis::SnrDb => vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
        Axis::Bits => (1..=6).map(f64::from).collect(),
        Axis::Xi => vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    }
}

fn build_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let mut spec = match (&args.config, args.preset) {
        (Some(path), _) => SweepSpec::load(path)?,
        (None, Some(PresetArg::Full)) => SweepSpec::preset(Preset::Full),
        (None, _) => SweepSpec::preset(Preset::Desk),
    };
    if let Some(a) = args.axis {
        let axis = match a {
            AxisArg::Snr => Axis::SnrDb,
            AxisArg::Bits => Axis::Bits,
            AxisArg::Xi => Axis::Xi,
        };
        if axis != spec.axis && args.values.is_none() {
            spec.values = default_values(axis);
        }
        spec.axis = axis;
    }
    if let Some(v) = &args.values {
        spec.values = v.clone();
    }
    if let Some(s) = &args.schemes {
        spec.schemes = s
            .iter()
            .map(|name| name.trim().parse::<Scheme>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(n) = args.channels {
        spec.n_channels = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.qd_samples {
        spec.qd_samples = n;
    }
    spec.timing |= args.timing;
    spec.validate()?;
    Ok(spec)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = build_spec(args)?;
    if let Some(n) = args.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    eprintln!(
        "sweeping {} over {} values x {} channels x {} schemes",
        spec.axis,
        spec.values.len(),
        spec.n_channels,
        spec.schemes.len()
    );
    let result = run_sweep(&spec)?;
    let failed: usize = result.rows.iter().map(|r| r.n_failed).sum();
    if failed > 0 {
        eprintln!("warning: {failed} runs failed; see n_failed (and runs.csv with --traces)");
    }
    for path in emit(&result, &args.out, args.traces)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sweep(args) => sweep(&args).map(|_| true),
        Command::Validate { channels, seed } => run_validation(channels, seed)
            .map(|report| {
                for c in &report.checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                report.all_passed()
            })
            .map_err(Into::into),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
