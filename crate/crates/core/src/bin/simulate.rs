//! Command-line front end: runs a sweep described by a TOML configuration
//! (or one of the figure presets) and writes per-run metrics as CSV.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;

use musim::config::Config;
use musim::sweep::{self, Figure};

#[derive(Debug, Parser)]
#[command(
    name = "simulate",
    about = "MU-MIMO downlink simulator: throughput under packet-size variation and bursty traffic"
)]
struct Args {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "figure")]
    config: Option<PathBuf>,

    /// Use a preset experiment instead of a config file.
    #[arg(long, value_name = "fig5|fig6|fig7")]
    figure: Option<Figure>,

    /// Override single keys, e.g. --set sim.horizon_s=50 (wins over the file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output CSV path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,

    /// Directory for per-run cycle logs.
    #[arg(long, value_name = "DIR")]
    dump_cycles: Option<PathBuf>,

    /// Worker threads for independent sweep points (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,

    /// Print the resolved per-cycle overhead budget and exit.
    #[arg(long)]
    explain_overhead: bool,

    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    emit_default_config: bool,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();

    if args.emit_default_config {
        print!("{}", Config::default().to_toml());
        return Ok(());
    }

    let file_text = match &args.config {
        Some(path) => Some(
            fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?,
        ),
        None => None,
    };
    let config = Config::from_sources(file_text.as_deref(), args.figure, &args.set)?;

    if args.explain_overhead {
        let sim = config.resolve_sim()?;
        sim.validate()?;
        let budget = sim.sounding.budget(sim.n_antennas)?;
        println!(
            "per-cycle overhead budget for {} parallel streams:",
            budget.n_users
        );
        println!(
            "  feedback size per user: {} bits",
            budget.feedback_bits_per_user
        );
        for (name, duration, count) in &budget.components {
            println!(
                "  {name:<18} {:>9.3} us x {count:>2} = {:>9.3} us",
                duration * 1e6,
                duration * 1e6 * *count as f64
            );
        }
        println!("  sounding exchange: {:.3} us", budget.sounding_s * 1e6);
        println!(
            "  total:             {:.3} us",
            budget.cycle_overhead_s * 1e6
        );
        return Ok(());
    }

    let spec = config.resolve()?;
    let rows = sweep::run_sweep(&spec, args.jobs, args.dump_cycles.as_deref())?;
    let mut out = Vec::new();
    sweep::write_csv(&rows, &mut out)?;
    fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}
