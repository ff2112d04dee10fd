//! Experiment CLI: run seeded sweep experiments, validate configs, and dump
//! per-iteration solver traces.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::time::Instant;

use rsma_isac::harness::{
    parse_config, run_experiment, trace_run, write_aggregate_csv, write_csv, write_plot,
    write_trace_csv,
};

#[derive(Parser)]
#[command(name = "rsma-isac", about = "RSMA-assisted mmWave ISAC hybrid beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write
    /// records.csv, aggregate.csv and plot.svg.
    Run {
        config: PathBuf,
        /// Worker threads (overrides RSMA_ISAC_JOBS; default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides [output] dir from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse and validate a config file, printing the experiment matrix.
    Validate { config: PathBuf },
    /// Solve a single run (first scheme/profile/sweep value) for one seed and
    /// dump the full solver trace CSV.
    Trace {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn resolve_jobs(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("RSMA_ISAC_JOBS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|n| *n > 0)
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, jobs, output_dir } => {
            let mut spec = parse_config(&config).context("parsing config")?;
            if let Some(dir) = output_dir {
                spec.output_dir = dir;
            }
            let pool = {
                let mut builder = rayon::ThreadPoolBuilder::new();
                if let Some(n) = resolve_jobs(jobs) {
                    builder = builder.num_threads(n);
                }
                builder.build().context("building worker pool")?
            };
            let started = Instant::now();
            let result = pool
                .install(|| run_experiment(&spec))
                .map_err(|e| anyhow::anyhow!(e))?;
            eprintln!(
                "{} runs finished in {:.1} s",
                result.records.len(),
                started.elapsed().as_secs_f64()
            );
            let records_path = spec.output_dir.join("records.csv");
            let aggregate_path = spec.output_dir.join("aggregate.csv");
            let plot_path = spec.output_dir.join("plot.svg");
            write_csv(&result.records, &records_path)?;
            write_aggregate_csv(&result.aggregates, &aggregate_path)?;
            write_plot(&result.aggregates, &plot_path)?;
            println!("wrote {}", records_path.display());
            println!("wrote {}", aggregate_path.display());
            println!("wrote {}", plot_path.display());
            for a in &result.aggregates {
                println!(
                    "{} {} {}={} : mean WSR {:.4} bit/s/Hz (stddev {:.4}, n={})",
                    a.scheme, a.profile, a.sweep_kind, a.sweep_value, a.wsr_mean, a.wsr_stddev, a.n_seeds
                );
            }
            Ok(())
        }
        Command::Validate { config } => {
            let spec = parse_config(&config).context("validating config")?;
            let n_runs = spec.schemes.len() * spec.profiles.len() * spec.sweep.values().len() * spec.seeds.len();
            println!("config OK");
            println!(
                "system: N_t={} N_r={} N_RF={} K={}",
                spec.base.n_tx, spec.base.n_rx, spec.base.n_rf, spec.base.n_users
            );
            println!(
                "sweep: {} over {:?} | schemes: {} | profiles: {} | seeds: {} | total runs: {}",
                spec.sweep.kind_str(),
                spec.sweep.values(),
                spec.schemes.len(),
                spec.profiles.len(),
                spec.seeds.len(),
                n_runs
            );
            Ok(())
        }
        Command::Trace { config, seed, output_dir } => {
            let mut spec = parse_config(&config).context("parsing config")?;
            if let Some(dir) = output_dir {
                spec.output_dir = dir;
            }
            if !spec.seeds.contains(&seed) {
                // tracing an unlisted seed is allowed but worth flagging
                eprintln!("note: seed {seed} is not in the config's seed list");
            }
            let trace = trace_run(&spec, seed).map_err(|e| anyhow::anyhow!(e))?;
            if trace.is_empty() {
                bail!("solver produced an empty trace");
            }
            let path = spec.output_dir.join(format!("trace_seed{seed}.csv"));
            write_trace_csv(&trace, &path)?;
            println!("wrote {} ({} iterations)", path.display(), trace.len());
            Ok(())
        }
    }
}
