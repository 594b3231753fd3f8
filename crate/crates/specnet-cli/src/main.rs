//! Command-line driver for the identification pipeline. Each subcommand is
//! one pipeline stage working on a shared run directory, and `run` chains
//! them all; stages talk to each other only through the files they leave
//! behind, so any stage can be re-run or replaced by hand.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specnet::config::ExperimentConfig;
use specnet::error::{Error, Result};
use specnet::pipeline::{
    run_pipeline, stage_dmd, stage_generate, stage_identify, stage_report, Mode, RunDir, RunReport,
};

#[derive(Parser)]
#[command(
    name = "specnet",
    version,
    about = "Recover Laplacian spectra of diffusively coupled networks from sparse measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON)
    #[arg(long)]
    config: PathBuf,

    /// Run directory holding all artifacts
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order into one directory
    Run {
        #[command(flatten)]
        common: CommonArgs,

        /// Source of the eigenvalues fed to identification: "data" or "oracle"
        #[arg(long, default_value = "data")]
        mode: String,

        /// Override the graph seed from the config
        #[arg(long)]
        seed: Option<u64>,

        /// Repeat over this many consecutive seeds, one subdirectory each
        #[arg(long)]
        sweep: Option<u64>,
    },
    /// Draw the coupling graph and store it with its exact spectrum
    Generate {
        #[command(flatten)]
        common: CommonArgs,

        #[arg(long)]
        seed: Option<u64>,
    },
    /// Integrate network trajectories from the stored graph
    Simulate {
        #[command(flatten)]
        common: CommonArgs,

        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the continuous-time spectrum from stored snapshots
    Dmd {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve the source pencils and filter the pooled candidates
    Identify {
        #[command(flatten)]
        common: CommonArgs,

        #[arg(long, default_value = "data")]
        mode: String,
    },
    /// Assemble the final report from stored artifacts
    Report {
        #[command(flatten)]
        common: CommonArgs,

        #[arg(long, default_value = "data")]
        mode: String,

        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let (cfg, warnings) = ExperimentConfig::from_file(path)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn effective_seed(cfg: &ExperimentConfig, flag: Option<u64>) -> u64 {
    flag.unwrap_or(cfg.graph.seed)
}

fn summarize(report: &RunReport, out: &Path) {
    println!(
        "identified {} eigenvalue(s); matched {}, missed {}, spurious {}; max error {:.3e}",
        report.identified.len(),
        report.oracle.matched.len(),
        report.oracle.missed,
        report.oracle.spurious,
        report.oracle.max_error
    );
    if let Some(est) = &report.hull_moment_estimates {
        println!(
            "hull moments: M1 {:.4}, M2 {:.4}, lambda2 {:.4}, lambdan {:.4}",
            est.m1_hat, est.m2_hat, est.lambda2_hat, est.lambdan_hat
        );
    }
    println!("report: {}", out.join("report.json").display());
}

fn run_sweep(cfg: &ExperimentConfig, mode: Mode, base_seed: u64, count: u64, out: &Path) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument("sweep count must be positive".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut outcomes: Vec<(u64, std::result::Result<RunReport, String>)> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for seed in base_seed..base_seed + count {
            let dir = out.join(format!("seed_{seed}"));
            handles.push((
                seed,
                scope.spawn(move || run_pipeline(cfg, mode, seed, &dir).map_err(|e| e.to_string())),
            ));
        }
        for (seed, handle) in handles {
            let res = handle.join().unwrap_or_else(|_| Err("worker panicked".into()));
            outcomes.push((seed, res));
        }
    });
    let mut failures = 0usize;
    for (seed, res) in &outcomes {
        match res {
            Ok(report) => println!(
                "seed {seed}: {} identified, missed {}, spurious {}, max error {:.3e}",
                report.identified.len(),
                report.oracle.missed,
                report.oracle.spurious,
                report.oracle.max_error
            ),
            Err(msg) => {
                failures += 1;
                println!("seed {seed}: failed ({msg})");
            }
        }
    }
    println!(
        "sweep: {}/{} runs succeeded under {}",
        outcomes.len() - failures,
        outcomes.len(),
        out.display()
    );
    if failures > 0 {
        Err(Error::Numerical(format!("{failures} sweep run(s) failed")))
    } else {
        Ok(())
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            mode,
            seed,
            sweep,
        } => {
            let cfg = load_config(&common.config)?;
            let mode = Mode::parse(&mode)?;
            let base = effective_seed(&cfg, seed);
            match sweep {
                Some(count) => run_sweep(&cfg, mode, base, count, &common.out),
                None => {
                    let report = run_pipeline(&cfg, mode, base, &common.out)?;
                    summarize(&report, &common.out);
                    Ok(())
                }
            }
        }
        Command::Generate { common, seed } => {
            let cfg = load_config(&common.config)?;
            let dir = RunDir::new(&common.out);
            std::fs::create_dir_all(&dir.root)?;
            specnet::io::write_json(&dir.config_path(), &cfg)?;
            stage_generate(&cfg, effective_seed(&cfg, seed), &dir)
                .map_err(|e| e.in_stage("generate"))?;
            println!("graph: {}", dir.graph_path().display());
            Ok(())
        }
        Command::Simulate { common, seed } => {
            let cfg = load_config(&common.config)?;
            let dir = RunDir::new(&common.out);
            specnet::pipeline::stage_simulate(&cfg, effective_seed(&cfg, seed), &dir)
                .map_err(|e| e.in_stage("simulate"))?;
            println!("snapshots: {}", dir.snapshots_dir().display());
            Ok(())
        }
        Command::Dmd { common } => {
            let cfg = load_config(&common.config)?;
            let dir = RunDir::new(&common.out);
            stage_dmd(&cfg, &dir).map_err(|e| e.in_stage("dmd"))?;
            println!("spectrum: {}", dir.dmd_spectrum_path().display());
            Ok(())
        }
        Command::Identify { common, mode } => {
            let cfg = load_config(&common.config)?;
            let mode = Mode::parse(&mode)?;
            let dir = RunDir::new(&common.out);
            stage_identify(&cfg, mode, &dir, true).map_err(|e| e.in_stage("identify"))?;
            println!("identified: {}", dir.identified_path().display());
            Ok(())
        }
        Command::Report { common, mode, seed } => {
            let cfg = load_config(&common.config)?;
            let mode = Mode::parse(&mode)?;
            let dir = RunDir::new(&common.out);
            let report = stage_report(&cfg, mode, effective_seed(&cfg, seed), &dir)
                .map_err(|e| e.in_stage("report"))?;
            summarize(&report, &common.out);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
