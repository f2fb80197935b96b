use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oblique_rtf::cli::{self, SceneSource, SweepConfig};
use oblique_rtf::error::{Error, Result};
use oblique_rtf::pipeline::{Activity, PipelineConfig};
use oblique_rtf::rtf::EstimatorVariant;
use oblique_rtf::scene::ScenarioConfig;

#[derive(Parser)]
#[command(
    version,
    about = "Successive RTF estimation with blind oblique projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene: mixture WAV and ground-truth JSON.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Estimate RTFs on one scene and write metrics JSON and per-frame CSVs.
    Run {
        #[command(flatten)]
        scene: SceneArgs,
        /// Truth file from `simulate`; replaces --scenario.
        #[arg(long, conflicts_with = "scenario")]
        truth: Option<PathBuf>,
        /// Pipeline config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, default_value = "run")]
        label: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Medians of ψ and ΔSINR over a grid of SNRs and seeds, as CSV.
    Sweep {
        /// Sweep config JSON; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario config JSON.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// SNRs of the grid (repeatable).
        #[arg(long = "snr-db", allow_negative_numbers = true)]
        snr_db: Vec<f64>,
        /// Scenes per SNR.
        #[arg(long)]
        seeds: Option<usize>,
        /// First seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Segments to evaluate (repeatable).
        #[arg(long)]
        segment: Vec<usize>,
        /// Worker threads; all cores by default.
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV.
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Scenario config JSON; the default scene if omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Noiseless scene.
    #[arg(long, conflicts_with = "snr_db")]
    noiseless: bool,
}

impl SceneArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = cli::load_scenario(self.scenario.as_deref())?;
        if let Some(s) = self.snr_db {
            cfg.snr_db = Some(s);
        }
        if self.noiseless {
            cfg.snr_db = None;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Estimator variant (repeatable): BOP, BOP-S, BOP-W, BOPO, BOPO-S, BOPO-W.
    #[arg(long)]
    variant: Vec<EstimatorVariant>,
    #[arg(long)]
    activity: Option<Activity>,
}

impl EstimatorArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if !self.variant.is_empty() {
            cfg.variants = self.variant.clone();
        }
        if let Some(a) = self.activity {
            cfg.activity = a;
        }
    }
}

fn read_config<T: for<'de> serde::Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scene, out } => {
            let o = cli::cmd_simulate(&scene.config()?, &out)?;
            eprintln!("wrote {} and {}", o.wav.display(), o.truth.display());
        }
        Command::Run {
            scene,
            truth,
            config,
            est,
            label,
            out,
        } => {
            let source = match truth {
                Some(p) => SceneSource::Truth(p),
                None => SceneSource::Config(scene.config()?),
            };
            let mut pc: PipelineConfig = match &config {
                Some(p) => read_config(p)?,
                None => PipelineConfig::default(),
            };
            est.apply(&mut pc);
            if let Some(seed) = scene.seed {
                pc.seed = seed;
            }
            let report = cli::cmd_run(&source, &pc, &label, &out)?;
            for r in &report.records {
                eprintln!(
                    "{:>7} K={} psi={} dSINR={}",
                    r.variant,
                    r.segment,
                    r.psi_deg.map_or("-".into(), |v| format!("{v:.2} deg")),
                    r.delta_sinr_db.map_or("-".into(), |v| format!("{v:.2} dB")),
                );
            }
        }
        Command::Sweep {
            config,
            scenario,
            snr_db,
            seeds,
            seed,
            est,
            segment,
            threads,
            out,
        } => {
            let mut cfg: SweepConfig = match &config {
                Some(p) => read_config(p)?,
                None => SweepConfig::default(),
            };
            if scenario.is_some() {
                cfg.scenario = cli::load_scenario(scenario.as_deref())?;
            }
            if !snr_db.is_empty() {
                cfg.snrs_db = snr_db;
            }
            if let Some(n) = seeds {
                cfg.seeds = n;
            }
            if let Some(s) = seed {
                cfg.first_seed = s;
            }
            if !segment.is_empty() {
                cfg.pipeline.segments = segment;
            }
            est.apply(&mut cfg.pipeline);
            let rows = cli::cmd_sweep(&cfg, &out, threads)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
