//! Batch commands: simulate a scene, run the estimators on one scene, sweep
//! a grid of SNRs and seeds. The `oblique-rtf` binary is a thin argument
//! parser over these functions.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::ActivationEvent;
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;
use crate::pipeline::{self, Activity, PipelineConfig, SegmentPlan};
use crate::scene::{generate, ScenarioConfig, Scene, TruthFile};

pub const WAV_NAME: &str = "scene.wav";
pub const TRUTH_NAME: &str = "truth.json";
pub const METRICS_NAME: &str = "metrics.json";
pub const TRACE_NAME: &str = "trace.csv";
pub const PSI_NAME: &str = "psi.csv";

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Scenario config from a JSON file, or the default scene.
pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub wav: PathBuf,
    pub truth: PathBuf,
    pub scene: Scene,
}

/// Generate a scene and write its mixture WAV and truth JSON into `out`.
pub fn cmd_simulate(cfg: &ScenarioConfig, out: &Path) -> Result<SimulateOutput> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let scene = generate(cfg)?;
    let wav = out.join(WAV_NAME);
    let truth = out.join(TRUTH_NAME);
    scene.write_wav(&wav)?;
    TruthFile::from_scene(&scene)?.write(&truth)?;
    Ok(SimulateOutput { wav, truth, scene })
}

/// Where `cmd_run` takes its scene from.
#[derive(Debug, Clone)]
pub enum SceneSource {
    Config(ScenarioConfig),
    /// A truth file written by [`cmd_simulate`].
    Truth(PathBuf),
}

impl SceneSource {
    pub fn load(&self) -> Result<Scene> {
        match self {
            SceneSource::Config(cfg) => generate(cfg),
            SceneSource::Truth(path) => {
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "truth file {} does not exist",
                        path.display()
                    )));
                }
                let truth: TruthFile = read_json(path)?;
                truth.regenerate()
            }
        }
    }
}

/// The JSON document written by [`cmd_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub activity: Activity,
    pub true_activation_frames: Vec<usize>,
    pub detected: Vec<ActivationEvent>,
    pub plans: Vec<SegmentPlan>,
    pub noise_frames: usize,
    pub records: Vec<MetricRecord>,
}

/// Process one scene; write `metrics.json`, `trace.csv` and `psi.csv`.
pub fn cmd_run(
    source: &SceneSource,
    cfg: &PipelineConfig,
    label: &str,
    out: &Path,
) -> Result<RunReport> {
    cfg.validate()?;
    let scene = source.load()?;
    let cfg = PipelineConfig {
        trace: true,
        ..cfg.clone()
    };
    let run = pipeline::run(&scene, &cfg, label)?;
    fs::create_dir_all(out)?;

    let mut w = csv::Writer::from_path(out.join(TRACE_NAME)).map_err(csv_err)?;
    for row in &run.trace {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join(PSI_NAME)).map_err(csv_err)?;
    w.write_record(["frame", "segment", "variant", "psi_deg"])
        .map_err(csv_err)?;
    for p in &run.frame_psi {
        w.write_record(&[
            p.frame.to_string(),
            p.segment.to_string(),
            p.variant.to_string(),
            p.psi_deg.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let report = RunReport {
        label: label.to_string(),
        scenario: scene.config.clone(),
        pipeline: cfg,
        activity: run.activity,
        true_activation_frames: run.true_starts,
        detected: run.events,
        plans: run.plans,
        noise_frames: run.noise_frames,
        records: run.records,
    };
    write_json(&out.join(METRICS_NAME), &report)?;
    Ok(report)
}

/// A grid of scenes: every SNR with `seeds` consecutive seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub label: String,
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub snrs_db: Vec<f64>,
    pub seeds: usize,
    pub first_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            label: "sweep".into(),
            scenario: ScenarioConfig::default(),
            pipeline: PipelineConfig {
                segments: vec![2, 3],
                ..PipelineConfig::default()
            },
            snrs_db: vec![0.0, 5.0, 10.0],
            seeds: 1,
            first_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config(
                "a sweep needs at least one seed per cell".into(),
            ));
        }
        if self.snrs_db.is_empty() {
            return Err(Error::Config("a sweep needs at least one SNR".into()));
        }
        self.pipeline.validate()?;
        for &snr in &self.snrs_db {
            ScenarioConfig {
                snr_db: Some(snr),
                ..self.scenario.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    /// `(snr, seed)` of every scene, in output order.
    pub fn cells(&self) -> Vec<(f64, u64)> {
        self.snrs_db
            .iter()
            .flat_map(|&snr| (0..self.seeds as u64).map(move |i| (snr, self.first_seed + i)))
            .collect()
    }
}

/// Metric records of every scene of the sweep, scenes processed concurrently
/// and returned in grid order.
pub fn sweep_records(cfg: &SweepConfig) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let per_cell: Vec<Vec<MetricRecord>> = cfg
        .cells()
        .into_par_iter()
        .map(|(snr, seed)| {
            let scene = generate(&ScenarioConfig {
                snr_db: Some(snr),
                seed,
                ..cfg.scenario.clone()
            })?;
            let pc = PipelineConfig {
                seed,
                ..cfg.pipeline.clone()
            };
            Ok(pipeline::run(&scene, &pc, &cfg.label)?.records)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub activity: String,
    pub variant: String,
    pub segment: usize,
    pub scenes: usize,
    /// Scenes with a defined ψ (online mode can miss a segment).
    pub evaluated: usize,
    pub median_psi_deg: Option<f64>,
    pub median_delta_sinr_db: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Medians per (SNR, variant, segment), rows ordered by SNR, then variant as
/// configured, then segment.
pub fn summarize(cfg: &SweepConfig, records: &[MetricRecord]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &snr in &cfg.snrs_db {
        for variant in &cfg.pipeline.variants {
            for &segment in &cfg.pipeline.segments {
                if segment > cfg.scenario.sources {
                    continue;
                }
                let cell: Vec<&MetricRecord> = records
                    .iter()
                    .filter(|r| {
                        r.snr_db == Some(snr) && r.variant == variant.name() && r.segment == segment
                    })
                    .collect();
                let psi: Vec<f64> = cell.iter().filter_map(|r| r.psi_deg).collect();
                let sinr: Vec<f64> = cell.iter().filter_map(|r| r.delta_sinr_db).collect();
                rows.push(SweepRow {
                    snr_db: snr,
                    activity: cfg.pipeline.activity.to_string(),
                    variant: variant.name().to_string(),
                    segment,
                    scenes: cell.len(),
                    evaluated: psi.len(),
                    median_psi_deg: median(&psi),
                    median_delta_sinr_db: median(&sinr),
                });
            }
        }
    }
    rows
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Run the sweep on `threads` workers (all cores if `None`) and write the
/// table to `out`.
pub fn cmd_sweep(cfg: &SweepConfig, out: &Path, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| sweep_records(cfg))?;
    let rows = summarize(cfg, &records);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_sweep_csv(&rows, fs::File::create(out)?)?;
    Ok(rows)
}
