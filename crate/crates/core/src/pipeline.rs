//! End-to-end processing of a scene: source activity (oracle or online),
//! per-frame successive RTF estimation, LCMV designs and metrics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{delta_from_db, LcmvDesign};
use crate::counting::{ActivationEvent, CounterParams, CounterState};
use crate::covariance::{forgetting_factor, CovarianceField, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_angle, CMatrix, CVector};
use crate::metrics::{power_vad, sinr_improvement, MetricRecord, SegmentWindows, VAD_FRAME_S};
use crate::random::derive_seed;
use crate::rtf::{estimate_first_source, estimate_successive, EstimatorVariant};
use crate::scene::{ground_truth_from_frames, GroundTruth, Scene};
use crate::stft::SpectralFrame;

/// Noise floor, relative to the mean mixture power per channel and bin,
/// given to bins whose noise-only covariance is singular.
pub const NOISE_FLOOR_REL: f64 = 1e-9;

/// Where segment boundaries come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Oracle,
    Online,
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activity::Oracle => "oracle",
            Activity::Online => "online",
        })
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(Activity::Oracle),
            "online" => Ok(Activity::Online),
            other => Err(Error::Config(format!("unknown activity mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub variants: Vec<EstimatorVariant>,
    pub activity: Activity,
    /// Time constant of the recursive `R_y` estimate, seconds.
    pub t_alpha: f64,
    /// Interferer suppression of the LCMV beamformer, dB.
    pub delta_db: f64,
    pub counter: CounterParams,
    /// Segments to evaluate, as the number of active sources.
    pub segments: Vec<usize>,
    pub vad_threshold_db: f64,
    /// Skip the SINR computation.
    pub skip_sinr: bool,
    /// Record the counter trace in oracle mode too.
    pub trace: bool,
    /// Master seed of the random additional vectors.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variants: EstimatorVariant::ALL.to_vec(),
            activity: Activity::Oracle,
            t_alpha: 1.0,
            delta_db: -20.0,
            counter: CounterParams::default(),
            segments: vec![1, 2, 3],
            vad_threshold_db: crate::metrics::VAD_THRESHOLD_DB,
            skip_sinr: false,
            trace: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("no estimator variant selected".into()));
        }
        if self.segments.iter().any(|&k| k == 0) {
            return Err(Error::Config("segments are numbered from 1".into()));
        }
        forgetting_factor(0.05, self.t_alpha)?;
        delta_check(self.delta_db)?;
        Ok(())
    }
}

fn delta_check(db: f64) -> Result<f64> {
    let d = delta_from_db(db);
    if !(0.0..1.0).contains(&d) {
        return Err(Error::Config(format!(
            "suppression {db} dB must be negative"
        )));
    }
    Ok(d)
}

/// Frame range of one processed segment and the frame whose estimate is
/// frozen into the constraint set of later segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub start: usize,
    pub end: usize,
    pub freeze: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub frame: usize,
    pub raw: f64,
    pub gamma: f64,
    pub smoothed: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePsi {
    pub frame: usize,
    pub segment: usize,
    pub variant: EstimatorVariant,
    pub psi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub activity: Activity,
    pub true_starts: Vec<usize>,
    pub plans: Vec<SegmentPlan>,
    /// Frames of the noise-only estimate of `R_n`.
    pub noise_frames: usize,
    pub events: Vec<ActivationEvent>,
    pub trace: Vec<TraceRow>,
    pub frame_psi: Vec<FramePsi>,
    pub records: Vec<MetricRecord>,
}

/// Run the online counter over the recursive `R_y` of `frames`.
pub fn detect_activations(
    frames: &[SpectralFrame],
    alpha: f64,
    params: CounterParams,
) -> Result<(Vec<ActivationEvent>, Vec<TraceRow>)> {
    let first = frames.first().ok_or(Error::EmptySegment)?;
    let mut cov = CovarianceField::new(alpha, first.num_bins(), first.channels())?;
    let mut counter = CounterState::new(params)?;
    let mut trace = Vec::with_capacity(frames.len());
    for fr in frames {
        cov.update(fr)?;
        let out = counter.step(cov.matrices())?;
        trace.push(TraceRow {
            frame: fr.index,
            raw: out.raw,
            gamma: out.gamma,
            smoothed: out.smoothed,
            count: counter.count(),
        });
    }
    Ok((counter.events().to_vec(), trace))
}

/// Segment plans from segment start frames. Each segment ends where the
/// next begins; the frozen estimate is taken `guard + 1` frames before that.
pub fn plan_segments(starts: &[usize], total: usize, guard: usize) -> Vec<SegmentPlan> {
    starts
        .iter()
        .enumerate()
        .map(|(k, &start)| {
            let end = starts
                .get(k + 1)
                .copied()
                .unwrap_or(total)
                .max(start + 1)
                .min(total);
            let freeze = if k + 1 < starts.len() {
                end.saturating_sub(guard + 1).max(start)
            } else {
                total - 1
            };
            SegmentPlan { start, end, freeze }
        })
        .collect()
}

/// Counter parameters matched to the scene's frame statistics.
pub fn counter_params_for(scene: &Scene, cfg: &PipelineConfig) -> CounterParams {
    let sc = scene.config.stft;
    CounterParams {
        t_fs: sc.frame_shift_secs(),
        t_alpha: cfg.t_alpha,
        overlap: if scene.is_exact() {
            1
        } else {
            sc.frame_len / sc.hop
        },
        ..cfg.counter.clone()
    }
}

/// Per-variant accumulators for one evaluated segment.
#[derive(Clone)]
struct Eval {
    num: f64,
    den: f64,
    degenerate: usize,
}

fn mean_power(frames: &[SpectralFrame]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for fr in frames {
        for f in 0..fr.num_bins() {
            sum += fr.bin(f).iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += fr.channels();
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Process `scene` and evaluate the configured segments.
pub fn run(scene: &Scene, cfg: &PipelineConfig, label: &str) -> Result<RunOutput> {
    cfg.validate()?;
    let delta = delta_check(cfg.delta_db)?;
    let sc = scene.config.stft;
    let alpha = forgetting_factor(sc.frame_shift_secs(), cfg.t_alpha)?;
    let frames = scene.mixture_frames()?;
    let total = frames.len();
    let bins = scene.num_bins();
    let m = scene.config.channels;
    let reference = scene.config.reference;
    let k_max = scene.config.sources;
    let true_starts = scene.activation_frames.clone();

    let params = counter_params_for(scene, cfg);
    let (starts, events, trace, guard) = match cfg.activity {
        Activity::Oracle => {
            let trace = if cfg.trace {
                detect_activations(&frames, alpha, params.clone())?.1
            } else {
                Vec::new()
            };
            (true_starts.clone(), Vec::new(), trace, 0)
        }
        Activity::Online => {
            let (events, trace) = detect_activations(&frames, alpha, params.clone())?;
            let starts: Vec<usize> = events.iter().take(k_max).map(|e| e.frame).collect();
            (starts, events, trace, params.lag_frames())
        }
    };
    let plans = plan_segments(&starts, total, guard);

    // noise-only frames: before the first boundary, less the detector lag online
    let noise_frames = starts
        .first()
        .map_or(total, |&s| s.saturating_sub(guard))
        .max(1);
    let floor = NOISE_FLOOR_REL * mean_power(&frames).max(f64::MIN_POSITIVE);
    let noise = NoiseModel::from_segment(&frames[..noise_frames], floor)?;

    // ground truth of every evaluated true segment
    let evaluated: Vec<usize> = (0..k_max)
        .filter(|k| cfg.segments.contains(&(k + 1)))
        .collect();
    let truths: Vec<Option<GroundTruth>> = (0..k_max)
        .map(|k| {
            if !evaluated.contains(&k) {
                return Ok(None);
            }
            let src = scene.source_frames(k)?;
            Ok(Some(ground_truth_from_frames(
                &src[scene.segment_frames(k)],
                reference,
            )?))
        })
        .collect::<Result<_>>()?;

    // what to do at each frame: (segment, evaluate ψ, freeze)
    let mut todo: Vec<Option<(usize, bool, bool)>> = vec![None; total];
    for (k, p) in plans.iter().enumerate() {
        let truth_range = scene.segment_frames(k);
        for t in p.start..p.end {
            let eval = evaluated.contains(&k) && truth_range.contains(&t);
            let freeze = t == p.freeze;
            if eval || freeze {
                todo[t] = Some((k, eval, freeze));
            }
        }
    }

    let nv = cfg.variants.len();
    // frozen[v][k][f]
    let mut frozen: Vec<Vec<Vec<Option<CVector>>>> = vec![Vec::new(); nv];
    let mut evals: Vec<Vec<Eval>> = vec![
        vec![
            Eval {
                num: 0.0,
                den: 0.0,
                degenerate: 0,
            };
            k_max
        ];
        nv
    ];
    let mut frame_psi = Vec::new();
    let mut cov = CovarianceField::new(alpha, bins, m)?;
    for (t, fr) in frames.iter().enumerate() {
        cov.update(fr)?;
        let Some((k, eval, freeze)) = todo[t] else {
            continue;
        };
        let per_bin: Vec<Vec<Option<CVector>>> = (0..bins)
            .into_par_iter()
            .map(|f| {
                let r_y = cov.bin(f);
                let nb = noise.bin(f);
                if k == 0 {
                    let g = estimate_first_source(r_y, nb, reference).ok();
                    return vec![g; nv];
                }
                let seed = derive_seed(cfg.seed, &[k as u64, f as u64]);
                (0..nv)
                    .map(|v| {
                        let old: Option<Vec<CVector>> =
                            frozen[v].iter().map(|seg| seg[f].clone()).collect();
                        let old = CMatrix::from_columns(&old?);
                        estimate_successive(r_y, nb, &old, reference, cfg.variants[v], seed).ok()
                    })
                    .collect()
            })
            .collect();

        if eval {
            let truth = truths[k].as_ref().expect("truth of evaluated segment");
            for (v, variant) in cfg.variants.iter().enumerate() {
                let mut num = 0.0;
                let mut den = 0.0;
                for f in 0..bins {
                    let w = truth.weights[f];
                    match (&per_bin[f][v], &truth.rtfs[f]) {
                        (Some(est), Some(g)) if w > 0.0 => {
                            num += w * hermitian_angle(g, est);
                            den += w;
                        }
                        (None, Some(_)) if w > 0.0 => evals[v][k].degenerate += 1,
                        _ => {}
                    }
                }
                evals[v][k].num += num;
                evals[v][k].den += den;
                if den > 0.0 {
                    frame_psi.push(FramePsi {
                        frame: t,
                        segment: k + 1,
                        variant: *variant,
                        psi_deg: (num / den).to_degrees(),
                    });
                }
            }
        }
        if freeze {
            for (v, slot) in frozen.iter_mut().enumerate() {
                slot.push(per_bin.iter().map(|b| b[v].clone()).collect());
            }
        }
    }

    // SINR improvement of the segment designs
    let activity = if cfg.skip_sinr {
        Vec::new()
    } else {
        let vad_len = ((VAD_FRAME_S * sc.sample_rate as f64).round() as usize).max(1);
        power_vad(&scene.sources, vad_len, cfg.vad_threshold_db)?
    };
    let mut records = Vec::new();
    for &k in &evaluated {
        let windows = if cfg.skip_sinr {
            None
        } else {
            let ranges: Vec<_> = (0..=k).map(|j| scene.segment_samples(j)).collect();
            let frames_k: Vec<_> = (0..=k).map(|j| scene.segment_frames(j)).collect();
            Some(SegmentWindows::new(
                frames_k,
                &ranges,
                &activity,
                sc.frame_len,
            )?)
        };
        let (target, undesired) = if windows.is_some() && k < plans.len() {
            let x = scene.source_frames(k)?;
            let mut v = frames.clone();
            for (vf, xf) in v.iter_mut().zip(&x) {
                let mut neg = xf.clone();
                neg.scale(-1.0);
                vf.accumulate(&neg);
            }
            (x, v)
        } else {
            (Vec::new(), Vec::new())
        };
        for (v, variant) in cfg.variants.iter().enumerate() {
            let e = &evals[v][k];
            let psi = (e.den > 0.0).then(|| (e.num / e.den).to_degrees());
            let mut degenerate = e.degenerate;
            let sinr = match &windows {
                Some(w) if k < frozen[v].len() => {
                    let factors: Vec<_> = noise.bins.iter().map(|b| &b.factor).collect();
                    let rtfs: Vec<Option<CMatrix>> = (0..bins)
                        .map(|f| {
                            let cols: Option<Vec<CVector>> =
                                std::iter::once(frozen[v][k][f].clone())
                                    .chain((0..k).map(|j| frozen[v][j][f].clone()))
                                    .collect();
                            cols.map(|c| CMatrix::from_columns(&c))
                        })
                        .collect();
                    let mut designs = Vec::with_capacity(m);
                    for r in 0..m {
                        let (d, fallbacks) = LcmvDesign::with_fallback(&factors, &rtfs, r, delta)?;
                        if r == reference {
                            degenerate += fallbacks;
                        }
                        designs.push(d);
                    }
                    match sinr_improvement(
                        scene.stft(),
                        &target,
                        &undesired,
                        &designs,
                        &w.samples[k],
                    ) {
                        Ok(s) => Some(s.improvement_db),
                        Err(Error::EmptySegment) => None,
                        Err(e) => return Err(e),
                    }
                }
                _ => None,
            };
            let latency = match cfg.activity {
                Activity::Online => starts.get(k).map(|&d| d as i64 - true_starts[k] as i64),
                Activity::Oracle => None,
            };
            records.push(MetricRecord {
                scenario: label.to_string(),
                seed: scene.config.seed,
                snr_db: scene.config.snr_db,
                variant: variant.name().to_string(),
                activity: cfg.activity.to_string(),
                segment: k + 1,
                psi_deg: psi,
                delta_sinr_db: sinr,
                detection_latency_frames: latency,
                degenerate_bins: degenerate,
            });
        }
    }

    Ok(RunOutput {
        activity: cfg.activity,
        true_starts,
        plans,
        noise_frames,
        events,
        trace,
        frame_psi,
        records,
    })
}
