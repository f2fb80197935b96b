//! Evaluation metrics: power VAD, weighted Hermitian angle and broadband
//! SINR improvement of the LCMV beamformer.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{apply, LcmvDesign};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_angle, CVector};
use crate::stft::{SpectralFrame, Stft};

/// Power VAD frame length in seconds (hop equals the frame length).
pub const VAD_FRAME_S: f64 = 0.01;
/// Default VAD threshold relative to the peak frame power.
pub const VAD_THRESHOLD_DB: f64 = -30.0;
/// Output SINR reported when the undesired output vanishes.
pub const SINR_CAP_DB: f64 = 300.0;

/// Per-sample activity masks, one per source. A frame of `frame_len`
/// samples is active when its power (summed over channels) is within
/// `threshold_db` of the source's loudest frame. Silent sources yield an
/// all-false mask.
pub fn power_vad(
    sources: &[Vec<Vec<f64>>],
    frame_len: usize,
    threshold_db: f64,
) -> Result<Vec<Vec<bool>>> {
    if frame_len == 0 {
        return Err(Error::InvalidParameter(
            "VAD frame length must be positive".into(),
        ));
    }
    sources
        .iter()
        .map(|chans| {
            let len = chans.first().map_or(0, Vec::len);
            if chans.iter().any(|c| c.len() != len) {
                return Err(Error::DimensionMismatch("ragged source channels".into()));
            }
            let powers: Vec<f64> = (0..len.div_ceil(frame_len))
                .map(|i| {
                    let r = i * frame_len..((i + 1) * frame_len).min(len);
                    chans
                        .iter()
                        .map(|c| c[r.clone()].iter().map(|x| x * x).sum::<f64>())
                        .sum::<f64>()
                        / r.len() as f64
                })
                .collect();
            let peak = powers.iter().copied().fold(0.0, f64::max);
            let mut mask = vec![false; len];
            if peak > 0.0 {
                let floor = peak * 10f64.powf(threshold_db / 10.0);
                for (i, p) in powers.iter().enumerate() {
                    if *p >= floor {
                        mask[i * frame_len..((i + 1) * frame_len).min(len)].fill(true);
                    }
                }
            }
            Ok(mask)
        })
        .collect()
}

/// Frame ranges `T_K` and sample masks `L_K` of the evaluated segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWindows {
    pub frames: Vec<Range<usize>>,
    pub samples: Vec<Vec<bool>>,
}

impl SegmentWindows {
    /// `L_K`: samples of `sample_ranges[K]` where sources `0..=K` are all
    /// VAD-active, excluding `edge` samples at either end of the signal.
    pub fn new(
        frames: Vec<Range<usize>>,
        sample_ranges: &[Range<usize>],
        activity: &[Vec<bool>],
        edge: usize,
    ) -> Result<Self> {
        if frames.len() != sample_ranges.len() || activity.len() < frames.len() {
            return Err(Error::DimensionMismatch(
                "segment, sample range and activity counts differ".into(),
            ));
        }
        if frames.windows(2).any(|w| w[0].end > w[1].start) {
            return Err(Error::InvalidParameter(
                "segment frame ranges overlap or are unordered".into(),
            ));
        }
        let len = activity.first().map_or(0, Vec::len);
        let samples = sample_ranges
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let lo = r.start.max(edge);
                let hi = r.end.min(len.saturating_sub(edge));
                (0..len)
                    .map(|l| l >= lo && l < hi && activity[..=k].iter().all(|a| a[l]))
                    .collect()
            })
            .collect();
        Ok(Self { frames, samples })
    }
}

/// Weighted mean Hermitian angle in degrees over frames and bins.
/// `estimates[t][f]` may be missing; bins without a truth vector or with
/// zero weight are left out.
pub fn hermitian_angle_weighted(
    estimates: &[Vec<Option<CVector>>],
    truth: &[Option<CVector>],
    weights: &[f64],
) -> Result<f64> {
    if truth.len() != weights.len() {
        return Err(Error::DimensionMismatch(
            "truth and weight bin counts differ".into(),
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidParameter(
            "weights must be non-negative".into(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for frame in estimates {
        if frame.len() != truth.len() {
            return Err(Error::DimensionMismatch(
                "estimate and truth bin counts differ".into(),
            ));
        }
        for ((est, g), &w) in frame.iter().zip(truth).zip(weights) {
            if let (Some(est), Some(g)) = (est, g) {
                if w > 0.0 {
                    num += w * hermitian_angle(g, est);
                    den += w;
                }
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::InvalidParameter(
            "no positive weight on any estimate".into(),
        ));
    }
    Ok((num / den).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinr {
    pub input_db: f64,
    pub output_db: f64,
    pub improvement_db: f64,
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (10.0 * (num / den).log10()).min(SINR_CAP_DB)
    } else if num > 0.0 {
        SINR_CAP_DB
    } else {
        f64::NAN
    }
}

fn masked_energy(chans: &[Vec<f64>], mask: &[bool]) -> f64 {
    chans
        .iter()
        .map(|c| {
            c.iter()
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|(x, _)| x * x)
                .sum::<f64>()
        })
        .sum()
}

/// Multichannel broadband SINR improvement. `designs[r]` is the beamformer
/// for reference channel `r`; its output forms channel `r` of the output
/// signals. Input SINR is measured on the synthesized (filterbank
/// round-tripped) components, so a pass-through design gives exactly 0 dB.
pub fn sinr_improvement(
    stft: &Stft,
    target: &[SpectralFrame],
    undesired: &[SpectralFrame],
    designs: &[LcmvDesign],
    mask: &[bool],
) -> Result<Sinr> {
    if !mask.iter().any(|m| *m) {
        return Err(Error::EmptySegment);
    }
    let x_in = stft.synthesize(target)?;
    let v_in = stft.synthesize(undesired)?;
    if designs.len() != x_in.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference designs for {} channels",
            designs.len(),
            x_in.len()
        )));
    }
    if mask.len() != x_in[0].len() {
        return Err(Error::DimensionMismatch(
            "sample mask length differs from the signal".into(),
        ));
    }
    let outputs = designs
        .par_iter()
        .map(|d| {
            let x = stft
                .synthesize(&apply(&d.weights, target)?)?
                .pop()
                .unwrap_or_default();
            let v = stft
                .synthesize(&apply(&d.weights, undesired)?)?
                .pop()
                .unwrap_or_default();
            Ok((x, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let (x_out, v_out): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    let input_db = ratio_db(masked_energy(&x_in, mask), masked_energy(&v_in, mask));
    let output_db = ratio_db(masked_energy(&x_out, mask), masked_energy(&v_out, mask));
    Ok(Sinr {
        input_db,
        output_db,
        improvement_db: output_db - input_db,
    })
}

/// One evaluated (scenario, variant, segment) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub variant: String,
    pub activity: String,
    /// Number of simultaneously active sources.
    pub segment: usize,
    pub psi_deg: Option<f64>,
    pub delta_sinr_db: Option<f64>,
    /// Detection frame minus the true activation frame (online mode).
    pub detection_latency_frames: Option<i64>,
    /// Estimates skipped as degenerate in this segment.
    pub degenerate_bins: usize,
}
