//! Synthetic successive-activation scenes with exact ground truth.
//!
//! Two generators are provided. In exact-model mode every source component
//! is drawn directly in the STFT domain as `g_{k,f} s_{k,t,f}`, so the
//! per-bin rank-1 model holds exactly on the generated frames; the
//! time-domain signals are their overlap-add synthesis. In FIR mode sources
//! are convolved with random multichannel impulse responses whose tails
//! violate the rank-1 model, and all frames come from STFT analysis.

use std::path::Path;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, CVector, CholeskyFactor, C64};
use crate::random::{complex_gaussian, derive_seed, gaussian, random_hpd, random_rtf, rng_for};
use crate::rtf::normalize_reference;
use crate::stft::{SpectralFrame, Stft, StftConfig};
use crate::wav::{write_wav, WavFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Spatially white, equal power on all channels.
    Isotropic,
    /// Full-rank spatially correlated noise (random HPD covariance per bin in
    /// exact mode, a sum of filtered noises in FIR mode).
    Diffuse,
    /// Spatially white with a different random spectral coloring per channel.
    Colored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneMode {
    ExactModel,
    FirReverb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub channels: usize,
    pub sources: usize,
    pub duration_s: f64,
    pub activations_s: Vec<f64>,
    /// Power ratio of one source component to the noise; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub noise: NoiseKind,
    pub mode: SceneMode,
    /// Length of the reverberant tail of each FIR, in samples.
    pub fir_len: usize,
    /// Exponential decay constant of the tail, in seconds.
    pub fir_decay_s: f64,
    /// Direct-path to tail energy ratio of each FIR.
    pub drr_db: f64,
    pub reference: usize,
    pub stft: StftConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            channels: 6,
            sources: 3,
            duration_s: 16.0,
            activations_s: vec![4.0, 8.0, 12.0],
            snr_db: Some(5.0),
            noise: NoiseKind::Diffuse,
            mode: SceneMode::FirReverb,
            fir_len: 1600,
            fir_decay_s: 0.02,
            drr_db: 0.0,
            reference: 0,
            stft: StftConfig::default(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn sample_rate(&self) -> u32 {
        self.stft.sample_rate
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate() as f64).round() as usize
    }

    pub fn activation_samples(&self) -> Vec<usize> {
        self.activations_s
            .iter()
            .map(|t| (t * self.sample_rate() as f64).round() as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.stft.validate()?;
        if self.channels < 2 {
            return bad(format!("need at least 2 channels, got {}", self.channels));
        }
        if self.sources == 0 || self.sources > self.channels {
            return bad(format!(
                "source count K_max = {} must be between 1 and M = {}",
                self.sources, self.channels
            ));
        }
        if self.activations_s.len() != self.sources {
            return bad(format!(
                "{} activation times for {} sources",
                self.activations_s.len(),
                self.sources
            ));
        }
        if self.reference >= self.channels {
            return bad(format!("reference channel {} out of range", self.reference));
        }
        if !(self.duration_s > 0.0) || self.num_samples() < self.stft.frame_len {
            return bad(format!(
                "duration {} s is shorter than one frame",
                self.duration_s
            ));
        }
        let acts = self.activation_samples();
        if acts[0] < self.stft.frame_len {
            return bad("the first activation must leave at least one noise-only frame".into());
        }
        for w in acts.windows(2) {
            if w[1] < w[0] + self.stft.hop {
                return bad("activation times must increase by at least one frame".into());
            }
        }
        if *acts.last().unwrap() + self.stft.frame_len > self.num_samples() {
            return bad("the last activation must leave at least one frame".into());
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad("SNR must be finite; omit it for a noiseless scene".into());
            }
        }
        if self.mode == SceneMode::FirReverb && !(self.fir_decay_s > 0.0 && self.drr_db.is_finite())
        {
            return bad("FIR decay must be positive and DRR finite".into());
        }
        Ok(())
    }

    /// Noise amplitude relative to unit source power.
    fn noise_gain(&self) -> f64 {
        self.snr_db.map_or(0.0, |snr| 10f64.powf(-snr / 20.0))
    }
}

/// STFT-domain drivers of an exact-model scene.
#[derive(Debug, Clone)]
struct ExactParts {
    /// `[k][f]`, reference-normalized.
    rtfs: Vec<Vec<CVector>>,
    /// `[k][t·F + f]` source coefficients at the reference channel.
    coeffs: Vec<Vec<C64>>,
    noise: Vec<SpectralFrame>,
    noise_cov: Vec<CMatrix>,
}

/// A generated scene: time-domain components, their mixture and the
/// information needed to reconstruct exact per-component STFT frames.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: ScenarioConfig,
    /// `[k][m][l]`
    pub sources: Vec<Vec<Vec<f64>>>,
    /// `[m][l]`
    pub noise: Vec<Vec<f64>>,
    /// `[m][l]`, equal to the sum of all components.
    pub mixture: Vec<Vec<f64>>,
    pub activation_samples: Vec<usize>,
    pub activation_frames: Vec<usize>,
    exact: Option<ExactParts>,
    stft: std::sync::Arc<Stft>,
}

/// Generate the scene described by `cfg`.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scene> {
    cfg.validate()?;
    let stft = std::sync::Arc::new(Stft::new(cfg.stft)?);
    match cfg.mode {
        SceneMode::ExactModel => generate_exact(cfg, stft),
        SceneMode::FirReverb => generate_fir(cfg, stft),
    }
}

/// Log-amplitude standard deviation of the source envelopes.
const ENVELOPE_SPREAD: f64 = 0.5;

/// Slowly varying log-normal amplitude envelope (AR(1) log-amplitude).
fn envelope(len: usize, correlation: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[]);
    let drive = (1.0 - correlation * correlation).sqrt();
    let mut e = gaussian(&mut rng);
    (0..len)
        .map(|_| {
            e = correlation * e + drive * gaussian(&mut rng);
            (ENVELOPE_SPREAD * e).exp()
        })
        .collect()
}

fn mean_power(chans: &[Vec<f64>], from: usize) -> f64 {
    let n = chans
        .iter()
        .map(|c| c.len().saturating_sub(from))
        .sum::<usize>();
    if n == 0 {
        return 0.0;
    }
    chans
        .iter()
        .flat_map(|c| &c[from..])
        .map(|x| x * x)
        .sum::<f64>()
        / n as f64
}

fn scale_signal(chans: &mut [Vec<f64>], g: f64) {
    for c in chans {
        for x in c {
            *x *= g;
        }
    }
}

fn mix(sources: &[Vec<Vec<f64>>], noise: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = noise.to_vec();
    for s in sources {
        for (o, c) in out.iter_mut().zip(s) {
            for (a, b) in o.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    out
}

fn generate_exact(cfg: &ScenarioConfig, stft: std::sync::Arc<Stft>) -> Result<Scene> {
    let m = cfg.channels;
    let len = cfg.num_samples();
    let sc = &cfg.stft;
    let frames = sc.num_frames(len);
    let bins = sc.num_bins();
    let acts = cfg.activation_samples();
    // frame t is synthesized onto samples from t·hop, so the first active
    // frame reproduces the onset sample exactly
    let act_frames: Vec<usize> = acts.iter().map(|&s| s.div_ceil(sc.hop)).collect();
    let seed = cfg.seed;

    let rtfs: Vec<Vec<CVector>> = (0..cfg.sources)
        .map(|k| {
            (0..bins)
                .into_par_iter()
                .map(|f| {
                    random_rtf(
                        m,
                        cfg.reference,
                        &mut rng_for(seed, &[1, k as u64, f as u64]),
                    )
                })
                .collect()
        })
        .collect();

    let mut coeffs: Vec<Vec<C64>> = (0..cfg.sources)
        .map(|k| {
            let env = envelope(frames, 0.9, derive_seed(seed, &[3, k as u64]));
            let per_bin: Vec<Vec<C64>> = (0..bins)
                .into_par_iter()
                .map(|f| {
                    let mut rng = rng_for(seed, &[2, k as u64, f as u64]);
                    (0..frames)
                        .map(|t| {
                            let z = complex_gaussian(&mut rng);
                            if t >= act_frames[k] {
                                z * env[t]
                            } else {
                                C64::new(0.0, 0.0)
                            }
                        })
                        .collect()
                })
                .collect();
            let mut flat = vec![C64::new(0.0, 0.0); frames * bins];
            for (f, col) in per_bin.into_iter().enumerate() {
                for (t, z) in col.into_iter().enumerate() {
                    flat[t * bins + f] = z;
                }
            }
            flat
        })
        .collect();

    let noise_cov: Vec<CMatrix> = (0..bins)
        .into_par_iter()
        .map(|f| exact_noise_covariance(cfg, f))
        .collect();
    let noise_factors = noise_cov
        .iter()
        .map(|r| CholeskyFactor::new(r, 0.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let noise_bins: Vec<Vec<CVector>> = (0..bins)
        .into_par_iter()
        .map(|f| {
            let mut rng = rng_for(seed, &[5, f as u64]);
            (0..frames)
                .map(|_| {
                    noise_factors[f]
                        .dewhiten_vec(&CVector::from_fn(m, |_, _| complex_gaussian(&mut rng)))
                })
                .collect()
        })
        .collect();
    let mut noise_frames: Vec<SpectralFrame> = (0..frames)
        .map(|t| SpectralFrame::zeros(t, bins, m))
        .collect();
    for (f, col) in noise_bins.iter().enumerate() {
        for (t, v) in col.iter().enumerate() {
            noise_frames[t].bin_mut(f).copy_from_slice(v.as_slice());
        }
    }

    let mut parts = ExactParts {
        rtfs,
        coeffs: Vec::new(),
        noise: noise_frames,
        noise_cov,
    };

    // synthesize, then normalize powers in the time domain and apply the same
    // gains to the STFT-domain drivers
    let mut sources = Vec::with_capacity(cfg.sources);
    for k in 0..cfg.sources {
        let frames_k = source_frames_exact(&parts.rtfs[k], &coeffs[k], frames, bins, m);
        let mut sig = stft.synthesize(&frames_k)?;
        let p = mean_power(&sig, acts[k]);
        let g = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
        scale_signal(&mut sig, g);
        for z in &mut coeffs[k] {
            *z *= g;
        }
        sources.push(sig);
    }
    parts.coeffs = coeffs;

    let mut noise = stft.synthesize(&parts.noise)?;
    let p = mean_power(&noise, 0);
    let g = if p > 0.0 {
        cfg.noise_gain() / p.sqrt()
    } else {
        0.0
    };
    scale_signal(&mut noise, g);
    for fr in &mut parts.noise {
        fr.scale(g);
    }
    for r in &mut parts.noise_cov {
        *r *= C64::new(g * g, 0.0);
    }
    let mixture = mix(&sources, &noise);
    Ok(Scene {
        config: cfg.clone(),
        sources,
        noise,
        mixture,
        activation_samples: acts,
        activation_frames: act_frames,
        exact: Some(parts),
        stft,
    })
}

fn exact_noise_covariance(cfg: &ScenarioConfig, f: usize) -> CMatrix {
    let m = cfg.channels;
    match cfg.noise {
        NoiseKind::Isotropic => CMatrix::identity(m, m),
        NoiseKind::Diffuse => {
            let r = random_hpd(m, &mut rng_for(cfg.seed, &[4, f as u64]));
            let tr = crate::linalg::trace_re(&r);
            r * C64::new(m as f64 / tr, 0.0)
        }
        NoiseKind::Colored => {
            let mut rng = rng_for(cfg.seed, &[4, f as u64]);
            let d = CVector::from_fn(m, |_, _| C64::new(gaussian(&mut rng).exp(), 0.0));
            CMatrix::from_diagonal(&d)
        }
    }
}

fn source_frames_exact(
    rtfs: &[CVector],
    coeffs: &[C64],
    frames: usize,
    bins: usize,
    m: usize,
) -> Vec<SpectralFrame> {
    (0..frames)
        .map(|t| {
            let mut fr = SpectralFrame::zeros(t, bins, m);
            for f in 0..bins {
                let s = coeffs[t * bins + f];
                if s != C64::new(0.0, 0.0) {
                    for (dst, g) in fr.bin_mut(f).iter_mut().zip(rtfs[f].iter()) {
                        *dst = g * s;
                    }
                }
            }
            fr
        })
        .collect()
}

/// Linear convolution truncated to the signal length, via one FFT of the
/// signal shared across all filters.
fn convolve_many(signal: &[f64], filters: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let flen = filters.iter().map(Vec::len).max().unwrap_or(1);
    let n = (signal.len() + flen).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut sx: Vec<C64> = signal.iter().map(|&x| C64::new(x, 0.0)).collect();
    sx.resize(n, C64::new(0.0, 0.0));
    fwd.process(&mut sx);
    filters
        .iter()
        .map(|h| {
            let mut hx: Vec<C64> = h.iter().map(|&x| C64::new(x, 0.0)).collect();
            hx.resize(n, C64::new(0.0, 0.0));
            fwd.process(&mut hx);
            for (a, b) in hx.iter_mut().zip(&sx) {
                *a *= b;
            }
            inv.process(&mut hx);
            hx[..signal.len()].iter().map(|z| z.re / n as f64).collect()
        })
        .collect()
}

/// Unit impulse at a random delay of at most 32 samples followed by an
/// exponentially decaying Gaussian tail with the configured energy ratio.
fn room_filter(cfg: &ScenarioConfig, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[]);
    let delay = (rand::Rng::random::<u32>(&mut rng) % 33) as usize;
    let mut h = vec![0.0; delay + 1 + cfg.fir_len];
    h[delay] = 1.0;
    if cfg.fir_len > 0 {
        let tau = cfg.fir_decay_s * cfg.sample_rate() as f64;
        let tail: Vec<f64> = (0..cfg.fir_len)
            .map(|i| gaussian(&mut rng) * (-(i as f64 + 1.0) / tau).exp())
            .collect();
        let energy: f64 = tail.iter().map(|x| x * x).sum();
        let gain = if energy > 0.0 {
            (10f64.powf(-cfg.drr_db / 10.0) / energy).sqrt()
        } else {
            0.0
        };
        for (i, x) in tail.into_iter().enumerate() {
            h[delay + 1 + i] = x * gain;
        }
    }
    h
}

/// Short random filter with decaying taps, used to color noise.
fn coloring_filter(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, &[]);
    (0..len)
        .map(|i| gaussian(&mut rng) * (-(i as f64) / (len as f64 / 4.0)).exp())
        .collect()
}

fn white(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[]);
    (0..len).map(|_| gaussian(&mut rng)).collect()
}

fn generate_fir(cfg: &ScenarioConfig, stft: std::sync::Arc<Stft>) -> Result<Scene> {
    let m = cfg.channels;
    let len = cfg.num_samples();
    let sc = &cfg.stft;
    let acts = cfg.activation_samples();
    // first frame that overlaps the onset
    let act_frames: Vec<usize> = acts
        .iter()
        .map(|&s| {
            if s < sc.frame_len {
                0
            } else {
                (s - sc.frame_len) / sc.hop + 1
            }
        })
        .collect();
    let seed = cfg.seed;

    let sources: Vec<Vec<Vec<f64>>> = (0..cfg.sources)
        .into_par_iter()
        .map(|k| {
            let kk = k as u64;
            let env = envelope(
                len,
                (-1.0 / (0.25 * cfg.sample_rate() as f64)).exp(),
                derive_seed(seed, &[3, kk]),
            );
            // modulated, mildly low-passed Gaussian noise as a speech stand-in
            let mut dry = white(len, derive_seed(seed, &[2, kk]));
            let mut state = 0.0;
            for (l, x) in dry.iter_mut().enumerate() {
                state = 0.7 * state + *x;
                *x = if l >= acts[k] { state * env[l] } else { 0.0 };
            }
            let filters: Vec<Vec<f64>> = (0..m)
                .map(|mi| room_filter(cfg, derive_seed(seed, &[6, kk, mi as u64])))
                .collect();
            let mut wet = convolve_many(&dry, &filters);
            // the filters are causal: clear FFT rounding residue before the onset
            for c in &mut wet {
                c[..acts[k]].fill(0.0);
            }
            let p = mean_power(&wet, acts[k]);
            scale_signal(&mut wet, if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 });
            wet
        })
        .collect();

    let mut noise = fir_noise(cfg, len);
    let p = mean_power(&noise, 0);
    scale_signal(
        &mut noise,
        if p > 0.0 {
            cfg.noise_gain() / p.sqrt()
        } else {
            0.0
        },
    );
    let mixture = mix(&sources, &noise);
    Ok(Scene {
        config: cfg.clone(),
        sources,
        noise,
        mixture,
        activation_samples: acts,
        activation_frames: act_frames,
        exact: None,
        stft,
    })
}

fn fir_noise(cfg: &ScenarioConfig, len: usize) -> Vec<Vec<f64>> {
    let m = cfg.channels;
    let seed = cfg.seed;
    if cfg.snr_db.is_none() {
        return vec![vec![0.0; len]; m];
    }
    match cfg.noise {
        NoiseKind::Isotropic => (0..m)
            .into_par_iter()
            .map(|mi| white(len, derive_seed(seed, &[7, mi as u64])))
            .collect(),
        NoiseKind::Colored => (0..m)
            .into_par_iter()
            .map(|mi| {
                let w = white(len, derive_seed(seed, &[7, mi as u64]));
                let h = coloring_filter(derive_seed(seed, &[8, mi as u64]), 16);
                convolve_many(&w, &[h]).pop().unwrap()
            })
            .collect(),
        NoiseKind::Diffuse => {
            let count = (2 * m).max(8);
            let parts: Vec<Vec<Vec<f64>>> = (0..count)
                .into_par_iter()
                .map(|j| {
                    let jj = j as u64;
                    let w = white(len, derive_seed(seed, &[7, jj]));
                    let filters: Vec<Vec<f64>> = (0..m)
                        .map(|mi| coloring_filter(derive_seed(seed, &[8, jj, mi as u64]), 64))
                        .collect();
                    convolve_many(&w, &filters)
                })
                .collect();
            let mut out = vec![vec![0.0; len]; m];
            for p in parts {
                for (o, c) in out.iter_mut().zip(p) {
                    for (a, b) in o.iter_mut().zip(c) {
                        *a += b;
                    }
                }
            }
            out
        }
    }
}

impl Scene {
    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn num_frames(&self) -> usize {
        self.config.stft.num_frames(self.mixture[0].len())
    }

    pub fn num_bins(&self) -> usize {
        self.config.stft.num_bins()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Drawn RTFs of source `k` (exact-model mode only).
    pub fn drawn_rtfs(&self, k: usize) -> Option<&[CVector]> {
        self.exact.as_ref().map(|e| e.rtfs[k].as_slice())
    }

    /// STFT frames of source component `k`.
    pub fn source_frames(&self, k: usize) -> Result<Vec<SpectralFrame>> {
        match &self.exact {
            Some(e) => Ok(source_frames_exact(
                &e.rtfs[k],
                &e.coeffs[k],
                self.num_frames(),
                self.num_bins(),
                self.config.channels,
            )),
            None => Ok(self.stft.analyze(&self.sources[k])?),
        }
    }

    pub fn noise_frames(&self) -> Result<Vec<SpectralFrame>> {
        match &self.exact {
            Some(e) => Ok(e.noise.clone()),
            None => Ok(self.stft.analyze(&self.noise)?),
        }
    }

    /// Frames the estimators observe: the sum of the exact component frames
    /// in exact-model mode, the analysis of the mixture otherwise.
    pub fn mixture_frames(&self) -> Result<Vec<SpectralFrame>> {
        match &self.exact {
            Some(_) => {
                let mut out = self.noise_frames()?;
                for k in 0..self.config.sources {
                    for (o, s) in out.iter_mut().zip(self.source_frames(k)?) {
                        o.accumulate(&s);
                    }
                }
                Ok(out)
            }
            None => Ok(self.stft.analyze(&self.mixture)?),
        }
    }

    /// True noise covariance per bin: analytic in exact-model mode, the
    /// sample covariance of the noise frames otherwise.
    pub fn noise_covariance(&self) -> Result<Vec<CMatrix>> {
        match &self.exact {
            Some(e) => Ok(e.noise_cov.clone()),
            None => crate::covariance::sample_covariance(&self.noise_frames()?),
        }
    }

    /// Frame range `[start, end)` of segment `k` (0-based), during which
    /// exactly `k + 1` sources are active.
    pub fn segment_frames(&self, k: usize) -> std::ops::Range<usize> {
        let end = self
            .activation_frames
            .get(k + 1)
            .copied()
            .unwrap_or_else(|| self.num_frames());
        self.activation_frames[k]..end
    }

    /// Sample range `[start, end)` of segment `k`.
    pub fn segment_samples(&self, k: usize) -> std::ops::Range<usize> {
        let end = self
            .activation_samples
            .get(k + 1)
            .copied()
            .unwrap_or(self.mixture[0].len());
        self.activation_samples[k]..end
    }

    /// `true` where source `k` is active, to the sample.
    pub fn activation_mask(&self, k: usize) -> Vec<bool> {
        let s = self.activation_samples[k];
        (0..self.mixture[0].len()).map(|l| l >= s).collect()
    }

    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        write_wav(
            path,
            &self.mixture,
            self.config.sample_rate(),
            WavFormat::Float32,
        )?;
        Ok(())
    }
}

/// Per-bin reference RTF of source `k`: the reference-normalized principal
/// eigenvector of the source's sample covariance over its segment, with the
/// covariance trace as metric weight. Bins without energy yield `None`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub rtfs: Vec<Option<CVector>>,
    pub weights: Vec<f64>,
}

pub fn ground_truth_rtf(scene: &Scene, k: usize) -> Result<GroundTruth> {
    let frames = scene.source_frames(k)?;
    let seg = scene.segment_frames(k);
    ground_truth_from_frames(&frames[seg], scene.config.reference)
}

pub fn ground_truth_from_frames(frames: &[SpectralFrame], reference: usize) -> Result<GroundTruth> {
    let covs = crate::covariance::sample_covariance(frames)?;
    let (rtfs, weights) = covs
        .par_iter()
        .map(|r| {
            let w = crate::linalg::trace_re(r);
            if !(w > 0.0) {
                return Ok((None, 0.0));
            }
            let v = hermitian_eig(r, true)?.principal();
            Ok(match normalize_reference(&v, reference) {
                Ok(g) => (Some(g), w),
                Err(_) => (None, 0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(GroundTruth { rtfs, weights })
}

/// Serialized scene description: enough to regenerate the scene exactly,
/// plus the per-source per-bin reference RTFs as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub sample_rate: u32,
    pub activation_times_s: Vec<f64>,
    pub activation_samples: Vec<usize>,
    pub activation_frames: Vec<usize>,
    pub reference: usize,
    /// `[k][f][m] = [re, im]`; empty for bins without a defined RTF.
    pub rtfs: Vec<Vec<Vec<[f64; 2]>>>,
}

impl TruthFile {
    pub fn from_scene(scene: &Scene) -> Result<Self> {
        let mut rtfs = Vec::with_capacity(scene.config.sources);
        for k in 0..scene.config.sources {
            let per_bin: Vec<Option<CVector>> = match scene.drawn_rtfs(k) {
                Some(g) => g.iter().cloned().map(Some).collect(),
                None => ground_truth_rtf(scene, k)?.rtfs,
            };
            rtfs.push(
                per_bin
                    .into_iter()
                    .map(|g| g.map_or_else(Vec::new, |g| g.iter().map(|z| [z.re, z.im]).collect()))
                    .collect(),
            );
        }
        Ok(Self {
            config: scene.config.clone(),
            seed: scene.config.seed,
            sample_rate: scene.config.sample_rate(),
            activation_times_s: scene.config.activations_s.clone(),
            activation_samples: scene.activation_samples.clone(),
            activation_frames: scene.activation_frames.clone(),
            reference: scene.config.reference,
            rtfs,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }

    /// Regenerate the scene this file describes.
    pub fn regenerate(&self) -> Result<Scene> {
        let mut cfg = self.config.clone();
        cfg.seed = self.seed;
        generate(&cfg)
    }
}
