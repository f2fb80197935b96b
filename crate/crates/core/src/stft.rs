//! Multichannel STFT analysis and overlap-add synthesis with a square-root
//! Hann window on both sides.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::linalg::{CVector, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StftError {
    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(String),
    #[error("signal has {len} samples, at least one frame of {frame_len} is required")]
    TooShort { len: usize, frame_len: usize },
    #[error("channels have unequal lengths")]
    RaggedChannels,
    #[error("frames do not match the configuration: {0}")]
    ConfigMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 3200,
            hop: 800,
            sample_rate: 16_000,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), StftError> {
        if self.frame_len == 0 || self.hop == 0 {
            return Err(StftError::InvalidConfig(
                "frame length and hop must be positive".into(),
            ));
        }
        if self.frame_len % 2 != 0 {
            return Err(StftError::InvalidConfig("frame length must be even".into()));
        }
        if self.frame_len % self.hop != 0 {
            return Err(StftError::InvalidConfig(format!(
                "hop {} does not divide frame length {}",
                self.hop, self.frame_len
            )));
        }
        if self.hop * 2 > self.frame_len {
            return Err(StftError::InvalidConfig(
                "square-root Hann overlap-add needs at least 50% overlap".into(),
            ));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Frame shift in seconds.
    pub fn frame_shift_secs(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    /// Number of samples produced by synthesizing `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.frame_len
        }
    }

    /// Periodic square-root Hann window.
    pub fn window(&self) -> Vec<f64> {
        let n = self.frame_len as f64;
        (0..self.frame_len)
            .map(|i| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos()).sqrt())
            .collect()
    }

    /// Sum of the squared window over all overlapping shifts. Constant across
    /// samples for the periodic square-root Hann window (2.0 at 75% overlap).
    pub fn overlap_gain(&self) -> f64 {
        let w = self.window();
        (0..self.frame_len)
            .step_by(self.hop)
            .map(|offset| w[offset] * w[offset])
            .sum()
    }
}

/// STFT coefficients of one time frame: `bins × channels` values, bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub index: usize,
    channels: usize,
    data: Vec<C64>,
}

impl SpectralFrame {
    pub fn zeros(index: usize, bins: usize, channels: usize) -> Self {
        Self {
            index,
            channels,
            data: vec![C64::new(0.0, 0.0); bins * channels],
        }
    }

    pub fn from_bins(index: usize, bins: &[CVector]) -> Self {
        let channels = bins.first().map_or(0, |b| b.len());
        let mut data = Vec::with_capacity(bins.len() * channels);
        for b in bins {
            assert_eq!(b.len(), channels, "inconsistent channel count across bins");
            data.extend(b.iter().copied());
        }
        Self {
            index,
            channels,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_bins(&self) -> usize {
        if self.channels == 0 {
            0
        } else {
            self.data.len() / self.channels
        }
    }

    /// `y_{t,f}` as a slice over microphones.
    pub fn bin(&self, f: usize) -> &[C64] {
        &self.data[f * self.channels..(f + 1) * self.channels]
    }

    pub fn bin_mut(&mut self, f: usize) -> &mut [C64] {
        &mut self.data[f * self.channels..(f + 1) * self.channels]
    }

    pub fn bin_vector(&self, f: usize) -> CVector {
        CVector::from_column_slice(self.bin(f))
    }

    pub fn get(&self, f: usize, m: usize) -> C64 {
        self.data[f * self.channels + m]
    }

    pub fn set(&mut self, f: usize, m: usize, value: C64) {
        self.data[f * self.channels + m] = value;
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    /// `self += other`, elementwise.
    pub fn accumulate(&mut self, other: &SpectralFrame) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Reusable forward/inverse FFT plans for a given configuration.
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    gain: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self, StftError> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            window: cfg.window(),
            gain: cfg.overlap_gain(),
            forward: planner.plan_fft_forward(cfg.frame_len),
            inverse: planner.plan_fft_inverse(cfg.frame_len),
            cfg,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// Windowed one-sided spectra of every full frame of every channel.
    pub fn analyze(&self, signal: &[Vec<f64>]) -> Result<Vec<SpectralFrame>, StftError> {
        let channels = signal.len();
        let len = signal.first().map_or(0, Vec::len);
        if signal.iter().any(|c| c.len() != len) {
            return Err(StftError::RaggedChannels);
        }
        if channels == 0 || len < self.cfg.frame_len {
            return Err(StftError::TooShort {
                len,
                frame_len: self.cfg.frame_len,
            });
        }
        let n_frames = self.cfg.num_frames(len);
        let bins = self.cfg.num_bins();
        let mut frames: Vec<SpectralFrame> = (0..n_frames)
            .map(|t| SpectralFrame::zeros(t, bins, channels))
            .collect();
        let mut buf = vec![C64::new(0.0, 0.0); self.cfg.frame_len];
        let mut scratch = vec![C64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for (m, chan) in signal.iter().enumerate() {
            for (t, frame) in frames.iter_mut().enumerate() {
                let start = t * self.cfg.hop;
                for (i, z) in buf.iter_mut().enumerate() {
                    *z = C64::new(chan[start + i] * self.window[i], 0.0);
                }
                self.forward.process_with_scratch(&mut buf, &mut scratch);
                for f in 0..bins {
                    frame.set(f, m, buf[f]);
                }
            }
        }
        Ok(frames)
    }

    /// Inverse FFT of each frame, synthesis windowing and overlap-add,
    /// normalized by the constant window-square overlap sum.
    pub fn synthesize(&self, frames: &[SpectralFrame]) -> Result<Vec<Vec<f64>>, StftError> {
        let bins = self.cfg.num_bins();
        let channels = frames.first().map_or(0, SpectralFrame::channels);
        for fr in frames {
            if fr.num_bins() != bins || fr.channels() != channels {
                return Err(StftError::ConfigMismatch(format!(
                    "frame {} has {} bins x {} channels, expected {} x {}",
                    fr.index,
                    fr.num_bins(),
                    fr.channels(),
                    bins,
                    channels
                )));
            }
        }
        let n = self.cfg.frame_len;
        let len = self.cfg.signal_len(frames.len());
        let mut out = vec![vec![0.0; len]; channels];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let norm = 1.0 / (n as f64 * self.gain);
        for (m, chan) in out.iter_mut().enumerate() {
            for (t, frame) in frames.iter().enumerate() {
                for f in 0..bins {
                    buf[f] = frame.get(f, m);
                }
                // one-sided spectrum of a real frame: DC and Nyquist are real
                buf[0].im = 0.0;
                buf[bins - 1].im = 0.0;
                for f in bins..n {
                    buf[f] = buf[n - f].conj();
                }
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                let start = t * self.cfg.hop;
                for i in 0..n {
                    chan[start + i] += buf[i].re * self.window[i] * norm;
                }
            }
        }
        Ok(out)
    }
}

/// Relative error `‖a − b‖² / ‖b‖²` in dB over `[skip, len − skip)`.
pub fn interior_error_db(a: &[Vec<f64>], b: &[Vec<f64>], skip: usize) -> f64 {
    let mut err = 0.0;
    let mut reference = 0.0;
    for (ca, cb) in a.iter().zip(b) {
        let len = ca.len().min(cb.len());
        if len <= 2 * skip {
            continue;
        }
        for i in skip..len - skip {
            err += (ca[i] - cb[i]).powi(2);
            reference += cb[i].powi(2);
        }
    }
    10.0 * (err / reference).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> StftConfig {
        StftConfig {
            frame_len: 64,
            hop: 16,
            sample_rate: 16_000,
        }
    }

    fn noise(channels: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..channels)
            .map(|_| (0..len).map(|_| gaussian(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn default_matches_evaluation_setup() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.num_bins(), 1601);
        assert!((cfg.frame_shift_secs() - 0.05).abs() < 1e-15);
        assert!((cfg.overlap_gain() - 2.0).abs() < 1e-12);
        // constant overlap-add of the squared window at every offset
        let w = cfg.window();
        for offset in 0..cfg.hop {
            let s: f64 = (offset..cfg.frame_len)
                .step_by(cfg.hop)
                .map(|i| w[i] * w[i])
                .sum();
            assert!((s - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_count_and_errors() {
        let cfg = small();
        let stft = Stft::new(cfg).unwrap();
        let frames = stft.analyze(&noise(2, 200, 1)).unwrap();
        assert_eq!(frames.len(), (200 - 64) / 16 + 1);
        assert!(matches!(
            stft.analyze(&noise(2, 10, 1)),
            Err(StftError::TooShort { .. })
        ));
        assert!(matches!(
            stft.analyze(&[vec![0.0; 100], vec![0.0; 99]]),
            Err(StftError::RaggedChannels)
        ));
        assert!(Stft::new(StftConfig {
            frame_len: 64,
            hop: 24,
            sample_rate: 16000
        })
        .is_err());
    }

    #[test]
    fn sinusoid_at_bin_frequency() {
        let cfg = small();
        let stft = Stft::new(cfg).unwrap();
        let k = 5.0;
        let sig: Vec<f64> = (0..256)
            .map(|n| (2.0 * std::f64::consts::PI * k * n as f64 / 64.0).cos())
            .collect();
        let frames = stft.analyze(&[sig]).unwrap();
        for fr in &frames {
            let total: f64 = (0..cfg.num_bins()).map(|f| fr.get(f, 0).norm_sqr()).sum();
            // the sqrt-Hann main lobe is 3 bins wide with slow sidelobe decay
            let near: f64 = (3..=7).map(|f| fr.get(f, 0).norm_sqr()).sum();
            assert!(near / total >= 0.99, "ratio {}", near / total);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let stft = Stft::new(small()).unwrap();
        let frames = stft.analyze(&vec![vec![0.0; 128]; 3]).unwrap();
        assert!(frames
            .iter()
            .all(|f| (0..33).all(|b| f.bin(b).iter().all(|z| z.norm() == 0.0))));
        let back = stft.synthesize(&frames).unwrap();
        assert!(back.iter().flatten().all(|&x| x == 0.0));
    }

    /// Parseval: Σ_f c_f |X_f|² = N Σ_n |w_n x_n|² with c = 1 at DC/Nyquist, 2 otherwise.
    #[test]
    fn parseval_with_window_gain() {
        let cfg = small();
        let stft = Stft::new(cfg).unwrap();
        let sig = noise(1, 64, 4);
        let frames = stft.analyze(&sig).unwrap();
        let w = cfg.window();
        let time: f64 = sig[0].iter().zip(&w).map(|(x, w)| (x * w).powi(2)).sum();
        let bins = cfg.num_bins();
        let spec: f64 = (0..bins)
            .map(|f| {
                let c = if f == 0 || f == bins - 1 { 1.0 } else { 2.0 };
                c * frames[0].get(f, 0).norm_sqr()
            })
            .sum();
        assert!((spec / (64.0 * time) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_interior() {
        let cfg = small();
        let stft = Stft::new(cfg).unwrap();
        let sig = noise(3, 64 + 16 * 40, 7);
        let back = stft.synthesize(&stft.analyze(&sig).unwrap()).unwrap();
        assert!(interior_error_db(&back, &sig, cfg.frame_len) < -200.0);
    }

    #[test]
    fn single_frame_overlap_add() {
        // an impulse inside one frame comes back as w² · x / gain at its position
        let cfg = small();
        let stft = Stft::new(cfg).unwrap();
        let mut x = vec![0.0; 64];
        x[20] = 1.0;
        let frames = stft.analyze(&[x]).unwrap();
        assert_eq!(frames.len(), 1);
        let back = stft.synthesize(&frames).unwrap();
        let w = cfg.window();
        for (i, &v) in back[0].iter().enumerate() {
            let expect = if i == 20 {
                w[20] * w[20] / cfg.overlap_gain()
            } else {
                0.0
            };
            assert!((v - expect).abs() < 1e-14, "sample {i}: {v} vs {expect}");
        }
    }

    #[test]
    fn analysis_is_linear() {
        let stft = Stft::new(small()).unwrap();
        let x = noise(2, 160, 1);
        let y = noise(2, 160, 2);
        let (a, b) = (0.7, -2.5);
        let mix: Vec<Vec<f64>> = x
            .iter()
            .zip(&y)
            .map(|(cx, cy)| cx.iter().zip(cy).map(|(u, v)| a * u + b * v).collect())
            .collect();
        let fx = stft.analyze(&x).unwrap();
        let fy = stft.analyze(&y).unwrap();
        let fm = stft.analyze(&mix).unwrap();
        for t in 0..fm.len() {
            for f in 0..33 {
                for m in 0..2 {
                    let lin = fx[t].get(f, m) * a + fy[t].get(f, m) * b;
                    assert!((fm[t].get(f, m) - lin).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mismatched_frames_rejected() {
        let stft = Stft::new(small()).unwrap();
        let bad = vec![SpectralFrame::zeros(0, 10, 2)];
        assert!(matches!(
            stft.synthesize(&bad),
            Err(StftError::ConfigMismatch(_))
        ));
    }
}
