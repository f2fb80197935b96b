//! Online source counting from the whitened generalized magnitude-squared
//! coherence (GMSC) of the microphone signals.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{forgetting_factor, CovarianceField, DEFAULT_LOADING};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, trace_re, CMatrix, CVector, CholeskyFactor, C64};
use crate::random::{complex_gaussian, gaussian, rng_for};
use crate::stft::{SpectralFrame, Stft, StftConfig};

/// `(λ_max{D^{−1/2} R D^{−1/2}} − 1) / (M − 1)`, clipped to `[0, 1]`.
pub fn gmsc(r: &CMatrix) -> Result<f64> {
    let m = r.nrows();
    if m < 2 || r.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "GMSC needs a square matrix with M ≥ 2, got {:?}",
            r.shape()
        )));
    }
    let mut scale = Vec::with_capacity(m);
    for i in 0..m {
        let d = r[(i, i)].re;
        if !(d > 0.0) {
            return Err(Error::Degenerate(format!(
                "non-positive power on channel {i}"
            )));
        }
        scale.push(1.0 / d.sqrt());
    }
    coherence_gmsc(r, &scale)
}

/// GMSC where channels with (numerically) no power are left out of the
/// coherence matrix instead of being rejected.
fn gmsc_tolerant(r: &CMatrix) -> Result<f64> {
    let m = r.nrows();
    let dmax = (0..m).map(|i| r[(i, i)].re).fold(0.0, f64::max);
    if !(dmax > 0.0) {
        return Ok(0.0);
    }
    let scale: Vec<f64> = (0..m)
        .map(|i| {
            let d = r[(i, i)].re;
            if d > 1e-12 * dmax {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    coherence_gmsc(r, &scale)
}

fn coherence_gmsc(r: &CMatrix, scale: &[f64]) -> Result<f64> {
    let m = r.nrows();
    let coh = CMatrix::from_fn(m, m, |i, j| r[(i, j)] * (scale[i] * scale[j]));
    let lmax = hermitian_eig(&coh, true)?.values[0];
    Ok(((lmax - 1.0) / (m - 1) as f64).clamp(0.0, 1.0))
}

/// Whitened covariance `L_v⁻¹ R_y L_v⁻ᴴ` for a factored `R_v = L_v L_vᴴ`.
fn whitened(r_y: &CMatrix, r_v: &CholeskyFactor) -> CMatrix {
    r_v.whiten_hermitian(r_y)
}

/// Trace-weighted broadband GMSC of `R_v^{−H/2} R_y R_v^{−1/2}` over bins,
/// with the whitening factors supplied pre-factored.
pub fn whitened_gmsc_factored(r_y: &[CMatrix], r_v: &[CholeskyFactor]) -> Result<f64> {
    if r_y.len() != r_v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} R_y bins, {} R_v bins",
            r_y.len(),
            r_v.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (ry, lv) in r_y.iter().zip(r_v) {
        let rw = whitened(ry, lv);
        let w = trace_re(&rw);
        if w > 0.0 {
            num += w * gmsc_tolerant(&rw)?;
            den += w;
        }
    }
    Ok(if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    })
}

/// Trace-weighted broadband GMSC after whitening each bin by `R_v`.
pub fn whitened_gmsc_broadband(r_y: &[CMatrix], r_v: &[CMatrix]) -> Result<f64> {
    let factors = r_v
        .iter()
        .map(|r| CholeskyFactor::new(r, DEFAULT_LOADING))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    whitened_gmsc_factored(r_y, &factors)
}

/// Seed of the white-noise simulation behind [`null_floor`].
const NULL_SEED: u64 = 0x6e75_6c6c;
/// Independent realizations pooled by [`null_floor`].
const NULL_REALIZATIONS: usize = 96;
/// Length of the simulated trajectory in whitening lags.
const NULL_SPAN_LAGS: usize = 8;

/// Expected broadband whitened GMSC per frame index when the input is
/// stationary noise only.
///
/// `R_y` and the lagged `R_v` are finite-memory estimates, so `R_v⁻¹R_y`
/// scatters around `I` and the GMSC is biased upward. Whitening makes the
/// statistic independent of the noise covariance (`chol(L S Lᴴ) = L chol(S)`
/// for lower-triangular `L`), so a simulation with spatially white noise gives
/// the trajectory for every stationary noise field. It depends only on the
/// channel count, the covariance forgetting factor, the lag and the frame
/// overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct NullFloor {
    pub trajectory: Vec<f64>,
    pub steady: f64,
}

impl NullFloor {
    pub fn at(&self, frame: usize) -> f64 {
        self.trajectory.get(frame).copied().unwrap_or(self.steady)
    }
}

type NullKey = (usize, u64, usize, usize);

/// Simulated (and cached) null trajectory for `channels` microphones, an
/// `R_y` forgetting factor `alpha`, whitening lag `lag` and `overlap` frames
/// per window length (1: statistically independent frames).
pub fn null_floor(
    channels: usize,
    alpha: f64,
    lag: usize,
    overlap: usize,
) -> Result<Arc<NullFloor>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<NullFloor>>>> = OnceLock::new();
    let key = (channels, alpha.to_bits(), lag, overlap);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("null floor cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let floor = Arc::new(simulate_null(channels, alpha, lag, overlap)?);
    cache
        .lock()
        .expect("null floor cache poisoned")
        .insert(key, floor.clone());
    Ok(floor)
}

fn simulate_null(channels: usize, alpha: f64, lag: usize, overlap: usize) -> Result<NullFloor> {
    if channels < 2 || lag == 0 || overlap == 0 {
        return Err(Error::InvalidParameter(format!(
            "null floor for M = {channels}, lag {lag}"
        )));
    }
    let frames = NULL_SPAN_LAGS * lag;
    // 17-bin STFT of white noise; DC and Nyquist bins are real-valued and left out
    let stft = if overlap > 1 {
        let hop = 8;
        Some(Stft::new(StftConfig {
            frame_len: hop * overlap,
            hop,
            sample_rate: 16_000,
        })?)
    } else {
        None
    };
    let bins = 15;
    let sums = (0..NULL_REALIZATIONS)
        .into_par_iter()
        .map(|run| -> Result<Vec<f64>> {
            let mut rng = rng_for(NULL_SEED, &[channels as u64, overlap as u64, run as u64]);
            let spectra: Vec<SpectralFrame> = match &stft {
                Some(stft) => {
                    let len = stft.config().signal_len(frames);
                    let signal: Vec<Vec<f64>> = (0..channels)
                        .map(|_| (0..len).map(|_| gaussian(&mut rng)).collect())
                        .collect();
                    stft.analyze(&signal)?
                        .into_iter()
                        .map(|fr| {
                            let inner: Vec<CVector> =
                                (1..=bins).map(|f| fr.bin_vector(f)).collect();
                            SpectralFrame::from_bins(fr.index, &inner)
                        })
                        .collect()
                }
                None => (0..frames)
                    .map(|t| {
                        let b: Vec<CVector> = (0..bins)
                            .map(|_| CVector::from_fn(channels, |_, _| complex_gaussian(&mut rng)))
                            .collect();
                        SpectralFrame::from_bins(t, &b)
                    })
                    .collect(),
            };
            let mut cov = CovarianceField::new(alpha, bins, channels)?;
            let mut ring: VecDeque<Vec<CholeskyFactor>> = VecDeque::with_capacity(lag + 1);
            let mut out = Vec::with_capacity(frames);
            for fr in &spectra {
                cov.update(fr)?;
                out.push(lagged_gmsc(&mut ring, lag, cov.matrices())?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(vec![0.0; frames], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        });
    let trajectory: Vec<f64> = sums.iter().map(|s| s / NULL_REALIZATIONS as f64).collect();
    let tail = &trajectory[frames - 2 * lag..];
    let steady = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(NullFloor { trajectory, steady })
}

/// Push the factored snapshot and return its GMSC whitened by the snapshot
/// `lag` frames earlier (the earliest one during warm-up).
fn lagged_gmsc(
    ring: &mut VecDeque<Vec<CholeskyFactor>>,
    lag: usize,
    snapshot: &[CMatrix],
) -> Result<f64> {
    if let Some(prev) = ring.front() {
        if prev.len() != snapshot.len() {
            return Err(Error::DimensionMismatch(
                "snapshot bin count changed".into(),
            ));
        }
    }
    let factors = snapshot
        .iter()
        .map(regularized_factor)
        .collect::<Result<Vec<_>>>()?;
    ring.push_back(factors);
    if ring.len() > lag + 1 {
        ring.pop_front();
    }
    whitened_gmsc_factored(snapshot, &ring[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterParams {
    /// Frame shift in seconds.
    pub t_fs: f64,
    /// Smoothing time constant of the broadband GMSC.
    pub t_gamma: f64,
    /// Minimal time between two activations; sets the whitening lag.
    pub t_sad: f64,
    pub threshold: f64,
    /// Time constant of the `R_y` recursion feeding the counter.
    pub t_alpha: f64,
    /// Window length over hop of the STFT; 1 when frames are independent.
    pub overlap: usize,
    /// Subtract the noise-only expectation from the raw GMSC.
    pub null_compensation: bool,
    /// Hold-off after a detection, in whitening lags.
    pub holdoff_lags: usize,
}

impl Default for CounterParams {
    fn default() -> Self {
        Self {
            t_fs: 0.05,
            t_gamma: 1.0,
            t_sad: 1.0,
            threshold: 0.2,
            t_alpha: 1.0,
            overlap: 4,
            null_compensation: true,
            holdoff_lags: 2,
        }
    }
}

impl CounterParams {
    /// Whitening lag `t_v = round(t_sad / t_fs)` in frames.
    pub fn lag_frames(&self) -> usize {
        ((self.t_sad / self.t_fs).round() as usize).max(1)
    }

    /// The literal detector: raw GMSC and a hold-off of one lag.
    pub fn uncompensated() -> Self {
        Self {
            null_compensation: false,
            holdoff_lags: 1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationEvent {
    pub frame: usize,
    pub time_s: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterOutput {
    /// Broadband whitened GMSC before compensation.
    pub raw: f64,
    /// Statistic fed to the smoother.
    pub gamma: f64,
    pub smoothed: f64,
    pub event: Option<ActivationEvent>,
}

/// Frame-by-frame activation detector.
#[derive(Debug, Clone)]
pub struct CounterState {
    pub params: CounterParams,
    beta: f64,
    alpha: f64,
    lag: usize,
    ring: VecDeque<Vec<CholeskyFactor>>,
    floor: Option<Arc<NullFloor>>,
    smoothed: f64,
    count: usize,
    holdoff: usize,
    frame: usize,
    events: Vec<ActivationEvent>,
}

impl CounterState {
    pub fn new(params: CounterParams) -> Result<Self> {
        if !(params.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} must be positive",
                params.threshold
            )));
        }
        if params.overlap == 0 {
            return Err(Error::InvalidParameter("overlap must be positive".into()));
        }
        let beta = forgetting_factor(params.t_fs, params.t_gamma)?;
        let alpha = forgetting_factor(params.t_fs, params.t_alpha)?;
        forgetting_factor(params.t_fs, params.t_sad)?;
        let lag = params.lag_frames();
        // the lagged reference is the rank-one first snapshot for one lag
        let holdoff = if params.null_compensation { lag } else { 0 };
        Ok(Self {
            params,
            beta,
            alpha,
            lag,
            ring: VecDeque::with_capacity(lag + 1),
            floor: None,
            smoothed: 0.0,
            count: 0,
            holdoff,
            frame: 0,
            events: Vec::new(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn holdoff_frames(&self) -> usize {
        self.params.holdoff_lags * self.lag
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn smoothed(&self) -> f64 {
        self.smoothed
    }

    pub fn events(&self) -> &[ActivationEvent] {
        &self.events
    }

    /// Process the covariance snapshot of the next frame.
    ///
    /// With compensation the statistic is `(γ − γ₀(t)) / (1 − γ₀(t))`
    /// clipped at zero, `γ₀` being the [`null_floor`] trajectory. An
    /// activation fires when the smoothed value exceeds the threshold; the
    /// smoothed value is then held at zero for the hold-off. With
    /// compensation the counter also starts in a hold-off.
    pub fn step(&mut self, snapshot: &[CMatrix]) -> Result<CounterOutput> {
        let raw = lagged_gmsc(&mut self.ring, self.lag, snapshot)?;
        let frame = self.frame;
        self.frame += 1;
        let gamma = if self.params.null_compensation {
            let m = snapshot.first().map_or(0, |r| r.nrows());
            if self.floor.is_none() {
                self.floor = Some(null_floor(m, self.alpha, self.lag, self.params.overlap)?);
            }
            let g0 = self.floor.as_ref().map_or(0.0, |f| f.at(frame));
            ((raw - g0) / (1.0 - g0)).clamp(0.0, 1.0)
        } else {
            raw
        };

        let mut event = None;
        if self.holdoff > 0 {
            self.holdoff -= 1;
            if self.params.null_compensation {
                self.smoothed = 0.0;
            } else {
                self.smoothed =
                    (self.beta * self.smoothed + (1.0 - self.beta) * gamma).clamp(0.0, 1.0);
            }
        } else {
            self.smoothed = (self.beta * self.smoothed + (1.0 - self.beta) * gamma).clamp(0.0, 1.0);
            if self.smoothed > self.params.threshold {
                self.count += 1;
                let e = ActivationEvent {
                    frame,
                    time_s: frame as f64 * self.params.t_fs,
                    count: self.count,
                };
                self.events.push(e);
                event = Some(e);
                self.smoothed = 0.0;
                self.holdoff = self.holdoff_frames();
            }
        }
        Ok(CounterOutput {
            raw,
            gamma,
            smoothed: self.smoothed,
            event,
        })
    }
}

/// Factor a snapshot, retrying with `1e-10·tr/M` loading and finally with an
/// absolute floor for all-zero input.
fn regularized_factor(r: &CMatrix) -> Result<CholeskyFactor> {
    match CholeskyFactor::new(r, DEFAULT_LOADING) {
        Ok(f) => Ok(f),
        Err(_) => {
            let m = r.nrows();
            let floor =
                (trace_re(r) / m.max(1) as f64).max(f64::MIN_POSITIVE.sqrt()) * DEFAULT_LOADING;
            Ok(CholeskyFactor::new(
                &(r + CMatrix::identity(m, m) * C64::new(floor, 0.0)),
                DEFAULT_LOADING,
            )?)
        }
    }
}

/// Functional form of [`CounterState::step`].
pub fn counter_step(
    mut state: CounterState,
    snapshot: &[CMatrix],
) -> Result<(CounterState, CounterOutput)> {
    let out = state.step(snapshot)?;
    Ok((state, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, outer};
    use crate::random::{random_hpd, random_vector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gmsc_examples() {
        assert!(gmsc(&identity(4)).unwrap().abs() < 1e-15);
        let ones = CMatrix::from_element(5, 5, C64::new(1.0, 0.0));
        assert!((gmsc(&ones).unwrap() - 1.0).abs() < 1e-12);

        let mut bad = identity(3);
        bad[(1, 1)] = C64::new(0.0, 0.0);
        assert!(gmsc(&bad).is_err());
    }

    #[test]
    fn gmsc_matches_explicit_coherence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let g = random_vector(4, &mut rng);
            let r = identity(4) + outer(&g, &g);
            // coherence entries r_ij / sqrt(r_ii r_jj), eigenvalues via SVD
            let coh = CMatrix::from_fn(4, 4, |i, j| {
                r[(i, j)] / (r[(i, i)].re * r[(j, j)].re).sqrt()
            });
            let lmax = coh.singular_values().max();
            let want = (lmax - 1.0) / 3.0;
            assert!((gmsc(&r).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn broadband_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r_v: Vec<CMatrix> = (0..4).map(|_| random_hpd(3, &mut rng)).collect();
        assert!(whitened_gmsc_broadband(&r_v, &r_v).unwrap() < 1e-10);

        // one bin with a dominant rank-1 component approaches 1
        let g = random_vector(3, &mut rng);
        let r_y = vec![&r_v[0] + outer(&g, &g) * C64::new(1e8, 0.0)];
        let v = whitened_gmsc_broadband(&r_y, &r_v[..1]).unwrap();
        assert!(v > 1.0 - 1e-6, "{v}");

        // a zero-trace bin carries no weight
        let r_y = vec![
            &r_v[0] + outer(&g, &g) * C64::new(1e8, 0.0),
            CMatrix::zeros(3, 3),
        ];
        let w = whitened_gmsc_broadband(&r_y, &r_v[..2]).unwrap();
        assert!((w - v).abs() < 1e-12);
    }

    /// Spatially correlated noise plus an optional source through short
    /// random per-channel filters, analyzed with a 256/64 STFT.
    fn scene_frames(
        seed: u64,
        m: usize,
        frames: usize,
        onset: Option<(usize, f64)>,
    ) -> Vec<SpectralFrame> {
        let stft = Stft::new(StftConfig {
            frame_len: 256,
            hop: 64,
            sample_rate: 16_000,
        })
        .unwrap();
        let len = stft.config().signal_len(frames);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix = CMatrix::from_fn(m, m, |i, j| {
            C64::new(
                if i == j {
                    1.0
                } else {
                    0.4 * gaussian(&mut rng)
                },
                0.0,
            )
        });
        let white: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..len).map(|_| gaussian(&mut rng)).collect())
            .collect();
        let mut signal: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..len)
                    .map(|n| (0..m).map(|j| mix[(i, j)].re * white[j][n]).sum())
                    .collect()
            })
            .collect();
        let noise_power: f64 =
            signal.iter().flatten().map(|x| x * x).sum::<f64>() / (m * len) as f64;
        if let Some((t0, snr_db)) = onset {
            let s: Vec<f64> = (0..len).map(|_| gaussian(&mut rng)).collect();
            let taps: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..4).map(|_| gaussian(&mut rng)).collect())
                .collect();
            let start = t0 * stft.config().hop;
            let gain = (10f64.powf(snr_db / 10.0) * noise_power
                / taps.iter().flatten().map(|x| x * x).sum::<f64>()
                * m as f64)
                .sqrt();
            for (chan, h) in signal.iter_mut().zip(&taps) {
                for n in start..len {
                    let y: f64 = h
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| n >= start + k)
                        .map(|(k, hk)| hk * s[n - k])
                        .sum();
                    chan[n] += gain * y;
                }
            }
        }
        stft.analyze(&signal).unwrap()
    }

    fn run_counter(
        frames: &[SpectralFrame],
        params: CounterParams,
    ) -> (CounterState, Vec<CounterOutput>) {
        let alpha = forgetting_factor(params.t_fs, params.t_alpha).unwrap();
        let mut cov =
            CovarianceField::new(alpha, frames[0].num_bins(), frames[0].channels()).unwrap();
        let mut counter = CounterState::new(params).unwrap();
        let outs = frames
            .iter()
            .map(|fr| {
                cov.update(fr).unwrap();
                counter.step(cov.matrices()).unwrap()
            })
            .collect();
        (counter, outs)
    }

    #[test]
    fn noise_only_stays_low() {
        for seed in 0..3 {
            let frames = scene_frames(30 + seed, 4, 200, None);
            let (counter, outs) = run_counter(&frames, CounterParams::default());
            for (t, out) in outs.iter().enumerate() {
                assert!((0.0..=1.0).contains(&out.raw) && (0.0..=1.0).contains(&out.gamma));
                assert!(
                    out.smoothed < 0.05,
                    "seed {seed} frame {t}: {}",
                    out.smoothed
                );
            }
            assert_eq!(counter.count(), 0);
        }
    }

    #[test]
    fn raw_statistic_has_a_noise_floor() {
        let frames = scene_frames(33, 4, 200, None);
        let (_, outs) = run_counter(&frames, CounterParams::uncompensated());
        let tail = &outs[100..];
        let mean = tail.iter().map(|o| o.raw).sum::<f64>() / tail.len() as f64;
        let floor = null_floor(4, forgetting_factor(0.05, 1.0).unwrap(), 20, 4).unwrap();
        assert!(mean > 0.05);
        assert!(
            (mean - floor.steady).abs() < 0.35 * floor.steady,
            "{mean} vs {}",
            floor.steady
        );
    }

    #[test]
    fn uncompensated_detector_fires_on_noise() {
        // the floor sits above the default threshold
        let frames = scene_frames(34, 4, 200, None);
        let (counter, _) = run_counter(&frames, CounterParams::uncompensated());
        assert!(counter.count() > 0);
    }

    #[test]
    fn null_floor_shape() {
        let alpha = forgetting_factor(0.05, 1.0).unwrap();
        let f = null_floor(4, alpha, 20, 4).unwrap();
        assert_eq!(f.trajectory.len(), 160);
        assert!(f.trajectory.iter().all(|g| (0.0..1.0).contains(g)));
        // the warm-up transient decays towards the steady value
        assert!(f.at(30) > f.steady);
        assert_eq!(f.at(10_000), f.steady);
        // cached
        assert!(Arc::ptr_eq(&f, &null_floor(4, alpha, 20, 4).unwrap()));
        // overlapping frames carry fewer independent snapshots
        assert!(null_floor(4, alpha, 20, 1).unwrap().steady < f.steady);
    }

    #[test]
    fn detects_activation_quickly() {
        let onset = 80;
        for seed in 0..3 {
            let frames = scene_frames(40 + seed, 4, onset + 60, Some((onset, 10.0)));
            let (counter, _) = run_counter(&frames, CounterParams::default());
            let events = counter.events();
            assert_eq!(events.len(), 1, "seed {seed}: {events:?}");
            // the first frame touching the source is onset − overlap + 1
            let d = events[0].frame;
            assert!(
                d + 3 >= onset && d <= onset + 20,
                "seed {seed}: detected at {d}"
            );
        }
    }

    #[test]
    fn unreachable_threshold_never_fires() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = CounterParams {
            threshold: 1.0,
            ..CounterParams::default()
        };
        let mut counter = CounterState::new(params).unwrap();
        let g = random_vector(3, &mut rng);
        for t in 0..60 {
            let mut r = identity(3);
            if t > 10 {
                r += outer(&g, &g) * C64::new(1e3, 0.0);
            }
            assert!(counter.step(&[r]).unwrap().event.is_none());
        }
    }

    #[test]
    fn holdoff_and_reset() {
        let mut counter = CounterState::new(CounterParams {
            threshold: 0.01,
            ..CounterParams::default()
        })
        .unwrap();
        let lag = counter.lag();
        assert_eq!(lag, 20);
        let ones = CMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        let mut frames = Vec::new();
        for t in 0..200 {
            // alternate between incoherent and coherent content
            let r = if (t / 7) % 2 == 0 {
                identity(3)
            } else {
                identity(3) + &ones * C64::new(50.0, 0.0)
            };
            if let Some(e) = counter.step(&[r]).unwrap().event {
                assert_eq!(counter.smoothed(), 0.0);
                frames.push(e.frame);
            }
        }
        assert!(!frames.is_empty());
        assert!(frames.windows(2).all(|w| w[1] - w[0] > lag));
        let counts: Vec<usize> = counter.events().iter().map(|e| e.count).collect();
        assert!(counts.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn zero_snapshot_is_regularized() {
        let mut counter = CounterState::new(CounterParams::default()).unwrap();
        let out = counter.step(&[CMatrix::zeros(3, 3)]).unwrap();
        assert_eq!(out.gamma, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gmsc_in_unit_interval(seed in any::<u64>(), m in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_hpd(m, &mut rng);
            let v = gmsc(&r).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
