//! Per-frequency covariance estimation and the two noise-handling transforms
//! (subtraction and whitening).

use crate::error::{Error, Result};
use crate::linalg::{identity, symmetrize, CMatrix, CholeskyFactor, C64};
use crate::stft::SpectralFrame;

/// Diagonal loading (relative to `tr(R)/M`) applied when a noise covariance
/// fails to factorize.
pub const DEFAULT_LOADING: f64 = 1e-10;

/// `α = exp(−t_fs / t_α)`.
pub fn forgetting_factor(t_fs: f64, t_alpha: f64) -> Result<f64> {
    if !(t_fs > 0.0) || !(t_alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time constants must be positive (t_fs = {t_fs}, t_alpha = {t_alpha})"
        )));
    }
    Ok((-t_fs / t_alpha).exp())
}

/// Recursively smoothed covariance matrices, one per frequency bin.
#[derive(Debug, Clone)]
pub struct CovarianceField {
    pub alpha: f64,
    matrices: Vec<CMatrix>,
    frames_seen: usize,
}

impl CovarianceField {
    pub fn new(alpha: f64, bins: usize, channels: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor {alpha} outside [0, 1]"
            )));
        }
        Ok(Self {
            alpha,
            matrices: vec![CMatrix::zeros(channels, channels); bins],
            frames_seen: 0,
        })
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn num_bins(&self) -> usize {
        self.matrices.len()
    }

    pub fn bin(&self, f: usize) -> &CMatrix {
        &self.matrices[f]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// `R ← α R + (1 − α) y yᴴ`; the first frame initializes `R = y yᴴ`.
    pub fn update(&mut self, frame: &SpectralFrame) -> Result<()> {
        let m = self.matrices.first().map_or(0, CMatrix::nrows);
        if frame.num_bins() != self.matrices.len() || frame.channels() != m {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}, covariance field is {}x{}",
                frame.num_bins(),
                frame.channels(),
                self.matrices.len(),
                m
            )));
        }
        let (keep, add) = if self.frames_seen == 0 {
            (0.0, 1.0)
        } else {
            (self.alpha, 1.0 - self.alpha)
        };
        for (f, r) in self.matrices.iter_mut().enumerate() {
            rank_one_update(r, frame.bin(f), keep, add);
        }
        self.frames_seen += 1;
        Ok(())
    }
}

/// Functional form of [`CovarianceField::update`].
pub fn recursive_update(
    mut state: CovarianceField,
    frame: &SpectralFrame,
) -> Result<CovarianceField> {
    state.update(frame)?;
    Ok(state)
}

/// `R ← keep·R + add·y yᴴ`, written entrywise so the result is exactly
/// Hermitian.
fn rank_one_update(r: &mut CMatrix, y: &[C64], keep: f64, add: f64) {
    let m = y.len();
    for j in 0..m {
        let yj = y[j].conj() * add;
        for i in j..m {
            let v = r[(i, j)] * keep + y[i] * yj;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
        r[(j, j)].im = 0.0;
    }
}

/// Per-bin sample covariance `(1/|T|) Σ_t y_t y_tᴴ` over a segment.
pub fn sample_covariance(frames: &[SpectralFrame]) -> Result<Vec<CMatrix>> {
    let first = frames.first().ok_or(Error::EmptySegment)?;
    let bins = first.num_bins();
    let m = first.channels();
    let mut out = vec![CMatrix::zeros(m, m); bins];
    for fr in frames {
        if fr.num_bins() != bins || fr.channels() != m {
            return Err(Error::DimensionMismatch(
                "frames in segment differ in shape".into(),
            ));
        }
        for (f, r) in out.iter_mut().enumerate() {
            rank_one_update(r, fr.bin(f), 1.0, 1.0);
        }
    }
    let scale = 1.0 / frames.len() as f64;
    for r in &mut out {
        *r *= C64::new(scale, 0.0);
    }
    Ok(out)
}

/// `R_x⁽ˢ⁾ = R_y − R_n`. May be indefinite.
pub fn noise_subtract(r_y: &CMatrix, r_n: &CMatrix) -> Result<CMatrix> {
    if r_y.shape() != r_n.shape() {
        return Err(Error::DimensionMismatch(format!(
            "R_y is {:?}, R_n is {:?}",
            r_y.shape(),
            r_n.shape()
        )));
    }
    Ok(symmetrize(&(r_y - r_n)))
}

/// Noise covariance of one frequency bin with its cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct BinNoise {
    pub covariance: CMatrix,
    pub factor: CholeskyFactor,
}

impl BinNoise {
    pub fn new(covariance: CMatrix, loading: f64) -> Result<Self> {
        let factor = CholeskyFactor::new(&covariance, loading)?;
        Ok(Self {
            covariance: symmetrize(&covariance),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// `R_n^{H/2} (X + I) R_n^{1/2}`, the inverse of [`noise_whiten`].
    pub fn unwhiten(&self, x: &CMatrix) -> CMatrix {
        let l = self.factor.lower();
        let inner = x + identity(self.dim());
        symmetrize(&(l * inner * l.adjoint()))
    }
}

/// Time-invariant noise model: one [`BinNoise`] per frequency bin.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub bins: Vec<BinNoise>,
}

impl NoiseModel {
    pub fn new(covariances: Vec<CMatrix>, loading: f64) -> Result<Self> {
        let bins = covariances
            .into_iter()
            .map(|r| BinNoise::new(r, loading))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bins })
    }

    /// Noise model from the sample covariance of a noise-only segment. Bins
    /// whose covariance is singular even after relative loading (e.g. silent
    /// input) receive an absolute floor of `floor · I`.
    pub fn from_segment(frames: &[SpectralFrame], floor: f64) -> Result<Self> {
        let covs = sample_covariance(frames)?;
        let bins = covs
            .into_iter()
            .map(|r| match BinNoise::new(r.clone(), DEFAULT_LOADING) {
                Ok(b) => Ok(b),
                Err(_) if floor > 0.0 => {
                    let m = r.nrows();
                    BinNoise::new(r + identity(m).scale(floor), DEFAULT_LOADING)
                }
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bins })
    }

    pub fn bin(&self, f: usize) -> &BinNoise {
        &self.bins[f]
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }
}

/// `R_x⁽ʷ⁾ = R_n^{−H/2} R_y R_n^{−1/2} − I`.
pub fn noise_whiten(r_y: &CMatrix, noise: &BinNoise) -> Result<CMatrix> {
    if r_y.shape() != noise.covariance.shape() {
        return Err(Error::DimensionMismatch(format!(
            "R_y is {:?}, R_n is {:?}",
            r_y.shape(),
            noise.covariance.shape()
        )));
    }
    Ok(noise.factor.whiten_hermitian(r_y) - identity(noise.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, outer, trace_re, CVector};
    use crate::random::{complex_gaussian, random_hpd, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(index: usize, bins: &[CVector]) -> SpectralFrame {
        SpectralFrame::from_bins(index, bins)
    }

    #[test]
    fn forgetting_factor_values() {
        // exp(−0.05) and exp(−1), evaluated independently
        assert!((forgetting_factor(0.05, 1.0).unwrap() - 0.951_229_424_500_714).abs() < 1e-15);
        assert!((forgetting_factor(2.0, 2.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(forgetting_factor(0.05, 1e12).unwrap() > 1.0 - 1e-12);
        assert!(forgetting_factor(0.0, 1.0).is_err());
        assert!(forgetting_factor(0.05, -1.0).is_err());
    }

    #[test]
    fn update_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y0 = random_vector(3, &mut rng);
        let y1 = random_vector(3, &mut rng);
        let mut zero = CovarianceField::new(0.0, 1, 3).unwrap();
        zero.update(&frame(0, &[y0.clone()])).unwrap();
        zero.update(&frame(1, &[y1.clone()])).unwrap();
        assert!((zero.bin(0) - outer(&y1, &y1)).norm() < 1e-14);

        let mut frozen = CovarianceField::new(1.0, 1, 3).unwrap();
        frozen.update(&frame(0, &[y0.clone()])).unwrap();
        frozen.update(&frame(1, &[y1])).unwrap();
        assert!((frozen.bin(0) - outer(&y0, &y0)).norm() < 1e-14);
    }

    #[test]
    fn geometric_convergence() {
        // R_0 = y0 y0ᴴ, then constant y: R_t − yyᴴ = αᵗ (R_0 − yyᴴ)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y0 = random_vector(4, &mut rng);
        let y = random_vector(4, &mut rng);
        let alpha = 0.9;
        let mut field = CovarianceField::new(alpha, 1, 4).unwrap();
        field.update(&frame(0, &[y0.clone()])).unwrap();
        let target = outer(&y, &y);
        let initial = outer(&y0, &y0) - &target;
        for t in 1..=50 {
            field = recursive_update(field, &frame(t, &[y.clone()])).unwrap();
            let expect = &initial * C64::new(alpha.powi(t as i32), 0.0);
            assert!((field.bin(0) - &target - expect).norm() < 1e-12 * target.norm());
        }
    }

    #[test]
    fn update_preserves_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut field = CovarianceField::new(0.95, 2, 5).unwrap();
        for t in 0..200 {
            let bins = vec![random_vector(5, &mut rng), random_vector(5, &mut rng)];
            field.update(&frame(t, &bins)).unwrap();
        }
        for r in field.matrices() {
            assert_eq!(crate::linalg::hermitian_asymmetry(r), 0.0);
            let e = hermitian_eig(r, true).unwrap();
            assert!(*e.values.last().unwrap() >= -1e-10 * trace_re(r));
        }
        let bad = frame(0, &[random_vector(4, &mut rng)]);
        assert!(field.update(&bad).is_err());
    }

    #[test]
    fn sample_covariance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_vector(3, &mut rng);
        let one = sample_covariance(&[frame(0, &[y.clone()])]).unwrap();
        assert!((&one[0] - outer(&y, &y)).norm() < 1e-14);
        let two = sample_covariance(&[frame(0, &[y.clone()]), frame(1, &[y.clone()])]).unwrap();
        assert!((&two[0] - &one[0]).norm() < 1e-14);
        assert!(matches!(sample_covariance(&[]), Err(Error::EmptySegment)));
    }

    #[test]
    fn sample_covariance_law_of_large_numbers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 4;
        let frames: Vec<SpectralFrame> = (0..10_000)
            .map(|t| frame(t, &[CVector::from_fn(m, |_, _| complex_gaussian(&mut rng))]))
            .collect();
        let r = sample_covariance(&frames).unwrap();
        let err = (&r[0] - identity(m)).norm() / identity(m).norm();
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn subtraction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r_n = random_hpd(4, &mut rng);
        assert!(noise_subtract(&r_n, &r_n).unwrap().norm() == 0.0);
        let g = random_vector(4, &mut rng);
        let rx = outer(&g, &g) * C64::new(2.5, 0.0);
        let r_y = &r_n + &rx;
        assert!((noise_subtract(&r_y, &r_n).unwrap() - &rx).norm() < 1e-13 * r_y.norm());
        let r_y = random_hpd(4, &mut rng);
        let d = noise_subtract(&r_y, &r_n).unwrap();
        assert!((d + &r_n - &r_y).norm() < 1e-14 * r_y.norm());
        assert!(noise_subtract(&identity(3), &identity(4)).is_err());
    }

    #[test]
    fn whitening_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ident = BinNoise::new(identity(3), DEFAULT_LOADING).unwrap();
        let r_y = random_hpd(3, &mut rng);
        assert!((noise_whiten(&r_y, &ident).unwrap() - (&r_y - identity(3))).norm() < 1e-13);

        let r_n = random_hpd(5, &mut rng);
        let noise = BinNoise::new(r_n.clone(), DEFAULT_LOADING).unwrap();
        assert!(noise_whiten(&r_n, &noise).unwrap().norm() < 1e-10);

        // R_y = R_n + g gᴴ: whitened matrix is (L⁻¹g)(L⁻¹g)ᴴ with trace ‖L⁻¹ g‖²
        let g = random_vector(5, &mut rng);
        let r_y = &r_n + outer(&g, &g);
        let w = noise_whiten(&r_y, &noise).unwrap();
        let lower = noise.factor.lower().clone();
        let gw = lower.solve_lower_triangular(&g).unwrap();
        assert!((trace_re(&w) - gw.norm_squared()).abs() < 1e-10 * gw.norm_squared());
        let e = hermitian_eig(&w, true).unwrap();
        assert!(e.values[1].abs() < 1e-10 * e.values[0]);

        // un-whitening recovers R_y
        assert!((noise.unwhiten(&w) - &r_y).norm() < 1e-10 * r_y.norm());
    }

    #[test]
    fn noise_model_floor_for_silence() {
        let silent = vec![frame(0, &[CVector::zeros(3)]); 4];
        assert!(NoiseModel::from_segment(&silent, 0.0).is_err());
        let model = NoiseModel::from_segment(&silent, 1e-12).unwrap();
        assert_eq!(model.num_bins(), 1);
    }
}
