//! LCMV beamformer design and application.

use crate::error::{Error, Result};
use crate::linalg::{inverse_condition, CMatrix, CVector, CholeskyFactor, C64};
use crate::stft::SpectralFrame;

/// Largest accepted condition number of `Cᴴ R_n⁻¹ C`.
pub const MAX_CONSTRAINT_CONDITION: f64 = 1e12;

/// Amplitude factor for a suppression level in dB, `10^(dB/20)`.
pub fn delta_from_db(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// `w = R_n⁻¹ C (Cᴴ R_n⁻¹ C)⁻¹ δ⃗` with `δ⃗ = [1, δ, …, δ]ᵀ`. The first column
/// of `C` is the target; the remaining columns are suppressed to `δ`.
pub fn lcmv_weights(noise: &CholeskyFactor, c: &CMatrix, delta: f64) -> Result<CVector> {
    let m = noise.dim();
    let k = c.ncols();
    if c.nrows() != m || k == 0 || k > m {
        return Err(Error::DimensionMismatch(format!(
            "constraint matrix {}x{} for M = {m}",
            c.nrows(),
            k
        )));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "suppression factor {delta} outside [0, 1)"
        )));
    }
    let rinv_c = noise.solve(c);
    let gram = c.adjoint() * &rinv_c;
    if !(inverse_condition(&gram) * MAX_CONSTRAINT_CONDITION >= 1.0) {
        return Err(Error::Degenerate(
            "linearly dependent constraint vectors".into(),
        ));
    }
    let mut target = CVector::from_element(k, C64::new(delta, 0.0));
    target[0] = C64::new(1.0, 0.0);
    let coeff = gram
        .lu()
        .solve(&target)
        .ok_or_else(|| Error::Degenerate("singular constraint Gram matrix".into()))?;
    Ok(rinv_c * coeff)
}

/// Largest deviation `|w^H c_k − δ⃗_k|` over the constraints.
pub fn constraint_residual(w: &CVector, c: &CMatrix, delta: f64) -> f64 {
    c.column_iter()
        .enumerate()
        .map(|(k, col)| {
            let want = if k == 0 { 1.0 } else { delta };
            (w.dotc(&col) - C64::new(want, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// Per-bin LCMV weights for one reference channel.
#[derive(Debug, Clone)]
pub struct LcmvDesign {
    pub reference: usize,
    pub delta: f64,
    pub weights: Vec<CVector>,
}

impl LcmvDesign {
    /// Build a design from per-bin noise factors and per-bin RTF matrices
    /// whose first column is the target source. Columns are re-referenced to
    /// `reference` before solving.
    pub fn new(
        noise: &[&CholeskyFactor],
        rtfs: &[CMatrix],
        reference: usize,
        delta: f64,
    ) -> Result<Self> {
        if noise.len() != rtfs.len() {
            return Err(Error::DimensionMismatch(
                "noise and RTF bin counts differ".into(),
            ));
        }
        let weights = noise
            .iter()
            .zip(rtfs)
            .map(|(n, c)| lcmv_weights(n, &rereference(c, reference)?, delta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reference,
            delta,
            weights,
        })
    }

    /// Like [`LcmvDesign::new`], but bins without constraints or with a
    /// failing solve fall back to pass-through. Returns the design and the
    /// number of fallback bins.
    pub fn with_fallback(
        noise: &[&CholeskyFactor],
        rtfs: &[Option<CMatrix>],
        reference: usize,
        delta: f64,
    ) -> Result<(Self, usize)> {
        if noise.len() != rtfs.len() {
            return Err(Error::DimensionMismatch(
                "noise and RTF bin counts differ".into(),
            ));
        }
        let mut fallbacks = 0;
        let weights = noise
            .iter()
            .zip(rtfs)
            .map(|(n, c)| {
                let solved = c
                    .as_ref()
                    .map(|c| rereference(c, reference).and_then(|c| lcmv_weights(n, &c, delta)));
                match solved {
                    Some(Ok(w)) => w,
                    _ => {
                        fallbacks += 1;
                        crate::linalg::unit_vector(n.dim(), reference)
                    }
                }
            })
            .collect();
        Ok((
            Self {
                reference,
                delta,
                weights,
            },
            fallbacks,
        ))
    }

    /// Pass-through design `w = e_r` at every bin.
    pub fn passthrough(bins: usize, channels: usize, reference: usize) -> Self {
        Self {
            reference,
            delta: 1.0,
            weights: vec![crate::linalg::unit_vector(channels, reference); bins],
        }
    }
}

/// Scale every column so its entry at `reference` equals 1.
pub fn rereference(c: &CMatrix, reference: usize) -> Result<CMatrix> {
    let mut out = c.clone();
    for mut col in out.column_iter_mut() {
        let pivot = col[reference];
        if !(pivot.norm() > 1e-12 * col.norm()) {
            return Err(Error::Degenerate(format!(
                "RTF vanishes at reference channel {reference}"
            )));
        }
        col /= pivot;
    }
    Ok(out)
}

/// `z_t = w_fᴴ y_{t,f}` for every frame; output frames have one channel.
pub fn apply(weights: &[CVector], frames: &[SpectralFrame]) -> Result<Vec<SpectralFrame>> {
    frames
        .iter()
        .map(|fr| {
            if fr.num_bins() != weights.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} weight bins, frame has {}",
                    weights.len(),
                    fr.num_bins()
                )));
            }
            let mut out = SpectralFrame::zeros(fr.index, weights.len(), 1);
            for (f, w) in weights.iter().enumerate() {
                let y = fr.bin(f);
                if y.len() != w.len() {
                    return Err(Error::DimensionMismatch(
                        "weight length differs from M".into(),
                    ));
                }
                let z = w.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
                out.set(f, 0, z);
            }
            Ok(out)
        })
        .collect()
}
