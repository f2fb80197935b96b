//! RTF estimators: first-source covariance whitening, the blind oblique
//! projection (BOP) cost and gradients, its closed-form minimizer, and the
//! six-variant dispatcher.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariance::{noise_subtract, noise_whiten, BinNoise};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig, identity, inverse_condition, orth_complement, CMatrix, CVector, C64,
};
use crate::projections::{proj_complement, proj_oblique};
use crate::random::{complex_gaussian, rng_for};

/// Largest accepted condition number of `[G_K̄ | G_a]` for random additional
/// vectors.
pub const MAX_STACK_CONDITION: f64 = 1e8;
/// Number of random re-draws before giving up.
pub const REDRAW_BUDGET: usize = 10;
/// Minimum singular-value ratio of the stacked RTF matrix.
pub const STACK_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdditionalVectors {
    Random,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseHandling {
    None,
    Subtraction,
    Whitening,
}

/// One of BOP, BOP-S, BOP-W, BOPO, BOPO-S, BOPO-W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EstimatorVariant {
    pub additional: AdditionalVectors,
    pub noise: NoiseHandling,
}

impl EstimatorVariant {
    pub const ALL: [EstimatorVariant; 6] = [
        Self::new(AdditionalVectors::Random, NoiseHandling::None),
        Self::new(AdditionalVectors::Random, NoiseHandling::Subtraction),
        Self::new(AdditionalVectors::Random, NoiseHandling::Whitening),
        Self::new(AdditionalVectors::Orthogonal, NoiseHandling::None),
        Self::new(AdditionalVectors::Orthogonal, NoiseHandling::Subtraction),
        Self::new(AdditionalVectors::Orthogonal, NoiseHandling::Whitening),
    ];

    pub const fn new(additional: AdditionalVectors, noise: NoiseHandling) -> Self {
        Self { additional, noise }
    }

    pub fn name(&self) -> &'static str {
        match (self.additional, self.noise) {
            (AdditionalVectors::Random, NoiseHandling::None) => "BOP",
            (AdditionalVectors::Random, NoiseHandling::Subtraction) => "BOP-S",
            (AdditionalVectors::Random, NoiseHandling::Whitening) => "BOP-W",
            (AdditionalVectors::Orthogonal, NoiseHandling::None) => "BOPO",
            (AdditionalVectors::Orthogonal, NoiseHandling::Subtraction) => "BOPO-S",
            (AdditionalVectors::Orthogonal, NoiseHandling::Whitening) => "BOPO-W",
        }
    }
}

impl fmt::Display for EstimatorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator variant '{s}'")))
    }
}

impl Serialize for EstimatorVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EstimatorVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Already-estimated RTFs of the active sources, one M×(K−1) matrix per bin.
#[derive(Debug, Clone)]
pub struct RtfSet {
    pub reference: usize,
    bins: Vec<CMatrix>,
}

impl RtfSet {
    pub fn empty(bins: usize, channels: usize, reference: usize) -> Self {
        Self {
            reference,
            bins: vec![CMatrix::zeros(channels, 0); bins],
        }
    }

    pub fn num_sources(&self) -> usize {
        self.bins.first().map_or(0, CMatrix::ncols)
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin(&self, f: usize) -> &CMatrix {
        &self.bins[f]
    }

    /// Append one source: one reference-normalized vector per bin.
    pub fn push(&mut self, estimates: &[CVector]) -> Result<()> {
        if estimates.len() != self.bins.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} estimates for {} bins",
                estimates.len(),
                self.bins.len()
            )));
        }
        for (g, e) in self.bins.iter_mut().zip(estimates) {
            if e.len() != g.nrows() {
                return Err(Error::DimensionMismatch(
                    "estimate length differs from M".into(),
                ));
            }
            let k = g.ncols();
            let mut next = g.clone().insert_column(k, C64::new(0.0, 0.0));
            next.set_column(k, e);
            *g = next;
        }
        Ok(())
    }

    /// The RTF of source `k` (0-based) at every bin.
    pub fn source(&self, k: usize) -> Vec<CVector> {
        self.bins.iter().map(|g| g.column(k).into_owned()).collect()
    }
}

/// `g / (e_rᵀ g)`; degenerate when the reference entry vanishes.
pub fn normalize_reference(g: &CVector, r: usize) -> Result<CVector> {
    let norm = g.norm();
    if r >= g.len() {
        return Err(Error::InvalidParameter(format!(
            "reference {r} out of range for M = {}",
            g.len()
        )));
    }
    let pivot = g[r];
    if !norm.is_finite() || norm == 0.0 || !(pivot.norm() > 1e-12 * norm) {
        return Err(Error::Degenerate("reference entry vanishes".into()));
    }
    let mut out = g / pivot;
    out[r] = C64::new(1.0, 0.0);
    Ok(out)
}

/// Covariance-whitening estimate of the first source: the de-whitened
/// principal eigenvector of `R_n^{−H/2} R_y R_n^{−1/2}`.
pub fn estimate_first_source(r_y: &CMatrix, noise: &BinNoise, r: usize) -> Result<CVector> {
    let whitened = noise_whiten(r_y, noise)?;
    let eig = hermitian_eig(&whitened, true)?;
    // in the whitened domain the noise floor is the identity, so an absolute
    // threshold is meaningful
    if !(eig.values[0] > 1e-10 * r_y.nrows() as f64) {
        return Err(Error::Degenerate("no source energy above the noise".into()));
    }
    let v = eig.principal();
    normalize_reference(&noise.factor.dewhiten_vec(&v), r)
}

fn stack(old: &CMatrix, extra: &CMatrix) -> CMatrix {
    let m = old.nrows();
    let mut out = CMatrix::zeros(m, old.ncols() + extra.ncols());
    out.columns_mut(0, old.ncols()).copy_from(old);
    out.columns_mut(old.ncols(), extra.ncols()).copy_from(extra);
    out
}

/// `M − K` unit-norm circular Gaussian columns such that `[G_K̄ | G_a]` has
/// condition number at most [`MAX_STACK_CONDITION`]. `old` holds the K−1
/// known RTFs; the draw is a pure function of `seed`.
pub fn additional_vectors_random(old: &CMatrix, seed: u64) -> Result<CMatrix> {
    let m = old.nrows();
    let k = old.ncols() + 1;
    if k > m {
        return Err(Error::InvalidParameter(format!("K = {k} exceeds M = {m}")));
    }
    let count = m - k;
    if count == 0 {
        return Ok(CMatrix::zeros(m, 0));
    }
    for attempt in 0..REDRAW_BUDGET {
        let mut rng = rng_for(seed, &[attempt as u64]);
        let mut ga = CMatrix::from_fn(m, count, |_, _| complex_gaussian(&mut rng));
        for mut c in ga.column_iter_mut() {
            let n = c.norm();
            c.unscale_mut(n);
        }
        if inverse_condition(&stack(old, &ga)) * MAX_STACK_CONDITION >= 1.0 {
            return Ok(ga);
        }
    }
    Err(Error::Degenerate(format!(
        "random additional vectors ill-conditioned after {REDRAW_BUDGET} draws"
    )))
}

/// Orthonormal basis of the eigenspace of the `count` smallest eigenvalues.
pub fn additional_vectors_orthogonal(r_x: &CMatrix, count: usize) -> Result<CMatrix> {
    let m = r_x.nrows();
    if count > m {
        return Err(Error::InvalidParameter(format!(
            "{count} minor eigenvectors requested, M = {m}"
        )));
    }
    if count == 0 {
        return Ok(CMatrix::zeros(m, 0));
    }
    Ok(hermitian_eig(r_x, true)?.minor_subspace(count))
}

fn as_column(v: &CVector) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// `J_G(θ) = tr{P∠_{G,θ} R P∠ᴴ}`: power left after blocking `θ` while
/// passing the columns of `G` undistorted.
pub fn bop_cost(theta: &CVector, g: &CMatrix, r: &CMatrix) -> Result<f64> {
    let p = proj_oblique(g, &as_column(theta))?.matrix;
    let out = &p * r * p.adjoint();
    Ok(out.trace().re)
}

fn perp_or_identity(g: &CMatrix) -> Result<CMatrix> {
    if g.ncols() == 0 {
        Ok(identity(g.nrows()))
    } else {
        Ok(proj_complement(g)?.matrix)
    }
}

fn blocking_term(theta: &CVector, g: &CMatrix, r: &CMatrix, p: &CMatrix) -> Result<CVector> {
    let perp_g = perp_or_identity(g)?;
    let pg_theta = &perp_g * theta;
    let denom = theta.dotc(&pg_theta).re;
    if !(denom > 1e-14 * theta.norm_squared()) {
        return Err(Error::Degenerate(
            "θ lies in the span of the passed RTFs".into(),
        ));
    }
    Ok(-(p.adjoint() * p * r * pg_theta) / C64::new(denom, 0.0))
}

/// Two-term gradient `∂J/∂θ*` of [`bop_cost`] without additional vectors.
///
/// Equals `(∂J/∂Re θ + j ∂J/∂Im θ) / 2`.
pub fn bop_gradient_full(theta: &CVector, g: &CMatrix, r: &CMatrix) -> Result<CVector> {
    let p = proj_oblique(g, &as_column(theta))?.matrix;
    let first = blocking_term(theta, g, r, &p)?;
    if g.ncols() == 0 || g.ncols() + 1 >= g.nrows() {
        // P⊥_{[G θ]} is zero when [G θ] spans the whole space
        return Ok(first);
    }
    let perp_all = proj_complement(&stack(g, &as_column(theta)))?.matrix;
    let perp_theta = proj_complement(&as_column(theta))?.matrix;
    let gh = g.adjoint();
    let gram = &gh * &perp_theta * g;
    let coeff = gram
        .lu()
        .solve(&(&gh * theta))
        .ok_or_else(|| Error::Degenerate("singular Gram matrix in gradient".into()))?;
    let second = perp_all * r * p.adjoint() * g * coeff / C64::new(theta.norm_squared(), 0.0);
    Ok(first - second)
}

/// Single-term gradient when `G̃ = [G_K̄ | G_a]` has rank `M − 1`.
pub fn bop_gradient_addvec(theta: &CVector, g_tilde: &CMatrix, r: &CMatrix) -> Result<CVector> {
    let p = proj_oblique(g_tilde, &as_column(theta))?.matrix;
    blocking_term(theta, g_tilde, r, &p)
}

/// Closed-form BOP minimizer: the principal eigenvector of `R_x P⊥_G̃`,
/// computed as `R_x u` with `u` spanning the complement of `G̃`, then
/// reference-normalized.
pub fn bop_closed_form(r_x: &CMatrix, g_tilde: &CMatrix, r: usize) -> Result<CVector> {
    let m = r_x.nrows();
    if g_tilde.nrows() != m || g_tilde.ncols() + 1 != m {
        return Err(Error::DimensionMismatch(format!(
            "stacked RTF matrix must be {m}x{}, got {}x{}",
            m - 1,
            g_tilde.nrows(),
            g_tilde.ncols()
        )));
    }
    let u = orth_complement(g_tilde, STACK_RANK_TOL)?
        .column(0)
        .into_owned();
    let g = r_x * &u;
    let energy = u.dotc(&g);
    if !(energy.norm() > 1e-12 * r_x.norm()) {
        return Err(Error::Degenerate(
            "no energy outside the stacked subspace".into(),
        ));
    }
    normalize_reference(&g, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GdInit {
    /// Principal eigenvector of `R_x`.
    Principal,
    /// Seeded circular Gaussian start.
    Random(u64),
    Given(Vec<(f64, f64)>),
}

/// Parameters of the gradient-descent baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdParams {
    /// Step size relative to `‖R_x‖_F`.
    pub step: f64,
    pub max_iters: usize,
    /// Stop when `‖∇‖ ≤ tol · ‖R_x‖_F`.
    pub grad_tol: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub init: GdInit,
}

impl Default for GdParams {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_iters: 10_000,
            grad_tol: 1e-9,
            backtrack: 0.5,
            max_halvings: 30,
            init: GdInit::Principal,
        }
    }
}

impl GdParams {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0)
            || self.max_iters == 0
            || !(self.grad_tol > 0.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "invalid gradient-descent parameters {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GdOutcome {
    pub estimate: CVector,
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterative minimization of the BOP cost with additional vectors, the
/// conventional baseline for [`bop_closed_form`].
pub fn bop_gradient_descent(
    r_x: &CMatrix,
    g_tilde: &CMatrix,
    r: usize,
    params: &GdParams,
) -> Result<GdOutcome> {
    params.validate()?;
    let m = r_x.nrows();
    let scale = r_x.norm();
    if !(scale > 0.0) {
        return Err(Error::Degenerate("zero covariance".into()));
    }
    let mut theta = match &params.init {
        GdInit::Principal => hermitian_eig(r_x, true)?.principal(),
        GdInit::Random(seed) => {
            let mut rng = rng_for(*seed, &[]);
            CVector::from_fn(m, |_, _| complex_gaussian(&mut rng))
        }
        GdInit::Given(v) => CVector::from_iterator(m, v.iter().map(|&(re, im)| C64::new(re, im))),
    };
    if theta.len() != m {
        return Err(Error::DimensionMismatch(
            "initial θ has the wrong length".into(),
        ));
    }
    theta.unscale_mut(theta.norm());
    let max_step = params.step / scale;
    let mut step = max_step;
    let mut cost = bop_cost(&theta, g_tilde, r_x)?;
    let mut costs = vec![cost];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iters {
        let grad = bop_gradient_addvec(&theta, g_tilde, r_x)?;
        if grad.norm() <= params.grad_tol * scale {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        let mut last = cost;
        for _ in 0..=params.max_halvings {
            let mut trial = &theta - &grad * C64::new(step, 0.0);
            trial.unscale_mut(trial.norm());
            match bop_cost(&trial, g_tilde, r_x) {
                Ok(c) if c <= cost => {
                    accepted = Some((trial, c));
                    break;
                }
                Ok(c) => last = c,
                Err(_) => {}
            }
            step *= params.backtrack;
        }
        match accepted {
            Some((t, c)) => {
                theta = t;
                cost = c;
                costs.push(c);
                step = (step * 2.0).min(max_step);
            }
            None if last - cost <= 1e-12 * scale => {
                // no representable descent left
                converged = true;
                break;
            }
            None => {
                return Err(Error::Diverged {
                    before: cost,
                    after: last,
                })
            }
        }
    }
    Ok(GdOutcome {
        estimate: normalize_reference(&theta, r)?,
        costs,
        iterations,
        converged,
    })
}

/// Working-domain quantities shared by all estimates of one bin: the
/// noise-handled covariance and the old RTFs mapped into that domain.
#[derive(Debug, Clone)]
pub struct WorkingDomain<'a> {
    pub r_x: CMatrix,
    pub old: CMatrix,
    noise: Option<&'a BinNoise>,
}

impl<'a> WorkingDomain<'a> {
    pub fn new(
        r_y: &CMatrix,
        noise: &'a BinNoise,
        old: &CMatrix,
        handling: NoiseHandling,
    ) -> Result<Self> {
        if old.nrows() != r_y.nrows() {
            return Err(Error::DimensionMismatch(
                "RTF matrix and covariance differ in M".into(),
            ));
        }
        Ok(match handling {
            NoiseHandling::None => Self {
                r_x: crate::linalg::symmetrize(r_y),
                old: old.clone(),
                noise: None,
            },
            NoiseHandling::Subtraction => Self {
                r_x: noise_subtract(r_y, &noise.covariance)?,
                old: old.clone(),
                noise: None,
            },
            NoiseHandling::Whitening => Self {
                r_x: noise_whiten(r_y, noise)?,
                old: noise.factor.whiten(old),
                noise: Some(noise),
            },
        })
    }

    pub fn additional(&self, kind: AdditionalVectors, seed: u64) -> Result<CMatrix> {
        let count = self.r_x.nrows() - self.old.ncols() - 1;
        match kind {
            AdditionalVectors::Random => additional_vectors_random(&self.old, seed),
            AdditionalVectors::Orthogonal => additional_vectors_orthogonal(&self.r_x, count),
        }
    }

    /// Closed-form estimate with the given additional vectors, mapped back to
    /// the original domain and reference-normalized.
    pub fn estimate(&self, additional: &CMatrix, r: usize) -> Result<CVector> {
        let g_tilde = stack(&self.old, additional);
        let m = self.r_x.nrows();
        if g_tilde.ncols() + 1 != m {
            return Err(Error::DimensionMismatch(
                "stacked RTF matrix must have M − 1 columns".into(),
            ));
        }
        let u = orth_complement(&g_tilde, STACK_RANK_TOL)?
            .column(0)
            .into_owned();
        let g = &self.r_x * &u;
        if !(u.dotc(&g).norm() > 1e-12 * self.r_x.norm()) {
            return Err(Error::Degenerate(
                "no energy outside the stacked subspace".into(),
            ));
        }
        let g = match self.noise {
            Some(n) => n.factor.dewhiten_vec(&g),
            None => g,
        };
        normalize_reference(&g, r)
    }
}

/// Estimate the RTF of the newest source from the noisy covariance, the noise
/// model and the RTFs of the already-active sources.
pub fn estimate_successive(
    r_y: &CMatrix,
    noise: &BinNoise,
    old: &CMatrix,
    r: usize,
    variant: EstimatorVariant,
    seed: u64,
) -> Result<CVector> {
    let domain = WorkingDomain::new(r_y, noise, old, variant.noise)?;
    let extra = domain.additional(variant.additional, seed)?;
    domain.estimate(&extra, r)
}
