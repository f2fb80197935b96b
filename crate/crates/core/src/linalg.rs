//! Dense complex linear algebra kernels.
//!
//! Everything downstream works on small (M ≤ 16) dense complex matrices, so
//! these are thin, validated wrappers around `nalgebra` decompositions plus a
//! few array-processing specific helpers (orthogonal complement, principal
//! eigenvector of a non-Hermitian product, Hermitian angle).

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("Cholesky factorization failed even after diagonal loading")]
    NotPositiveDefinite,
    #[error("matrix is rank deficient (smallest/largest singular value {0:.3e})")]
    RankDeficient(f64),
    #[error("matrix is numerically zero")]
    ZeroMatrix,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ill-conditioned system (condition estimate {0:.3e})")]
    IllConditioned(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Eigenvalues sorted in descending order with their unit-norm eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvectors of the `count` smallest eigenvalues (the minor subspace).
    pub fn minor_subspace(&self, count: usize) -> CMatrix {
        let n = self.values.len();
        let count = count.min(n);
        self.vectors.columns(n - count, count).into_owned()
    }

    pub fn principal(&self) -> CVector {
        self.vectors.column(0).into_owned()
    }
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

fn ensure_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// `(A + A^H) / 2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    (a - a.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Real trace of a (Hermitian) matrix.
pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn identity(m: usize) -> CMatrix {
    CMatrix::identity(m, m)
}

/// Unit-norm selection vector `e_r`.
pub fn unit_vector(m: usize, r: usize) -> CVector {
    let mut e = CVector::zeros(m);
    e[r] = C64::new(1.0, 0.0);
    e
}

/// Hermitian angle `arccos(|a^H b| / (‖a‖‖b‖))` in radians.
///
/// Invariant to complex scaling of either argument. Uses the sine form near
/// zero so that angles of order 1e-9 are resolved rather than rounded to 0.
pub fn hermitian_angle(a: &CVector, b: &CVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let ua = a.unscale(na);
    let ub = b.unscale(nb);
    let inner = ua.dotc(&ub);
    let cos = inner.norm().min(1.0);
    if cos > 0.9 {
        // ‖b̂ − (a^H b̂) â‖ = sin(angle)
        let residual = &ub - &ua * inner;
        residual.norm().min(1.0).asin()
    } else {
        cos.acos()
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
pub fn hermitian_eig(a: &CMatrix, assume_hermitian: bool) -> Result<EigenPairs> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let sym = if assume_hermitian {
        symmetrize(a)
    } else {
        let asym = hermitian_asymmetry(a);
        let scale = a
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        if asym > 1e-10 * scale {
            return Err(LinalgError::NotHermitian(asym));
        }
        a.clone()
    };
    let n = sym.nrows();
    if n == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let norm = col.norm();
        vectors.set_column(dst, &col.unscale(norm));
    }
    Ok(EigenPairs { values, vectors })
}

/// Lower-triangular Cholesky factor `L` of a Hermitian positive definite
/// matrix, `R = L L^H`.
///
/// In square-root notation `R^{1/2} = L^H`, so that `R = R^{H/2} R^{1/2}`,
/// `R^{-H/2} = L^{-1}` and `R^{-1/2} = L^{-H}`. All whitening goes through
/// triangular solves against `L`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: CMatrix,
    /// Diagonal loading that was added before factorization succeeded.
    pub loading: f64,
}

impl CholeskyFactor {
    /// Factor `R`; on failure retry once with `R + loading·tr(R)/M·I`.
    pub fn new(r: &CMatrix, loading: f64) -> Result<Self> {
        ensure_square(r)?;
        ensure_finite(r)?;
        let sym = symmetrize(r);
        if let Some(lower) = hermitian_cholesky(&sym) {
            return Ok(Self {
                lower,
                loading: 0.0,
            });
        }
        let m = sym.nrows().max(1) as f64;
        let load = loading * trace_re(&sym) / m;
        if load > 0.0 {
            let loaded = &sym + identity(sym.nrows()).scale(load);
            if let Some(lower) = hermitian_cholesky(&loaded) {
                return Ok(Self {
                    lower,
                    loading: load,
                });
            }
        }
        Err(LinalgError::NotPositiveDefinite)
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `L`, which equals `R^{H/2}`.
    pub fn lower(&self) -> &CMatrix {
        &self.lower
    }

    /// `R^{1/2} = L^H`.
    pub fn sqrt(&self) -> CMatrix {
        self.lower.adjoint()
    }

    /// `R^{-H/2} X = L^{-1} X`.
    pub fn whiten(&self, x: &CMatrix) -> CMatrix {
        self.lower
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    pub fn whiten_vec(&self, x: &CVector) -> CVector {
        self.lower
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// `R^{H/2} x = L x`.
    pub fn dewhiten_vec(&self, x: &CVector) -> CVector {
        &self.lower * x
    }

    /// `R^{-H/2} A R^{-1/2} = L^{-1} A L^{-H}`.
    pub fn whiten_hermitian(&self, a: &CMatrix) -> CMatrix {
        let left = self.whiten(a);
        // (L^{-1} (L^{-1} A)^H)^H = L^{-1} A L^{-H} for Hermitian A
        let both = self.whiten(&left.adjoint());
        symmetrize(&both.adjoint())
    }

    /// `R^{-1} X` through two triangular solves.
    pub fn solve(&self, x: &CMatrix) -> CMatrix {
        let y = self.whiten(x);
        self.lower
            .adjoint()
            .solve_upper_triangular(&y)
            .expect("Cholesky factor has a nonzero diagonal")
    }
}

/// Column-oriented Cholesky of a Hermitian matrix (lower triangle read).
/// Fails on any pivot that is not strictly positive.
fn hermitian_cholesky(a: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > scale * 1e-15) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Matrix square root `S` with `S^H S = R` (after any diagonal loading),
/// following the convention `S = L^H`.
pub fn cholesky_sqrt(r: &CMatrix, loading: f64) -> Result<CMatrix> {
    Ok(CholeskyFactor::new(r, loading)?.sqrt())
}

/// Moore-Penrose pseudo-inverse via SVD with truncation at
/// `σ_max · max(M, N) · ε`.
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(CMatrix::zeros(n, m));
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (m.max(n) as f64) * f64::EPSILON;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let mut out = CMatrix::zeros(n, m);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && s > 0.0 {
            let v = v_t.row(i).adjoint();
            let uh = u.column(i).adjoint();
            out += (v * uh).unscale(s);
        }
    }
    Ok(out)
}

/// Ratio of smallest to largest singular value (0 for empty or zero input).
pub fn inverse_condition(a: &CMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let s = SVD::new(a.clone(), false, false).singular_values;
    let max = s.max();
    if max == 0.0 {
        0.0
    } else {
        s.min() / max
    }
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `A` (M×N, N < M), returned as an M×(M−N) matrix.
///
/// `tol` is the minimum accepted ratio of smallest to largest singular value.
pub fn orth_complement(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if n >= m {
        return Err(LinalgError::DimensionMismatch(format!(
            "orthogonal complement needs fewer columns than rows, got {m}x{n}"
        )));
    }
    if n == 0 {
        return Ok(identity(m));
    }
    let ratio = inverse_condition(a);
    if !(ratio > tol) {
        return Err(LinalgError::RankDeficient(ratio));
    }
    // QR of [A | I]: Q is unitary M×M and its first N columns span A.
    let mut aug = CMatrix::zeros(m, n + m);
    aug.columns_mut(0, n).copy_from(a);
    aug.columns_mut(n, m).copy_from(&identity(m));
    let q = aug.qr().q();
    Ok(q.columns(n, m - n).into_owned())
}

const POWER_MAX_ITERS: usize = 200;
const POWER_TOL: f64 = 1e-12;

/// Unit-norm eigenvector belonging to the eigenvalue of largest magnitude of
/// a general square matrix.
///
/// Power iteration from a fixed-seed random complex start, restarted once if
/// the iterate collapses. If it has not converged after the iteration cap
/// (nearly equal dominant magnitudes), the dominant eigenvalue is taken from
/// a complex Schur form and its eigenvector is refined by inverse iteration.
pub fn principal_eigvec(a: &CMatrix) -> Result<CVector> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let n = a.nrows();
    let amax = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if n == 0 || amax <= 1e-14 * n as f64 {
        return Err(LinalgError::ZeroMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    for _attempt in 0..2 {
        let mut v = random_unit(n, &mut rng);
        let mut converged = false;
        let mut collapsed = false;
        for _ in 0..POWER_MAX_ITERS {
            let w = a * &v;
            let norm = w.norm();
            if norm <= f64::MIN_POSITIVE * 1e4 {
                collapsed = true;
                break;
            }
            let w = w.unscale(norm);
            let overlap = v.dotc(&w);
            // align phase so the next comparison is meaningful
            let phase = if overlap.norm() > 0.0 {
                overlap.conj() / overlap.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            let w = w * phase;
            let change = (&w - &v).norm();
            v = w;
            if change < POWER_TOL {
                converged = true;
                break;
            }
        }
        if converged {
            return Ok(v);
        }
        if !collapsed {
            return dominant_by_schur(a, v);
        }
    }
    // Repeated collapse: the matrix is nilpotent-like along random directions.
    dominant_by_schur(a, random_unit(n, &mut rng))
}

/// Eigenvector of the rank-1 product `a·b^H`, which is `a/‖a‖` whenever the
/// single nonzero eigenvalue `b^H a` does not vanish.
pub fn principal_eigvec_rank1(a: &CVector, b: &CVector) -> Result<CVector> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(LinalgError::ZeroMatrix);
    }
    if b.dotc(a).norm() <= 1e-14 * na * nb {
        return Err(LinalgError::ZeroMatrix);
    }
    Ok(a.unscale(na))
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    let v = CVector::from_fn(n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let norm = v.norm();
    v.unscale(norm)
}

fn dominant_by_schur(a: &CMatrix, start: CVector) -> Result<CVector> {
    let n = a.nrows();
    let lambda = Schur::new(a.clone())
        .eigenvalues()
        .ok_or(LinalgError::IllConditioned(f64::INFINITY))?
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .ok_or(LinalgError::ZeroMatrix)?;
    let scale = a.norm().max(1.0);
    let shift = lambda + C64::new(1e-10 * scale, 1e-10 * scale);
    let shifted = a - identity(n) * shift;
    let lu = shifted.lu();
    let mut v = start;
    for _ in 0..8 {
        let Some(w) = lu.solve(&v) else { break };
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        v = w.unscale(norm);
    }
    Ok(v)
}
