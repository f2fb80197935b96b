//! Orthogonal, complement and oblique projection operators.

use crate::linalg::{identity, inverse_condition, CMatrix, LinalgError, Result};

/// Minimum accepted ratio of smallest to largest singular value for the
/// matrices whose column spaces define a projector.
pub const RANK_TOL: f64 = 1e-10;
/// Largest accepted condition number of the oblique Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    Parallel,
    Complement,
    Oblique,
}

/// Dense M×M projection matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: CMatrix,
    pub kind: ProjectorKind,
    /// Dimension of the range, equal to the trace for idempotent matrices.
    pub range_dim: usize,
}

impl Projector {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        &self.matrix * x
    }

    /// `‖P² − P‖_F / ‖P‖_F`.
    pub fn idempotency_error(&self) -> f64 {
        let p = &self.matrix;
        let norm = p.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (p * p - p).norm() / norm
    }
}

fn ensure_full_column_rank(a: &CMatrix) -> Result<()> {
    if a.ncols() > a.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix cannot have full column rank",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.ncols() == 0 {
        return Ok(());
    }
    let ratio = inverse_condition(a);
    if !(ratio > RANK_TOL) {
        return Err(LinalgError::RankDeficient(ratio));
    }
    Ok(())
}

/// Solve `gram · X = rhs` with an explicit condition check.
fn solve_gram(gram: CMatrix, rhs: &CMatrix, max_cond: f64) -> Result<CMatrix> {
    let inv_cond = inverse_condition(&gram);
    if !(inv_cond * max_cond >= 1.0) {
        return Err(LinalgError::IllConditioned(1.0 / inv_cond));
    }
    gram.lu()
        .solve(rhs)
        .ok_or(LinalgError::IllConditioned(f64::INFINITY))
}

/// `P∥_A = A (A^H A)^{-1} A^H`.
pub fn proj_parallel(a: &CMatrix) -> Result<Projector> {
    crate::linalg::ensure_finite(a)?;
    ensure_full_column_rank(a)?;
    let m = a.nrows();
    let n = a.ncols();
    if n == 0 {
        return Ok(Projector {
            matrix: CMatrix::zeros(m, m),
            kind: ProjectorKind::Parallel,
            range_dim: 0,
        });
    }
    let ah = a.adjoint();
    let coeffs = solve_gram(&ah * a, &ah, f64::INFINITY)?;
    let p = a * coeffs;
    Ok(Projector {
        matrix: crate::linalg::symmetrize(&p),
        kind: ProjectorKind::Parallel,
        range_dim: n,
    })
}

/// `P⊥_A = I − P∥_A`.
pub fn proj_complement(a: &CMatrix) -> Result<Projector> {
    let par = proj_parallel(a)?;
    let m = a.nrows();
    Ok(Projector {
        matrix: identity(m) - par.matrix,
        kind: ProjectorKind::Complement,
        range_dim: m - par.range_dim,
    })
}

/// `P∠_AB = A (A^H P⊥_B A)^{-1} A^H P⊥_B`: passes the column space of `A`
/// unchanged and maps the column space of `B` to zero.
pub fn proj_oblique(a: &CMatrix, b: &CMatrix) -> Result<Projector> {
    let m = a.nrows();
    if b.nrows() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "A has {} rows, B has {}",
            m,
            b.nrows()
        )));
    }
    if a.ncols() + b.ncols() > m {
        return Err(LinalgError::DimensionMismatch(format!(
            "N_A + N_B = {} exceeds M = {m}",
            a.ncols() + b.ncols()
        )));
    }
    crate::linalg::ensure_finite(a)?;
    ensure_full_column_rank(a)?;
    let perp_b = proj_complement(b)?.matrix;
    let ah_perp = a.adjoint() * &perp_b;
    let coeffs = solve_gram(&ah_perp * a, &ah_perp, MAX_GRAM_CONDITION)?;
    Ok(Projector {
        matrix: a * coeffs,
        kind: ProjectorKind::Oblique,
        range_dim: a.ncols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_asymmetry, orth_complement, trace_re, CVector, C64};
    use crate::random::random_matrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn col(v: &[f64]) -> CMatrix {
        CMatrix::from_iterator(v.len(), 1, v.iter().map(|&x| c(x)))
    }

    #[test]
    fn parallel_examples() {
        let p = proj_parallel(&col(&[1.0, 0.0])).unwrap();
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(0.0)]));
        assert!((p.matrix - expect).norm() < 1e-15);
        let p = proj_parallel(&identity(4)).unwrap();
        assert!((p.matrix - identity(4)).norm() < 1e-14);
        assert_eq!(p.range_dim, 4);
    }

    #[test]
    fn parallel_random_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(6, 3, &mut rng);
        let p = proj_parallel(&a).unwrap();
        assert!((&p.matrix * &a - &a).norm() < 1e-10 * a.norm());
        let perp = orth_complement(&a, 1e-10).unwrap();
        assert!((&p.matrix * perp).norm() < 1e-10);
    }

    #[test]
    fn complement_examples() {
        let p = proj_complement(&col(&[1.0, 0.0])).unwrap();
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.0), c(1.0)]));
        assert!((p.matrix - expect).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(5, 4, &mut rng);
        let p = proj_complement(&a).unwrap();
        assert!((trace_re(&p.matrix) - 1.0).abs() < 1e-9);
        let u = orth_complement(&a, 1e-10).unwrap();
        assert!((&p.matrix - &u * u.adjoint()).norm() < 1e-10);

        let par = proj_parallel(&a).unwrap();
        assert!((par.matrix + p.matrix - identity(5)).norm() < 1e-12);
    }

    #[test]
    fn oblique_hand_example() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = col(&[1.0, 0.0]);
        let b = col(&[s, s]);
        let p = proj_oblique(&a, &b).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(0.0), c(0.0)]);
        assert!((&p.matrix - expect).norm() < 1e-14);
        assert!((&p.matrix * &a - &a).norm() < 1e-14);
        assert!((&p.matrix * &b).norm() < 1e-14);
    }

    #[test]
    fn oblique_reduces_to_parallel_for_orthogonal_b() {
        let a = col(&[1.0, 0.0]);
        let b = col(&[0.0, 1.0]);
        let obl = proj_oblique(&a, &b).unwrap();
        let par = proj_parallel(&a).unwrap();
        assert!((obl.matrix - par.matrix).norm() < 1e-15);
    }

    #[test]
    fn oblique_random_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(6, 2, &mut rng);
        let b = random_matrix(6, 3, &mut rng);
        let p = proj_oblique(&a, &b).unwrap();
        assert!((&p.matrix * &a - &a).norm() < 1e-9 * a.norm());
        assert!((&p.matrix * &b).norm() < 1e-9 * b.norm());
        let mut ab = CMatrix::zeros(6, 5);
        ab.columns_mut(0, 2).copy_from(&a);
        ab.columns_mut(2, 3).copy_from(&b);
        let perp = orth_complement(&ab, 1e-10).unwrap();
        assert!((&p.matrix * perp).norm() < 1e-9);
        assert!(p.idempotency_error() < 1e-9);
        assert!(hermitian_asymmetry(&p.matrix) > 1e-3);
    }

    #[test]
    fn oblique_amplifies_at_small_angles() {
        // ranges 30° apart
        let ang = 30f64.to_radians();
        let a = col(&[1.0, 0.0]);
        let b = col(&[ang.cos(), ang.sin()]);
        let p = proj_oblique(&a, &b).unwrap();
        let cvec = col(&[0.0, 1.0]);
        let out = &p.matrix * &cvec;
        assert!(out.norm() > 1.0, "gain {}", out.norm());
    }

    #[test]
    fn errors() {
        let z = CMatrix::zeros(3, 1);
        assert!(matches!(
            proj_parallel(&z),
            Err(LinalgError::RankDeficient(_))
        ));
        let a = col(&[1.0, 0.0]);
        let nearly = CMatrix::from_column_slice(2, 1, &[c(1.0), c(1e-9)]);
        assert!(matches!(
            proj_oblique(&a, &nearly),
            Err(LinalgError::IllConditioned(_))
        ));
        let wide = random_matrix(2, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(proj_parallel(&wide).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projectors_are_idempotent(seed in any::<u64>(), m in 2usize..=8, na in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let na = na.min(m - 1);
            let nb = (m - na).min(2);
            let a = random_matrix(m, na, &mut rng);
            let b = random_matrix(m, nb, &mut rng);
            let par = proj_parallel(&a).unwrap();
            let perp = proj_complement(&a).unwrap();
            prop_assert!(par.idempotency_error() < 1e-9);
            prop_assert!(perp.idempotency_error() < 1e-9);
            prop_assert!(hermitian_asymmetry(&par.matrix) < 1e-10);
            prop_assert!((trace_re(&perp.matrix) - (m - na) as f64).abs() < 1e-9);
            if let Ok(obl) = proj_oblique(&a, &b) {
                prop_assert!(obl.idempotency_error() < 1e-9);
            }
        }
    }
}
