//! Seeded random draws shared by the scene generator, the additional-vector
//! constructor and the test suites.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMatrix, CVector, C64};

/// Derive a child seed from a parent seed and a path of component indices
/// (SplitMix64 finalizer applied per step). Used so that per-bin and
/// per-source streams do not depend on evaluation order.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    let mut s = parent;
    for &p in path {
        s = splitmix(s ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    s
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(parent: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, path))
}

pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Circular complex Gaussian with unit variance, `E|z|² = 1`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C64::new(gaussian(rng) * s, gaussian(rng) * s)
}

pub fn random_vector<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> CVector {
    CVector::from_fn(m, |_, _| complex_gaussian(rng))
}

pub fn random_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn random_hermitian<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> CMatrix {
    let a = random_matrix(m, m, rng);
    (&a + a.adjoint()).scale(0.5)
}

/// `B^H B + I` for a random square `B`.
pub fn random_hpd<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> CMatrix {
    let b = random_matrix(m, m, rng);
    b.adjoint() * &b + CMatrix::identity(m, m)
}

/// Random RTF vector: reference entry 1, other entries circular Gaussian.
pub fn random_rtf<R: rand::Rng + ?Sized>(m: usize, reference: usize, rng: &mut R) -> CVector {
    let mut g = random_vector(m, rng);
    g[reference] = C64::new(1.0, 0.0);
    g
}
