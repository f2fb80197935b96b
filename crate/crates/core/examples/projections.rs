//! Orthogonal and oblique projectors on a random subspace pair.

use oblique_rtf::linalg::{identity, CMatrix};
use oblique_rtf::projections::{proj_complement, proj_oblique, proj_parallel};
use oblique_rtf::random::{random_matrix, rng_for};

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_for(1, &[]);
    let m = 6;
    let a = random_matrix(m, 1, &mut rng);
    let b = random_matrix(m, 3, &mut rng);

    let par = proj_parallel(&b)?;
    let perp = proj_complement(&b)?;
    let obl = proj_oblique(&a, &b)?;

    println!(
        "M = {m}, A is {}x{}, B is {}x{}",
        a.nrows(),
        a.ncols(),
        b.nrows(),
        b.ncols()
    );
    println!(
        "P_B   idempotency {:.1e}  hermitian {:.1e}",
        par.idempotency_error(),
        rel(&par.matrix.adjoint(), &par.matrix)
    );
    println!(
        "P_B + P_B^perp = I  {:.1e}",
        rel(&(&par.matrix + &perp.matrix), &identity(m))
    );
    println!("E_AB  idempotency {:.1e}", obl.idempotency_error());
    println!("E_AB A = A          {:.1e}", rel(&obl.apply(&a), &a));
    println!("E_AB B = 0          {:.1e}", obl.apply(&b).norm());
    println!("tr E_AB = rank A    {:.3}", obl.matrix.trace().re);

    // the oblique projector is not Hermitian unless A ⊥ B
    println!(
        "E_AB non-hermitian  {:.3}",
        rel(&obl.matrix.adjoint(), &obl.matrix)
    );
    let a_perp = perp.apply(&a);
    let reduced = proj_oblique(&a_perp, &b)?;
    println!(
        "A ⊥ B reduces to P_A: {:.1e}",
        rel(&reduced.matrix, &proj_parallel(&a_perp)?.matrix)
    );
    Ok(())
}
