//! LCMV design with one target and two suppressed interferers.

use oblique_rtf::beamform::{constraint_residual, delta_from_db, lcmv_weights};
use oblique_rtf::covariance::DEFAULT_LOADING;
use oblique_rtf::linalg::{CMatrix, CholeskyFactor};
use oblique_rtf::random::{random_hpd, random_rtf, rng_for};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = 6;
    let mut rng = rng_for(5, &[]);
    let c = CMatrix::from_columns(
        &(0..3)
            .map(|_| random_rtf(m, 0, &mut rng))
            .collect::<Vec<_>>(),
    );
    let noise = CholeskyFactor::new(&random_hpd(m, &mut rng), DEFAULT_LOADING)?;

    for db in [-20.0, -40.0, f64::NEG_INFINITY] {
        let delta = delta_from_db(db);
        let w = lcmv_weights(&noise, &c, delta)?;
        let gains: Vec<String> = c
            .column_iter()
            .map(|col| format!("{:8.2} dB", 20.0 * w.dotc(&col).norm().max(1e-300).log10()))
            .collect();
        println!(
            "δ = {db:>5} dB: responses [{}], residual {:.1e}",
            gains.join(", "),
            constraint_residual(&w, &c, delta)
        );
    }
    Ok(())
}
