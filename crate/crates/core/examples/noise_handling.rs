//! The six estimator variants on one bin with exact `R_y = R_x + R_n`, under
//! isotropic and spatially correlated noise.

use oblique_rtf::covariance::{BinNoise, DEFAULT_LOADING};
use oblique_rtf::linalg::{hermitian_angle, identity, outer, CMatrix, C64};
use oblique_rtf::random::{random_hpd, random_rtf, rng_for};
use oblique_rtf::rtf::{estimate_successive, EstimatorVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = 6;
    let mut rng = rng_for(3, &[]);
    let g: Vec<_> = (0..3).map(|_| random_rtf(m, 0, &mut rng)).collect();
    let mut r_x = CMatrix::zeros(m, m);
    for gk in &g {
        r_x += outer(gk, gk) * C64::new(2.0, 0.0);
    }
    let old = CMatrix::from_columns(&g[..2]);

    for (label, r_n) in [
        ("isotropic", identity(m) * C64::new(0.5, 0.0)),
        ("correlated", random_hpd(m, &mut rng)),
    ] {
        let noise = BinNoise::new(r_n.clone(), DEFAULT_LOADING)?;
        let r_y = &r_x + &r_n;
        println!("{label} noise");
        for v in EstimatorVariant::ALL {
            let est = estimate_successive(&r_y, &noise, &old, 0, v, 11)?;
            println!(
                "  {:7} {:10.3e} rad",
                v.name(),
                hermitian_angle(&est, &g[2])
            );
        }
    }
    Ok(())
}
