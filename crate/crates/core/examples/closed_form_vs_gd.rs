//! Closed-form successive estimate against the gradient-descent baseline on
//! exact-model covariances.

use std::time::Instant;

use oblique_rtf::linalg::{hermitian_angle, outer, CMatrix, C64};
use oblique_rtf::random::{random_rtf, rng_for};
use oblique_rtf::rtf::{
    additional_vectors_random, bop_closed_form, bop_cost, bop_gradient_descent, GdParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, k, instances) = (6, 3, 20);
    let params = GdParams::default();
    let mut t_cf = 0.0;
    let mut t_gd = 0.0;
    for i in 0..instances {
        let mut rng = rng_for(42, &[i]);
        let g: Vec<_> = (0..k).map(|_| random_rtf(m, 0, &mut rng)).collect();
        let mut r_x = CMatrix::zeros(m, m);
        for (j, gj) in g.iter().enumerate() {
            r_x += outer(gj, gj) * C64::new(1.0 + j as f64, 0.0);
        }
        let old = CMatrix::from_columns(&g[..k - 1]);
        let extra = additional_vectors_random(&old, 7 + i)?;
        let cols: Vec<_> = old
            .column_iter()
            .chain(extra.column_iter())
            .map(|c| c.into_owned())
            .collect();
        let g_tilde = CMatrix::from_columns(&cols);

        let t = Instant::now();
        let cf = bop_closed_form(&r_x, &g_tilde, 0)?;
        t_cf += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let gd = bop_gradient_descent(&r_x, &g_tilde, 0, &params)?;
        t_gd += t.elapsed().as_secs_f64();

        println!(
            "{i:2}: closed form {:.1e} rad, cost {:.3e} | GD {:.1e} rad, cost {:.3e}, {} iters",
            hermitian_angle(&cf, &g[k - 1]),
            bop_cost(&cf, &g_tilde, &r_x)?,
            hermitian_angle(&gd.estimate, &g[k - 1]),
            gd.costs.last().copied().unwrap_or(f64::NAN),
            gd.iterations,
        );
    }
    println!(
        "closed form {:.1} µs/instance, GD {:.1} µs/instance ({:.0}x)",
        1e6 * t_cf / instances as f64,
        1e6 * t_gd / instances as f64,
        t_gd / t_cf
    );
    Ok(())
}
