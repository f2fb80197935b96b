//! Median ψ and ΔSINR of the six variants over a few reverberant scenes,
//! oracle source activity.
//!
//! `cargo run --release --example method_comparison -- [scenes] [snr_db]`

use oblique_rtf::cli::{summarize, sweep_records, SweepConfig};
use oblique_rtf::pipeline::PipelineConfig;
use oblique_rtf::rtf::EstimatorVariant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds = args.next().map_or(Ok(3), |s| s.parse())?;
    let snr: f64 = args.next().map_or(Ok(0.0), |s| s.parse())?;
    let cfg = SweepConfig {
        label: "comparison".into(),
        pipeline: PipelineConfig {
            variants: EstimatorVariant::ALL.to_vec(),
            segments: vec![2, 3],
            ..PipelineConfig::default()
        },
        snrs_db: vec![snr],
        seeds,
        ..SweepConfig::default()
    };
    let rows = summarize(&cfg, &sweep_records(&cfg)?);
    println!("{} scenes at {snr} dB", seeds);
    println!(
        "{:8} {:>3} {:>9} {:>10}",
        "variant", "K", "ψ [deg]", "ΔSINR [dB]"
    );
    for r in rows {
        println!(
            "{:8} {:>3} {:>9.2} {:>10.2}",
            r.variant,
            r.segment,
            r.median_psi_deg.unwrap_or(f64::NAN),
            r.median_delta_sinr_db.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
