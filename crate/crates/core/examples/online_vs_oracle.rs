//! One scene processed with oracle and with detected segment boundaries.

use oblique_rtf::pipeline::{run, Activity, PipelineConfig};
use oblique_rtf::rtf::EstimatorVariant;
use oblique_rtf::scene::{generate, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let snr: f64 = std::env::args().nth(1).map_or(Ok(10.0), |s| s.parse())?;
    let scene = generate(&ScenarioConfig {
        snr_db: Some(snr),
        seed: 2,
        ..ScenarioConfig::default()
    })?;
    let bopo_w: EstimatorVariant = "BOPO-W".parse()?;
    for activity in [Activity::Oracle, Activity::Online] {
        let cfg = PipelineConfig {
            variants: vec![bopo_w],
            activity,
            ..PipelineConfig::default()
        };
        let out = run(&scene, &cfg, "demo")?;
        println!(
            "{activity}: segment starts {:?}",
            out.plans.iter().map(|p| p.start).collect::<Vec<_>>()
        );
        for r in &out.records {
            println!(
                "  K={} ψ={} ΔSINR={} latency={:?}",
                r.segment,
                r.psi_deg.map_or("-".into(), |v| format!("{v:.2}°")),
                r.delta_sinr_db.map_or("-".into(), |v| format!("{v:.2} dB")),
                r.detection_latency_frames
            );
        }
    }
    Ok(())
}
