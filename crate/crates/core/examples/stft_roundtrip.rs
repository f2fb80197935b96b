//! Analysis and synthesis of 16 s of 6-channel noise.

use oblique_rtf::random::{gaussian, rng_for};
use oblique_rtf::stft::{interior_error_db, Stft, StftConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = StftConfig::default();
    let stft = Stft::new(cfg)?;
    let mut rng = rng_for(0, &[]);
    let len = 16 * cfg.sample_rate as usize;
    let x: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..len).map(|_| gaussian(&mut rng)).collect())
        .collect();

    let frames = stft.analyze(&x)?;
    let y = stft.synthesize(&frames)?;
    println!(
        "{} frames x {} bins, frame {} / hop {} samples",
        frames.len(),
        cfg.num_bins(),
        cfg.frame_len,
        cfg.hop
    );
    println!(
        "interior error {:.1} dB",
        interior_error_db(&x, &y, cfg.frame_len)
    );
    Ok(())
}
