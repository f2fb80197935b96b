pub mod beamform;
pub mod cli;
pub mod counting;
pub mod covariance;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod projections;
pub mod random;
pub mod rtf;
pub mod scene;
pub mod stft;
pub mod wav;
