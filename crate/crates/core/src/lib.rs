pub mod cli;
pub mod distortion;
pub mod envelope;
pub mod error;
pub mod oracle;
pub mod prob;
pub mod problem;
pub mod sampler;
pub mod solver;
pub mod srdf;
