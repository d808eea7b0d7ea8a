pub mod connectome;
pub mod control;
pub mod dynamics;
pub mod linalg;
pub mod rng;
pub mod stats;
pub mod mlbench;
pub mod synth;
pub mod replicate;
