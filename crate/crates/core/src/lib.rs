//! Occupation-level unemployment risk, technology exposure, skill change,
//! and individual-versus-ensemble exposure model evaluation.

pub mod evaluate;
pub mod ingest;
pub mod model;
pub mod regress;
pub mod risk;
pub mod rng;
pub mod skills;
pub mod stats;
pub mod synth;
