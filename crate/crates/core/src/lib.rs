//! Estimate data-center electricity load, attribute it to the power plants of
//! each balancing authority, and roll up emissions, intensity and fuel mix.

pub mod attribution;
pub mod geo;
pub mod impute;
pub mod ingest;
pub mod numeric;
pub mod pipeline;
pub mod record;
pub mod report;
pub mod synth;
