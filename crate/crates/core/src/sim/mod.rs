//! Sampled-data closed-loop simulation.

mod closed_loop;
pub mod doa;
pub mod ode;
pub mod plant;
pub mod trace;

pub use closed_loop::{run_closed_loop, NOISE_STREAM};
pub use doa::{convergence_score, doa_sweep, DoaConfig, DoaMap};
pub use plant::{
    integrate_sample_interval, shift_coordinates, CommandSegment, DisturbanceSegment, Harmonic, PlantConfig,
};
pub use trace::{compare, CompareReport, SimTrace, StepRecord, TraceTable};
