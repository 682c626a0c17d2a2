//! Random streams, Brownian steps and reference samplers.

mod brownian;
mod conditioned;
mod rng;

pub use brownian::{
    bm_step, bm_step_uncorrected, crossing_probability, gaussian_increment, gaussian_increment_into, Face, Side,
    StepResult,
};
pub(crate) use brownian::step_in_place;
pub use conditioned::{h_process_step, h_step_axis_density, pinned_bridge_path, GridDensity, GRID_POINTS};
pub use rng::{stream_id, RngStream, CONTROL_INDEX, PARTICLE_BITS};
