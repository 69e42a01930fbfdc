//! Process models, noise families and trajectory simulation.

pub mod arx;
pub mod causal;
pub mod noise;
pub mod state_space;
pub mod trajectory;

pub use arx::{spectral_radius, ArxSystem, SPECTRAL_RADIUS_TOL};
pub use causal::CausalOperator;
pub use noise::{sample_inputs, sample_noise, NoiseFamily, NoiseSpec, RngStream};
pub use state_space::StateSpaceInnovation;
pub use trajectory::{regressors, simulate_arx, simulate_ss, Trajectory};
