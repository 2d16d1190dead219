//! Forward electromagnetic model: discretized operators and multi-view CSI synthesis.

pub mod config;
pub mod forward;
pub mod green;
pub mod layout;
pub mod scene;

pub use config::{wavenumber, PhysicsConfig, RoiGrid};
pub use forward::{
    multi_view_channels, multi_view_response, scattering_operator, simulate_channels,
    single_view_channel, ScatteringModel,
};
pub use green::{green_matrix, incident_channel, rx_channel, GreenOperator, Kernels, LatticeGreen};
pub use layout::{ula_positions, ChannelSet, ViewChannel, ViewLayout};
pub use scene::{contrast, ClutterScatterer, ScatteringCells, TargetScene};
