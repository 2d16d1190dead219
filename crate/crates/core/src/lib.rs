//! Multi-view wireless sensing toolkit.
//!
//! Synthesizes multi-view OFDM channel state information from 2-D TM
//! electromagnetic scattering, reconstructs targets with Born-iterative
//! inversion, and scores reconstructions as normalized shape-EM point clouds.

pub mod dataset;
pub mod em;
pub mod error;
pub mod geometry;
pub mod inversion;
pub mod linalg;
pub mod metrics;
pub mod link;
pub mod par;
pub mod scene_gen;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
pub use geometry::Point2;
pub use num_complex::Complex64;
