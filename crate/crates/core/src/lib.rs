//! Mesh-free Lagrangian simulation of multi-group pedestrian flow coupled to
//! a non-local SEIS contagion model, with eikonal navigation and fixed or
//! moving obstacles.

pub mod cli;
pub mod contagion;
pub mod eikonal;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod obstacle;
pub mod params;
pub mod pedestrians;
pub mod pointcloud;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
