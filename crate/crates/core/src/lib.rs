//! Numerical core of a stereo-plus-sparse-LiDAR depth pipeline: disparity
//! and depth cost-volume math, pseudo-LiDAR point-cloud generation, K-beam
//! LiDAR simulation, and graph-based depth correction that diffuses a few
//! exact LiDAR depths across a dense stereo depth map.

pub mod cost_volume;
pub mod error;
pub mod eval;
pub mod gdc;
pub mod geometry;
pub mod kitti;
pub mod knn;
pub mod lidar;
pub mod synth;

pub use error::{Error, Result};
