//! Camera + lidar to 4D radar signal synthesis.

pub mod dataset;
pub mod distribution;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod geometry;
pub mod image;
pub mod nn;
pub mod predictors;
pub mod rss_net;
pub mod sampler;
pub mod synth;
pub mod vis;

pub use error::{Error, Result};
