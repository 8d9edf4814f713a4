pub mod cli;
pub mod cyclespin;
pub mod diffusion;
mod error;
pub mod image;
pub mod metrics;
pub mod predictor;
pub mod rng;
pub mod scene;
pub mod speckle;

pub use error::{Error, Result};
pub use image::Image;
