//! Conditional noise predictor `ε_θ(x_t, x_S, t)`.

mod config;
mod embed;
mod network;
mod params;

use sardiff_tensor::{Tape, Tensor};

pub use config::PredictorConfig;
pub use embed::sinusoidal_embedding;
pub use network::{forward, init_params, layout, ParamSlot};
pub use params::PredictorParams;

use crate::error::Result;
use crate::image::Image;

/// Anything that predicts the noise component of a batch of chain states.
///
/// Inputs are `N×1×H×W` tensors in the signed range; `t` holds one step per sample.
pub trait NoisePredictor {
    fn input_size(&self) -> usize;

    fn predict(&self, x_t: &Tensor<f32>, cond: &Tensor<f32>, t: &[usize]) -> Result<Tensor<f32>>;
}

/// Trained (or freshly initialized) predictor: architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    config: PredictorConfig,
    params: PredictorParams<f32>,
}

impl Predictor {
    pub fn new(config: PredictorConfig, params: PredictorParams<f32>) -> Result<Self> {
        config.validate()?;
        params.check_against(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: PredictorConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn params(&self) -> &PredictorParams<f32> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut PredictorParams<f32> {
        &mut self.params
    }

    pub fn into_params(self) -> PredictorParams<f32> {
        self.params
    }

    /// The same weights applied at another spatial size.
    pub fn resized(&self, input_size: usize) -> Result<Self> {
        Ok(Self { config: self.config.with_input_size(input_size)?, params: self.params.clone() })
    }
}

impl NoisePredictor for Predictor {
    fn input_size(&self) -> usize {
        self.config.input_size
    }

    fn predict(&self, x_t: &Tensor<f32>, cond: &Tensor<f32>, t: &[usize]) -> Result<Tensor<f32>> {
        let tape = Tape::inference();
        let out = forward(&tape, &self.params, &self.config, x_t.clone(), cond.clone(), t)?;
        Ok(out.to_tensor())
    }
}

/// Predicted noise for a single chain state `x_t` conditioned on `x_s`.
pub fn predict_noise(x_t: &Image, x_s: &Image, t: usize, params: &PredictorParams<f32>, config: &PredictorConfig) -> Result<Image> {
    let tape = Tape::inference();
    let out = forward(&tape, params, config, Image::stack(&[x_t])?, Image::stack(&[x_s])?, &[t])?;
    Ok(Image::unstack(&out.to_tensor())?.remove(0))
}
