use std::time::Instant;

use rand::Rng;
use sardiff_tensor::{adam_step, AdamConfig, AdamState, Tape, Tensor};
use serde::{Deserialize, Serialize};

use super::schedule::{loss_simple, q_sample, DiffusionSchedule, ScheduleParams};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::predictor::{forward, Predictor, PredictorConfig, PredictorParams};
use crate::rng::{self, gaussian_image, SeededRng};
use crate::speckle::ImagePair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub schedule: ScheduleParams,
    pub seed: u64,
    /// Iterations between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            batch_size: 8,
            learning_rate: 1e-3,
            schedule: ScheduleParams::scaled_linear(100),
            seed: 0,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("iterations and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        self.schedule.build().map(|_| ())
    }
}

/// What one optimizer step saw and produced.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub loss: f64,
    pub timesteps: Vec<usize>,
    pub eps: Tensor<f32>,
    pub eps_hat: Tensor<f32>,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub loss: f64,
    pub wall_time_s: f64,
}

/// One gradient step on `‖ε − ε_θ(x_t, x_S, t)‖²` for a batch of pairs.
///
/// Per sample: `t ~ U{1..T}`, `ε ~ N(0, I)`, `x_t` from the clean patch in the signed
/// range; the speckled patch (signed) is the conditioning input. Parameters are only
/// updated if the loss and all gradients are finite.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    batch: &[&ImagePair],
    params: &mut PredictorParams<f32>,
    config: &PredictorConfig,
    adam: &mut AdamState<f32>,
    adam_config: &AdamConfig,
    sched: &DiffusionSchedule,
    rng: &mut SeededRng,
) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(Error::Parameter("empty training batch".into()));
    }
    let mut timesteps = Vec::with_capacity(batch.len());
    let mut noisy = Vec::with_capacity(batch.len());
    let mut noise = Vec::with_capacity(batch.len());
    let mut conds = Vec::with_capacity(batch.len());
    for pair in batch {
        let t = rng.random_range(1..=sched.steps());
        let (h, w) = pair.clean.dims();
        let eps = gaussian_image(h, w, rng);
        noisy.push(q_sample(&pair.clean.to_signed(), t, &eps, sched)?);
        noise.push(eps);
        conds.push(pair.speckled.to_signed());
        timesteps.push(t);
    }
    let stack = |imgs: &[Image]| Image::stack(&imgs.iter().collect::<Vec<_>>());
    let (x_t, cond, eps) = (stack(&noisy)?, stack(&conds)?, stack(&noise)?);

    let tape = Tape::new();
    let out = forward(&tape, params, config, x_t, cond, &timesteps)?;
    let target = tape.constant(eps.clone());
    let loss_var = out.mse(&target)?;
    let loss = f64::from(loss_var.value().item().expect("scalar loss"));
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss is {loss} (timesteps {timesteps:?}); step aborted")));
    }
    let grads = tape.backward(loss_var)?;
    let eps_hat = out.to_tensor();
    adam_step(params.as_map_mut(), grads.named(), adam, adam_config)?;
    debug_assert!((loss - loss_simple(eps.data(), eps_hat.data())?).abs() <= 1e-4 * loss.max(1.0));
    Ok(StepOutcome { loss, timesteps, eps, eps_hat })
}

/// Training loop state: sampling a batch uniformly (with replacement) per step.
pub struct Trainer {
    predictor: Predictor,
    adam: AdamState<f32>,
    adam_config: AdamConfig,
    schedule: DiffusionSchedule,
    config: TrainConfig,
    rng: SeededRng,
    iteration: usize,
    started: Instant,
}

impl Trainer {
    pub fn new(predictor: Predictor, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let schedule = config.schedule.build()?;
        Ok(Self {
            predictor,
            adam: AdamState::new(),
            adam_config: AdamConfig { lr: config.learning_rate, ..AdamConfig::default() },
            schedule,
            rng: rng::substream(config.seed, 0x7261_696e),
            config,
            iteration: 0,
            started: Instant::now(),
        })
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn into_predictor(self) -> Predictor {
        self.predictor
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn step(&mut self, data: &[ImagePair]) -> Result<(LossRecord, StepOutcome)> {
        if data.is_empty() {
            return Err(Error::Parameter("no training pairs".into()));
        }
        let batch: Vec<&ImagePair> =
            (0..self.config.batch_size).map(|_| &data[self.rng.random_range(0..data.len())]).collect();
        let cfg = self.predictor.config().clone();
        let outcome = train_step(
            &batch,
            self.predictor.params_mut(),
            &cfg,
            &mut self.adam,
            &self.adam_config,
            &self.schedule,
            &mut self.rng,
        )?;
        self.iteration += 1;
        let record =
            LossRecord { iteration: self.iteration, loss: outcome.loss, wall_time_s: self.started.elapsed().as_secs_f64() };
        Ok((record, outcome))
    }

    /// Runs the remaining iterations, calling `on_step` after each one.
    pub fn run(&mut self, data: &[ImagePair], mut on_step: impl FnMut(&LossRecord, &Self) -> Result<()>) -> Result<Vec<LossRecord>> {
        let mut log = Vec::with_capacity(self.config.iterations.saturating_sub(self.iteration));
        while self.iteration < self.config.iterations {
            let (record, _) = self.step(data)?;
            on_step(&record, self)?;
            log.push(record);
        }
        Ok(log)
    }
}
