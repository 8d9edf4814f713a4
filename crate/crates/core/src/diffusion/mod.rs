//! Diffusion chain: variance schedule, forward/reverse kernels and training.

mod schedule;
mod train;

pub use schedule::{clip_denoised, loss_simple, make_schedule, q_sample, reverse_step, DiffusionSchedule, ScheduleParams};
pub use train::{train_step, LossRecord, StepOutcome, TrainConfig, Trainer};
