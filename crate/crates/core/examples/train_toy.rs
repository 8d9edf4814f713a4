//! Trains the toy-scale noise predictor on synthetic speckled patches and saves a checkpoint.
//!
//! ```text
//! cargo run --release --example train_toy -- [steps] [checkpoint_path]
//! ```

use std::error::Error;

use sardiff::cli::{build_dataset, Checkpoint, RunConfig};
use sardiff::diffusion::{TrainConfig, Trainer};
use sardiff::predictor::{Predictor, PredictorConfig};

fn main() -> Result<(), Box<dyn Error>> {
    env_logger::init();
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let path = std::env::args().nth(2).unwrap_or_else(|| "toy.sdck".into());

    let cfg = RunConfig { count: 2000, ..Default::default() };
    let data = build_dataset(&cfg)?;
    let predictor = Predictor::init(PredictorConfig::toy(), 1)?;
    println!("{} parameters, {} training pairs", predictor.params().num_scalars(), data.len());

    let mut trainer = Trainer::new(predictor, TrainConfig { iterations: steps, ..Default::default() })?;
    let mut window = 0.0;
    trainer.run(&data, |rec, _| {
        window += rec.loss;
        if rec.iteration % 100 == 0 {
            println!("step {:>5}  loss {:.4}  {:.0}s", rec.iteration, window / 100.0, rec.wall_time_s);
            window = 0.0;
        }
        Ok(())
    })?;

    let schedule = trainer.config().schedule;
    let iteration = trainer.iteration();
    Checkpoint::new(trainer.into_predictor(), schedule, iteration).save(&path)?;
    println!("saved {path}");
    Ok(())
}
