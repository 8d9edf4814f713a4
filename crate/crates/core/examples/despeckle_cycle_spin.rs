//! Despeckles held-out images with and without cycle spinning.
//!
//! ```text
//! cargo run --release --example train_toy -- 3000 toy.sdck
//! cargo run --release --example despeckle_cycle_spin -- toy.sdck
//! ```

use std::error::Error;

use sardiff::cli::Checkpoint;
use sardiff::cyclespin::{despeckle_batch, CycleSpinPlan, SamplerOptions};
use sardiff::metrics::{psnr, ssim};
use sardiff::scene::synthetic_scene;
use sardiff::speckle::{ImagePair, SpeckleParams};

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "toy.sdck".into());
    let ck = Checkpoint::load(&path)?;
    let sched = ck.schedule.build()?;
    let size = ck.predictor.config().input_size;

    let params = SpeckleParams::new(1.0, 0)?;
    let pairs: Vec<ImagePair> =
        (0..4).map(|i| ImagePair::from_clean(synthetic_scene(size, 500 + i), &params, 900 + i)).collect::<Result<_, _>>()?;
    let inputs: Vec<_> = pairs.iter().enumerate().map(|(i, p)| (p.speckled.quantize_8bit(), i as u64)).collect();

    let (mut p0, mut s0) = (0.0, 0.0);
    for (pair, (speckled, _)) in pairs.iter().zip(&inputs) {
        p0 += psnr(&pair.clean, speckled, 1.0)?;
        s0 += ssim(&pair.clean, speckled)?;
    }
    println!("speckled input: PSNR {:.2} dB  SSIM {:.3}", p0 / 4.0, s0 / 4.0);

    for plan in [CycleSpinPlan::paired(&[0]), CycleSpinPlan::default(), CycleSpinPlan::cross(&[0, 100, 200], &[0, 100, 200])] {
        let outputs = despeckle_batch(&inputs, &plan, &ck.predictor, &sched, SamplerOptions::default())?;
        let (mut p, mut s) = (0.0, 0.0);
        for (out, pair) in outputs.iter().zip(&pairs) {
            let out = out.quantize_8bit();
            p += psnr(&pair.clean, &out, 1.0)?;
            s += ssim(&pair.clean, &out)?;
        }
        println!("M={:<2} shifts [{plan}]: PSNR {:.2} dB  SSIM {:.3}", plan.len(), p / 4.0, s / 4.0);
    }
    Ok(())
}
