//! Compares reverse-mode gradients of the noise predictor with central differences.

use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardiff::predictor::{forward, init_params, PredictorConfig, PredictorParams};
use sardiff_tensor::{Tape, Tensor};

fn objective(params: &PredictorParams<f64>, cfg: &PredictorConfig, x: &Tensor<f64>, c: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    let tape = Tape::inference();
    let out = forward(&tape, params, cfg, x.clone(), c.clone(), &[20]).unwrap();
    let value = out.mul(&tape.constant(r.clone())).unwrap().sum().value().item().unwrap();
    value
}

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = PredictorConfig::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = init_params(&cfg, 0)?.cast::<f64>();
    // The output convolution starts at zero; move it so every gradient is non-trivial.
    for (_, t) in params.as_map_mut().iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
    }
    let mut rand = |shape: Vec<usize>| Tensor::<f64>::from_fn(shape, |_| rng.random_range(-1.0..1.0));
    let (x, c, r) = (rand(vec![1, 1, 8, 8]), rand(vec![1, 1, 8, 8]), rand(vec![1, 1, 8, 8]));

    let tape = Tape::new();
    let out = forward(&tape, &params, &cfg, x.clone(), c.clone(), &[20])?;
    let grads = tape.backward(out.mul(&tape.constant(r.clone()))?.sum())?;

    let h = 1e-5;
    let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    let mut worst = 0.0f64;
    for name in names.iter().filter(|n| n.ends_with("weight")) {
        let analytic = grads.get(name).unwrap().data()[0];
        let orig = params.get(name).unwrap().data()[0];
        params.as_map_mut().get_mut(name).unwrap().data_mut()[0] = orig + h;
        let up = objective(&params, &cfg, &x, &c, &r);
        params.as_map_mut().get_mut(name).unwrap().data_mut()[0] = orig - h;
        let down = objective(&params, &cfg, &x, &c, &r);
        params.as_map_mut().get_mut(name).unwrap().data_mut()[0] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic - numeric).abs() / numeric.abs().max(1e-8);
        worst = worst.max(rel);
        println!("{name:<28} analytic {analytic:>12.6e}  numeric {numeric:>12.6e}");
    }
    println!("worst relative error over first weight entries: {worst:.2e}");
    Ok(())
}
