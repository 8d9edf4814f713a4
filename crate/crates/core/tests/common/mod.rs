#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardiff::diffusion::DiffusionSchedule;
use sardiff::predictor::{forward, init_params, NoisePredictor, PredictorConfig, PredictorParams};
use sardiff::Result;
use sardiff_tensor::{Tape, Tensor};

/// Predictor that always answers `ε̂ = 0`.
pub struct ZeroPredictor(pub usize);

impl NoisePredictor for ZeroPredictor {
    fn input_size(&self) -> usize {
        self.0
    }

    fn predict(&self, x_t: &Tensor<f32>, _cond: &Tensor<f32>, _t: &[usize]) -> Result<Tensor<f32>> {
        Ok(Tensor::zeros(x_t.shape().to_vec()))
    }
}

/// Fresh parameters with every tensor (including zero-initialized ones) perturbed,
/// so no gradient path is trivially dead.
pub fn generic_params(cfg: &PredictorConfig, seed: u64) -> PredictorParams<f64> {
    let mut params = init_params(cfg, seed).unwrap().cast::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    for (_, t) in params.as_map_mut().iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    params
}

fn objective(params: &PredictorParams<f64>, cfg: &PredictorConfig, inputs: &(Tensor<f64>, Tensor<f64>, Vec<usize>), r: &Tensor<f64>, record: bool) -> (f64, Option<sardiff_tensor::Gradients<f64>>) {
    let tape = if record { Tape::new() } else { Tape::inference() };
    let out = forward(&tape, params, cfg, inputs.0.clone(), inputs.1.clone(), &inputs.2).unwrap();
    let loss = out.mul(&tape.constant(r.clone())).unwrap().sum();
    let value = loss.value().item().unwrap();
    (value, record.then(|| tape.backward(loss).unwrap()))
}

/// Per-tensor result of a finite-difference check.
pub struct GradCheck {
    pub name: String,
    pub checked: usize,
    pub max_abs_error: f64,
    pub max_numeric: f64,
}

/// Relative error per tensor: `max |analytic − numeric|` over `max |numeric|`, with the
/// denominator floored at 1e-3 of the largest gradient anywhere in the network so that
/// tensors whose exact gradient is zero (a bias feeding a per-channel normalization) are
/// judged on the network's gradient scale rather than on rounding noise.
pub fn relative_errors(checks: &[GradCheck]) -> Vec<(String, f64)> {
    let global = checks.iter().fold(0.0f64, |m, c| m.max(c.max_numeric));
    checks.iter().map(|c| (c.name.clone(), c.max_abs_error / c.max_numeric.max(1e-3 * global).max(1e-300))).collect()
}

/// Central finite differences for predictor parameters in double precision. With
/// `per_tensor = None` every scalar is checked; otherwise an evenly spaced subset.
pub fn predictor_gradcheck(cfg: &PredictorConfig, seed: u64, step: f64, per_tensor: Option<usize>) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = cfg.input_size;
    let mut rand_tensor = |shape: Vec<usize>| Tensor::<f64>::from_fn(shape, |_| rng.random_range(-1.0..1.0));
    let inputs = (rand_tensor(vec![2, 1, s, s]), rand_tensor(vec![2, 1, s, s]), vec![3usize, 71]);
    let r = rand_tensor(vec![2, 1, s, s]);
    let mut params = generic_params(cfg, seed);
    let (_, grads) = objective(&params, cfg, &inputs, &r, true);
    let grads = grads.unwrap();

    let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    let mut report = Vec::with_capacity(names.len());
    for name in names {
        let analytic = grads.get(&name).unwrap().clone();
        let n = analytic.numel();
        let indices: Vec<usize> = match per_tensor {
            Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
            _ => (0..n).collect(),
        };
        let (mut max_abs_error, mut max_numeric) = (0.0f64, 0.0f64);
        for &j in &indices {
            let original = params.get(&name).unwrap().data()[j];
            params.as_map_mut().get_mut(&name).unwrap().data_mut()[j] = original + step;
            let (fp, _) = objective(&params, cfg, &inputs, &r, false);
            params.as_map_mut().get_mut(&name).unwrap().data_mut()[j] = original - step;
            let (fm, _) = objective(&params, cfg, &inputs, &r, false);
            params.as_map_mut().get_mut(&name).unwrap().data_mut()[j] = original;
            let numeric = (fp - fm) / (2.0 * step);
            max_abs_error = max_abs_error.max((analytic.data()[j] - numeric).abs());
            max_numeric = max_numeric.max(numeric.abs());
        }
        report.push(GradCheck { name, checked: indices.len(), max_abs_error, max_numeric });
    }
    report
}

/// Straight-line evaluation of a reverse chain whose predictor always returns zero:
/// `x_{t−1} = x_t / √α_t + σ_t z_t`, with `x_T` and the `z_t` drawn in chain order.
pub fn zero_predictor_chain(sched: &DiffusionSchedule, size: usize, chain_seed: u64) -> Vec<f64> {
    let mut rng = sardiff::rng::seeded(chain_seed);
    let x_t = sardiff::rng::gaussian_image(size, size, &mut rng);
    let mut draws = Vec::new();
    for _ in 2..=sched.steps() {
        draws.push(sardiff::rng::gaussian_image(size, size, &mut rng));
    }
    // x_0 = x_T / Π_{s=1}^{T} √α_s + Σ_{t=2}^{T} σ_t z_t / Π_{s=1}^{t−1} √α_s
    let prod_upto = |t: usize| (1..=t).map(|s| sched.alpha(s).sqrt()).product::<f64>();
    let mut out: Vec<f64> = x_t.pixels().iter().map(|&v| f64::from(v) / prod_upto(sched.steps())).collect();
    for (k, z) in draws.iter().enumerate() {
        let t = sched.steps() - k;
        let coeff = sched.sigma(t) / prod_upto(t - 1);
        out.iter_mut().zip(z.pixels()).for_each(|(o, &zv)| *o += coeff * f64::from(zv));
    }
    out
}
