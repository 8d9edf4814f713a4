use proptest::prelude::*;
use rand::Rng;
use sardiff::diffusion::{loss_simple, make_schedule, q_sample, reverse_step, ScheduleParams, TrainConfig, Trainer};
use sardiff::predictor::{Predictor, PredictorConfig};
use sardiff::rng::{gaussian_image, seeded};
use sardiff::scene::synthetic_scene;
use sardiff::speckle::{make_dataset, ImagePair, SpeckleParams};
use sardiff::{Error, Image};

#[test]
fn alpha_bar_is_running_product() {
    let s = make_schedule(50, 2e-3, 0.4).unwrap();
    let mut prod = 1.0f64;
    for t in 1..=50 {
        let beta = 2e-3 + (0.4 - 2e-3) * (t - 1) as f64 / 49.0;
        assert!((s.beta(t) - beta).abs() < 1e-15);
        prod *= 1.0 - beta;
        assert!((s.alpha_bar(t) - prod).abs() < 1e-14);
        assert!((s.sigma(t) - beta.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn iterated_kernel_matches_closed_form_moments() {
    // Light version: 4×4 images, 2·10⁴ draws, tolerance of ~6 standard errors.
    let sched = ScheduleParams::scaled_linear(100).build().unwrap();
    let mut rng = seeded(3);
    let x0 = Image::from_fn(4, 4, |r, c| (r as f32 - c as f32) / 4.0);
    let draws = 20_000;
    let checkpoints = [1usize, 50, 100];
    let mut sums = vec![[0.0f64; 2]; 16 * 3];
    for _ in 0..draws {
        let mut x: Vec<f64> = x0.pixels().iter().map(|&v| f64::from(v)).collect();
        for t in 1..=100 {
            let a = (1.0 - sched.beta(t)).sqrt();
            let b = sched.beta(t).sqrt();
            x.iter_mut().for_each(|v| *v = a * *v + b * rng.sample::<f64, _>(rand_distr::StandardNormal));
            if let Some(k) = checkpoints.iter().position(|&c| c == t) {
                for (p, v) in x.iter().enumerate() {
                    sums[k * 16 + p][0] += v;
                    sums[k * 16 + p][1] += v * v;
                }
            }
        }
    }
    for (k, &t) in checkpoints.iter().enumerate() {
        let ab = sched.alpha_bar(t);
        for p in 0..16 {
            let mean = sums[k * 16 + p][0] / draws as f64;
            let var = sums[k * 16 + p][1] / draws as f64 - mean * mean;
            let target = ab.sqrt() * f64::from(x0.pixels()[p]);
            assert!((mean - target).abs() < 6.0 * ((1.0 - ab) / draws as f64).sqrt(), "t={t} mean {mean} vs {target}");
            assert!((var / (1.0 - ab) - 1.0).abs() < 0.07, "t={t} var {var} vs {}", 1.0 - ab);
        }
    }
}

#[test]
fn final_step_rejects_noise() {
    let sched = ScheduleParams::scaled_linear(10).build().unwrap();
    let x = Image::filled(2, 2, 0.1);
    let z = Image::filled(2, 2, 1.0);
    assert!(matches!(reverse_step(&x, 1, &x, Some(&z), &sched), Err(Error::Contract(_))));
    assert!(reverse_step(&x, 1, &x, Some(&Image::filled(2, 2, 0.0)), &sched).is_ok());
    assert!(reverse_step(&x, 2, &x, Some(&z), &sched).is_ok());
    assert!(reverse_step(&x, 0, &x, None, &sched).is_err());
    assert!(reverse_step(&x, 11, &x, None, &sched).is_err());
}

#[test]
fn loss_is_mean_squared_error() {
    assert_eq!(loss_simple(&[1.0, -1.0], &[0.0, 1.0]).unwrap(), 2.5);
    assert!(loss_simple(&[1.0], &[]).is_err());
}

fn tiny_trainer(seed: u64, iterations: usize) -> Trainer {
    let config = TrainConfig { iterations, batch_size: 4, learning_rate: 2e-3, seed, ..Default::default() };
    Trainer::new(Predictor::init(PredictorConfig::tiny(), seed).unwrap(), config).unwrap()
}

fn tiny_data() -> Vec<ImagePair> {
    let sources: Vec<Image> = (0..4).map(|i| synthetic_scene(24, i)).collect();
    make_dataset(&sources, &SpeckleParams::new(1.0, 0).unwrap(), 8, 64, 1).unwrap()
}

#[test]
fn training_reduces_loss() {
    let data = tiny_data();
    let mut trainer = tiny_trainer(5, 400);
    let log = trainer.run(&data, |_, _| Ok(())).unwrap();
    let early: f64 = log[..20].iter().map(|r| r.loss).sum::<f64>() / 20.0;
    let late: f64 = log[log.len() - 50..].iter().map(|r| r.loss).sum::<f64>() / 50.0;
    assert!(late < 0.5 * early, "early {early}, late {late}");
    assert_eq!(trainer.iteration(), 400);
}

#[test]
fn training_is_deterministic() {
    let data = tiny_data();
    let mut a = tiny_trainer(1, 15);
    let mut b = tiny_trainer(1, 15);
    let la: Vec<f64> = a.run(&data, |_, _| Ok(())).unwrap().iter().map(|r| r.loss).collect();
    let lb: Vec<f64> = b.run(&data, |_, _| Ok(())).unwrap().iter().map(|r| r.loss).collect();
    assert_eq!(la, lb);
    assert_eq!(a.predictor(), b.predictor());
}

#[test]
fn non_finite_batch_aborts_without_update() {
    let mut pair = tiny_data().remove(0);
    pair.speckled.pixels_mut()[0] = f32::NAN;
    let mut trainer = tiny_trainer(2, 5);
    let before = trainer.predictor().clone();
    assert!(matches!(trainer.step(&[pair]), Err(Error::NonFinite(_))));
    assert_eq!(trainer.predictor(), &before);
}

proptest! {
    #[test]
    fn exact_recovery_at_first_step(seed in any::<u64>(), b0 in 1e-5f64..0.2, span in 0.0f64..0.5) {
        let sched = make_schedule(20, b0, (b0 + span).min(0.9)).unwrap();
        let mut rng = seeded(seed);
        let x0 = Image::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let eps = gaussian_image(6, 6, &mut rng);
        let x1 = q_sample(&x0, 1, &eps, &sched).unwrap();
        let rec = reverse_step(&x1, 1, &eps, None, &sched).unwrap();
        for (a, b) in rec.pixels().iter().zip(x0.pixels()) {
            prop_assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn q_sample_is_affine(seed in any::<u64>(), t in 1usize..=100) {
        let sched = ScheduleParams::scaled_linear(100).build().unwrap();
        let mut rng = seeded(seed);
        let x0 = gaussian_image(3, 3, &mut rng);
        let eps = gaussian_image(3, 3, &mut rng);
        let xt = q_sample(&x0, t, &eps, &sched).unwrap();
        let (a, b) = (sched.alpha_bar(t).sqrt(), (1.0 - sched.alpha_bar(t)).sqrt());
        for ((x, e), v) in x0.pixels().iter().zip(eps.pixels()).zip(xt.pixels()) {
            prop_assert!((a * f64::from(*x) + b * f64::from(*e) - f64::from(*v)).abs() < 1e-6);
        }
    }
}

#[test]
fn single_pair_overfit() {
    let pair = ImagePair::from_clean(synthetic_scene(32, 77), &SpeckleParams::new(1.0, 0).unwrap(), 3).unwrap();
    let config = TrainConfig { iterations: 500, batch_size: 2, seed: 4, ..Default::default() };
    let mut trainer = Trainer::new(Predictor::init(PredictorConfig::toy(), 4).unwrap(), config).unwrap();
    let log = trainer.run(std::slice::from_ref(&pair), |_, _| Ok(())).unwrap();
    let initial = log[0].loss;
    let late = log[450..].iter().map(|r| r.loss).sum::<f64>() / 50.0;
    assert!(late < 0.1 * initial, "initial {initial}, final window {late}");
}
