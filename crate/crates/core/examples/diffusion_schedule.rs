//! The forward noising process and a single reverse step.

use std::error::Error;

use sardiff::diffusion::{q_sample, reverse_step, ScheduleParams};
use sardiff::rng::{gaussian_image, seeded};
use sardiff::scene::synthetic_scene;

fn main() -> Result<(), Box<dyn Error>> {
    let sched = ScheduleParams::scaled_linear(100).build()?;
    println!("  t    beta     alpha_bar  sigma");
    for t in [1, 10, 25, 50, 75, 100] {
        println!("{t:>3}  {:.5}  {:.6}   {:.4}", sched.beta(t), sched.alpha_bar(t), sched.sigma(t));
    }

    let x0 = synthetic_scene(32, 2).to_signed();
    let mut rng = seeded(0);
    let eps = gaussian_image(32, 32, &mut rng);
    for t in [1, 50, 100] {
        let xt = q_sample(&x0, t, &eps, &sched)?;
        let corr = x0.pixels().iter().zip(xt.pixels()).map(|(a, b)| f64::from(a * b)).sum::<f64>()
            / (x0.pixels().iter().map(|a| f64::from(a * a)).sum::<f64>() * xt.pixels().iter().map(|b| f64::from(b * b)).sum::<f64>()).sqrt();
        println!("t={t:>3}: cosine(x0, x_t) = {corr:.3}");
    }

    // With the true noise, the last reverse step gives the clean image back.
    let x1 = q_sample(&x0, 1, &eps, &sched)?;
    let back = reverse_step(&x1, 1, &eps, None, &sched)?;
    let err = back.pixels().iter().zip(x0.pixels()).fold(0.0f32, |m, (a, b)| m.max((a - b).abs()));
    println!("exact recovery at t=1: max abs error {err:.2e}");
    Ok(())
}
