//! Multiplicative Gamma speckle on a synthetic scene.
//!
//! ```text
//! cargo run --release --example simulate_speckle -- [out_dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use sardiff::cli::save_image;
use sardiff::metrics::{enl, RegionSpec};
use sardiff::scene::synthetic_scene;
use sardiff::speckle::{make_dataset, sample_speckle, ImagePair, SpeckleParams};
use sardiff::Image;

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from);

    for looks in [1.0, 4.0, 16.0] {
        let params = SpeckleParams::new(looks, 7)?;
        let field = sample_speckle(256, 256, &params, &mut params.rng())?;
        let n = field.len() as f64;
        let mean = field.pixels().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let var = field.pixels().iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
        println!("L={looks:>4}: mean {mean:.4}  variance {var:.4} (expected {:.4})", 1.0 / looks);
    }

    // A flat region keeps roughly L looks after speckling.
    let flat = ImagePair::from_clean(Image::filled(128, 128, 0.4), &SpeckleParams::new(4.0, 0)?, 3)?;
    println!("ENL of a 4-look flat region: {:.2}", enl(&flat.speckled, &RegionSpec::whole(&flat.speckled))?);

    let scene = synthetic_scene(96, 11);
    let pairs = make_dataset(&[scene.clone()], &SpeckleParams::new(1.0, 0)?, 32, 4, 5)?;
    println!("drew {} 32x32 training pairs", pairs.len());

    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        save_image(dir.join("scene.png"), &scene)?;
        let single = ImagePair::from_clean(scene, &SpeckleParams::new(1.0, 0)?, 1)?;
        save_image(dir.join("scene_speckled_L1.png"), &single.speckled)?;
        for (i, p) in pairs.iter().enumerate() {
            save_image(dir.join(format!("patch{i}_clean.png")), &p.clean)?;
            save_image(dir.join(format!("patch{i}_speckled.png")), &p.speckled)?;
        }
        println!("images written to {}", dir.display());
    }
    Ok(())
}
