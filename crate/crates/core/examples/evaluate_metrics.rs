//! PSNR, SSIM and ENL on a few hand-made cases.

use std::error::Error;

use sardiff::metrics::{enl, psnr, ssim, RegionSpec};
use sardiff::scene::synthetic_scene;
use sardiff::speckle::{ImagePair, SpeckleParams};
use sardiff::Image;

fn main() -> Result<(), Box<dyn Error>> {
    let a = Image::filled(16, 16, 0.5);
    let b = Image::filled(16, 16, 0.25);
    println!("identical images: PSNR {} dB", psnr(&a, &a, 1.0)?);
    println!("offset by 0.1: PSNR {:.2} dB", psnr(&Image::filled(16, 16, 0.4), &a, 1.0)?);
    println!("constants 0.5 vs 0.25: SSIM {:.6}", ssim(&a, &b)?);

    let clean = synthetic_scene(64, 3);
    for looks in [1.0, 4.0, 16.0] {
        let pair = ImagePair::from_clean(clean.clone(), &SpeckleParams::new(looks, 0)?, 1)?;
        println!("L={looks:>4}: PSNR {:.2} dB  SSIM {:.3}", psnr(&clean, &pair.speckled, 1.0)?, ssim(&clean, &pair.speckled)?);
    }

    let flat = ImagePair::from_clean(Image::filled(128, 128, 0.3), &SpeckleParams::new(4.0, 2)?, 4)?;
    let region = RegionSpec::new(16, 16, 96, 96);
    println!("ENL of 4-look speckle over {region:?}: {:.2}", enl(&flat.speckled, &region)?);
    Ok(())
}
