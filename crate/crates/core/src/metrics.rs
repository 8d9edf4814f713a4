//! Full-reference (PSNR, SSIM) and no-reference (ENL) image quality measures.
//!
//! All statistics are accumulated in double precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_RANGE: f64 = 1.0;

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    reference.check_same_dims(test)?;
    if !(peak > 0.0) {
        return Err(Error::Parameter(format!("peak must be positive, got {peak}")));
    }
    let mse = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - mid).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable Gaussian filter over every full window placement ("valid" mode).
fn filter_valid(values: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = kernel.iter().enumerate().map(|(k, &g)| g * values[r * w + c + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = kernel.iter().enumerate().map(|(k, &g)| g * rows[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// `K1 = 0.01`, `K2 = 0.03` and dynamic range 1.
pub fn ssim(reference: &Image, test: &Image) -> Result<f64> {
    reference.check_same_dims(test)?;
    let (h, w) = reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Dimension(format!("SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")));
    }
    let kernel = gaussian_window();
    let x: Vec<f64> = reference.pixels().iter().map(|&v| f64::from(v)).collect();
    let y: Vec<f64> = test.pixels().iter().map(|&v| f64::from(v)).collect();
    let product = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_x = filter_valid(&x, h, w, &kernel);
    let mu_y = filter_valid(&y, h, w, &kernel);
    let xx = filter_valid(&product(&x, &x), h, w, &kernel);
    let yy = filter_valid(&product(&y, &y), h, w, &kernel);
    let xy = filter_valid(&product(&x, &y), h, w, &kernel);

    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = xx[i] - mx * mx;
            let var_y = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// Rectangular region of an image, used for ENL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl RegionSpec {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self { top, left, height, width }
    }

    pub fn whole(image: &Image) -> Self {
        Self::new(0, 0, image.height(), image.width())
    }

    pub fn validate(&self, image: &Image) -> Result<()> {
        if self.height * self.width < 2 {
            return Err(Error::Parameter(format!("region {self:?} must cover at least two pixels")));
        }
        if self.top + self.height > image.height() || self.left + self.width > image.width() {
            return Err(Error::Dimension(format!(
                "region {self:?} exceeds {}x{} image",
                image.height(),
                image.width()
            )));
        }
        Ok(())
    }
}

/// Equivalent number of looks `mean² / variance` over `region` (population variance).
pub fn enl(image: &Image, region: &RegionSpec) -> Result<f64> {
    region.validate(image)?;
    let values: Vec<f64> = (region.top..region.top + region.height)
        .flat_map(|r| (region.left..region.left + region.width).map(move |c| (r, c)))
        .map(|(r, c)| f64::from(image.get(r, c)))
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateRegion(format!("region {region:?} has zero variance")));
    }
    Ok(mean * mean / var)
}
