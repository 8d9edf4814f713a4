//! Multiplicative speckle: `Y = X·N` with `N ~ Gamma(shape = L, rate = L)`.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleParams {
    /// Number of looks; speckle has unit mean and variance `1/looks`.
    pub looks: f64,
    pub seed: u64,
}

impl SpeckleParams {
    pub fn new(looks: f64, seed: u64) -> Result<Self> {
        let params = Self { looks, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.looks >= 1.0) || !self.looks.is_finite() {
            return Err(Error::Parameter(format!("number of looks must be >= 1, got {}", self.looks)));
        }
        Ok(())
    }

    pub fn rng(&self) -> SeededRng {
        rng::seeded(self.seed)
    }
}

/// One draw from `Gamma(shape, rate)` for `shape >= 1` (Marsaglia–Tsang squeeze).
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut impl Rng) -> f64 {
    debug_assert!(shape >= 1.0 && rate > 0.0);
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v / rate;
        }
    }
}

/// Field of i.i.d. unit-mean speckle values.
pub fn sample_speckle(height: usize, width: usize, params: &SpeckleParams, rng: &mut impl Rng) -> Result<Image> {
    params.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::Dimension("speckle field must be non-empty".into()));
    }
    let looks = params.looks;
    Ok(Image::from_fn(height, width, |_, _| loop {
        // f32 rounding can underflow an extreme draw to zero; the field must stay positive.
        let v = sample_gamma(looks, looks, rng) as f32;
        if v > 0.0 {
            break v;
        }
    }))
}

/// `clean ⊙ field` before clipping, evaluated exactly in double precision.
pub fn speckle_product(clean: &Image, field: &Image) -> Result<Vec<f64>> {
    clean.check_same_dims(field)?;
    Ok(clean.pixels().iter().zip(field.pixels()).map(|(&x, &n)| f64::from(x) * f64::from(n)).collect())
}

/// `clip(clean ⊙ field, 0, 1)`.
pub fn apply_speckle(clean: &Image, field: &Image) -> Result<Image> {
    let product = speckle_product(clean, field)?;
    Image::new(clean.height(), clean.width(), product.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect())
}

/// A clean patch, its speckled observation and, when simulated in memory, the speckle
/// field that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub clean: Image,
    pub speckled: Image,
    /// `None` for pairs read back from disk.
    pub field: Option<Image>,
    pub looks: f64,
    /// Sub-seed the patch offset and speckle were drawn from.
    pub seed: u64,
}

impl ImagePair {
    pub fn from_clean(clean: Image, params: &SpeckleParams, seed: u64) -> Result<Self> {
        let mut rng = rng::seeded(seed);
        Self::draw(clean, params, seed, &mut rng)
    }

    fn draw(clean: Image, params: &SpeckleParams, seed: u64, rng: &mut impl Rng) -> Result<Self> {
        let field = sample_speckle(clean.height(), clean.width(), params, rng)?;
        let speckled = apply_speckle(&clean, &field)?;
        Ok(Self { clean, speckled, field: Some(field), looks: params.looks, seed })
    }

    /// Pair whose speckle field is unknown, e.g. one loaded from image files.
    pub fn observed(clean: Image, speckled: Image, looks: f64, seed: u64) -> Result<Self> {
        clean.check_same_dims(&speckled)?;
        Ok(Self { clean, speckled, field: None, looks, seed })
    }

    /// `clean ⊙ field` before clipping, if the field is known.
    pub fn pre_clip(&self) -> Option<Vec<f64>> {
        self.field.as_ref().map(|f| speckle_product(&self.clean, f).expect("pair images share dimensions"))
    }
}

/// Draws `count` square patches at uniformly random offsets from `sources`, each with
/// independent speckle. Patch `k` uses the sub-seed `derive_seed(seed, k)`.
pub fn make_dataset(sources: &[Image], params: &SpeckleParams, patch_size: usize, count: usize, seed: u64) -> Result<Vec<ImagePair>> {
    params.validate()?;
    if count == 0 {
        return Err(Error::Parameter("dataset count must be >= 1".into()));
    }
    if patch_size == 0 {
        return Err(Error::Parameter("patch size must be >= 1".into()));
    }
    if sources.is_empty() {
        return Err(Error::Parameter("no source images".into()));
    }
    let usable: Vec<&Image> = sources
        .iter()
        .enumerate()
        .filter_map(|(i, img)| {
            let fits = img.height() >= patch_size && img.width() >= patch_size;
            if !fits {
                warn!("skipping source image {i} ({}x{}): smaller than {patch_size}x{patch_size} patch", img.height(), img.width());
            }
            fits.then_some(img)
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Parameter(format!("no source image is at least {patch_size}x{patch_size}")));
    }

    (0..count)
        .map(|k| {
            let sub_seed = rng::derive_seed(seed, k as u64);
            let mut rng = rng::seeded(sub_seed);
            let src = usable[rng.random_range(0..usable.len())];
            let top = rng.random_range(0..=src.height() - patch_size);
            let left = rng.random_range(0..=src.width() - patch_size);
            let clean = src.crop(top, left, patch_size, patch_size)?;
            ImagePair::draw(clean, params, sub_seed, &mut rng)
        })
        .collect()
}
