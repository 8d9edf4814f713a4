//! Seeded random streams. Every stochastic component draws from a ChaCha stream
//! derived from an explicit seed so results are reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::image::Image;

pub type SeededRng = ChaCha8Rng;

/// Mixes a run seed with a stream index into an independent sub-seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

pub fn substream(seed: u64, stream: u64) -> SeededRng {
    seeded(derive_seed(seed, stream))
}

/// Image of i.i.d. standard normal draws.
pub fn gaussian_image(height: usize, width: usize, rng: &mut impl Rng) -> Image {
    Image::from_fn(height, width, |_, _| rng.sample::<f32, _>(StandardNormal))
}
