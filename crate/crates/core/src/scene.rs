//! Synthetic piecewise-smooth scenes used as clean training and test imagery.

use rand::Rng;

use crate::image::Image;
use crate::rng;

/// A `size×size` scene: a tilted background with overlaid rectangles, ellipses and
/// occasional low-frequency stripes, quantized to the 8-bit grid.
pub fn synthetic_scene(size: usize, seed: u64) -> Image {
    let mut rng = rng::seeded(seed);
    let s = size as f32;
    let base = rng.random_range(0.2..0.8f32);
    let (gx, gy) = (rng.random_range(-0.3..0.3f32), rng.random_range(-0.3..0.3f32));
    let mut img = Image::from_fn(size, size, |r, c| base + gx * (c as f32 / s - 0.5) + gy * (r as f32 / s - 0.5));

    let shapes = rng.random_range(3..7);
    for _ in 0..shapes {
        let level = rng.random_range(0.05..0.95f32);
        let (cy, cx) = (rng.random_range(0.0..s), rng.random_range(0.0..s));
        let (ry, rx) = (rng.random_range(0.08 * s..0.35 * s), rng.random_range(0.08 * s..0.35 * s));
        let ellipse = rng.random_bool(0.5);
        let (h, w) = img.dims();
        for r in 0..h {
            for c in 0..w {
                let (dy, dx) = ((r as f32 - cy) / ry, (c as f32 - cx) / rx);
                let inside = if ellipse { dy * dy + dx * dx <= 1.0 } else { dy.abs() <= 1.0 && dx.abs() <= 1.0 };
                if inside {
                    img.pixels_mut()[r * w + c] = level;
                }
            }
        }
    }

    if rng.random_bool(0.3) {
        let amplitude = rng.random_range(0.05..0.15f32);
        let period = rng.random_range(0.3 * s..0.8 * s);
        let angle = rng.random_range(0.0..std::f32::consts::PI);
        let (sa, ca) = angle.sin_cos();
        let w = img.width();
        for (i, v) in img.pixels_mut().iter_mut().enumerate() {
            let (r, c) = ((i / w) as f32, (i % w) as f32);
            *v += amplitude * (std::f32::consts::TAU * (c * ca + r * sa) / period).sin();
        }
    }

    img.map(|v| v.clamp(0.03, 0.97)).quantize_8bit()
}
