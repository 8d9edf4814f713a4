use crate::error::{Error, Result};

/// Sinusoidal timestep encoding: `sin(t·ω_i)` for the first half, `cos(t·ω_i)` for the
/// second, with `ω_i = 10000^(−2i/dim)`.
pub fn sinusoidal_embedding(t: f64, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Parameter(format!("embedding dimension must be even and positive, got {dim}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("timestep must be non-negative, got {t}")));
    }
    let half = dim / 2;
    let freqs: Vec<f64> = (0..half).map(|i| 10000f64.powf(-2.0 * i as f64 / dim as f64)).collect();
    Ok(freqs.iter().map(|w| (t * w).sin()).chain(freqs.iter().map(|w| (t * w).cos())).collect())
}
