use sardiff_tensor::Tensor;

use crate::error::{Error, Result};

/// Single-channel real-valued image, row-major.
///
/// Intensities live in `[0, 1]`; inside the diffusion chain images are carried in
/// the signed range `[-1, 1]` (see [`Image::to_signed`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!("image must be non-empty, got {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::Dimension(format!("{height}x{width} image needs {} values, got {}", height * width, data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        assert!(height > 0 && width > 0, "image must be non-empty");
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(height > 0 && width > 0, "image must be non-empty");
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f32, f32) -> f32) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { height: self.height, width: self.width, data })
    }

    pub fn check_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "image sizes differ: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// `top..top+height`, `left..left+width` sub-image.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::Dimension(format!(
                "crop {height}x{width} at ({top}, {left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(height, width, |r, c| self.get(top + r, left + c)))
    }

    /// `[0, 1] -> [-1, 1]`.
    pub fn to_signed(&self) -> Self {
        self.map(|v| 2.0 * v - 1.0)
    }

    /// `[-1, 1] -> [0, 1]`, clamped.
    pub fn from_signed(&self) -> Self {
        self.map(|v| ((v + 1.0) * 0.5).clamp(0.0, 1.0))
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Snaps intensities to the nearest 8-bit level, i.e. a save/load roundtrip.
    pub fn quantize_8bit(&self) -> Self {
        self.map(|v| f32::from(to_byte(v)) / 255.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_byte(v)).collect()
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| f32::from(b) / 255.0).collect())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }

    /// Stacks same-sized images into an `N×1×H×W` tensor.
    pub fn stack(images: &[&Image]) -> Result<Tensor<f32>> {
        let first = images.first().ok_or_else(|| Error::Dimension("cannot stack zero images".into()))?;
        let mut data = Vec::with_capacity(images.len() * first.len());
        for img in images {
            first.check_same_dims(img)?;
            data.extend_from_slice(&img.data);
        }
        Ok(Tensor::new(vec![images.len(), 1, first.height, first.width], data)?)
    }

    /// Splits an `N×1×H×W` tensor into images.
    pub fn unstack(tensor: &Tensor<f32>) -> Result<Vec<Image>> {
        let (_, c, h, w) = tensor.dims4("unstack")?;
        if c != 1 {
            return Err(Error::Dimension(format!("expected one channel, got {c}")));
        }
        tensor.data().chunks_exact(h * w).map(|chunk| Image::new(h, w, chunk.to_vec())).collect()
    }
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
