use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters of the conditional noise predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub base_channels: usize,
    /// Width multiplier per resolution level; level `l` runs at `input_size / 2^l`.
    pub channel_mult: Vec<usize>,
    pub res_blocks: usize,
    /// Spatial sizes at which encoder/decoder levels get a self-attention block.
    pub attention_resolutions: Vec<usize>,
    pub time_dim: usize,
    pub input_size: usize,
    pub norm_groups: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl PredictorConfig {
    /// 32 base channels, three levels, attention at the coarsest level.
    pub fn desk() -> Self {
        Self {
            base_channels: 32,
            channel_mult: vec![1, 2, 4],
            res_blocks: 2,
            attention_resolutions: vec![16],
            time_dim: 128,
            input_size: 64,
            norm_groups: 8,
        }
    }

    /// Reduced network that trains on 32×32 patches in minutes on one CPU core.
    pub fn toy() -> Self {
        Self {
            base_channels: 16,
            channel_mult: vec![1, 2, 2],
            res_blocks: 1,
            attention_resolutions: vec![8],
            time_dim: 32,
            input_size: 32,
            norm_groups: 8,
        }
    }

    /// Smallest useful network: 8×8 input, two levels. Used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            base_channels: 8,
            channel_mult: vec![1, 2],
            res_blocks: 1,
            attention_resolutions: vec![4],
            time_dim: 8,
            input_size: 8,
            norm_groups: 8,
        }
    }

    pub fn levels(&self) -> usize {
        self.channel_mult.len()
    }

    pub fn level_channels(&self, level: usize) -> usize {
        self.base_channels * self.channel_mult[level]
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.input_size >> level
    }

    pub fn has_attention(&self, level: usize) -> bool {
        self.attention_resolutions.contains(&self.level_size(level))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.base_channels == 0 || self.channel_mult.is_empty() || self.channel_mult.contains(&0) {
            return bad("base_channels and every channel multiplier must be positive".into());
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return bad(format!("time_dim must be even and positive, got {}", self.time_dim));
        }
        let factor = 1usize << (self.levels() - 1);
        if self.input_size == 0 || self.input_size % factor != 0 {
            return bad(format!("input_size {} is not divisible by 2^(levels-1) = {factor}", self.input_size));
        }
        let sizes: Vec<usize> = (0..self.levels()).map(|l| self.level_size(l)).collect();
        if let Some(r) = self.attention_resolutions.iter().find(|r| !sizes.contains(r)) {
            return bad(format!("attention resolution {r} is not one of the feature-map sizes {sizes:?}"));
        }
        if self.norm_groups == 0 {
            return bad("norm_groups must be positive".into());
        }
        if self.base_channels % self.norm_groups != 0 {
            return bad(format!("{} base channels are not divisible into {} groups", self.base_channels, self.norm_groups));
        }
        if let Some(c) = (0..self.levels()).map(|l| self.level_channels(l)).find(|c| c % self.norm_groups != 0) {
            return bad(format!("{c} channels are not divisible into {} groups", self.norm_groups));
        }
        Ok(())
    }

    /// Same architecture at a different spatial size. Attention stays at the same levels,
    /// so parameters are interchangeable between the two configs.
    pub fn with_input_size(&self, input_size: usize) -> Result<Self> {
        let attention_levels: Vec<usize> = (0..self.levels()).filter(|&l| self.has_attention(l)).collect();
        let mut cfg = Self { input_size, ..self.clone() };
        cfg.attention_resolutions = attention_levels.iter().map(|&l| input_size >> l).collect();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of scalars in the parameter set, counted layer by layer.
    pub fn param_count(&self) -> usize {
        let d = self.time_dim;
        let conv = |ci: usize, co: usize, k: usize| co * ci * k * k + co;
        let norm = |c: usize| 2 * c;
        let linear = |i: usize, o: usize| i * o + o;
        let res = |ci: usize, co: usize| {
            norm(ci) + conv(ci, co, 3) + linear(d, co) + norm(co) + conv(co, co, 3) + if ci != co { conv(ci, co, 1) } else { 0 }
        };
        let attn = |c: usize| norm(c) + 4 * conv(c, c, 1);

        let mut total = 2 * linear(d, d) + conv(2, self.base_channels, 3);
        let mut skips = vec![self.base_channels];
        let mut ch = self.base_channels;
        for level in 0..self.levels() {
            let out = self.level_channels(level);
            for _ in 0..self.res_blocks {
                total += res(ch, out) + if self.has_attention(level) { attn(out) } else { 0 };
                ch = out;
                skips.push(ch);
            }
            if level + 1 < self.levels() {
                total += res(ch, ch) + conv(ch, ch, 1);
                skips.push(ch);
            }
        }
        total += 2 * res(ch, ch) + attn(ch);
        for level in (0..self.levels()).rev() {
            let out = self.level_channels(level);
            for _ in 0..=self.res_blocks {
                let skip = skips.pop().expect("one skip per decoder block");
                total += res(ch + skip, out) + if self.has_attention(level) { attn(out) } else { 0 };
                ch = out;
            }
            if level > 0 {
                let next = self.level_channels(level - 1);
                total += res(ch, next);
                ch = next;
            }
        }
        total + norm(ch) + conv(ch, 1, 3)
    }
}
