//! U-shaped conditional noise predictor.
//!
//! The network is described once as a flat [`Step`] plan; parameter layout,
//! initialization and the forward pass all walk the same plan.

use std::collections::BTreeMap;

use rand::Rng;
use sardiff_tensor::{Scalar, Tape, Tensor, Var};

use super::config::PredictorConfig;
use super::embed::sinusoidal_embedding;
use super::params::PredictorParams;
use crate::error::{Error, Result};
use crate::rng;

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resample {
    None,
    Down,
    Up,
}

#[derive(Debug, Clone)]
enum Step {
    Res { name: String, cin: usize, cout: usize, resample: Resample },
    Attn { name: String, channels: usize },
    PushSkip,
    ConcatSkip,
}

fn plan(cfg: &PredictorConfig) -> Vec<Step> {
    let mut steps = vec![Step::PushSkip];
    let mut ch = cfg.base_channels;
    let res = |name: String, cin, cout, resample| Step::Res { name, cin, cout, resample };
    for level in 0..cfg.levels() {
        let out = cfg.level_channels(level);
        for b in 0..cfg.res_blocks {
            steps.push(res(format!("enc.{level}.{b}"), ch, out, Resample::None));
            ch = out;
            if cfg.has_attention(level) {
                steps.push(Step::Attn { name: format!("enc.{level}.{b}.attn"), channels: ch });
            }
            steps.push(Step::PushSkip);
        }
        if level + 1 < cfg.levels() {
            steps.push(res(format!("enc.{level}.down"), ch, ch, Resample::Down));
            steps.push(Step::PushSkip);
        }
    }
    steps.push(res("mid.0".into(), ch, ch, Resample::None));
    steps.push(Step::Attn { name: "mid.attn".into(), channels: ch });
    steps.push(res("mid.1".into(), ch, ch, Resample::None));

    let mut skip_channels = skip_widths(cfg);
    for level in (0..cfg.levels()).rev() {
        let out = cfg.level_channels(level);
        for b in 0..=cfg.res_blocks {
            let skip = skip_channels.pop().expect("balanced skips");
            steps.push(Step::ConcatSkip);
            steps.push(res(format!("dec.{level}.{b}"), ch + skip, out, Resample::None));
            ch = out;
            if cfg.has_attention(level) {
                steps.push(Step::Attn { name: format!("dec.{level}.{b}.attn"), channels: ch });
            }
        }
        if level > 0 {
            let next = cfg.level_channels(level - 1);
            steps.push(res(format!("dec.{level}.up"), ch, next, Resample::Up));
            ch = next;
        }
    }
    steps
}

fn skip_widths(cfg: &PredictorConfig) -> Vec<usize> {
    let mut widths = vec![cfg.base_channels];
    for level in 0..cfg.levels() {
        widths.extend(std::iter::repeat_n(cfg.level_channels(level), cfg.res_blocks));
        if level + 1 < cfg.levels() {
            widths.push(cfg.level_channels(level));
        }
    }
    widths
}

fn output_channels(cfg: &PredictorConfig) -> usize {
    cfg.level_channels(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// Uniform with variance `1/fan_in`.
    FanIn(usize),
    Zeros,
    Ones,
}

/// One learnable tensor slot of the architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    init: Init,
}

struct LayoutBuilder(Vec<ParamSlot>);

impl LayoutBuilder {
    fn slot(&mut self, name: String, shape: Vec<usize>, init: Init) {
        self.0.push(ParamSlot { name, shape, init });
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize) {
        self.slot(format!("{name}.weight"), vec![cout, cin, k, k], Init::FanIn(cin * k * k));
        self.slot(format!("{name}.bias"), vec![cout], Init::Zeros);
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) {
        self.slot(format!("{name}.weight"), vec![fan_out, fan_in], Init::FanIn(fan_in));
        self.slot(format!("{name}.bias"), vec![fan_out], Init::Zeros);
    }

    fn norm(&mut self, name: &str, c: usize) {
        self.slot(format!("{name}.scale"), vec![c], Init::Ones);
        self.slot(format!("{name}.offset"), vec![c], Init::Zeros);
    }
}

/// Every parameter slot, in plan order.
pub fn layout(cfg: &PredictorConfig) -> Vec<ParamSlot> {
    let d = cfg.time_dim;
    let mut b = LayoutBuilder(Vec::new());
    b.linear("time.fc1", d, d);
    b.linear("time.fc2", d, d);
    b.conv("input.conv", 2, cfg.base_channels, 3);
    for step in plan(cfg) {
        match step {
            Step::Res { name, cin, cout, resample } => {
                b.norm(&format!("{name}.norm1"), cin);
                b.conv(&format!("{name}.conv1"), cin, cout, 3);
                b.linear(&format!("{name}.time"), d, cout);
                b.norm(&format!("{name}.norm2"), cout);
                b.conv(&format!("{name}.conv2"), cout, cout, 3);
                if cin != cout || resample == Resample::Down {
                    b.conv(&format!("{name}.skip"), cin, cout, 1);
                }
            }
            Step::Attn { name, channels } => {
                b.norm(&format!("{name}.norm"), channels);
                for proj in ["q", "k", "v", "proj"] {
                    b.conv(&format!("{name}.{proj}"), channels, channels, 1);
                }
            }
            Step::PushSkip | Step::ConcatSkip => {}
        }
    }
    let ch = output_channels(cfg);
    b.norm("out.norm", ch);
    b.slot("out.conv.weight".into(), vec![1, ch, 3, 3], Init::Zeros);
    b.slot("out.conv.bias".into(), vec![1], Init::Zeros);
    b.0
}

/// Fan-in scaled random initialization; the output convolution starts at zero.
pub fn init_params(cfg: &PredictorConfig, seed: u64) -> Result<PredictorParams<f32>> {
    cfg.validate()?;
    let mut rng = rng::seeded(seed);
    let tensors = layout(cfg)
        .into_iter()
        .map(|slot| {
            let tensor = match slot.init {
                Init::Zeros => Tensor::zeros(slot.shape),
                Init::Ones => Tensor::ones(slot.shape),
                Init::FanIn(fan_in) => {
                    let bound = (3.0 / fan_in as f32).sqrt();
                    Tensor::from_fn(slot.shape, |_| rng.random_range(-bound..bound))
                }
            };
            (slot.name, tensor)
        })
        .collect::<BTreeMap<_, _>>();
    Ok(PredictorParams::from_map(tensors))
}

/// Looks up parameter vars registered on a tape.
struct Weights<'t, S: Scalar> {
    vars: BTreeMap<String, Var<'t, S>>,
    groups: usize,
}

impl<'t, S: Scalar> Weights<'t, S> {
    fn get(&self, name: &str) -> Result<Var<'t, S>> {
        self.vars.get(name).copied().ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    fn has(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    fn conv(&self, x: &Var<'t, S>, name: &str, stride: usize, padding: usize) -> Result<Var<'t, S>> {
        let (w, b) = (self.get(&format!("{name}.weight"))?, self.get(&format!("{name}.bias"))?);
        Ok(x.conv2d(&w, Some(&b), stride, padding)?)
    }

    fn linear(&self, x: &Var<'t, S>, name: &str) -> Result<Var<'t, S>> {
        Ok(x.linear(&self.get(&format!("{name}.weight"))?, &self.get(&format!("{name}.bias"))?)?)
    }

    fn norm_act(&self, x: &Var<'t, S>, name: &str) -> Result<Var<'t, S>> {
        let (g, b) = (self.get(&format!("{name}.scale"))?, self.get(&format!("{name}.offset"))?);
        Ok(x.group_norm(&g, &b, self.groups, S::from_f64(NORM_EPS))?.silu())
    }

    fn res_block(&self, x: &Var<'t, S>, emb: &Var<'t, S>, name: &str, resample: Resample) -> Result<Var<'t, S>> {
        let mut h = self.norm_act(x, &format!("{name}.norm1"))?;
        if resample == Resample::Up {
            h = h.upsample_nearest2x()?;
        }
        let stride = if resample == Resample::Down { 2 } else { 1 };
        h = self.conv(&h, &format!("{name}.conv1"), stride, 1)?;
        h = h.add_channel_bias(&self.linear(emb, &format!("{name}.time"))?)?;
        h = self.norm_act(&h, &format!("{name}.norm2"))?;
        h = self.conv(&h, &format!("{name}.conv2"), 1, 1)?;

        let skip_name = format!("{name}.skip");
        let shortcut = match resample {
            Resample::Down => self.conv(x, &skip_name, 2, 0)?,
            Resample::Up => {
                let up = x.upsample_nearest2x()?;
                if self.has(&format!("{skip_name}.weight")) { self.conv(&up, &skip_name, 1, 0)? } else { up }
            }
            Resample::None if self.has(&format!("{skip_name}.weight")) => self.conv(x, &skip_name, 1, 0)?,
            Resample::None => *x,
        };
        Ok(shortcut.add(&h)?)
    }

    fn attention(&self, x: &Var<'t, S>, name: &str) -> Result<Var<'t, S>> {
        let (g, b) = (self.get(&format!("{name}.norm.scale"))?, self.get(&format!("{name}.norm.offset"))?);
        let h = x.group_norm(&g, &b, self.groups, S::from_f64(NORM_EPS))?;
        let q = self.conv(&h, &format!("{name}.q"), 1, 0)?;
        let k = self.conv(&h, &format!("{name}.k"), 1, 0)?;
        let v = self.conv(&h, &format!("{name}.v"), 1, 0)?;
        let a = q.spatial_attention(&k, &v)?;
        Ok(x.add(&self.conv(&a, &format!("{name}.proj"), 1, 0)?)?)
    }
}

/// Records the predictor's forward pass on `tape`.
///
/// `x_t` and `cond` are `N×1×S×S` with `S = cfg.input_size`; `t` holds one timestep
/// per sample. Every parameter is registered on the tape under its own name.
pub fn forward<'t, S: Scalar>(
    tape: &'t Tape<S>,
    params: &PredictorParams<S>,
    cfg: &PredictorConfig,
    x_t: Tensor<S>,
    cond: Tensor<S>,
    t: &[usize],
) -> Result<Var<'t, S>> {
    let (n, c, h, w) = x_t.dims4("predict_noise")?;
    if x_t.shape() != cond.shape() {
        return Err(Error::Dimension(format!("x_t {:?} and conditioning {:?} differ", x_t.shape(), cond.shape())));
    }
    if c != 1 || h != cfg.input_size || w != cfg.input_size {
        return Err(Error::Dimension(format!(
            "predictor expects N×1×{s}×{s} inputs, got {:?}",
            x_t.shape(),
            s = cfg.input_size
        )));
    }
    if t.len() != n {
        return Err(Error::Dimension(format!("{n} samples but {} timesteps", t.len())));
    }

    let weights = Weights {
        vars: params.iter().map(|(name, tensor)| (name.clone(), tape.param(name.clone(), tensor))).collect(),
        groups: cfg.norm_groups,
    };

    let d = cfg.time_dim;
    let mut sinusoids = Vec::with_capacity(n * d);
    for &step in t {
        sinusoids.extend(sinusoidal_embedding(step as f64, d)?.into_iter().map(S::from_f64));
    }
    let emb = tape.constant(Tensor::new(vec![n, d], sinusoids)?);
    let emb = weights.linear(&weights.linear(&emb, "time.fc1")?.silu(), "time.fc2")?.silu();

    let x = tape.constant(x_t).concat_channels(&tape.constant(cond))?;
    let mut h = weights.conv(&x, "input.conv", 1, 1)?;
    let mut skips = Vec::new();
    for step in plan(cfg) {
        match step {
            Step::PushSkip => skips.push(h),
            Step::ConcatSkip => {
                let skip = skips.pop().ok_or_else(|| Error::Config("unbalanced skip connections".into()))?;
                h = h.concat_channels(&skip)?;
            }
            Step::Res { name, resample, .. } => h = weights.res_block(&h, &emb, &name, resample)?,
            Step::Attn { name, .. } => h = weights.attention(&h, &name)?,
        }
    }
    let h = weights.norm_act(&h, "out.norm")?;
    weights.conv(&h, "out.conv", 1, 1)
}
