//! Cyclic shifts and the cycle-spinning ensemble despeckler.

use serde::{Deserialize, Serialize};

use crate::diffusion::{clip_denoised, reverse_step, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::predictor::NoisePredictor;
use crate::rng::{self, gaussian_image};

/// Maximum number of chains evaluated in one predictor call.
const CHAIN_BATCH: usize = 16;

/// Ordered `(row, column)` shifts of a cycle-spinning ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleSpinPlan {
    shifts: Vec<(i64, i64)>,
}

impl Default for CycleSpinPlan {
    /// Paired shifts `(0,0), (100,100), (200,200)`.
    fn default() -> Self {
        Self::paired(&[0, 100, 200])
    }
}

impl CycleSpinPlan {
    pub fn new(shifts: Vec<(i64, i64)>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::Parameter("cycle-spin plan needs at least one shift".into()));
        }
        Ok(Self { shifts })
    }

    /// `(o_i, o_i)` for each offset.
    pub fn paired(offsets: &[i64]) -> Self {
        Self { shifts: offsets.iter().map(|&o| (o, o)).collect() }
    }

    /// Every `(u, v)` combination, rows outermost.
    pub fn cross(rows: &[i64], cols: &[i64]) -> Self {
        Self { shifts: rows.iter().flat_map(|&u| cols.iter().map(move |&v| (u, v))).collect() }
    }

    /// Parses `"u1,v1;u2,v2;..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let shifts = text
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|pair| {
                let (u, v) = pair.split_once(',').ok_or_else(|| Error::Usage(format!("shift `{pair}` is not `u,v`")))?;
                let parse = |s: &str| s.trim().parse::<i64>().map_err(|e| Error::Usage(format!("shift `{pair}`: {e}")));
                Ok((parse(u)?, parse(v)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(shifts)
    }

    pub fn shifts(&self) -> &[(i64, i64)] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// Shifts reduced into `0..height` × `0..width`.
    pub fn reduced(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        self.shifts
            .iter()
            .map(|&(u, v)| (u.rem_euclid(height as i64) as usize, v.rem_euclid(width as i64) as usize))
            .collect()
    }
}

impl std::fmt::Display for CycleSpinPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.shifts.iter().map(|(u, v)| format!("{u},{v}")).collect();
        f.write_str(&parts.join(";"))
    }
}

/// Reverse-chain settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Clip the implied clean estimate to `[−1, 1]` before each step
    /// (see [`clip_denoised`]). Off gives the plain ancestral update.
    pub clip_denoised: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { clip_denoised: true }
    }
}

/// `out[r][c] = x[(r − u) mod H][(c − v) mod W]`.
pub fn cyclic_shift(x: &Image, u: i64, v: i64) -> Image {
    let (h, w) = x.dims();
    let du = u.rem_euclid(h as i64) as usize;
    let dv = v.rem_euclid(w as i64) as usize;
    Image::from_fn(h, w, |r, c| x.get((r + h - du) % h, (c + w - dv) % w))
}

/// Runs one full reverse chain per conditioning image, from `x_T ~ N(0, I)` down to
/// `x_0`, all in the signed range. Chain `i` draws its initial state and per-step noise
/// from a stream seeded with `seeds[i]`.
pub fn run_chains(
    conds: &[Image],
    seeds: &[u64],
    predictor: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
    options: SamplerOptions,
) -> Result<Vec<Image>> {
    if conds.len() != seeds.len() {
        return Err(Error::Parameter(format!("{} conditioning images but {} seeds", conds.len(), seeds.len())));
    }
    let size = predictor.input_size();
    if let Some(bad) = conds.iter().find(|c| c.dims() != (size, size)) {
        return Err(Error::Dimension(format!(
            "image is {}x{} but the predictor expects {size}x{size}",
            bad.height(),
            bad.width()
        )));
    }
    let mut outputs = Vec::with_capacity(conds.len());
    for (cond_chunk, seed_chunk) in conds.chunks(CHAIN_BATCH).zip(seeds.chunks(CHAIN_BATCH)) {
        let mut rngs: Vec<_> = seed_chunk.iter().map(|&s| rng::seeded(s)).collect();
        let mut states: Vec<Image> = rngs.iter_mut().map(|r| gaussian_image(size, size, r)).collect();
        let cond = Image::stack(&cond_chunk.iter().collect::<Vec<_>>())?;
        for t in (1..=sched.steps()).rev() {
            let x_t = Image::stack(&states.iter().collect::<Vec<_>>())?;
            let eps_hat = Image::unstack(&predictor.predict(&x_t, &cond, &vec![t; states.len()])?)?;
            for ((state, eps), rng) in states.iter_mut().zip(&eps_hat).zip(&mut rngs) {
                let eps = if options.clip_denoised { clip_denoised(state, t, eps, sched)? } else { eps.clone() };
                let z = (t > 1).then(|| gaussian_image(size, size, rng));
                *state = reverse_step(state, t, &eps, z.as_ref(), sched)?;
            }
        }
        outputs.extend(states);
    }
    Ok(outputs)
}

/// Single reverse chain conditioned on the unshifted image, returned in `[0, 1]`.
pub fn despeckle_single(x_s: &Image, predictor: &dyn NoisePredictor, sched: &DiffusionSchedule, seed: u64) -> Result<Image> {
    let out = run_chains(&[x_s.to_signed()], &[rng::derive_seed(seed, 0)], predictor, sched, SamplerOptions::default())?;
    Ok(out[0].from_signed())
}

/// Cycle-spinning ensemble: for every shift, condition a chain on the shifted speckled
/// image, undo the shift on its output, and average the members in plan order.
/// Member `i` uses the chain seed `derive_seed(seed, i)`.
pub fn despeckle_cs(x_s: &Image, plan: &CycleSpinPlan, predictor: &dyn NoisePredictor, sched: &DiffusionSchedule, seed: u64) -> Result<Image> {
    Ok(despeckle_batch(&[(x_s.clone(), seed)], plan, predictor, sched, SamplerOptions::default())?.remove(0))
}

/// [`despeckle_cs`] over several `(image, seed)` inputs, sharing predictor calls.
pub fn despeckle_batch(
    inputs: &[(Image, u64)],
    plan: &CycleSpinPlan,
    predictor: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
    options: SamplerOptions,
) -> Result<Vec<Image>> {
    if plan.is_empty() {
        return Err(Error::Parameter("cycle-spin plan needs at least one shift".into()));
    }
    let m = plan.len();
    let mut conds = Vec::with_capacity(inputs.len() * m);
    let mut seeds = Vec::with_capacity(inputs.len() * m);
    for (x_s, seed) in inputs {
        let signed = x_s.to_signed();
        for (i, &(u, v)) in plan.shifts().iter().enumerate() {
            conds.push(cyclic_shift(&signed, u, v));
            seeds.push(rng::derive_seed(*seed, i as u64));
        }
    }
    let chains = run_chains(&conds, &seeds, predictor, sched, options)?;
    Ok(chains
        .chunks_exact(m)
        .map(|members| {
            let (h, w) = members[0].dims();
            let mut sum = vec![0.0f64; h * w];
            for (member, &(u, v)) in members.iter().zip(plan.shifts()) {
                let back = cyclic_shift(member, -u, -v);
                sum.iter_mut().zip(back.pixels()).for_each(|(s, &p)| *s += f64::from(p));
            }
            let mean = Image::new(h, w, sum.into_iter().map(|s| (s / m as f64) as f32).collect()).expect("same dims");
            mean.from_signed()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| (r * w + c) as f32)
    }

    #[test]
    fn identity_shifts() {
        let x = ramp(5, 7);
        assert_eq!(cyclic_shift(&x, 0, 0), x);
        assert_eq!(cyclic_shift(&x, 5, 7), x);
        assert_eq!(cyclic_shift(&x, -10, 14), x);
    }

    #[test]
    fn shift_direction() {
        let x = ramp(3, 3);
        let y = cyclic_shift(&x, 1, 2);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(y.get(r, c), x.get((r + 2) % 3, (c + 1) % 3));
            }
        }
    }

    #[test]
    fn plan_parsing_and_reduction() {
        let plan = CycleSpinPlan::parse("0,0; 100,200;-1,3").unwrap();
        assert_eq!(plan.shifts(), &[(0, 0), (100, 200), (-1, 3)]);
        assert_eq!(plan.reduced(32, 32), vec![(0, 0), (4, 8), (31, 3)]);
        assert_eq!(CycleSpinPlan::parse(&plan.to_string()).unwrap(), plan);
        assert!(CycleSpinPlan::parse("").is_err());
        assert!(CycleSpinPlan::parse("1;2").is_err());
        assert!(CycleSpinPlan::new(vec![]).is_err());
        assert_eq!(CycleSpinPlan::default().shifts(), &[(0, 0), (100, 100), (200, 200)]);
        assert_eq!(CycleSpinPlan::cross(&[0, 1], &[0, 2]).len(), 4);
    }
}
