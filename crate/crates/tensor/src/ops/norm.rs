use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t, S: Scalar> Var<'t, S> {
    /// Group normalization of an `N×C×H×W` tensor with per-channel scale and offset.
    pub fn group_norm(&self, scale: &Var<'t, S>, offset: &Var<'t, S>, groups: usize, eps: S) -> Result<Var<'t, S>> {
        self.same_tape(scale, "group_norm")?;
        self.same_tape(offset, "group_norm")?;
        let (x, gamma, beta) = (self.rc(), scale.rc(), offset.rc());
        let (n, c, h, w) = x.dims4("group_norm")?;
        if groups == 0 || c % groups != 0 {
            return shape_err("group_norm", format!("{c} channels cannot be split into {groups} groups"));
        }
        if gamma.shape() != [c] || beta.shape() != [c] {
            return shape_err(
                "group_norm",
                format!("scale/offset shapes {:?}/{:?} do not match {c} channels", gamma.shape(), beta.shape()),
            );
        }
        let hw = h * w;
        let group_len = c / groups * hw;
        let m = S::from_f64(group_len as f64);
        let mut normed = vec![S::zero(); x.numel()];
        let mut inv_std = vec![S::zero(); n * groups];
        for (gi, (xs, ys)) in x.data().chunks_exact(group_len).zip(normed.chunks_exact_mut(group_len)).enumerate() {
            let mean = xs.iter().copied().sum::<S>() / m;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / m;
            let istd = S::one() / (var + eps).sqrt();
            inv_std[gi] = istd;
            ys.iter_mut().zip(xs).for_each(|(y, &v)| *y = (v - mean) * istd);
        }
        let mut out = normed.clone();
        for (ci, plane) in out.chunks_exact_mut(hw).enumerate() {
            let ch = ci % c;
            let (gm, bt) = (gamma.data()[ch], beta.data()[ch]);
            plane.iter_mut().for_each(|v| *v = *v * gm + bt);
        }
        let out = Tensor::new(vec![n, c, h, w], out)?;
        Ok(self.tape().push_op(
            out,
            &[*self, *scale, *offset],
            Box::new(move |g, need| {
                let dy = g.data();
                let mut dgamma = vec![S::zero(); c];
                let mut dbeta = vec![S::zero(); c];
                for (ci, (dplane, xplane)) in dy.chunks_exact(hw).zip(normed.chunks_exact(hw)).enumerate() {
                    let ch = ci % c;
                    for (&d, &xh) in dplane.iter().zip(xplane) {
                        dgamma[ch] += d * xh;
                        dbeta[ch] += d;
                    }
                }
                let dx = need[0].then(|| {
                    let mut dx = vec![S::zero(); dy.len()];
                    for gi in 0..n * groups {
                        let range = gi * group_len..(gi + 1) * group_len;
                        let first_channel = (gi % groups) * (c / groups);
                        let xh = &normed[range.clone()];
                        let mut dxh: Vec<S> = dy[range.clone()]
                            .iter()
                            .enumerate()
                            .map(|(j, &d)| d * gamma.data()[first_channel + j / hw])
                            .collect();
                        let mean_d = dxh.iter().copied().sum::<S>() / m;
                        let mean_dx = dxh.iter().zip(xh).map(|(&d, &v)| d * v).sum::<S>() / m;
                        for (d, &v) in dxh.iter_mut().zip(xh) {
                            *d = (*d - mean_d - v * mean_dx) * inv_std[gi];
                        }
                        dx[range].copy_from_slice(&dxh);
                    }
                    Tensor::new(vec![n, c, h, w], dx).expect("input shape")
                });
                vec![
                    dx,
                    need[1].then(|| Tensor::new(vec![c], dgamma).expect("scale shape")),
                    need[2].then(|| Tensor::new(vec![c], dbeta).expect("offset shape")),
                ]
            }),
        ))
    }
}
