use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t, S: Scalar> Var<'t, S> {
    /// Adds an `N×C` bias to every spatial position of an `N×C×H×W` tensor.
    pub fn add_channel_bias(&self, bias: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(bias, "add_channel_bias")?;
        let (x, b) = (self.rc(), bias.rc());
        let (n, c, h, w) = x.dims4("add_channel_bias")?;
        if b.shape() != [n, c] {
            return shape_err("add_channel_bias", format!("bias shape {:?} must be [{n}, {c}]", b.shape()));
        }
        let hw = h * w;
        let mut out = x.data().to_vec();
        for (plane, &bv) in out.chunks_exact_mut(hw).zip(b.data()) {
            plane.iter_mut().for_each(|v| *v += bv);
        }
        let out = Tensor::new(vec![n, c, h, w], out)?;
        Ok(self.tape().push_op(
            out,
            &[*self, *bias],
            Box::new(move |g, need| {
                let db = need[1].then(|| {
                    let sums = g.data().chunks_exact(hw).map(|p| p.iter().copied().sum()).collect();
                    Tensor::new(vec![n, c], sums).expect("bias shape")
                });
                vec![Some(g.clone()), db]
            }),
        ))
    }

    /// Concatenates two `N×C×H×W` tensors along the channel axis.
    pub fn concat_channels(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(other, "concat_channels")?;
        let (a, b) = (self.rc(), other.rc());
        let (n, ca, h, w) = a.dims4("concat_channels")?;
        let (nb, cb, hb, wb) = b.dims4("concat_channels")?;
        if (n, h, w) != (nb, hb, wb) {
            return shape_err(
                "concat_channels",
                format!("axes 0, 2, 3 must agree: {:?} vs {:?}", a.shape(), b.shape()),
            );
        }
        let (la, lb) = (ca * h * w, cb * h * w);
        let mut out = Vec::with_capacity(n * (la + lb));
        for s in 0..n {
            out.extend_from_slice(&a.data()[s * la..(s + 1) * la]);
            out.extend_from_slice(&b.data()[s * lb..(s + 1) * lb]);
        }
        let out = Tensor::new(vec![n, ca + cb, h, w], out)?;
        Ok(self.tape().push_op(
            out,
            &[*self, *other],
            Box::new(move |g, need| {
                let mut ga = Vec::with_capacity(n * la);
                let mut gb = Vec::with_capacity(n * lb);
                for chunk in g.data().chunks_exact(la + lb) {
                    ga.extend_from_slice(&chunk[..la]);
                    gb.extend_from_slice(&chunk[la..]);
                }
                vec![
                    need[0].then(|| Tensor::new(vec![n, ca, h, w], ga).expect("lhs shape")),
                    need[1].then(|| Tensor::new(vec![n, cb, h, w], gb).expect("rhs shape")),
                ]
            }),
        ))
    }

    /// Nearest-neighbour 2× spatial upsampling.
    pub fn upsample_nearest2x(&self) -> Result<Var<'t, S>> {
        let x = self.rc();
        let (n, c, h, w) = x.dims4("upsample_nearest2x")?;
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = vec![S::zero(); n * c * oh * ow];
        for (src, dst) in x.data().chunks_exact(h * w).zip(out.chunks_exact_mut(oh * ow)) {
            for (oy, row) in dst.chunks_exact_mut(ow).enumerate() {
                let line = &src[(oy / 2) * w..(oy / 2 + 1) * w];
                row.iter_mut().enumerate().for_each(|(ox, v)| *v = line[ox / 2]);
            }
        }
        let out = Tensor::new(vec![n, c, oh, ow], out)?;
        Ok(self.tape().push_op(
            out,
            &[*self],
            Box::new(move |g, _| {
                let mut dx = vec![S::zero(); n * c * h * w];
                for (src, dst) in g.data().chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
                    for (oy, row) in src.chunks_exact(ow).enumerate() {
                        for (ox, &v) in row.iter().enumerate() {
                            dst[(oy / 2) * w + ox / 2] += v;
                        }
                    }
                }
                vec![Some(Tensor::new(vec![n, c, h, w], dx).expect("input shape"))]
            }),
        ))
    }
}
