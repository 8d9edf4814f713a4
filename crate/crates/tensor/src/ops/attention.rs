use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t, S: Scalar> Var<'t, S> {
    /// Single-head scaled dot-product attention over the spatial positions of
    /// `N×C×H×W` queries, keys and values. Each position attends to every position.
    pub fn spatial_attention(&self, keys: &Var<'t, S>, values: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(keys, "spatial_attention")?;
        self.same_tape(values, "spatial_attention")?;
        let (q, k, v) = (self.rc(), keys.rc(), values.rc());
        if q.shape() != k.shape() || q.shape() != v.shape() {
            return shape_err(
                "spatial_attention",
                format!("q/k/v shapes differ: {:?}, {:?}, {:?}", q.shape(), k.shape(), v.shape()),
            );
        }
        let (n, c, h, w) = q.dims4("spatial_attention")?;
        let p = h * w;
        let cp = c * p;
        let scale = S::one() / S::from_f64(c as f64).sqrt();

        // weights[s] is P×P, row i = softmax over keys j of q_i·k_j / √C
        let mut weights = vec![S::zero(); n * p * p];
        let mut out = vec![S::zero(); n * cp];
        for s in 0..n {
            let (qs, ks, vs) = (&q.data()[s * cp..(s + 1) * cp], &k.data()[s * cp..(s + 1) * cp], &v.data()[s * cp..(s + 1) * cp]);
            let a = &mut weights[s * p * p..(s + 1) * p * p];
            S::gemm(p, c, p, scale, qs, 1, p as isize, ks, p as isize, 1, S::zero(), a, p as isize, 1);
            for row in a.chunks_exact_mut(p) {
                let max = row.iter().copied().fold(S::neg_infinity(), S::max);
                row.iter_mut().for_each(|x| *x = (*x - max).exp());
                let total: S = row.iter().copied().sum();
                row.iter_mut().for_each(|x| *x /= total);
            }
            // out = V · Aᵀ
            S::gemm(c, p, p, S::one(), vs, p as isize, 1, a, 1, p as isize, S::zero(), &mut out[s * cp..(s + 1) * cp], p as isize, 1);
        }
        let out = Tensor::new(vec![n, c, h, w], out)?;
        Ok(self.tape().push_op(
            out,
            &[*self, *keys, *values],
            Box::new(move |g, need| {
                let mut dq = vec![S::zero(); n * cp];
                let mut dk = vec![S::zero(); n * cp];
                let mut dv = vec![S::zero(); n * cp];
                let mut da = vec![S::zero(); p * p];
                for s in 0..n {
                    let range = s * cp..(s + 1) * cp;
                    let (qs, ks, vs, gs) = (&q.data()[range.clone()], &k.data()[range.clone()], &v.data()[range.clone()], &g.data()[range.clone()]);
                    let a = &weights[s * p * p..(s + 1) * p * p];
                    // dV = dOut · A
                    S::gemm(c, p, p, S::one(), gs, p as isize, 1, a, p as isize, 1, S::zero(), &mut dv[range.clone()], p as isize, 1);
                    // dA = dOutᵀ · V
                    S::gemm(p, c, p, S::one(), gs, 1, p as isize, vs, p as isize, 1, S::zero(), &mut da, p as isize, 1);
                    // softmax backward, scaled: dS = A ⊙ (dA − rowsum(dA ⊙ A)) / √C
                    for (drow, arow) in da.chunks_exact_mut(p).zip(a.chunks_exact(p)) {
                        let dot: S = drow.iter().zip(arow).map(|(&d, &x)| d * x).sum();
                        drow.iter_mut().zip(arow).for_each(|(d, &x)| *d = x * (*d - dot) * scale);
                    }
                    // dQ = K · dSᵀ, dK = Q · dS
                    S::gemm(c, p, p, S::one(), ks, p as isize, 1, &da, 1, p as isize, S::zero(), &mut dq[range.clone()], p as isize, 1);
                    S::gemm(c, p, p, S::one(), qs, p as isize, 1, &da, p as isize, 1, S::zero(), &mut dk[range], p as isize, 1);
                }
                let shape = vec![n, c, h, w];
                vec![
                    need[0].then(|| Tensor::new(shape.clone(), dq).expect("query shape")),
                    need[1].then(|| Tensor::new(shape.clone(), dk).expect("key shape")),
                    need[2].then(|| Tensor::new(shape, dv).expect("value shape")),
                ]
            }),
        ))
    }
}
