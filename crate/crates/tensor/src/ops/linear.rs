use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t, S: Scalar> Var<'t, S> {
    /// `x · Wᵀ + b` for `x: N×I`, `W: O×I`, `b: O`.
    pub fn linear(&self, weight: &Var<'t, S>, bias: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(weight, "linear")?;
        self.same_tape(bias, "linear")?;
        let (x, w, b) = (self.rc(), weight.rc(), bias.rc());
        let (&[n, i], &[o, wi], &[bo]) = (x.shape(), w.shape(), b.shape()) else {
            return shape_err(
                "linear",
                format!("expected N×I input, O×I weight, O bias; got {:?}, {:?}, {:?}", x.shape(), w.shape(), b.shape()),
            );
        };
        if wi != i || bo != o {
            return shape_err("linear", format!("input features {i}, weight {o}×{wi}, bias {bo}"));
        }
        let mut out = vec![S::zero(); n * o];
        for row in out.chunks_exact_mut(o) {
            row.copy_from_slice(b.data());
        }
        S::gemm(n, i, o, S::one(), x.data(), i as isize, 1, w.data(), 1, i as isize, S::one(), &mut out, o as isize, 1);
        let out = Tensor::new(vec![n, o], out)?;
        Ok(self.tape().push_op(
            out,
            &[*self, *weight, *bias],
            Box::new(move |g, need| {
                let dy = g.data();
                let dx = need[0].then(|| {
                    let mut dx = vec![S::zero(); n * i];
                    crate::scalar::matmul(n, o, i, dy, w.data(), &mut dx);
                    Tensor::new(vec![n, i], dx).expect("input shape")
                });
                let dw = need[1].then(|| {
                    let mut dw = vec![S::zero(); o * i];
                    S::gemm(o, n, i, S::one(), dy, 1, o as isize, x.data(), i as isize, 1, S::zero(), &mut dw, i as isize, 1);
                    Tensor::new(vec![o, i], dw).expect("weight shape")
                });
                let db = need[2].then(|| {
                    let mut db = vec![S::zero(); o];
                    for row in dy.chunks_exact(o) {
                        db.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                    }
                    Tensor::new(vec![o], db).expect("bias shape")
                });
                vec![dx, dw, db]
            }),
        ))
    }
}
