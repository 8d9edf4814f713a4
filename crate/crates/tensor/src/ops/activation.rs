use crate::scalar::Scalar;
use crate::tape::Var;

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

impl<'t, S: Scalar> Var<'t, S> {
    /// Sigmoid-weighted linear unit `x·σ(x)`.
    pub fn silu(&self) -> Var<'t, S> {
        let x = self.rc();
        let out = x.map(|v| v * sigmoid(v));
        self.tape().push_op(
            out,
            &[*self],
            Box::new(move |g, _| {
                let mut dx = g.clone();
                for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                    let s = sigmoid(v);
                    *d *= s * (S::one() + v * (S::one() - s));
                }
                vec![Some(dx)]
            }),
        )
    }
}
