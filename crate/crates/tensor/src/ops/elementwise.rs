use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

fn zip_map<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

fn check_same<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return shape_err(op, format!("operand shapes differ: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn add(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(other, "add")?;
        let (a, b) = (self.rc(), other.rc());
        check_same("add", &a, &b)?;
        let out = zip_map(&a, &b, |x, y| x + y);
        Ok(self.tape().push_op(out, &[*self, *other], Box::new(|g, _| vec![Some(g.clone()), Some(g.clone())])))
    }

    pub fn sub(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(other, "sub")?;
        let (a, b) = (self.rc(), other.rc());
        check_same("sub", &a, &b)?;
        let out = zip_map(&a, &b, |x, y| x - y);
        Ok(self.tape().push_op(out, &[*self, *other], Box::new(|g, _| vec![Some(g.clone()), Some(g.map(|v| -v))])))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(other, "mul")?;
        let (a, b) = (self.rc(), other.rc());
        check_same("mul", &a, &b)?;
        let out = zip_map(&a, &b, |x, y| x * y);
        Ok(self.tape().push_op(
            out,
            &[*self, *other],
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| zip_map(g, &b, |x, y| x * y)),
                    need[1].then(|| zip_map(g, &a, |x, y| x * y)),
                ]
            }),
        ))
    }

    pub fn scale(&self, factor: S) -> Var<'t, S> {
        let out = self.rc().map(|v| v * factor);
        self.tape().push_op(out, &[*self], Box::new(move |g, _| vec![Some(g.map(|v| v * factor))]))
    }

    pub fn add_scalar(&self, offset: S) -> Var<'t, S> {
        let out = self.rc().map(|v| v + offset);
        self.tape().push_op(out, &[*self], Box::new(|g, _| vec![Some(g.clone())]))
    }

    pub fn sum(&self) -> Var<'t, S> {
        let x = self.rc();
        let total: S = x.data().iter().copied().sum();
        let shape = x.shape().to_vec();
        self.tape().push_op(
            Tensor::scalar(total),
            &[*self],
            Box::new(move |g, _| vec![Some(Tensor::full(shape.clone(), g.data()[0]))]),
        )
    }

    pub fn mean(&self) -> Var<'t, S> {
        let n = S::from_f64(self.rc().numel() as f64);
        self.sum().scale(S::one() / n)
    }

    /// Mean of squared differences over all elements.
    pub fn mse(&self, target: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.same_tape(target, "mse")?;
        let (a, b) = (self.rc(), target.rc());
        check_same("mse", &a, &b)?;
        let n = S::from_f64(a.numel() as f64);
        let diff = zip_map(&a, &b, |x, y| x - y);
        let value = diff.data().iter().map(|&d| d * d).sum::<S>() / n;
        Ok(self.tape().push_op(
            Tensor::scalar(value),
            &[*self, *target],
            Box::new(move |g, need| {
                let k = S::from_f64(2.0) * g.data()[0] / n;
                vec![need[0].then(|| diff.map(|d| d * k)), need[1].then(|| diff.map(|d| -d * k))]
            }),
        ))
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Var<'t, S>> {
        let x = self.rc();
        let out = x.reshape(shape)?;
        let original = x.shape().to_vec();
        Ok(self.tape().push_op(
            out,
            &[*self],
            Box::new(move |g, _| vec![Some(g.reshape(original.clone()).expect("same numel"))]),
        ))
    }
}
