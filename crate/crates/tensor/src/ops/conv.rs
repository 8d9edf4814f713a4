//! 2-D cross-correlation over NCHW tensors via im2col and GEMM.
//!
//! Each sample is handled with its own GEMM, so batching never changes the
//! floating-point reduction order of an individual sample.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

/// Output extent of a convolution along one axis, or `None` if no kernel placement fits.
pub fn conv2d_output_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    (stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn im2col<S: Scalar>(&self, x: &[S], cols: &mut [S]) {
        let p = self.cols();
        for c in 0..self.c {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            line.fill(S::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            *v = if ix < 0 || ix >= self.w as isize { S::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im<S: Scalar>(&self, cols: &[S], dx: &mut [S]) {
        let p = self.cols();
        for c in 0..self.c {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in 0..self.ow {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<'t, S: Scalar> Var<'t, S> {
    /// Zero-padded cross-correlation of an `N×C×H×W` input with an `O×C×kh×kw` kernel.
    pub fn conv2d(&self, weight: &Var<'t, S>, bias: Option<&Var<'t, S>>, stride: usize, padding: usize) -> Result<Var<'t, S>> {
        self.same_tape(weight, "conv2d")?;
        let x = self.rc();
        let w = weight.rc();
        let (n, c, h, wd) = x.dims4("conv2d")?;
        let (o, wc, kh, kw) = w.dims4("conv2d")?;
        if wc != c {
            return shape_err("conv2d", format!("input channel axis (1) is {c} but weight channel axis (1) is {wc}"));
        }
        if stride == 0 {
            return shape_err("conv2d", "stride must be positive");
        }
        let (Some(oh), Some(ow)) =
            (conv2d_output_size(h, kh, stride, padding), conv2d_output_size(wd, kw, stride, padding))
        else {
            return shape_err(
                "conv2d",
                format!("kernel {kh}x{kw} does not fit spatial axes (2, 3) of size {h}x{wd} with padding {padding}"),
            );
        };
        let b = match bias {
            Some(b) => {
                self.same_tape(b, "conv2d")?;
                let bv = b.rc();
                if bv.shape() != [o] {
                    return shape_err("conv2d", format!("bias shape {:?} does not match output channels {o}", bv.shape()));
                }
                Some(bv)
            }
            None => None,
        };

        let g = Geometry { c, h, w: wd, kh, kw, stride, pad: padding, oh, ow };
        let (k, p) = (g.rows(), g.cols());
        let mut out = vec![S::zero(); n * o * p];
        let mut cols = if g.is_pointwise() { Vec::new() } else { vec![S::zero(); k * p] };
        for s in 0..n {
            let xs = &x.data()[s * c * h * wd..(s + 1) * c * h * wd];
            let col: &[S] = if g.is_pointwise() {
                xs
            } else {
                g.im2col(xs, &mut cols);
                &cols
            };
            let os = &mut out[s * o * p..(s + 1) * o * p];
            crate::scalar::matmul(o, k, p, w.data(), col, os);
            if let Some(bv) = &b {
                for (row, &bias) in os.chunks_exact_mut(p).zip(bv.data()) {
                    row.iter_mut().for_each(|v| *v += bias);
                }
            }
        }
        let out = Tensor::new(vec![n, o, oh, ow], out)?;

        let mut parents = vec![*self, *weight];
        if let Some(bias) = bias {
            parents.push(*bias);
        }
        let has_bias = b.is_some();
        Ok(self.tape().push_op(
            out,
            &parents,
            Box::new(move |grad, need| {
                let dy = grad.data();
                let mut dw = need[1].then(|| vec![S::zero(); o * k]);
                let mut dx = need[0].then(|| vec![S::zero(); n * c * h * wd]);
                let mut cols = vec![S::zero(); if g.is_pointwise() { 0 } else { k * p }];
                let mut dcols = vec![S::zero(); k * p];
                for s in 0..n {
                    let dys = &dy[s * o * p..(s + 1) * o * p];
                    if let Some(dw) = dw.as_mut() {
                        let xs = &x.data()[s * c * h * wd..(s + 1) * c * h * wd];
                        let col: &[S] = if g.is_pointwise() {
                            xs
                        } else {
                            g.im2col(xs, &mut cols);
                            &cols
                        };
                        // dW += dY · colᵀ
                        S::gemm(o, p, k, S::one(), dys, p as isize, 1, col, 1, p as isize, S::one(), dw, k as isize, 1);
                    }
                    if let Some(dx) = dx.as_mut() {
                        let dxs = &mut dx[s * c * h * wd..(s + 1) * c * h * wd];
                        if g.is_pointwise() {
                            S::gemm(k, o, p, S::one(), w.data(), 1, k as isize, dys, p as isize, 1, S::zero(), dxs, p as isize, 1);
                        } else {
                            S::gemm(k, o, p, S::one(), w.data(), 1, k as isize, dys, p as isize, 1, S::zero(), &mut dcols, p as isize, 1);
                            g.col2im(&dcols, dxs);
                        }
                    }
                }
                let mut grads = vec![
                    dx.map(|d| Tensor::new(vec![n, c, h, wd], d).expect("input shape")),
                    dw.map(|d| Tensor::new(vec![o, c, kh, kw], d).expect("weight shape")),
                ];
                if has_bias {
                    grads.push(need[2].then(|| {
                        let mut db = vec![S::zero(); o];
                        for s in 0..n {
                            for (oc, acc) in db.iter_mut().enumerate() {
                                *acc += dy[(s * o + oc) * p..(s * o + oc + 1) * p].iter().copied().sum::<S>();
                            }
                        }
                        Tensor::new(vec![o], db).expect("bias shape")
                    }));
                }
                grads
            }),
        ))
    }
}
