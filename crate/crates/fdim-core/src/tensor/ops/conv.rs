//! 2-D convolution via im2col + GEMM, with zero padding.
//!
//! Activations are unbatched [C, H, W]; batching is handled by the caller
//! (frames and videos are independent and parallelized one level up).

use ndarray::{Array2, Array3, ArrayD, ArrayView3, ArrayViewD, Ix1, Ix3, Ix4};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub padding: usize,
}

pub(crate) fn conv_out_dim(input: usize, kernel: usize, spec: Conv2dSpec) -> usize {
    (input + 2 * spec.padding - kernel) / spec.stride + 1
}

/// Unfold x [C, H, W] into [C*kh*kw, Ho*Wo] with zero padding.
pub(crate) fn im2col<T: Scalar>(
    x: &ArrayView3<'_, T>,
    kh: usize,
    kw: usize,
    spec: Conv2dSpec,
) -> Array2<T> {
    let (c, h, w) = x.dim();
    let ho = conv_out_dim(h, kh, spec);
    let wo = conv_out_dim(w, kw, spec);
    let mut cols = Array2::<T>::zeros((c * kh * kw, ho * wo));
    let xs = x.as_slice().expect("im2col: input must be contiguous");
    let cs = cols.as_slice_mut().unwrap();
    let (s, p) = (spec.stride as isize, spec.padding as isize);

    for ci in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let row_base = row * ho * wo;
                for oy in 0..ho {
                    let iy = oy as isize * s + ky as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_base = ci * h * w + iy as usize * w;
                    let dst_base = row_base + oy * wo;
                    for ox in 0..wo {
                        let ix = ox as isize * s + kx as isize - p;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        cs[dst_base + ox] = xs[src_base + ix as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Fold gradient columns [C*kh*kw, Ho*Wo] back into [C, H, W], accumulating
/// overlapping contributions.
pub(crate) fn col2im<T: Scalar>(
    cols: &Array2<T>,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    spec: Conv2dSpec,
) -> Array3<T> {
    let ho = conv_out_dim(h, kh, spec);
    let wo = conv_out_dim(w, kw, spec);
    let mut x = Array3::<T>::zeros((c, h, w));
    let xs = x.as_slice_mut().unwrap();
    let cs = cols.as_slice().unwrap();
    let (s, p) = (spec.stride as isize, spec.padding as isize);

    for ci in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let row_base = row * ho * wo;
                for oy in 0..ho {
                    let iy = oy as isize * s + ky as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_base = ci * h * w + iy as usize * w;
                    let src_base = row_base + oy * wo;
                    for ox in 0..wo {
                        let ix = ox as isize * s + kx as isize - p;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        xs[dst_base + ix as usize] = xs[dst_base + ix as usize] + cs[src_base + ox];
                    }
                }
            }
        }
    }
    x
}

struct Conv2dOp {
    spec: Conv2dSpec,
    has_bias: bool,
}

impl<T: Scalar> BackwardOp<T> for Conv2dOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let x = inputs[0].view().into_dimensionality::<Ix3>().unwrap();
        let wt = inputs[1].view().into_dimensionality::<Ix4>().unwrap();
        let (co, ci, kh, kw) = wt.dim();
        let (_, h, w) = x.dim();
        let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
        let (gc, gh, gw) = g3.dim();
        debug_assert_eq!(gc, co);
        let g2 = g3
            .to_owned()
            .into_shape((co, gh * gw))
            .unwrap();
        let w2 = wt.to_owned().into_shape((co, ci * kh * kw)).unwrap();

        let need_w = needs[1];
        let need_x = needs[0];

        let dw = if need_w {
            // dW = g2 . colsᵀ (columns are recomputed; storing them across the
            // whole tape costs far more memory than this recompute)
            let cols = im2col(&x, kh, kw, self.spec);
            Some(
                super::standardize2(g2.dot(&cols.t()))
                    .into_shape((co, ci, kh, kw))
                    .unwrap()
                    .into_dyn(),
            )
        } else {
            None
        };
        let dx = if need_x {
            let dcols = super::standardize2(w2.t().dot(&g2));
            Some(col2im(&dcols, ci, h, w, kh, kw, self.spec).into_dyn())
        } else {
            None
        };

        let mut grads = vec![dx, dw];
        if self.has_bias {
            grads.push(needs[2].then(|| {
                let mut db = ndarray::Array1::<T>::zeros(co);
                for c in 0..co {
                    db[c] = g3.index_axis(ndarray::Axis(0), c).sum();
                }
                db.into_dyn()
            }));
        }
        grads
    }
}

impl<T: Scalar> Tape<T> {
    /// 2-D convolution. x [Cin, H, W], w [Cout, Cin, kh, kw], b [Cout].
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: Conv2dSpec) -> Var {
        let xv = self.value_shared(x);
        let x3 = xv.view().into_dimensionality::<Ix3>().expect("conv2d: x must be [C,H,W]");
        let wv = self.value_shared(w);
        let w4 = wv.view().into_dimensionality::<Ix4>().expect("conv2d: w must be 4-D");
        let (co, ci, kh, kw) = w4.dim();
        let (xc, h, wd) = x3.dim();
        assert_eq!(ci, xc, "conv2d: in-channel mismatch");
        let ho = conv_out_dim(h, kh, spec);
        let wo = conv_out_dim(wd, kw, spec);

        let cols = im2col(&x3, kh, kw, spec);
        let w2 = w4.to_owned().into_shape((co, ci * kh * kw)).unwrap();
        let mut y = w2.dot(&cols); // [Cout, Ho*Wo]
        if let Some(b) = b {
            let bv = self.value(b).into_dimensionality::<Ix1>().expect("conv2d: b must be 1-D").to_owned();
            for (mut row, &bias) in y.outer_iter_mut().zip(bv.iter()) {
                row.mapv_inplace(|v| v + bias);
            }
        }
        let y = super::standardize2(y).into_shape((co, ho, wo)).unwrap().into_dyn();

        let mut parents = vec![x, w];
        if let Some(b) = b {
            parents.push(b);
        }
        self.push_op(
            y,
            parents,
            Box::new(Conv2dOp {
                spec,
                has_bias: b.is_some(),
            }),
        )
    }
}
