//! Max pooling with window/stride/padding (the residual stem uses 3x3/2/1).

use ndarray::{Array3, ArrayD, ArrayViewD, Ix3};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

use super::conv::{conv_out_dim, Conv2dSpec};

struct MaxPool2dOp {
    in_shape: [usize; 3],
    argmax: Vec<u32>, // flat input index per output element
}

impl<T: Scalar> BackwardOp<T> for MaxPool2dOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        _inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            let mut dx = ArrayD::zeros(ndarray::IxDyn(&self.in_shape));
            let flat = dx.as_slice_mut().unwrap();
            let gs = g.as_slice().unwrap();
            for (o, &idx) in self.argmax.iter().enumerate() {
                flat[idx as usize] = flat[idx as usize] + gs[o];
            }
            dx
        })]
    }
}

impl<T: Scalar> Tape<T> {
    /// Max pooling over k x k windows. Padding cells never win: windows are
    /// clamped to the valid region.
    pub fn max_pool2d(&mut self, x: Var, k: usize, spec: Conv2dSpec) -> Var {
        let xv = self.value_shared(x);
        let x3 = xv.view().into_dimensionality::<Ix3>().expect("max_pool2d wants [C,H,W]");
        let (c, h, w) = x3.dim();
        let ho = conv_out_dim(h, k, spec);
        let wo = conv_out_dim(w, k, spec);
        let xs = x3.as_slice().unwrap();

        let mut y = Array3::<T>::zeros((c, ho, wo));
        let ys = y.as_slice_mut().unwrap();
        let mut argmax = vec![0u32; c * ho * wo];
        let (s, p) = (spec.stride as isize, spec.padding as isize);

        for ci in 0..c {
            for oy in 0..ho {
                let y0 = (oy as isize * s - p).max(0) as usize;
                let y1 = ((oy as isize * s - p + k as isize) as usize).min(h);
                for ox in 0..wo {
                    let x0 = (ox as isize * s - p).max(0) as usize;
                    let x1 = ((ox as isize * s - p + k as isize) as usize).min(w);
                    let mut best = xs[ci * h * w + y0 * w + x0];
                    let mut bi = ci * h * w + y0 * w + x0;
                    for iy in y0..y1 {
                        for ix in x0..x1 {
                            let idx = ci * h * w + iy * w + ix;
                            if xs[idx] > best {
                                best = xs[idx];
                                bi = idx;
                            }
                        }
                    }
                    let o = (ci * ho + oy) * wo + ox;
                    ys[o] = best;
                    argmax[o] = bi as u32;
                }
            }
        }
        self.push_op(
            y.into_dyn(),
            vec![x],
            Box::new(MaxPool2dOp {
                in_shape: [c, h, w],
                argmax,
            }),
        )
    }
}
