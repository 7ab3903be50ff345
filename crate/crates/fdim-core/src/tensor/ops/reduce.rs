//! Reductions and shape ops: pooling-style means/maxes, reshape, concat,
//! element selection.

use ndarray::{Array1, Array3, ArrayD, ArrayViewD, Axis, Ix3, IxDyn};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

struct MeanAllOp;
impl<T: Scalar> BackwardOp<T> for MeanAllOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let n = T::from_f64(inputs[0].len() as f64);
        let gv = g[[0]] / n;
        vec![needs[0].then(|| ArrayD::from_elem(IxDyn(inputs[0].shape()), gv))]
    }
}

struct SumAllOp;
impl<T: Scalar> BackwardOp<T> for SumAllOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let gv = g[[0]];
        vec![needs[0].then(|| ArrayD::from_elem(IxDyn(inputs[0].shape()), gv))]
    }
}

/// Mean over the spatial axes of a [C, H, W] map, producing [C].
struct MeanSpatialOp;
impl<T: Scalar> BackwardOp<T> for MeanSpatialOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let shape = inputs[0].shape();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let inv = T::from_f64(1.0 / (h * w) as f64);
        vec![needs[0].then(|| {
            let mut dx = ArrayD::zeros(IxDyn(shape));
            let mut dx3 = dx.view_mut().into_dimensionality::<Ix3>().unwrap();
            for ci in 0..c {
                dx3.index_axis_mut(Axis(0), ci).fill(g[[ci]] * inv);
            }
            dx
        })]
    }
}

/// Max over the spatial axes of a [C, H, W] map, producing [C].
/// Ties route the gradient to the first maximum in row-major order.
struct MaxSpatialOp {
    argmax: Vec<usize>, // flat (h*w) index per channel
}
impl<T: Scalar> BackwardOp<T> for MaxSpatialOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let shape = inputs[0].shape();
        let hw = shape[1] * shape[2];
        vec![needs[0].then(|| {
            let mut dx = ArrayD::zeros(IxDyn(shape));
            let flat = dx.as_slice_mut().unwrap();
            for (ci, &am) in self.argmax.iter().enumerate() {
                flat[ci * hw + am] = g[[ci]];
            }
            dx
        })]
    }
}

/// Mean over the channel axis of a [C, H, W] map, producing [1, H, W].
struct MeanChannelsOp;
impl<T: Scalar> BackwardOp<T> for MeanChannelsOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let shape = inputs[0].shape();
        let inv = T::from_f64(1.0 / shape[0] as f64);
        vec![needs[0].then(|| {
            let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
            let plane = g3.index_axis(Axis(0), 0);
            let mut dx = ArrayD::zeros(IxDyn(shape));
            let mut dx3 = dx.view_mut().into_dimensionality::<Ix3>().unwrap();
            for ci in 0..shape[0] {
                let mut ch = dx3.index_axis_mut(Axis(0), ci);
                ch.assign(&plane.mapv(|v| v * inv));
            }
            dx
        })]
    }
}

/// Max over the channel axis of a [C, H, W] map, producing [1, H, W].
struct MaxChannelsOp {
    argmax: Vec<usize>, // channel index per spatial position
}
impl<T: Scalar> BackwardOp<T> for MaxChannelsOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let shape = inputs[0].shape();
        let hw = shape[1] * shape[2];
        vec![needs[0].then(|| {
            let gs = g.as_slice().unwrap();
            let mut dx = ArrayD::zeros(IxDyn(shape));
            let flat = dx.as_slice_mut().unwrap();
            for (pos, &am) in self.argmax.iter().enumerate() {
                flat[am * hw + pos] = gs[pos];
            }
            dx
        })]
    }
}

struct ReshapeOp;
impl<T: Scalar> BackwardOp<T> for ReshapeOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            g.clone()
                .into_shape(IxDyn(inputs[0].shape()))
                .expect("reshape backward")
        })]
    }
}

struct ConcatOp {
    axis: usize,
}
impl<T: Scalar> BackwardOp<T> for ConcatOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let mut grads = Vec::with_capacity(inputs.len());
        let mut start = 0;
        for (inp, &need) in inputs.iter().zip(needs) {
            let len = inp.shape()[self.axis];
            grads.push(need.then(|| {
                g.slice_axis(Axis(self.axis), ndarray::Slice::from(start..start + len))
                    .to_owned()
            }));
            start += len;
        }
        grads
    }
}

struct SelectOp {
    index: usize,
}
impl<T: Scalar> BackwardOp<T> for SelectOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            let mut dx = ArrayD::zeros(IxDyn(inputs[0].shape()));
            dx[[self.index]] = g[[0]];
            dx
        })]
    }
}

impl<T: Scalar> Tape<T> {
    /// Mean of all elements, as a shape-[1] node.
    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = self.value(x);
        assert!(!v.is_empty(), "mean of empty tensor");
        let m = v.sum() / T::from_f64(v.len() as f64);
        self.push_op(
            ArrayD::from_elem(IxDyn(&[1]), m),
            vec![x],
            Box::new(MeanAllOp),
        )
    }

    /// Sum of all elements, as a shape-[1] node.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push_op(
            ArrayD::from_elem(IxDyn(&[1]), s),
            vec![x],
            Box::new(SumAllOp),
        )
    }

    /// Global average pooling: [C, H, W] -> [C].
    pub fn mean_spatial(&mut self, x: Var) -> Var {
        let xv = self.value(x).into_dimensionality::<Ix3>().expect("mean_spatial wants [C,H,W]").to_owned();
        let c = xv.shape()[0];
        let inv = T::from_f64(1.0 / (xv.shape()[1] * xv.shape()[2]) as f64);
        let mut out = Array1::<T>::zeros(c);
        for ci in 0..c {
            out[ci] = xv.index_axis(Axis(0), ci).sum() * inv;
        }
        self.push_op(out.into_dyn(), vec![x], Box::new(MeanSpatialOp))
    }

    /// Global max pooling: [C, H, W] -> [C].
    pub fn max_spatial(&mut self, x: Var) -> Var {
        let binding = self.value_shared(x);
        let xv = binding.view().into_dimensionality::<Ix3>().expect("max_spatial wants [C,H,W]");
        let (c, h, w) = xv.dim();
        let mut out = Array1::<T>::zeros(c);
        let mut argmax = vec![0usize; c];
        for ci in 0..c {
            let ch = xv.index_axis(Axis(0), ci);
            let flat = ch.to_owned();
            let flat = flat.as_slice().unwrap();
            let mut best = flat[0];
            let mut bi = 0;
            for (i, &v) in flat.iter().enumerate().take(h * w) {
                if v > best {
                    best = v;
                    bi = i;
                }
            }
            out[ci] = best;
            argmax[ci] = bi;
        }
        self.push_op(out.into_dyn(), vec![x], Box::new(MaxSpatialOp { argmax }))
    }

    /// Per-position channel mean: [C, H, W] -> [1, H, W].
    pub fn mean_channels(&mut self, x: Var) -> Var {
        let binding = self.value_shared(x);
        let xv = binding.view().into_dimensionality::<Ix3>().expect("mean_channels wants [C,H,W]");
        let (c, h, w) = xv.dim();
        let inv = T::from_f64(1.0 / c as f64);
        let mut out = Array3::<T>::zeros((1, h, w));
        for ci in 0..c {
            out.index_axis_mut(Axis(0), 0)
                .zip_mut_with(&xv.index_axis(Axis(0), ci), |o, &v| *o = *o + v * inv);
        }
        self.push_op(out.into_dyn(), vec![x], Box::new(MeanChannelsOp))
    }

    /// Per-position channel max: [C, H, W] -> [1, H, W].
    /// Ties route the gradient to the lowest channel index.
    pub fn max_channels(&mut self, x: Var) -> Var {
        let binding = self.value_shared(x);
        let xv = binding.view().into_dimensionality::<Ix3>().expect("max_channels wants [C,H,W]");
        let (c, h, w) = xv.dim();
        let hw = h * w;
        let xs = xv.to_owned();
        let xs = xs.as_slice().unwrap();
        let mut out = Array3::<T>::zeros((1, h, w));
        let os = out.as_slice_mut().unwrap();
        let mut argmax = vec![0usize; hw];
        for pos in 0..hw {
            let mut best = xs[pos];
            let mut bc = 0usize;
            for ci in 1..c {
                let v = xs[ci * hw + pos];
                if v > best {
                    best = v;
                    bc = ci;
                }
            }
            os[pos] = best;
            argmax[pos] = bc;
        }
        self.push_op(out.into_dyn(), vec![x], Box::new(MaxChannelsOp { argmax }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let v = self
            .value(x)
            .to_owned()
            .into_shape(IxDyn(shape))
            .expect("reshape: element count mismatch");
        self.push_op(v, vec![x], Box::new(ReshapeOp))
    }

    /// Concatenate along `axis`; all other axes must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Var {
        assert!(!parts.is_empty(), "concat of zero tensors");
        let handles: Vec<_> = parts.iter().map(|&p| self.value_shared(p)).collect();
        let views: Vec<_> = handles.iter().map(|h| h.view()).collect();
        let v = ndarray::concatenate(Axis(axis), &views).expect("concat: incompatible shapes");
        self.push_op(v, parts.to_vec(), Box::new(ConcatOp { axis }))
    }

    /// Pick one element of a 1-D node, as a shape-[1] node.
    pub fn select(&mut self, x: Var, index: usize) -> Var {
        let v = self.value(x)[[index]];
        self.push_op(
            ArrayD::from_elem(IxDyn(&[1]), v),
            vec![x],
            Box::new(SelectOp { index }),
        )
    }
}
