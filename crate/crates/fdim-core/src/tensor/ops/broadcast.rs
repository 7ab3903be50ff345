//! Binary ops where the right operand broadcasts over the left (numpy
//! trailing-axis rules). Used for attention gating and normalization
//! scale/shift, where a per-channel vector modulates a [C, H, W] map.

use ndarray::{ArrayD, ArrayViewD, Axis, IxDyn};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

/// Sum `grad` down to `shape` (inverse of broadcasting).
pub(crate) fn reduce_to_shape<T: Scalar>(grad: &ArrayD<T>, shape: &[usize]) -> ArrayD<T> {
    let mut g = grad.clone();
    while g.ndim() > shape.len() {
        g = g.sum_axis(Axis(0));
    }
    for (ax, (&gd, &sd)) in g.shape().to_vec().iter().zip(shape).enumerate() {
        if sd == 1 && gd != 1 {
            g = g.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
    }
    g.into_shape(IxDyn(shape)).expect("reduce_to_shape: incompatible shapes")
}

fn broadcast_apply<T: Scalar>(
    a: &ArrayViewD<'_, T>,
    b: &ArrayViewD<'_, T>,
    f: impl Fn(T, T) -> T,
) -> ArrayD<T> {
    let bb = b
        .broadcast(IxDyn(a.shape()))
        .expect("operand not broadcastable to left shape");
    ndarray::Zip::from(a).and(&bb).map_collect(|&x, &y| f(x, y))
}

struct MulBcastOp;
impl<T: Scalar> BackwardOp<T> for MulBcastOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let da = needs[0].then(|| broadcast_apply(&g.view(), &inputs[1], |g, b| g * b));
        let db = needs[1].then(|| {
            let gb = ndarray::Zip::from(g)
                .and(&inputs[0])
                .map_collect(|&g, &a| g * a);
            reduce_to_shape(&gb, inputs[1].shape())
        });
        vec![da, db]
    }
}

struct AddBcastOp;
impl<T: Scalar> BackwardOp<T> for AddBcastOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![
            needs[0].then(|| g.clone()),
            needs[1].then(|| reduce_to_shape(g, inputs[1].shape())),
        ]
    }
}

struct SubBcastOp;
impl<T: Scalar> BackwardOp<T> for SubBcastOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![
            needs[0].then(|| g.clone()),
            needs[1].then(|| -reduce_to_shape(g, inputs[1].shape())),
        ]
    }
}

impl<T: Scalar> Tape<T> {
    /// a * b with b broadcast to a's shape.
    pub fn mul_bcast(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_apply(&self.value(a), &self.value(b), |x, y| x * y);
        self.push_op(v, vec![a, b], Box::new(MulBcastOp))
    }

    /// a + b with b broadcast to a's shape.
    pub fn add_bcast(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_apply(&self.value(a), &self.value(b), |x, y| x + y);
        self.push_op(v, vec![a, b], Box::new(AddBcastOp))
    }

    /// a - b with b broadcast to a's shape.
    pub fn sub_bcast(&mut self, a: Var, b: Var) -> Var {
        let v = broadcast_apply(&self.value(a), &self.value(b), |x, y| x - y);
        self.push_op(v, vec![a, b], Box::new(SubBcastOp))
    }
}
