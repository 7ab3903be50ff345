//! Fully-connected layer op: y = W x + b for 1-D activations.

use ndarray::{ArrayD, ArrayViewD, Ix1, Ix2};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

struct LinearOp {
    has_bias: bool,
}

impl<T: Scalar> BackwardOp<T> for LinearOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let x = inputs[0].view().into_dimensionality::<Ix1>().unwrap();
        let w = inputs[1].view().into_dimensionality::<Ix2>().unwrap();
        let g1 = g.view().into_dimensionality::<Ix1>().unwrap();

        let dx = needs[0].then(|| w.t().dot(&g1).into_dyn());
        let dw = needs[1].then(|| {
            let go = g1.view().insert_axis(ndarray::Axis(1));
            let xo = x.view().insert_axis(ndarray::Axis(0));
            go.dot(&xo).into_dyn()
        });
        let mut grads = vec![dx, dw];
        if self.has_bias {
            grads.push(needs[2].then(|| g.clone()));
        }
        grads
    }
}

impl<T: Scalar> Tape<T> {
    /// y = W x (+ b). Shapes: x [in], w [out, in], b [out].
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let xv = self.value(x).into_dimensionality::<Ix1>().expect("linear: x must be 1-D").to_owned();
        let wv = self.value(w).into_dimensionality::<Ix2>().expect("linear: w must be 2-D").to_owned();
        assert_eq!(wv.shape()[1], xv.len(), "linear: in-features mismatch");
        let mut y = wv.dot(&xv);
        let mut parents = vec![x, w];
        if let Some(b) = b {
            let bv = self.value(b).into_dimensionality::<Ix1>().expect("linear: b must be 1-D");
            y += &bv;
            parents.push(b);
        }
        self.push_op(
            y.into_dyn(),
            parents,
            Box::new(LinearOp { has_bias: b.is_some() }),
        )
    }
}
