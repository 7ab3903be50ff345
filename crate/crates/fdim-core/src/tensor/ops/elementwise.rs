//! Elementwise tape operations (same-shape binary ops and unary maps).

use ndarray::{ArrayD, ArrayViewD};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

macro_rules! same_shape {
    ($tape:expr, $a:expr, $b:expr, $name:literal) => {
        assert_eq!(
            $tape.shape($a),
            $tape.shape($b),
            concat!($name, ": operand shapes must match")
        );
    };
}

struct AddOp;
impl<T: Scalar> BackwardOp<T> for AddOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        _inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![
            needs[0].then(|| g.clone()),
            needs[1].then(|| g.clone()),
        ]
    }
}

struct SubOp;
impl<T: Scalar> BackwardOp<T> for SubOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        _inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| g.clone()), needs[1].then(|| -g.clone())]
    }
}

struct MulOp;
impl<T: Scalar> BackwardOp<T> for MulOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![
            needs[0].then(|| g * &inputs[1]),
            needs[1].then(|| g * &inputs[0]),
        ]
    }
}

struct DivOp;
impl<T: Scalar> BackwardOp<T> for DivOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        // d(a/b)/da = 1/b ; d(a/b)/db = -(a/b)/b
        vec![
            needs[0].then(|| g / &inputs[1]),
            needs[1].then(|| -(g * out) / &inputs[1]),
        ]
    }
}

/// y = a*x + b with compile-time-constant coefficients.
struct AffineOp<T> {
    a: T,
}
impl<T: Scalar> BackwardOp<T> for AffineOp<T> {
    fn backward(
        &self,
        g: &ArrayD<T>,
        _inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| g.mapv(|v| v * self.a))]
    }
}

struct SquareOp;
impl<T: Scalar> BackwardOp<T> for SquareOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let two = T::from_f64(2.0);
        vec![needs[0].then(|| (g * &inputs[0]).mapv(|v| v * two))]
    }
}

struct SqrtOp;
impl<T: Scalar> BackwardOp<T> for SqrtOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        _inputs: &[ArrayViewD<'_, T>],
        out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let half = T::from_f64(0.5);
        vec![needs[0].then(|| ndarray::Zip::from(g).and(out).map_collect(|&g, &y| g * half / y))]
    }
}

struct ReluOp;
impl<T: Scalar> BackwardOp<T> for ReluOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            ndarray::Zip::from(g)
                .and(&inputs[0])
                .map_collect(|&g, &x| if x > T::zero() { g } else { T::zero() })
        })]
    }
}

struct SigmoidOp;
impl<T: Scalar> BackwardOp<T> for SigmoidOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        _inputs: &[ArrayViewD<'_, T>],
        out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            ndarray::Zip::from(g)
                .and(out)
                .map_collect(|&g, &y| g * y * (T::one() - y))
        })]
    }
}

struct SoftplusOp;
impl<T: Scalar> BackwardOp<T> for SoftplusOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            ndarray::Zip::from(g)
                .and(&inputs[0])
                .map_collect(|&g, &x| g * sigmoid_stable(x))
        })]
    }
}

struct NormCdfOp;
impl<T: Scalar> BackwardOp<T> for NormCdfOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        vec![needs[0].then(|| {
            ndarray::Zip::from(g)
                .and(&inputs[0])
                .map_collect(|&g, &x| g * x.norm_pdf())
        })]
    }
}

pub(crate) fn sigmoid_stable<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softplus_stable<T: Scalar>(x: T) -> T {
    // ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|)
    let zero = T::zero();
    let m = if x > zero { x } else { zero };
    m + (T::one() + (-x.abs()).exp()).ln()
}

impl<T: Scalar> Tape<T> {
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        same_shape!(self, a, b, "add");
        let v = &self.value(a) + &self.value(b);
        self.push_op(v, vec![a, b], Box::new(AddOp))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        same_shape!(self, a, b, "sub");
        let v = &self.value(a) - &self.value(b);
        self.push_op(v, vec![a, b], Box::new(SubOp))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        same_shape!(self, a, b, "mul");
        let v = &self.value(a) * &self.value(b);
        self.push_op(v, vec![a, b], Box::new(MulOp))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        same_shape!(self, a, b, "div");
        let v = &self.value(a) / &self.value(b);
        self.push_op(v, vec![a, b], Box::new(DivOp))
    }

    /// Elementwise a*x + b for scalar constants.
    pub fn affine(&mut self, x: Var, a: T, b: T) -> Var {
        let v = self.value(x).mapv(|t| a * t + b);
        self.push_op(v, vec![x], Box::new(AffineOp { a }))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|t| t * t);
        self.push_op(v, vec![x], Box::new(SquareOp))
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|t| t.sqrt());
        self.push_op(v, vec![x], Box::new(SqrtOp))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|t| if t > T::zero() { t } else { T::zero() });
        self.push_op(v, vec![x], Box::new(ReluOp))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(sigmoid_stable);
        self.push_op(v, vec![x], Box::new(SigmoidOp))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(softplus_stable);
        self.push_op(v, vec![x], Box::new(SoftplusOp))
    }

    /// Standard normal CDF, elementwise.
    pub fn norm_cdf(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|t| t.norm_cdf());
        self.push_op(v, vec![x], Box::new(NormCdfOp))
    }
}
