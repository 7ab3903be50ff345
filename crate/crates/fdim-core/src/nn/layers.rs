//! Layer building blocks: convolution, frozen-statistics batch norm, linear.

use ndarray::{Array1, Array2, Array4, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Conv2dSpec, Scalar, Var};

use super::store::{ParamId, ParamStore, Session};

/// He-normal (fan-out) initialization used for all convolutions, matching
/// the usual residual-network recipe.
fn he_normal<T: Scalar>(
    rng: &mut ChaCha8Rng,
    shape: (usize, usize, usize, usize),
) -> Array4<T> {
    let (co, _ci, kh, kw) = shape;
    let fan_out = co * kh * kw;
    let std = (2.0 / fan_out as f64).sqrt();
    Array4::from_shape_simple_fn(shape, || {
        // Box-Muller from two uniforms
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        T::from_f64(z * std)
    })
}

pub struct Conv2dLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub spec: Conv2dSpec,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl Conv2dLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        spec: Conv2dSpec,
        bias: bool,
    ) -> Self {
        let w = he_normal::<T>(rng, (out_channels, in_channels, kernel, kernel));
        let weight = store.register(format!("{name}.weight"), w.into_dyn(), true);
        let bias = bias.then(|| {
            store.register(
                format!("{name}.bias"),
                Array1::<T>::zeros(out_channels).into_dyn(),
                true,
            )
        });
        Conv2dLayer {
            weight,
            bias,
            spec,
            in_channels,
            out_channels,
            kernel,
        }
    }

    /// Variant with all-zero weights and bias: the offset-generator
    /// convolution starts as a no-op so deformable sampling begins on the
    /// regular grid.
    #[allow(clippy::too_many_arguments)]
    pub fn new_zeroed<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        spec: Conv2dSpec,
        bias: bool,
    ) -> Self {
        let w = Array4::<T>::zeros((out_channels, in_channels, kernel, kernel));
        let weight = store.register(format!("{name}.weight"), w.into_dyn(), true);
        let bias = bias.then(|| {
            store.register(
                format!("{name}.bias"),
                Array1::<T>::zeros(out_channels).into_dyn(),
                true,
            )
        });
        Conv2dLayer {
            weight,
            bias,
            spec,
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn forward<T: Scalar>(&self, sess: &mut Session<'_, T>, x: Var) -> Var {
        let w = sess.bind(self.weight);
        let b = self.bias.map(|b| sess.bind(b));
        sess.tape.conv2d(x, w, b, self.spec)
    }

    pub fn param_count(&self) -> usize {
        let w = self.out_channels * self.in_channels * self.kernel * self.kernel;
        w + if self.bias.is_some() { self.out_channels } else { 0 }
    }

    /// Multiply-accumulate ops for one [h, w] output grid.
    pub fn flops(&self, out_h: usize, out_w: usize) -> u64 {
        let per_out = 2 * self.in_channels * self.kernel * self.kernel;
        (per_out * self.out_channels * out_h * out_w) as u64
    }
}

/// Batch normalization evaluated with stored statistics.
///
/// Statistics are buffers loaded from a checkpoint (or identity when
/// training from scratch); only the affine scale/shift train. Keeping
/// statistics frozen makes single-frame training and inference see the
/// exact same transform.
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
    pub eps: f64,
}

impl BatchNorm2d {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        let gamma = store.register(
            format!("{name}.weight"),
            Array1::<T>::ones(channels).into_dyn(),
            true,
        );
        let beta = store.register(
            format!("{name}.bias"),
            Array1::<T>::zeros(channels).into_dyn(),
            true,
        );
        let running_mean = store.register_buffer(
            format!("{name}.running_mean"),
            Array1::<T>::zeros(channels).into_dyn(),
        );
        let running_var = store.register_buffer(
            format!("{name}.running_var"),
            Array1::<T>::ones(channels).into_dyn(),
        );
        BatchNorm2d {
            gamma,
            beta,
            running_mean,
            running_var,
            channels,
            eps: 1e-5,
        }
    }

    pub fn forward<T: Scalar>(&self, sess: &mut Session<'_, T>, x: Var) -> Var {
        let c = self.channels;
        // (x - mean) / sqrt(var + eps) folded into one constant scale/shift
        let mean = sess.store().value(self.running_mean);
        let var = sess.store().value(self.running_var);
        let eps = T::from_f64(self.eps);
        let scale = ndarray::Zip::from(&var).map_collect(|&v| T::one() / (v + eps).sqrt());
        let shift = ndarray::Zip::from(&mean)
            .and(&scale)
            .map_collect(|&m, &s| -m * s);
        let scale = sess.input(scale.into_shape(IxDyn(&[c, 1, 1])).unwrap());
        let shift = sess.input(shift.into_shape(IxDyn(&[c, 1, 1])).unwrap());
        let xn = sess.tape.mul_bcast(x, scale);
        let xn = sess.tape.add_bcast(xn, shift);

        let gamma = sess.bind(self.gamma);
        let beta = sess.bind(self.beta);
        let g = sess.tape.reshape(gamma, &[c, 1, 1]);
        let b = sess.tape.reshape(beta, &[c, 1, 1]);
        let y = sess.tape.mul_bcast(xn, g);
        sess.tape.add_bcast(y, b)
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }
}

pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl LinearLayer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_features: usize,
        out_features: usize,
    ) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        let w = Array2::from_shape_simple_fn((out_features, in_features), || {
            T::from_f64(rng.gen_range(-bound..bound))
        });
        let b = Array1::from_shape_simple_fn(out_features, || {
            T::from_f64(rng.gen_range(-bound..bound))
        });
        LinearLayer {
            weight: store.register(format!("{name}.weight"), w.into_dyn(), true),
            bias: store.register(format!("{name}.bias"), b.into_dyn(), true),
            in_features,
            out_features,
        }
    }

    pub fn forward<T: Scalar>(&self, sess: &mut Session<'_, T>, x: Var) -> Var {
        let w = sess.bind(self.weight);
        let b = sess.bind(self.bias);
        sess.tape.linear(x, w, Some(b))
    }

    pub fn param_count(&self) -> usize {
        self.out_features * (self.in_features + 1)
    }

    pub fn flops(&self) -> u64 {
        (2 * self.in_features * self.out_features) as u64
    }
}

/// Zero-filled dynamic array helper.
pub fn zeros<T: Scalar>(shape: &[usize]) -> ArrayD<T> {
    ArrayD::zeros(IxDyn(shape))
}
