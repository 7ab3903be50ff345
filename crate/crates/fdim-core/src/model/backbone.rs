//! Weight-shared multi-scale feature encoder: an 18-layer residual network
//! with taps after each of its four residual stages.
//!
//! Parameter names follow the torchvision state-dict layout (prefixed with
//! `backbone.`) so published checkpoints can be imported directly.

use ndarray::{Array3, ArrayD};
use rand_chacha::ChaCha8Rng;

use crate::error::{FdimError, Result};
use crate::nn::{BatchNorm2d, Conv2dLayer, ParamStore, Session};
use crate::tensor::{Conv2dSpec, Scalar, Var};

/// Channel mean/std used to standardize [0,1] inputs, from the backbone's
/// pretraining statistics.
pub const INPUT_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const INPUT_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Minimum input side: the stem plus four stages downsample by 32 and the
/// deepest tap must keep at least one sample.
pub const MIN_INPUT_SIDE: usize = 32;

struct BasicBlock {
    conv1: Conv2dLayer,
    bn1: BatchNorm2d,
    conv2: Conv2dLayer,
    bn2: BatchNorm2d,
    downsample: Option<(Conv2dLayer, BatchNorm2d)>,
}

impl BasicBlock {
    fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
    ) -> Self {
        let conv1 = Conv2dLayer::new(
            store,
            rng,
            &format!("{name}.conv1"),
            in_ch,
            out_ch,
            3,
            Conv2dSpec { stride, padding: 1 },
            false,
        );
        let bn1 = BatchNorm2d::new(store, &format!("{name}.bn1"), out_ch);
        let conv2 = Conv2dLayer::new(
            store,
            rng,
            &format!("{name}.conv2"),
            out_ch,
            out_ch,
            3,
            Conv2dSpec { stride: 1, padding: 1 },
            false,
        );
        let bn2 = BatchNorm2d::new(store, &format!("{name}.bn2"), out_ch);
        let downsample = (stride != 1 || in_ch != out_ch).then(|| {
            let conv = Conv2dLayer::new(
                store,
                rng,
                &format!("{name}.downsample.0"),
                in_ch,
                out_ch,
                1,
                Conv2dSpec { stride, padding: 0 },
                false,
            );
            let bn = BatchNorm2d::new(store, &format!("{name}.downsample.1"), out_ch);
            (conv, bn)
        });
        BasicBlock {
            conv1,
            bn1,
            conv2,
            bn2,
            downsample,
        }
    }

    fn forward<T: Scalar>(&self, sess: &mut Session<'_, T>, x: Var) -> Var {
        let y = self.conv1.forward(sess, x);
        let y = self.bn1.forward(sess, y);
        let y = sess.tape.relu(y);
        let y = self.conv2.forward(sess, y);
        let y = self.bn2.forward(sess, y);
        let skip = match &self.downsample {
            Some((conv, bn)) => {
                let s = conv.forward(sess, x);
                bn.forward(sess, s)
            }
            None => x,
        };
        let y = sess.tape.add(y, skip);
        sess.tape.relu(y)
    }
}

pub struct ResNetBackbone {
    conv1: Conv2dLayer,
    bn1: BatchNorm2d,
    stages: Vec<Vec<BasicBlock>>,
    /// Channel width of each pyramid level.
    pub widths: [usize; 4],
    /// Spatial stride of each pyramid level relative to the input.
    pub strides: [usize; 4],
}

impl ResNetBackbone {
    /// Standard 18-layer configuration: base width 64, two blocks per stage.
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, rng: &mut ChaCha8Rng) -> Self {
        Self::with_size(store, rng, 64, [2, 2, 2, 2])
    }

    /// Reduced variant for toy-scale tests; same topology, smaller widths
    /// and block counts.
    pub fn with_size<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        base_width: usize,
        blocks: [usize; 4],
    ) -> Self {
        let widths = [base_width, base_width * 2, base_width * 4, base_width * 8];
        let conv1 = Conv2dLayer::new(
            store,
            rng,
            "backbone.conv1",
            3,
            base_width,
            7,
            Conv2dSpec { stride: 2, padding: 3 },
            false,
        );
        let bn1 = BatchNorm2d::new(store, "backbone.bn1", base_width);

        let mut stages = Vec::with_capacity(4);
        let mut in_ch = base_width;
        for (stage_idx, (&width, &count)) in widths.iter().zip(blocks.iter()).enumerate() {
            let mut stage = Vec::with_capacity(count);
            for block_idx in 0..count {
                let stride = if stage_idx > 0 && block_idx == 0 { 2 } else { 1 };
                stage.push(BasicBlock::new(
                    store,
                    rng,
                    &format!("backbone.layer{}.{}", stage_idx + 1, block_idx),
                    in_ch,
                    width,
                    stride,
                ));
                in_ch = width;
            }
            stages.push(stage);
        }
        ResNetBackbone {
            conv1,
            bn1,
            stages,
            widths,
            strides: [4, 8, 16, 32],
        }
    }

    /// Standardize a [0,1] RGB frame with the pretraining statistics and
    /// insert it into the session as an input.
    pub fn prepare_input<T: Scalar>(
        &self,
        sess: &mut Session<'_, T>,
        frame: &Array3<T>,
    ) -> Result<Var> {
        let (c, h, w) = frame.dim();
        if c != 3 {
            return Err(FdimError::Contract(format!(
                "backbone input must have 3 channels, got {c}"
            )));
        }
        if h < MIN_INPUT_SIDE || w < MIN_INPUT_SIDE {
            return Err(FdimError::Geometry(format!(
                "backbone input {h}x{w} is below the {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE} minimum"
            )));
        }
        let mut standardized = frame.clone();
        for ch in 0..3 {
            let mean = T::from_f64(INPUT_MEAN[ch]);
            let inv_std = T::from_f64(1.0 / INPUT_STD[ch]);
            standardized
                .index_axis_mut(ndarray::Axis(0), ch)
                .mapv_inplace(|v| (v - mean) * inv_std);
        }
        Ok(sess.input(standardized.into_dyn()))
    }

    /// Four-scale feature pyramid from a prepared input node.
    pub fn extract<T: Scalar>(&self, sess: &mut Session<'_, T>, x: Var) -> [Var; 4] {
        let y = self.conv1.forward(sess, x);
        let y = self.bn1.forward(sess, y);
        let y = sess.tape.relu(y);
        let mut y = sess
            .tape
            .max_pool2d(y, 3, Conv2dSpec { stride: 2, padding: 1 });
        let mut taps = Vec::with_capacity(4);
        for stage in &self.stages {
            for block in stage {
                y = block.forward(sess, y);
            }
            taps.push(y);
        }
        [taps[0], taps[1], taps[2], taps[3]]
    }

    /// Convenience: standardize + extract, values only (no grad bookkeeping
    /// beyond what the session does).
    pub fn extract_frame<T: Scalar>(
        &self,
        sess: &mut Session<'_, T>,
        frame: &Array3<T>,
    ) -> Result<[Var; 4]> {
        let x = self.prepare_input(sess, frame)?;
        Ok(self.extract(sess, x))
    }

    /// Pyramid of owned arrays for one frame (inference helper).
    pub fn pyramid_values<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        frame: &Array3<T>,
    ) -> Result<Vec<ArrayD<T>>> {
        let mut sess = store.session(false);
        let taps = self.extract_frame(&mut sess, frame)?;
        Ok(taps
            .iter()
            .map(|&t| sess.tape.value(t).to_owned())
            .collect())
    }
}
