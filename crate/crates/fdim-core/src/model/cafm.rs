//! Content-adaptive feature-distance modeling.
//!
//! Per scale: squared discrepancy map between reference and distorted
//! features, channel concatenation of (reference, distorted, discrepancy),
//! then aggregation by a deformable convolution whose offsets come from a
//! zero-initialized generator conditioned (by default) on the reference
//! features.

use rand_chacha::ChaCha8Rng;

use crate::error::{FdimError, Result};
use crate::nn::{Conv2dLayer, ParamStore, Session};
use crate::tensor::{Conv2dSpec, Scalar, Tape, Var};

use super::config::{ModelConfig, OffsetSource};

const KERNEL: usize = 3;
const SPEC: Conv2dSpec = Conv2dSpec { stride: 1, padding: 1 };

/// E = (F_R - F_D)^2, elementwise.
pub fn discrepancy_map<T: Scalar>(tape: &mut Tape<T>, f_r: Var, f_d: Var) -> Result<Var> {
    if tape.shape(f_r) != tape.shape(f_d) {
        return Err(FdimError::Contract(format!(
            "discrepancy_map: shape mismatch {:?} vs {:?}",
            tape.shape(f_r),
            tape.shape(f_d)
        )));
    }
    let diff = tape.sub(f_r, f_d);
    Ok(tape.square(diff))
}

/// Channel concatenation in the fixed order (reference, distorted,
/// discrepancy). The discrepancy slot is optional for the ablation that
/// removes it.
pub fn assemble_comparison<T: Scalar>(
    tape: &mut Tape<T>,
    f_r: Var,
    f_d: Var,
    e: Option<Var>,
) -> Result<Var> {
    let (sr, sd) = (tape.shape(f_r).to_vec(), tape.shape(f_d).to_vec());
    if sr[1..] != sd[1..] {
        return Err(FdimError::Contract(format!(
            "assemble_comparison: spatial mismatch {sr:?} vs {sd:?}"
        )));
    }
    let mut parts = vec![f_r, f_d];
    if let Some(e) = e {
        if tape.shape(e)[1..] != sr[1..] {
            return Err(FdimError::Contract(
                "assemble_comparison: discrepancy spatial mismatch".into(),
            ));
        }
        parts.push(e);
    }
    Ok(tape.concat(&parts, 0))
}

/// Deformable aggregation with an explicit finiteness gate on the offsets.
pub fn deformable_aggregate<T: Scalar>(
    sess: &mut Session<'_, T>,
    comparison: Var,
    offsets: Var,
    weight: Var,
    bias: Option<Var>,
) -> Result<Var> {
    if !sess.tape.value(offsets).iter().all(|v| v.is_finite()) {
        return Err(FdimError::Numeric(
            "deformable_aggregate: non-finite offset field".into(),
        ));
    }
    Ok(sess.tape.deform_conv2d(comparison, offsets, weight, bias, SPEC))
}

/// One comparison block at a fixed scale.
pub struct CafmBlock {
    /// Offset generator; absent when the deformable path is ablated.
    pub offset_gen: Option<Conv2dLayer>,
    /// Aggregation weights (shared shape for deformable and standard paths).
    pub agg: Conv2dLayer,
    pub offset_source: OffsetSource,
    pub use_discrepancy_map: bool,
    pub use_deformable: bool,
    pub channels: usize,
}

impl CafmBlock {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        scale: usize,
        channels: usize,
        config: &ModelConfig,
    ) -> Self {
        let cat_channels = if config.use_discrepancy_map {
            3 * channels
        } else {
            2 * channels
        };
        let offset_in = match config.offset_source {
            OffsetSource::Concatenated => cat_channels,
            _ => channels,
        };
        let offset_gen = config.use_deformable.then(|| {
            Conv2dLayer::new_zeroed(
                store,
                &format!("cafm{scale}.offset_gen"),
                offset_in,
                2 * KERNEL * KERNEL,
                KERNEL,
                SPEC,
                true,
            )
        });
        let agg = Conv2dLayer::new(
            store,
            rng,
            &format!("cafm{scale}.agg"),
            cat_channels,
            channels,
            KERNEL,
            SPEC,
            true,
        );
        CafmBlock {
            offset_gen,
            agg,
            offset_source: config.offset_source,
            use_discrepancy_map: config.use_discrepancy_map,
            use_deformable: config.use_deformable,
            channels,
        }
    }

    /// Offset field for the configured source.
    pub fn generate_offsets<T: Scalar>(
        &self,
        sess: &mut Session<'_, T>,
        f_r: Var,
        f_d: Var,
        e: Option<Var>,
        comparison: Var,
    ) -> Result<Var> {
        let gen = self.offset_gen.as_ref().ok_or_else(|| {
            FdimError::Contract("offset generator absent (deformable path ablated)".into())
        })?;
        let source = match self.offset_source {
            OffsetSource::Reference => f_r,
            OffsetSource::Distorted => f_d,
            OffsetSource::Discrepancy => e.ok_or_else(|| {
                FdimError::Config(
                    "offset_source=discrepancy requires use_discrepancy_map=true".into(),
                )
            })?,
            OffsetSource::Concatenated => comparison,
        };
        Ok(gen.forward(sess, source))
    }

    /// Full comparison: H as a tape node.
    pub fn forward<T: Scalar>(
        &self,
        sess: &mut Session<'_, T>,
        f_r: Var,
        f_d: Var,
    ) -> Result<Var> {
        let e = if self.use_discrepancy_map {
            Some(discrepancy_map(&mut sess.tape, f_r, f_d)?)
        } else {
            None
        };
        let c = assemble_comparison(&mut sess.tape, f_r, f_d, e)?;
        if self.use_deformable {
            let offsets = self.generate_offsets(sess, f_r, f_d, e, c)?;
            let w = sess.bind(self.agg.weight);
            let b = self.agg.bias.map(|b| sess.bind(b));
            deformable_aggregate(sess, c, offsets, w, b)
        } else {
            Ok(self.agg.forward(sess, c))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};
    use proptest::prelude::*;

    fn to_var(tape: &mut Tape<f64>, data: Vec<f64>, shape: &[usize]) -> Var {
        tape.constant_owned(ArrayD::from_shape_vec(IxDyn(shape), data).unwrap())
    }

    #[test]
    fn discrepancy_identity_is_zero() {
        let mut tape = Tape::<f64>::new();
        let a = to_var(&mut tape, vec![0.3; 12], &[3, 2, 2]);
        let e = discrepancy_map(&mut tape, a, a).unwrap();
        assert!(tape.value(e).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn discrepancy_direct_square() {
        let mut tape = Tape::<f64>::new();
        let a = to_var(&mut tape, vec![1.0, 2.0], &[1, 1, 2]);
        let b = to_var(&mut tape, vec![0.0, 4.0], &[1, 1, 2]);
        let e = discrepancy_map(&mut tape, a, b).unwrap();
        assert_eq!(tape.value(e).as_slice().unwrap(), &[1.0, 4.0]);
    }

    #[test]
    fn discrepancy_shape_mismatch_is_contract_error() {
        let mut tape = Tape::<f64>::new();
        let a = to_var(&mut tape, vec![0.0; 4], &[1, 2, 2]);
        let b = to_var(&mut tape, vec![0.0; 8], &[2, 2, 2]);
        assert!(matches!(
            discrepancy_map(&mut tape, a, b),
            Err(FdimError::Contract(_))
        ));
    }

    #[test]
    fn comparison_order_and_zero_tail() {
        let mut tape = Tape::<f64>::new();
        let r = to_var(&mut tape, vec![1.0, 2.0, 3.0, 4.0], &[1, 2, 2]);
        let d = to_var(&mut tape, vec![5.0, 6.0, 7.0, 8.0], &[1, 2, 2]);
        let e = to_var(&mut tape, vec![0.0; 4], &[1, 2, 2]);
        let c = assemble_comparison(&mut tape, r, d, Some(e)).unwrap();
        assert_eq!(tape.shape(c), &[3, 2, 2]);
        let v = tape.value(c).to_owned();
        // channel 0 of C equals channel 0 of F_R; zero E leaves the last
        // third all zero
        assert_eq!(v.as_slice().unwrap()[..4], [1.0, 2.0, 3.0, 4.0]);
        assert!(v.as_slice().unwrap()[8..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_offsets_are_numeric_error() {
        let store = ParamStore::<f64>::new();
        let mut sess = store.session(false);
        let c = sess.input(ArrayD::zeros(IxDyn(&[3, 4, 4])));
        let mut bad = ArrayD::zeros(IxDyn(&[18, 4, 4]));
        bad[[0, 0, 0]] = f64::NAN;
        let offsets = sess.input(bad);
        let w = sess.input(ArrayD::zeros(IxDyn(&[2, 3, 3, 3])));
        assert!(matches!(
            deformable_aggregate(&mut sess, c, offsets, w, None),
            Err(FdimError::Numeric(_))
        ));
    }

    #[test]
    fn fresh_block_generates_zero_offsets_and_matches_standard_conv() {
        use rand::SeedableRng;
        let cfg = ModelConfig::toy();
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let block = CafmBlock::new(&mut store, &mut rng, 1, 4, &cfg);

        let mut sess = store.session(false);
        let f_r = sess.input(ArrayD::from_shape_fn(IxDyn(&[4, 6, 6]), |ix| {
            (ix[0] as f64 * 0.3 + ix[1] as f64 * 0.11 - ix[2] as f64 * 0.07).sin()
        }));
        let f_d = sess.input(ArrayD::from_shape_fn(IxDyn(&[4, 6, 6]), |ix| {
            (ix[0] as f64 * 0.21 - ix[1] as f64 * 0.13 + ix[2] as f64 * 0.05).cos()
        }));
        let e = discrepancy_map(&mut sess.tape, f_r, f_d).unwrap();
        let c = assemble_comparison(&mut sess.tape, f_r, f_d, Some(e)).unwrap();
        let offsets = block
            .generate_offsets(&mut sess, f_r, f_d, Some(e), c)
            .unwrap();
        assert!(sess.tape.value(offsets).iter().all(|&v| v == 0.0));

        let h_deform = block.forward(&mut sess, f_r, f_d).unwrap();
        let h_std = block.agg.forward(&mut sess, c);
        let diff = (&sess.tape.value(h_deform).to_owned() - &sess.tape.value(h_std))
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()));
        assert!(diff < 1e-12, "zero-offset equivalence: {diff:.3e}");
    }

    #[test]
    fn ablated_discrepancy_narrows_comparison() {
        use rand::SeedableRng;
        let mut cfg = ModelConfig::toy();
        cfg.use_discrepancy_map = false;
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let block = CafmBlock::new(&mut store, &mut rng, 1, 4, &cfg);
        assert_eq!(block.agg.in_channels, 8);

        let mut sess = store.session(false);
        let f_r = sess.input(ArrayD::zeros(IxDyn(&[4, 5, 5])));
        let f_d = sess.input(ArrayD::zeros(IxDyn(&[4, 5, 5])));
        let h = block.forward(&mut sess, f_r, f_d).unwrap();
        assert_eq!(sess.tape.shape(h), &[4, 5, 5]);
    }

    proptest! {
        #[test]
        fn discrepancy_nonnegative_and_symmetric(
            a in proptest::collection::vec(-10.0f64..10.0, 24),
            b in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            let mut tape = Tape::<f64>::new();
            let va = to_var(&mut tape, a, &[2, 3, 4]);
            let vb = to_var(&mut tape, b, &[2, 3, 4]);
            let e_ab = discrepancy_map(&mut tape, va, vb).unwrap();
            let e_ba = discrepancy_map(&mut tape, vb, va).unwrap();
            let e_ab = tape.value(e_ab);
            let e_ba = tape.value(e_ba);
            prop_assert!(e_ab.iter().all(|&v| v >= 0.0));
            prop_assert!(e_ab
                .iter()
                .zip(e_ba.iter())
                .all(|(&x, &y)| (x - y).abs() < 1e-12));
        }
    }
}
