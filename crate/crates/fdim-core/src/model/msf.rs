//! Attention-based multi-scale fusion: per-scale channel then spatial
//! gating, global average pooling, concatenation in scale order.

use rand_chacha::ChaCha8Rng;

use crate::error::{FdimError, Result};
use crate::nn::{Conv2dLayer, LinearLayer, ParamStore, Session};
use crate::tensor::{Conv2dSpec, Scalar, Tape, Var};

/// Attention refinement for one scale. With attention disabled the block
/// holds no parameters and `refine` is the identity (gates bypassed, not
/// set to one-half).
pub struct MsfBlock {
    attention: Option<Attention>,
    pub channels: usize,
}

struct Attention {
    ca_fc1: LinearLayer,
    ca_fc2: LinearLayer,
    sa_conv: Conv2dLayer,
}

impl MsfBlock {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        scale: usize,
        channels: usize,
        reduction: usize,
        spatial_kernel: usize,
        use_attention: bool,
    ) -> Self {
        let attention = use_attention.then(|| {
            let hidden = (channels / reduction).max(1);
            Attention {
                ca_fc1: LinearLayer::new(store, rng, &format!("msf{scale}.ca.fc1"), channels, hidden),
                ca_fc2: LinearLayer::new(store, rng, &format!("msf{scale}.ca.fc2"), hidden, channels),
                sa_conv: Conv2dLayer::new(
                    store,
                    rng,
                    &format!("msf{scale}.sa.conv"),
                    2,
                    1,
                    spatial_kernel,
                    Conv2dSpec {
                        stride: 1,
                        padding: spatial_kernel / 2,
                    },
                    true,
                ),
            }
        });
        MsfBlock { attention, channels }
    }

    /// Channel gate from shared MLP over global average and max pools, then
    /// spatial gate from a convolution over channel-pooled maps.
    pub fn refine<T: Scalar>(&self, sess: &mut Session<'_, T>, h: Var) -> Var {
        let Some(att) = &self.attention else {
            return h;
        };
        let c = self.channels;

        // channel attention
        let avg = sess.tape.mean_spatial(h);
        let max = sess.tape.max_spatial(h);
        let mlp = |sess: &mut Session<'_, T>, v: Var| {
            let z = att.ca_fc1.forward(sess, v);
            let z = sess.tape.relu(z);
            att.ca_fc2.forward(sess, z)
        };
        let a = mlp(sess, avg);
        let m = mlp(sess, max);
        let s = sess.tape.add(a, m);
        let gate = sess.tape.sigmoid(s);
        let gate = sess.tape.reshape(gate, &[c, 1, 1]);
        let h_c = sess.tape.mul_bcast(h, gate);

        // spatial attention
        let ch_avg = sess.tape.mean_channels(h_c);
        let ch_max = sess.tape.max_channels(h_c);
        let pooled = sess.tape.concat(&[ch_avg, ch_max], 0);
        let sa = att.sa_conv.forward(sess, pooled);
        let sa_gate = sess.tape.sigmoid(sa);
        sess.tape.mul_bcast(h_c, sa_gate)
    }
}

/// Global average pooling per scale, concatenated in scale order 1..4.
pub fn msf_fuse<T: Scalar>(tape: &mut Tape<T>, refined: &[Var]) -> Result<Var> {
    if refined.len() != 4 {
        return Err(FdimError::Contract(format!(
            "msf_fuse expects 4 scales, got {}",
            refined.len()
        )));
    }
    let pooled: Vec<Var> = refined.iter().map(|&h| tape.mean_spatial(h)).collect();
    Ok(tape.concat(&pooled, 0))
}
