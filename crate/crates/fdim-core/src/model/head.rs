//! Quality regression head: three fully-connected layers emitting a frame
//! score and a raw uncertainty, plus temporal aggregation.

use rand_chacha::ChaCha8Rng;

use crate::error::{FdimError, Result};
use crate::nn::{LinearLayer, ParamStore, Session};
use crate::tensor::{ops, Scalar, Tape, Var};

/// Floor added to the softplus-positive uncertainty so preference
/// denominators stay bounded away from zero.
pub const SIGMA_EPS: f64 = 1e-3;

pub struct QualityHead {
    fc1: LinearLayer,
    fc2: LinearLayer,
    fc3: LinearLayer,
    pub in_features: usize,
}

impl QualityHead {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        in_features: usize,
        hidden: [usize; 2],
    ) -> Self {
        QualityHead {
            fc1: LinearLayer::new(store, rng, "head.fc1", in_features, hidden[0]),
            fc2: LinearLayer::new(store, rng, "head.fc2", hidden[0], hidden[1]),
            fc3: LinearLayer::new(store, rng, "head.fc3", hidden[1], 2),
            in_features,
        }
    }

    /// (raw score, raw uncertainty) for one fused vector.
    pub fn regress<T: Scalar>(&self, sess: &mut Session<'_, T>, v: Var) -> Result<(Var, Var)> {
        let dim = sess.tape.value(v).len();
        if dim != self.in_features {
            return Err(FdimError::Contract(format!(
                "regress_frame: fused vector has dim {dim}, head expects {}",
                self.in_features
            )));
        }
        let z = self.fc1.forward(sess, v);
        let z = sess.tape.relu(z);
        let z = self.fc2.forward(sess, z);
        let z = sess.tape.relu(z);
        let out = self.fc3.forward(sess, z);
        let score = sess.tape.select(out, 0);
        let sigma_raw = sess.tape.select(out, 1);
        Ok((score, sigma_raw))
    }
}

/// Video score and positive uncertainty from per-frame raw pairs, on the
/// tape (used in training where gradients must flow).
pub fn aggregate_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    per_frame: &[(Var, Var)],
) -> Result<(Var, Var)> {
    if per_frame.is_empty() {
        return Err(FdimError::Contract(
            "aggregate_video: empty frame list".into(),
        ));
    }
    let scores: Vec<Var> = per_frame.iter().map(|&(s, _)| s).collect();
    let sigmas: Vec<Var> = per_frame.iter().map(|&(_, s)| s).collect();
    let score_vec = tape.concat(&scores, 0);
    let sigma_vec = tape.concat(&sigmas, 0);
    let q = tape.mean_all(score_vec);
    let sigma_mean = tape.mean_all(sigma_vec);
    let sp = tape.softplus(sigma_mean);
    let sigma = tape.affine(sp, T::one(), T::from_f64(SIGMA_EPS));
    Ok((q, sigma))
}

/// Plain-value aggregation for inference paths.
pub fn aggregate_video(per_frame: &[(f64, f64)]) -> Result<(f64, f64)> {
    if per_frame.is_empty() {
        return Err(FdimError::Contract(
            "aggregate_video: empty frame list".into(),
        ));
    }
    let n = per_frame.len() as f64;
    let q = per_frame.iter().map(|&(s, _)| s).sum::<f64>() / n;
    let raw_mean = per_frame.iter().map(|&(_, u)| u).sum::<f64>() / n;
    let sigma = ops::softplus_stable(raw_mean) + SIGMA_EPS;
    Ok((q, sigma))
}
