//! The assembled deep branch: weight-shared encoder, per-scale comparison,
//! attention fusion, quality regression.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{ParamStore, Session};
use crate::tensor::{Scalar, Var};

use super::backbone::ResNetBackbone;
use super::cafm::CafmBlock;
use super::config::ModelConfig;
use super::head::QualityHead;
use super::msf::{msf_fuse, MsfBlock};

pub struct DeepModel<T: Scalar> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub backbone: ResNetBackbone,
    pub cafm: Vec<CafmBlock>,
    pub msf: Vec<MsfBlock>,
    pub head: QualityHead,
}

impl<T: Scalar> DeepModel<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone =
            ResNetBackbone::with_size(&mut store, &mut rng, config.base_width, config.stage_blocks);
        let widths = config.widths();
        let cafm = (0..4)
            .map(|s| CafmBlock::new(&mut store, &mut rng, s + 1, widths[s], &config))
            .collect();
        let msf = (0..4)
            .map(|s| {
                MsfBlock::new(
                    &mut store,
                    &mut rng,
                    s + 1,
                    widths[s],
                    config.reduction,
                    config.spatial_kernel,
                    config.use_msf_attention,
                )
            })
            .collect();
        let head = QualityHead::new(&mut store, &mut rng, config.fused_dim(), config.head_hidden);
        if config.freeze_backbone {
            store.set_trainable_prefix("backbone.", false);
        }
        DeepModel {
            config,
            store,
            backbone,
            cafm,
            msf,
            head,
        }
    }

    /// Conventional parameter count (weights, trainable or frozen; buffers
    /// excluded).
    pub fn param_count(&self) -> usize {
        self.store.weight_count()
    }

    /// Refined per-scale comparison maps for one frame pair (feature-map
    /// export and debugging).
    pub fn refined_maps(
        &self,
        sess: &mut Session<'_, T>,
        ref_frame: &Array3<T>,
        dist_frame: &Array3<T>,
    ) -> Result<[Var; 4]> {
        let pyr_r = self.backbone.extract_frame(sess, ref_frame)?;
        let pyr_d = self.backbone.extract_frame(sess, dist_frame)?;
        let mut refined = Vec::with_capacity(4);
        for s in 0..4 {
            let h = self.cafm[s].forward(sess, pyr_r[s], pyr_d[s])?;
            refined.push(self.msf[s].refine(sess, h));
        }
        Ok([refined[0], refined[1], refined[2], refined[3]])
    }

    /// Full frame-pair forward: (raw score, raw uncertainty) nodes.
    pub fn frame_forward(
        &self,
        sess: &mut Session<'_, T>,
        ref_frame: &Array3<T>,
        dist_frame: &Array3<T>,
    ) -> Result<(Var, Var)> {
        let refined = self.refined_maps(sess, ref_frame, dist_frame)?;
        let fused = msf_fuse(&mut sess.tape, &refined)?;
        self.head.regress(sess, fused)
    }

    /// Inference helper: raw (score, uncertainty) values for one frame pair.
    pub fn score_frame_pair(
        &self,
        ref_frame: &Array3<T>,
        dist_frame: &Array3<T>,
    ) -> Result<(f64, f64)> {
        let mut sess = self.store.session(false);
        let (q, u) = self.frame_forward(&mut sess, ref_frame, dist_frame)?;
        Ok((
            sess.tape.scalar_value(q).as_f64(),
            sess.tape.scalar_value(u).as_f64(),
        ))
    }
}
