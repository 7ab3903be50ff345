//! Full-reference video quality metric toolkit.
//!
//! The metric combines a learned feature-distance branch (weight-shared
//! residual encoder, content-adaptive feature comparison with deformable
//! aggregation, attention-based multi-scale fusion, quality regression) with
//! an external hand-crafted branch (VMAF). Branch scores are mapped to a
//! common scale with fitted logistic functions and averaged. HDR content is
//! handled by a display model plus PU21 perceptually-uniform encoding in
//! front of the learned branch.
//!
//! The crate also carries everything needed to train and evaluate the
//! learned branch: raw YUV clip IO, pairwise ranking training with a
//! fidelity loss, logistic calibration fitting, PLCC/SROCC evaluation
//! protocols, a synthetic distortion corpus, and complexity accounting.

pub mod error;
pub mod model;
pub mod nn;
pub mod gradcheck;
pub mod hdr;
pub mod tensor;
pub mod video;

pub use error::{FdimError, Result};
