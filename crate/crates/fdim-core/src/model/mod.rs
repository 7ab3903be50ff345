//! The learned branch: encoder, comparison, fusion, regression.

pub mod backbone;
pub mod cafm;
pub mod config;
pub mod deep;
pub mod head;
pub mod msf;

pub use backbone::ResNetBackbone;
pub use cafm::CafmBlock;
pub use config::{ModelConfig, OffsetSource};
pub use deep::DeepModel;
pub use head::{aggregate_video, QualityHead, SIGMA_EPS};
pub use msf::{msf_fuse, MsfBlock};
