//! Parameter storage, layer building blocks, optimizer and weight-file IO.

mod adam;
mod layers;
mod store;
pub mod weights;

pub use adam::Adam;
pub use layers::{BatchNorm2d, Conv2dLayer, LinearLayer};
pub use store::{clip_global_norm, GradVec, ParamId, ParamKind, ParamStore, Session};
