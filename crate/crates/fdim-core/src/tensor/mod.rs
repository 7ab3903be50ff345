//! Minimal reverse-mode autodiff over `ndarray`, sized for this model:
//! convolutions (standard and deformable), pooling, attention gating and the
//! scalar ranking-loss head. Generic over f32/f64 so gradient checks run in
//! double precision while training runs in single.

pub mod ops;
pub mod scalar;
pub mod tape;

#[cfg(test)]
mod tests;

pub use ops::Conv2dSpec;
pub use scalar::{phi, Scalar};
pub use tape::{BackwardOp, Gradients, Tape, Var};
