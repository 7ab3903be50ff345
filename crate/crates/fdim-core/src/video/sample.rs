//! Frame sampling strategies.

use crate::error::{FdimError, Result};

use super::VideoClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStrategy {
    /// One frame per second of content, starting at frame 0.
    OnePerSecond,
    All,
    Stride(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct FrameSampleSpec {
    pub strategy: SampleStrategy,
    /// Seed for reproducible augmentation downstream; sampling itself is
    /// deterministic.
    pub seed: u64,
}

impl Default for FrameSampleSpec {
    fn default() -> Self {
        FrameSampleSpec {
            strategy: SampleStrategy::OnePerSecond,
            seed: 0,
        }
    }
}

/// Strictly increasing frame indices within the clip; index 0 is always
/// included.
pub fn sample_frames(clip: &VideoClip, spec: &FrameSampleSpec) -> Result<Vec<usize>> {
    let len = clip.frame_count();
    if len == 0 {
        return Err(FdimError::Contract("sample_frames: empty clip".into()));
    }
    let indices = match spec.strategy {
        SampleStrategy::All => (0..len).collect(),
        SampleStrategy::Stride(k) => {
            if k == 0 {
                return Err(FdimError::Config("stride must be positive".into()));
            }
            (0..len).step_by(k).collect()
        }
        SampleStrategy::OnePerSecond => {
            let step = clip.geometry.fps.round().max(1.0) as usize;
            (0..len).step_by(step).collect()
        }
    };
    Ok(indices)
}
