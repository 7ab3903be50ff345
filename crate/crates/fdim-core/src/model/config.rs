//! Deep-branch architecture configuration and ablation toggles.

use serde::{Deserialize, Serialize};

use crate::error::{FdimError, Result};

/// Which feature map conditions the deformable offset generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSource {
    Reference,
    Distorted,
    Discrepancy,
    Concatenated,
}

impl std::str::FromStr for OffsetSource {
    type Err = FdimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(OffsetSource::Reference),
            "distorted" => Ok(OffsetSource::Distorted),
            "discrepancy" => Ok(OffsetSource::Discrepancy),
            "concatenated" => Ok(OffsetSource::Concatenated),
            other => Err(FdimError::Config(format!(
                "unknown offset_source '{other}' (expected reference|distorted|discrepancy|concatenated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Offsets are conditioned on the reference features by default.
    pub offset_source: OffsetSource,
    /// Compute and concatenate the squared feature discrepancy map.
    pub use_discrepancy_map: bool,
    /// Deformable aggregation; a plain convolution of the same kernel size
    /// when disabled.
    pub use_deformable: bool,
    /// Channel+spatial attention in the fusion stage; identity bypass when
    /// disabled.
    pub use_msf_attention: bool,
    /// Encoder width of the shallowest stage (64 for the standard encoder).
    pub base_width: usize,
    /// Residual blocks per stage (2,2,2,2 for the standard encoder).
    pub stage_blocks: [usize; 4],
    /// Channel-attention bottleneck ratio.
    pub reduction: usize,
    /// Spatial-attention kernel size.
    pub spatial_kernel: usize,
    /// Regression head hidden widths.
    pub head_hidden: [usize; 2],
    /// Keep encoder weights fixed during training.
    pub freeze_backbone: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            offset_source: OffsetSource::Reference,
            use_discrepancy_map: true,
            use_deformable: true,
            use_msf_attention: true,
            base_width: 64,
            stage_blocks: [2, 2, 2, 2],
            reduction: 16,
            spatial_kernel: 7,
            head_hidden: [512, 128],
            freeze_backbone: false,
        }
    }
}

impl ModelConfig {
    /// Tiny variant for gradient checks and structural tests.
    pub fn toy() -> Self {
        ModelConfig {
            base_width: 4,
            stage_blocks: [1, 1, 1, 1],
            reduction: 4,
            head_hidden: [16, 8],
            ..Default::default()
        }
    }

    /// Per-scale channel widths of the pyramid (and of the comparison
    /// outputs, which match them).
    pub fn widths(&self) -> [usize; 4] {
        [
            self.base_width,
            self.base_width * 2,
            self.base_width * 4,
            self.base_width * 8,
        ]
    }

    /// Dimension of the fused multi-scale vector.
    pub fn fused_dim(&self) -> usize {
        self.widths().iter().sum()
    }

    /// Apply one ablation toggle by key; unknown keys are a configuration
    /// error.
    pub fn apply_ablation(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "offset_source" => self.offset_source = value.parse()?,
            "use_discrepancy_map" => self.use_discrepancy_map = parse_bool(key, value)?,
            "use_deformable" => self.use_deformable = parse_bool(key, value)?,
            "use_msf_attention" => self.use_msf_attention = parse_bool(key, value)?,
            "freeze_backbone" => self.freeze_backbone = parse_bool(key, value)?,
            other => {
                return Err(FdimError::Config(format!(
                    "unknown ablation key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the configuration, embedded in checkpoints.
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(canon.as_bytes()))
    }
}

pub(crate) fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(FdimError::Config(format!(
            "invalid boolean '{other}' for {key}"
        ))),
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_widths_sum_to_960() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.widths(), [64, 128, 256, 512]);
        assert_eq!(cfg.fused_dim(), 960);
    }

    #[test]
    fn ablation_keys_round_trip() {
        let mut cfg = ModelConfig::default();
        cfg.apply_ablation("offset_source", "distorted").unwrap();
        assert_eq!(cfg.offset_source, OffsetSource::Distorted);
        cfg.apply_ablation("use_msf_attention", "false").unwrap();
        assert!(!cfg.use_msf_attention);
        assert!(cfg.apply_ablation("bogus_key", "1").is_err());
        assert!(cfg.apply_ablation("offset_source", "sideways").is_err());
    }

    #[test]
    fn fingerprint_tracks_config_changes() {
        let a = ModelConfig::default();
        let mut b = ModelConfig::default();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.use_deformable = false;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
