//! Raw planar video: decoding, sampling, geometry matching, augmentation
//! and RGB conversion.

mod augment;
mod convert;
mod raw;
mod resample;
mod sample;

pub use augment::{augment_crop_flip, reflect_pad_to};
pub use convert::{frame_to_rgb, rgb_to_frame};
pub use raw::{read_raw_video, write_raw_video};
pub use resample::{resample_plane_bicubic, resample_to_reference};
pub use sample::{sample_frames, FrameSampleSpec, SampleStrategy};

use crate::error::{FdimError, Result};

/// Signal format of the decoded values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SignalFormat {
    SdrSrgb,
    HdrPq,
    HdrHlg,
}

impl std::str::FromStr for SignalFormat {
    type Err = FdimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdr-srgb" => Ok(SignalFormat::SdrSrgb),
            "hdr-pq" => Ok(SignalFormat::HdrPq),
            "hdr-hlg" => Ok(SignalFormat::HdrHlg),
            other => Err(FdimError::Config(format!(
                "unknown signal format '{other}' (expected sdr-srgb|hdr-pq|hdr-hlg)"
            ))),
        }
    }
}

impl std::fmt::Display for SignalFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SignalFormat::SdrSrgb => "sdr-srgb",
            SignalFormat::HdrPq => "hdr-pq",
            SignalFormat::HdrHlg => "hdr-hlg",
        };
        f.write_str(s)
    }
}

/// Geometry of a raw clip (raw files carry no header, so this arrives from
/// the CLI or a manifest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoGeometry {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub fps: f64,
}

impl VideoGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.bit_depth != 8 && self.bit_depth != 10 {
            return Err(FdimError::Config(format!(
                "unsupported bit depth {} (expected 8 or 10)",
                self.bit_depth
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(FdimError::Config("zero frame dimension".into()));
        }
        if self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(FdimError::Config(format!(
                "4:2:0 requires even dimensions, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.fps > 0.0) {
            return Err(FdimError::Config("fps must be positive".into()));
        }
        Ok(())
    }

    /// Bytes of one frame in the raw file.
    pub fn frame_bytes(&self) -> usize {
        let samples = self.width * self.height * 3 / 2;
        samples * self.bytes_per_sample()
    }

    pub fn bytes_per_sample(&self) -> usize {
        if self.bit_depth > 8 {
            2
        } else {
            1
        }
    }

    pub fn max_value(&self) -> u16 {
        (1u16 << self.bit_depth) - 1
    }

    pub fn chroma_dims(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }
}

/// Plane samples at the clip's native bit depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlaneData {
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl PlaneData {
    pub fn len(&self) -> usize {
        match self {
            PlaneData::U8(v) => v.len(),
            PlaneData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u16 {
        match self {
            PlaneData::U8(v) => v[i] as u16,
            PlaneData::U16(v) => v[i],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            PlaneData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            PlaneData::U16(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn from_f64(values: &[f64], bit_depth: u8, max: u16) -> PlaneData {
        if bit_depth > 8 {
            PlaneData::U16(
                values
                    .iter()
                    .map(|&v| v.round().clamp(0.0, max as f64) as u16)
                    .collect(),
            )
        } else {
            PlaneData::U8(
                values
                    .iter()
                    .map(|&v| v.round().clamp(0.0, max as f64) as u8)
                    .collect(),
            )
        }
    }
}

/// One decoded frame: full-resolution luma plus half-resolution chroma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub y: PlaneData,
    pub u: PlaneData,
    pub v: PlaneData,
}

/// A decoded planar sequence with shared geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub geometry: VideoGeometry,
    pub signal_format: SignalFormat,
    pub frames: Vec<Frame>,
}

impl VideoClip {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames.len() as f64 / self.geometry.fps
    }
}
