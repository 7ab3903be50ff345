//! Raw planar YUV 4:2:0 file IO (8-bit, or 10-bit little-endian in 16-bit
//! containers).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{FdimError, Result};

use super::{Frame, PlaneData, SignalFormat, VideoClip, VideoGeometry};

fn read_plane(
    reader: &mut impl Read,
    samples: usize,
    geometry: &VideoGeometry,
) -> Result<PlaneData> {
    if geometry.bit_depth > 8 {
        let mut bytes = vec![0u8; samples * 2];
        reader.read_exact(&mut bytes)?;
        let max = geometry.max_value();
        let mut out = Vec::with_capacity(samples);
        for pair in bytes.chunks_exact(2) {
            let v = u16::from_le_bytes([pair[0], pair[1]]);
            if v > max {
                return Err(FdimError::MalformedInput(format!(
                    "sample value {v} exceeds {}-bit range",
                    geometry.bit_depth
                )));
            }
            out.push(v);
        }
        Ok(PlaneData::U16(out))
    } else {
        let mut bytes = vec![0u8; samples];
        reader.read_exact(&mut bytes)?;
        Ok(PlaneData::U8(bytes))
    }
}

/// Decode a whole raw clip. The file size must be an exact multiple of the
/// per-frame byte count.
pub fn read_raw_video(
    path: impl AsRef<Path>,
    geometry: VideoGeometry,
    signal_format: SignalFormat,
) -> Result<VideoClip> {
    geometry.validate()?;
    let path = path.as_ref();
    let file = File::open(path)?;
    let file_size = file.metadata()?.len();
    let frame_bytes = geometry.frame_bytes() as u64;
    if file_size % frame_bytes != 0 {
        return Err(FdimError::MalformedInput(format!(
            "{}: size {file_size} is not a multiple of the {frame_bytes}-byte frame \
             ({}x{} {}-bit 4:2:0); trailing {} bytes",
            path.display(),
            geometry.width,
            geometry.height,
            geometry.bit_depth,
            file_size % frame_bytes
        )));
    }
    let n_frames = (file_size / frame_bytes) as usize;
    let mut reader = BufReader::new(file);
    let (cw, ch) = geometry.chroma_dims();
    let luma = geometry.width * geometry.height;
    let chroma = cw * ch;

    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        frames.push(Frame {
            y: read_plane(&mut reader, luma, &geometry)?,
            u: read_plane(&mut reader, chroma, &geometry)?,
            v: read_plane(&mut reader, chroma, &geometry)?,
        });
    }
    Ok(VideoClip {
        geometry,
        signal_format,
        frames,
    })
}

fn write_plane(writer: &mut impl Write, plane: &PlaneData) -> Result<()> {
    match plane {
        PlaneData::U8(v) => writer.write_all(v)?,
        PlaneData::U16(v) => {
            for &s in v {
                writer.write_all(&s.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Inverse of [`read_raw_video`]; the pair round-trips byte-identically.
pub fn write_raw_video(clip: &VideoClip, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for frame in &clip.frames {
        write_plane(&mut writer, &frame.y)?;
        write_plane(&mut writer, &frame.u)?;
        write_plane(&mut writer, &frame.v)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry_1080p() -> VideoGeometry {
        VideoGeometry {
            width: 1920,
            height: 1080,
            bit_depth: 8,
            fps: 25.0,
        }
    }

    #[test]
    fn frame_count_from_exact_multiples() {
        let dir = tempfile::tempdir().unwrap();
        let g = geometry_1080p();
        assert_eq!(g.frame_bytes(), 3_110_400);

        for (bytes, frames) in [(3_110_400usize, 1usize), (6_220_800, 2)] {
            let path = dir.path().join(format!("{bytes}.yuv"));
            std::fs::write(&path, vec![0u8; bytes]).unwrap();
            let clip = read_raw_video(&path, g, SignalFormat::SdrSrgb).unwrap();
            assert_eq!(clip.frame_count(), frames);
        }
    }

    #[test]
    fn truncated_file_reports_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.yuv");
        std::fs::write(&path, vec![0u8; 3_110_401]).unwrap();
        let err = read_raw_video(&path, geometry_1080p(), SignalFormat::SdrSrgb).unwrap_err();
        match err {
            FdimError::MalformedInput(msg) => {
                assert!(msg.contains("3110401") && msg.contains("3110400"), "{msg}");
            }
            other => panic!("expected malformed-input error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_bit_depth_is_config_error() {
        let g = VideoGeometry {
            bit_depth: 12,
            ..geometry_1080p()
        };
        let err = read_raw_video("/nonexistent", g, SignalFormat::SdrSrgb).unwrap_err();
        assert!(matches!(err, FdimError::Config(_)));
    }

    #[test]
    fn ten_bit_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let g = VideoGeometry {
            width: 8,
            height: 6,
            bit_depth: 10,
            fps: 24.0,
        };
        let mut bytes = Vec::new();
        for i in 0..(g.frame_bytes() / 2) * 2 {
            // little-endian 10-bit ramp
            let v = ((i * 7) % 1024) as u16;
            if i % 2 == 0 {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let path = dir.path().join("in.yuv");
        std::fs::write(&path, &bytes).unwrap();
        let clip = read_raw_video(&path, g, SignalFormat::HdrPq).unwrap();
        let out = dir.path().join("out.yuv");
        write_raw_video(&clip, &out).unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), bytes);
    }

    #[test]
    fn out_of_range_ten_bit_sample_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = VideoGeometry {
            width: 2,
            height: 2,
            bit_depth: 10,
            fps: 24.0,
        };
        let mut bytes = vec![0u8; g.frame_bytes()];
        bytes[0] = 0xff;
        bytes[1] = 0xff; // 65535 > 1023
        let path = dir.path().join("bad10.yuv");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_raw_video(&path, g, SignalFormat::HdrPq),
            Err(FdimError::MalformedInput(_))
        ));
    }
}
