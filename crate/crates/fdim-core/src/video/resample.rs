//! Spatial resampling (bicubic, per plane) to match distorted clips to
//! their reference geometry.

use crate::error::{FdimError, Result};

use super::{Frame, PlaneData, VideoClip, VideoGeometry};

/// Catmull-Rom cubic kernel (a = -0.5).
fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Separable bicubic resize with edge clamping and per-pixel weight
/// normalization (constants are preserved exactly).
pub fn resample_plane_bicubic(
    src: &[f64],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f64> {
    if src_w == dst_w && src_h == dst_h {
        return src.to_vec();
    }
    // horizontal pass
    let mut tmp = vec![0.0f64; dst_w * src_h];
    let sx = src_w as f64 / dst_w as f64;
    for ox in 0..dst_w {
        let center = (ox as f64 + 0.5) * sx - 0.5;
        let base = center.floor() as isize;
        let mut taps = [(0usize, 0.0f64); 4];
        let mut wsum = 0.0;
        for (k, tap) in taps.iter_mut().enumerate() {
            let ix = base - 1 + k as isize;
            let w = cubic_weight(center - ix as f64);
            let ix = ix.clamp(0, src_w as isize - 1) as usize;
            *tap = (ix, w);
            wsum += w;
        }
        for row in 0..src_h {
            let mut acc = 0.0;
            for &(ix, w) in &taps {
                acc += w * src[row * src_w + ix];
            }
            tmp[row * dst_w + ox] = acc / wsum;
        }
    }
    // vertical pass
    let mut dst = vec![0.0f64; dst_w * dst_h];
    let sy = src_h as f64 / dst_h as f64;
    for oy in 0..dst_h {
        let center = (oy as f64 + 0.5) * sy - 0.5;
        let base = center.floor() as isize;
        let mut taps = [(0usize, 0.0f64); 4];
        let mut wsum = 0.0;
        for (k, tap) in taps.iter_mut().enumerate() {
            let iy = base - 1 + k as isize;
            let w = cubic_weight(center - iy as f64);
            let iy = iy.clamp(0, src_h as isize - 1) as usize;
            *tap = (iy, w);
            wsum += w;
        }
        for ox in 0..dst_w {
            let mut acc = 0.0;
            for &(iy, w) in &taps {
                acc += w * tmp[iy * dst_w + ox];
            }
            dst[oy * dst_w + ox] = acc / wsum;
        }
    }
    dst
}

fn resample_frame(frame: &Frame, src: &VideoGeometry, dst: &VideoGeometry) -> Frame {
    let (scw, sch) = src.chroma_dims();
    let (dcw, dch) = dst.chroma_dims();
    let max = src.max_value();
    let y = resample_plane_bicubic(
        &frame.y.to_f64(),
        src.width,
        src.height,
        dst.width,
        dst.height,
    );
    let u = resample_plane_bicubic(&frame.u.to_f64(), scw, sch, dcw, dch);
    let v = resample_plane_bicubic(&frame.v.to_f64(), scw, sch, dcw, dch);
    Frame {
        y: PlaneData::from_f64(&y, src.bit_depth, max),
        u: PlaneData::from_f64(&u, src.bit_depth, max),
        v: PlaneData::from_f64(&v, src.bit_depth, max),
    }
}

/// Upsample (or downsample) the distorted clip so its spatial geometry
/// matches the reference. A geometry match is a bit-identical pass-through.
pub fn resample_to_reference(dist: &VideoClip, reference: &VideoClip) -> Result<VideoClip> {
    if dist.frame_count() != reference.frame_count() {
        return Err(FdimError::Alignment(format!(
            "frame-count mismatch: distorted {} vs reference {}",
            dist.frame_count(),
            reference.frame_count()
        )));
    }
    if dist.geometry.width == reference.geometry.width
        && dist.geometry.height == reference.geometry.height
    {
        return Ok(dist.clone());
    }
    let dst_geometry = VideoGeometry {
        width: reference.geometry.width,
        height: reference.geometry.height,
        ..dist.geometry
    };
    let frames = dist
        .frames
        .iter()
        .map(|f| resample_frame(f, &dist.geometry, &dst_geometry))
        .collect();
    Ok(VideoClip {
        geometry: dst_geometry,
        signal_format: dist.signal_format,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::SignalFormat;

    fn clip(w: usize, h: usize, frames: usize, fill: u8) -> VideoClip {
        let g = VideoGeometry {
            width: w,
            height: h,
            bit_depth: 8,
            fps: 25.0,
        };
        let frame = Frame {
            y: PlaneData::U8(vec![fill; w * h]),
            u: PlaneData::U8(vec![128; w * h / 4]),
            v: PlaneData::U8(vec![128; w * h / 4]),
        };
        VideoClip {
            geometry: g,
            signal_format: SignalFormat::SdrSrgb,
            frames: vec![frame; frames],
        }
    }

    #[test]
    fn upsamples_to_reference_geometry() {
        let dist = clip(960, 540, 1, 77);
        let reference = clip(1920, 1080, 1, 0);
        let out = resample_to_reference(&dist, &reference).unwrap();
        assert_eq!(out.geometry.width, 1920);
        assert_eq!(out.geometry.height, 1080);
        assert_eq!(out.frames[0].y.len(), 1920 * 1080);
    }

    #[test]
    fn matching_geometry_is_bit_identical_pass_through() {
        let dist = clip(64, 36, 2, 13);
        let reference = clip(64, 36, 2, 200);
        let out = resample_to_reference(&dist, &reference).unwrap();
        assert_eq!(out, dist);
    }

    #[test]
    fn constant_plane_stays_constant() {
        let up = resample_plane_bicubic(&vec![42.0; 16], 4, 4, 8, 8);
        assert!(up.iter().all(|&v| (v - 42.0).abs() < 1e-9));

        let dist = clip(4, 4, 1, 42);
        let reference = clip(8, 8, 1, 0);
        let out = resample_to_reference(&dist, &reference).unwrap();
        match &out.frames[0].y {
            PlaneData::U8(v) => assert!(v.iter().all(|&x| x == 42)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn mean_of_constant_preserved_exactly_in_float() {
        let src = vec![7.25; 6 * 4];
        let up = resample_plane_bicubic(&src, 6, 4, 13, 9);
        let mean = up.iter().sum::<f64>() / up.len() as f64;
        assert!((mean - 7.25).abs() < 1e-12);
    }

    #[test]
    fn frame_count_mismatch_is_alignment_error() {
        let dist = clip(4, 4, 2, 0);
        let reference = clip(8, 8, 3, 0);
        assert!(matches!(
            resample_to_reference(&dist, &reference),
            Err(FdimError::Alignment(_))
        ));
    }

    #[test]
    fn linear_ramp_interpolated_monotonically() {
        let src: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let up = resample_plane_bicubic(&src, 8, 1, 16, 1);
        for w in up.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "ramp must stay monotone: {up:?}");
        }
    }
}
