//! YCbCr <-> RGB conversion.
//!
//! Full-range code values (matching the 1/(2^d - 1) normalization used for
//! network and PU21 input), BT.709 matrix for SDR and BT.2020 for HDR.
//! Chroma is upsampled to 4:4:4 by sample duplication; the metric consumes
//! features at strides >= 4, where the chroma siting filter is immaterial.

use ndarray::Array3;

use crate::tensor::Scalar;

use super::{Frame, PlaneData, SignalFormat, VideoGeometry};

struct Matrix {
    kr: f64,
    kb: f64,
}

fn matrix_for(format: SignalFormat) -> Matrix {
    match format {
        SignalFormat::SdrSrgb => Matrix {
            kr: 0.2126,
            kb: 0.0722,
        },
        SignalFormat::HdrPq | SignalFormat::HdrHlg => Matrix {
            kr: 0.2627,
            kb: 0.0593,
        },
    }
}

/// Decode one frame into a [3, H, W] RGB array in [0, 1].
pub fn frame_to_rgb<T: Scalar>(
    frame: &Frame,
    geometry: &VideoGeometry,
    signal_format: SignalFormat,
) -> Array3<T> {
    let (w, h) = (geometry.width, geometry.height);
    let cw = w / 2;
    let max = geometry.max_value() as f64;
    let center = (1u16 << (geometry.bit_depth - 1)) as f64;
    let m = matrix_for(signal_format);
    let kg = 1.0 - m.kr - m.kb;

    let mut rgb = Array3::<T>::zeros((3, h, w));
    for yy in 0..h {
        for xx in 0..w {
            let yv = frame.y.get(yy * w + xx) as f64 / max;
            let ci = (yy / 2) * cw + (xx / 2);
            let cb = (frame.u.get(ci) as f64 - center) / max;
            let cr = (frame.v.get(ci) as f64 - center) / max;
            let r = yv + 2.0 * (1.0 - m.kr) * cr;
            let b = yv + 2.0 * (1.0 - m.kb) * cb;
            let g = (yv - m.kr * r - m.kb * b) / kg;
            rgb[[0, yy, xx]] = T::from_f64(r.clamp(0.0, 1.0));
            rgb[[1, yy, xx]] = T::from_f64(g.clamp(0.0, 1.0));
            rgb[[2, yy, xx]] = T::from_f64(b.clamp(0.0, 1.0));
        }
    }
    rgb
}

/// Encode a [3, H, W] RGB array in [0, 1] as a 4:2:0 frame (chroma by 2x2
/// averaging). Used by the synthetic corpus generator.
pub fn rgb_to_frame(rgb: &Array3<f64>, geometry: &VideoGeometry, format: SignalFormat) -> Frame {
    let (w, h) = (geometry.width, geometry.height);
    assert_eq!(rgb.dim(), (3, h, w));
    let (cw, ch) = geometry.chroma_dims();
    let max = geometry.max_value() as f64;
    let center = (1u16 << (geometry.bit_depth - 1)) as f64;
    let m = matrix_for(format);
    let kg = 1.0 - m.kr - m.kb;

    let mut yp = vec![0.0f64; w * h];
    let mut cbp = vec![0.0f64; cw * ch];
    let mut crp = vec![0.0f64; cw * ch];
    for yy in 0..h {
        for xx in 0..w {
            let (r, g, b) = (rgb[[0, yy, xx]], rgb[[1, yy, xx]], rgb[[2, yy, xx]]);
            let y = m.kr * r + kg * g + m.kb * b;
            let cb = (b - y) / (2.0 * (1.0 - m.kb));
            let cr = (r - y) / (2.0 * (1.0 - m.kr));
            yp[yy * w + xx] = y * max;
            cbp[(yy / 2) * cw + xx / 2] += cb * max / 4.0;
            crp[(yy / 2) * cw + xx / 2] += cr * max / 4.0;
        }
    }
    for v in cbp.iter_mut().chain(crp.iter_mut()) {
        *v += center;
    }
    Frame {
        y: PlaneData::from_f64(&yp, geometry.bit_depth, geometry.max_value()),
        u: PlaneData::from_f64(&cbp, geometry.bit_depth, geometry.max_value()),
        v: PlaneData::from_f64(&crp, geometry.bit_depth, geometry.max_value()),
    }
}
