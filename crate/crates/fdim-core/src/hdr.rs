//! HDR display model and perceptually-uniform encoding.
//!
//! Display-encoded values are converted to absolute linear luminance with a
//! display model (peak/black level plus reflected ambient light), encoded
//! with the PU21 transfer function and normalized to [0, 1], so an
//! SDR-trained network can consume HDR content.

use ndarray::Array3;

use crate::error::{FdimError, Result};
use crate::video::SignalFormat;

/// PU21 "banding-glare" coefficients from the reference implementation.
const PU21_P: [f64; 7] = [
    0.353487901,
    0.3734658629,
    8.277049286e-05,
    0.9062562627,
    0.09150303166,
    0.9099517204,
    596.3148142,
];

/// Valid luminance range of the PU21 fit, cd/m^2.
pub const PU21_L_MIN: f64 = 0.005;
pub const PU21_L_MAX: f64 = 10_000.0;

/// Electro-optical transfer function selector for the display model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eotf {
    Srgb,
    Pq,
    Hlg,
}

impl From<SignalFormat> for Eotf {
    fn from(f: SignalFormat) -> Self {
        match f {
            SignalFormat::SdrSrgb => Eotf::Srgb,
            SignalFormat::HdrPq => Eotf::Pq,
            SignalFormat::HdrHlg => Eotf::Hlg,
        }
    }
}

impl std::str::FromStr for Eotf {
    type Err = FdimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srgb" => Ok(Eotf::Srgb),
            "pq" => Ok(Eotf::Pq),
            "hlg" => Ok(Eotf::Hlg),
            other => Err(FdimError::Config(format!(
                "unknown EOTF '{other}' (expected srgb|pq|hlg)"
            ))),
        }
    }
}

/// Viewing-condition model: display limits plus ambient reflection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisplayModel {
    /// Peak luminance, cd/m^2.
    pub l_peak: f64,
    /// Black level, cd/m^2.
    pub l_black: f64,
    /// Screen reflectivity (unitless).
    pub k_refl: f64,
    /// Ambient illumination, lux.
    pub e_amb: f64,
    pub eotf: Eotf,
}

impl DisplayModel {
    /// Conventional defaults for unspecified viewing conditions; the peak
    /// comes from dataset metadata.
    pub fn with_peak(l_peak: f64, eotf: Eotf) -> Self {
        DisplayModel {
            l_peak,
            l_black: 0.005,
            k_refl: 0.005,
            e_amb: 10.0,
            eotf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_peak > self.l_black) || self.l_black < 0.0 {
            return Err(FdimError::Contract(format!(
                "display model requires L_peak > L_black >= 0 (got {} / {})",
                self.l_peak, self.l_black
            )));
        }
        if self.k_refl < 0.0 || self.e_amb < 0.0 {
            return Err(FdimError::Contract(
                "reflectivity and ambient illumination must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn ambient(&self) -> f64 {
        ambient_luminance(self.k_refl, self.e_amb).expect("validated model")
    }
}

/// Reflected ambient luminance L_refl = k_refl * E_amb / pi, cd/m^2.
pub fn ambient_luminance(k_refl: f64, e_amb: f64) -> Result<f64> {
    if k_refl < 0.0 || e_amb < 0.0 {
        return Err(FdimError::Contract(format!(
            "ambient_luminance: negative input ({k_refl}, {e_amb})"
        )));
    }
    Ok(k_refl * e_amb / std::f64::consts::PI)
}

/// sRGB EOTF (IEC 61966-2-1), [0,1] -> [0,1] relative.
pub fn srgb_eotf(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

// SMPTE ST 2084 constants
const PQ_M1: f64 = 2610.0 / 16384.0;
const PQ_M2: f64 = 2523.0 / 4096.0 * 128.0;
const PQ_C1: f64 = 3424.0 / 4096.0;
const PQ_C2: f64 = 2413.0 / 4096.0 * 32.0;
const PQ_C3: f64 = 2392.0 / 4096.0 * 32.0;

/// PQ EOTF: encoded [0,1] -> absolute luminance in cd/m^2 (up to 10,000).
pub fn pq_eotf(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let vp = v.powf(1.0 / PQ_M2);
    let num = (vp - PQ_C1).max(0.0);
    let den = PQ_C2 - PQ_C3 * vp;
    10_000.0 * (num / den).powf(1.0 / PQ_M1)
}

// HLG inverse OETF constants (ITU-R BT.2100)
const HLG_A: f64 = 0.178_832_77;
const HLG_B: f64 = 0.284_668_92; // 1 - 4a
const HLG_C: f64 = 0.559_910_73; // 0.5 - a*ln(4a)

/// HLG EOTF as a relative [0,1] -> [0,1] mapping: inverse OETF to scene
/// light followed by the system gamma (1.2), applied per channel.
pub fn hlg_eotf(v: f64) -> f64 {
    let v = v.max(0.0);
    let scene = if v <= 0.5 {
        v * v / 3.0
    } else {
        ((v - HLG_C) / HLG_A).exp() + HLG_B
    };
    let scene = if v > 0.5 { scene / 12.0 } else { scene };
    scene.powf(1.2)
}

/// Display-encoded value [0,1] -> absolute linear luminance, cd/m^2.
/// Out-of-range encoded values are clamped (real 10-bit content overshoots).
pub fn display_to_linear(i_de: f64, model: &DisplayModel) -> f64 {
    let v = i_de.clamp(0.0, 1.0);
    let refl = model.ambient();
    match model.eotf {
        // PQ codes absolute luminance directly; clip at the display peak
        Eotf::Pq => pq_eotf(v).min(model.l_peak) + refl,
        Eotf::Srgb => {
            ((model.l_peak - model.l_black) * srgb_eotf(v) + model.l_black).min(model.l_peak)
                + refl
        }
        Eotf::Hlg => {
            ((model.l_peak - model.l_black) * hlg_eotf(v) + model.l_black).min(model.l_peak)
                + refl
        }
    }
}

/// PU21 transfer function: absolute luminance (cd/m^2, clamped to the valid
/// range) -> approximately perceptually uniform units.
pub fn pu21_encode(luminance: f64) -> Result<f64> {
    if !luminance.is_finite() {
        return Err(FdimError::Numeric(format!(
            "pu21_encode: non-finite luminance {luminance}"
        )));
    }
    let y = luminance.clamp(PU21_L_MIN, PU21_L_MAX);
    let [p1, p2, p3, p4, p5, p6, p7] = PU21_P;
    let yp = y.powf(p4);
    let v = p7 * (((p1 + p2 * yp) / (1.0 + p3 * yp)).powf(p5) - p6);
    Ok(v.max(0.0))
}

/// Per-frame preprocessing result with a clamping diagnostic.
pub struct PreprocessedFrame<T> {
    pub frame: Array3<T>,
    /// Encoded input samples outside [0, 1] that were clamped.
    pub clamped_samples: usize,
}

/// Full path: display model -> PU21 -> normalization to [0, 1] by the
/// maximum attainable output PU21(L_peak + L_refl).
pub fn hdr_preprocess<T: crate::tensor::Scalar>(
    rgb: &Array3<T>,
    model: &DisplayModel,
) -> Result<PreprocessedFrame<T>> {
    model.validate()?;
    let peak_pu = pu21_encode(model.l_peak + model.ambient())?;
    if peak_pu <= 0.0 {
        return Err(FdimError::Contract(
            "display peak maps to zero perceptual units; peak too low".into(),
        ));
    }
    let mut clamped = 0usize;
    let mut out = Array3::<T>::zeros(rgb.dim());
    for (o, v) in out.iter_mut().zip(rgb.iter()) {
        let x = v.as_f64();
        if !(0.0..=1.0).contains(&x) {
            clamped += 1;
        }
        let lin = display_to_linear(x, model);
        let pu = pu21_encode(lin)?;
        *o = T::from_f64((pu / peak_pu).clamp(0.0, 1.0));
    }
    Ok(PreprocessedFrame {
        frame: out,
        clamped_samples: clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ambient_reflection_examples() {
        let l = ambient_luminance(0.005, 10.0).unwrap();
        assert!((l - 0.015_915_494_309_189_535).abs() < 1e-12);
        assert_eq!(ambient_luminance(0.005, 0.0).unwrap(), 0.0);
        assert_eq!(ambient_luminance(0.0, 123.0).unwrap(), 0.0);
        assert!(ambient_luminance(-0.1, 1.0).is_err());
    }

    #[test]
    fn srgb_black_maps_to_black_level() {
        let model = DisplayModel {
            l_peak: 100.0,
            l_black: 0.1,
            k_refl: 0.0,
            e_amb: 0.0,
            eotf: Eotf::Srgb,
        };
        assert!((display_to_linear(0.0, &model) - 0.1).abs() < 1e-12);
        // peak input maps to the peak
        assert!((display_to_linear(1.0, &model) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn pq_clips_at_display_peak() {
        let model = DisplayModel {
            l_peak: 1000.0,
            l_black: 0.0,
            k_refl: 0.0,
            e_amb: 0.0,
            eotf: Eotf::Pq,
        };
        // PQ code for 2000 cd/m^2 lies above the code for 1000 cd/m^2;
        // invert numerically by bisection
        let code_for = |target: f64| {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if pq_eotf(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let v2000 = code_for(2000.0);
        assert!((display_to_linear(v2000, &model) - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn pq_reference_point() {
        // ST 2084: code 0.5 -> ~92.24579 cd/m^2
        let y = pq_eotf(0.5);
        assert!((y - 92.245_708).abs() < 0.01, "{y}");
        assert_eq!(pq_eotf(0.0), 0.0);
        assert!((pq_eotf(1.0) - 10_000.0).abs() < 1e-6);
    }

    #[test]
    fn hlg_endpoints() {
        assert_eq!(hlg_eotf(0.0), 0.0);
        assert!((hlg_eotf(1.0) - 1.0).abs() < 1e-6);
        assert!(hlg_eotf(0.4) < hlg_eotf(0.6));
    }

    #[test]
    fn pu21_anchors() {
        // documented anchor: 100 cd/m^2 -> 256 perceptual units
        let v100 = pu21_encode(100.0).unwrap();
        assert!((v100 - 256.0).abs() < 0.5, "PU21(100) = {v100}");
        // bottom of the valid range maps to ~0
        let v_min = pu21_encode(PU21_L_MIN).unwrap();
        assert!(v_min.abs() < 1e-6, "PU21(L_min) = {v_min}");
        assert!(pu21_encode(f64::NAN).is_err());
    }

    #[test]
    fn pu21_strictly_increasing_over_valid_range() {
        let mut prev = pu21_encode(PU21_L_MIN).unwrap();
        for i in 1..=500 {
            let y = PU21_L_MIN * (PU21_L_MAX / PU21_L_MIN).powf(i as f64 / 500.0);
            let v = pu21_encode(y).unwrap();
            assert!(v > prev, "monotonicity violated at {y}");
            prev = v;
        }
    }

    #[test]
    fn preprocess_is_monotone_and_bounded() {
        let model = DisplayModel::with_peak(1000.0, Eotf::Pq);
        let mut rgb = Array3::<f64>::zeros((3, 2, 2));
        for (i, v) in rgb.iter_mut().enumerate() {
            *v = i as f64 / 11.0;
        }
        let out = hdr_preprocess(&rgb, &model).unwrap();
        assert_eq!(out.clamped_samples, 0);
        for v in out.frame.iter() {
            assert!((0.0..=1.0).contains(v));
        }
        // brighter input -> strictly larger output
        let mut brighter = rgb.clone();
        brighter[[0, 0, 0]] += 0.3;
        let out2 = hdr_preprocess(&brighter, &model).unwrap();
        assert!(out2.frame[[0, 0, 0]] > out.frame[[0, 0, 0]]);
        for (a, b) in out.frame.iter().zip(out2.frame.iter()).skip(1) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn increasing_ambient_never_darkens() {
        let base = DisplayModel::with_peak(1000.0, Eotf::Pq);
        let brighter_room = DisplayModel {
            e_amb: 200.0,
            ..base
        };
        for code in [0.0, 0.2, 0.5, 0.9] {
            assert!(display_to_linear(code, &brighter_room) >= display_to_linear(code, &base));
        }
    }

    #[test]
    fn all_black_pq_frame_maps_near_zero() {
        let model = DisplayModel {
            l_peak: 1000.0,
            l_black: 0.0,
            k_refl: 0.0,
            e_amb: 0.0,
            eotf: Eotf::Pq,
        };
        let rgb = Array3::<f64>::zeros((3, 2, 2));
        let out = hdr_preprocess(&rgb, &model).unwrap();
        let expect = pu21_encode(0.0).unwrap() / pu21_encode(1000.0).unwrap();
        for v in out.frame.iter() {
            assert!((v - expect).abs() < 1e-12);
            assert!(*v < 0.01);
        }
    }

    #[test]
    fn out_of_range_samples_are_clamped_and_counted() {
        let model = DisplayModel::with_peak(1000.0, Eotf::Pq);
        let mut rgb = Array3::<f64>::zeros((3, 1, 1));
        rgb[[0, 0, 0]] = 1.5;
        rgb[[1, 0, 0]] = -0.2;
        rgb[[2, 0, 0]] = 0.5;
        let out = hdr_preprocess(&rgb, &model).unwrap();
        assert_eq!(out.clamped_samples, 2);
        assert!(out.frame.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
