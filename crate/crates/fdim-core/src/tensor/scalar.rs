//! Scalar abstraction so the same network code runs in f32 (training,
//! inference) and f64 (finite-difference gradient checks).

use ndarray::NdFloat;

/// Element type of tensors on the tape.
pub trait Scalar: NdFloat + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Standard normal CDF, evaluated in double precision.
    fn norm_cdf(self) -> Self {
        Self::from_f64(crate::tensor::scalar::phi(self.as_f64()))
    }

    /// Standard normal PDF, evaluated in double precision.
    fn norm_pdf(self) -> Self {
        let x = self.as_f64();
        Self::from_f64((-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Standard normal CDF Φ(x) = erfc(−x/√2)/2.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_reference_points() {
        assert!((phi(0.0) - 0.5).abs() < 1e-15);
        // Φ(1) from tables: 0.8413447460685429
        assert!((phi(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((phi(-1.0) + phi(1.0) - 1.0).abs() < 1e-15);
        assert!(phi(10.0) > 1.0 - 1e-12);
        assert!(phi(-10.0) < 1e-12);
    }
}
