//! Finite-difference gradient verification helpers (test support).

/// Central-difference gradient of a scalar function.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], eps: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x0.len()];
    for i in 0..x0.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let fp = f(&x);
        x[i] = orig - eps;
        let fm = f(&x);
        x[i] = orig;
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    grad
}

/// Central differences for a chosen coordinate subset only. Returns the
/// numeric derivative per requested index, in order.
pub fn central_diff_subset(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    eps: f64,
    indices: &[usize],
) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut grad = Vec::with_capacity(indices.len());
    for &i in indices {
        let orig = x[i];
        x[i] = orig + eps;
        let fp = f(&x);
        x[i] = orig - eps;
        let fm = f(&x);
        x[i] = orig;
        grad.push((fp - fm) / (2.0 * eps));
    }
    grad
}

/// Evenly-spread deterministic probe indices covering [0, len).
pub fn probe_indices(len: usize, max_probes: usize) -> Vec<usize> {
    if len <= max_probes {
        return (0..len).collect();
    }
    // golden-ratio stride scatters probes across all tensors while staying
    // deterministic
    let stride = ((len as f64) * 0.618_033_988_749_895).floor() as usize | 1;
    let mut seen = std::collections::BTreeSet::new();
    let mut i = 0usize;
    while seen.len() < max_probes {
        seen.insert(i % len);
        i += stride;
    }
    seen.into_iter().collect()
}

/// Norm-based relative error ||a - b|| / max(||a||, ||b||, tiny).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    diff.sqrt() / na.sqrt().max(nb.sqrt()).max(1e-12)
}
