//! Central finite differences: the independent oracle for gradient checks.

use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

/// `df/dx_i ≈ (f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, floor)`.
///
/// Normalizing by the largest component keeps near-zero entries, where a
/// finite difference has no relative accuracy, from dominating.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient lengths differ");
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(floor, f64::max);
    diff / scale
}
