//! Quadrature helpers: composite Simpson with a Richardson error estimate
//! on uniform grids, and fixed Gauss-Legendre nodes for short segments.

use crate::error::{CoreError, Result};

/// Composite Simpson on a uniform grid (even number of intervals).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "need an even interval count");
    let mut s = values[0] + values[values.len() - 1];
    for (i, &v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Simpson value plus a Richardson error estimate from the coarsened grid
/// (|I_h - I_{2h}| / 15). Grid length must be 4k + 1.
pub fn simpson_with_error(values: &[f64], h: f64) -> Result<(f64, f64)> {
    if values.len() < 5 || values.len() % 2 == 0 {
        return Err(CoreError::Numerics(
            "richardson estimate needs at least five grid points, odd count".into(),
        ));
    }
    let fine = simpson(values, h);
    if (values.len() - 1) % 4 != 0 {
        // cannot coarsen; fall back to a crude trapezoid comparison
        let trap = h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[values.len() - 1]));
        return Ok((fine, (fine - trap).abs()));
    }
    let coarse: Vec<f64> = values.iter().step_by(2).copied().collect();
    let i2 = simpson(&coarse, 2.0 * h);
    Ok((fine, (fine - i2).abs() / 15.0))
}

/// 5-point Gauss-Legendre nodes/weights on [-1, 1].
pub const GL5: [(f64, f64); 5] = [
    (-0.906179845938664, 0.23692688505618908),
    (-0.5384693101056831, 0.47862867049936647),
    (0.0, 0.5688888888888889),
    (0.5384693101056831, 0.47862867049936647),
    (0.906179845938664, 0.23692688505618908),
];

/// Integrates f over [a, b] with 5-point Gauss-Legendre panels, recursively
/// split until the two-panel refinement agrees to `tol` (absolute).
pub fn gauss_adaptive<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GL5.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let mid = 0.5 * (a + b);
        let left = panel(f, a, mid);
        let right = panel(f, mid, b);
        if depth >= 30 || (left + right - whole).abs() <= tol {
            left + right
        } else {
            rec(f, a, mid, left, tol * 0.5, depth + 1) + rec(f, mid, b, right, tol * 0.5, depth + 1)
        }
    }
    let whole = panel(&f, a, b);
    rec(&f, a, b, whole, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let n = 8;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(3)).collect();
        assert_abs_diff_eq!(simpson(&vals, h), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn richardson_estimate_bounds_true_error() {
        let n = 16;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 * h).cos().exp())
            .collect();
        let (val, est) = simpson_with_error(&vals, h).unwrap();
        // I = int_0^1 e^{cos 2 pi u} du = I_0(1) (modified Bessel)
        let exact = 1.2660658777520084;
        assert!((val - exact).abs() < 10.0 * est.max(1e-12));
    }

    #[test]
    fn gauss_handles_oscillation() {
        let v = gauss_adaptive(|t| (10.0 * t).sin(), 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(v, (1.0 - (10.0f64).cos()) / 10.0, epsilon = 1e-10);
    }
}
