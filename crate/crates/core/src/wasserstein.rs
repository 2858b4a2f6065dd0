//! Quadratic Wasserstein distance between densities on the periodic unit
//! interval, via the optimal quantile coupling: on the circle the optimal
//! transport map is a monotone rearrangement up to a rotation of the
//! quantile variable, so
//!
//!   W_2^2 = min_c int_0^1 ( F^{-1}(s) - G^{-1}(s + c) )^2 ds,
//!
//! with quantile functions extended by Q(s + 1) = Q(s) + 1.

use crate::error::{CoreError, Result};

/// Piecewise-linear quantile function of a cell-centred density.
struct Quantile {
    /// Positions of cumulative mass 0, 1/n, ..., 1 along [0, 1].
    grid: Vec<f64>,
}

impl Quantile {
    fn build(rho: &[f64], n_q: usize) -> Result<Self> {
        let m = rho.len();
        let h = 1.0 / m as f64;
        if rho.iter().any(|&r| r < 0.0) {
            return Err(CoreError::InvalidConfiguration(
                "negative density in transport distance".into(),
            ));
        }
        let total: f64 = rho.iter().sum::<f64>() * h;
        // cumulative mass at cell faces 0, h, 2h, ..., 1 (normalised)
        let mut cdf = vec![0.0; m + 1];
        for i in 0..m {
            cdf[i + 1] = cdf[i] + rho[i] * h / total;
        }
        cdf[m] = 1.0;
        let mut grid = Vec::with_capacity(n_q + 1);
        let mut j = 0usize;
        for q in 0..=n_q {
            let s = q as f64 / n_q as f64;
            while j + 1 < m && cdf[j + 1] < s {
                j += 1;
            }
            let lo = cdf[j];
            let hi = cdf[j + 1];
            let frac = if hi > lo { ((s - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
            grid.push((j as f64 + frac) * h);
        }
        Ok(Quantile { grid })
    }

    /// Extended quantile: Q(s + 1) = Q(s) + 1.
    fn eval(&self, s: f64) -> f64 {
        let n = self.grid.len() - 1;
        let wrapped = s - s.floor();
        let x = wrapped * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let frac = x - i as f64;
        self.grid[i] * (1.0 - frac) + self.grid[i + 1] * frac + s.floor()
    }
}

/// W_2 between two cell-centred densities of equal mass on the torus.
pub fn wasserstein_1d(rho_a: &[f64], rho_b: &[f64]) -> Result<f64> {
    if rho_a.len() != rho_b.len() {
        return Err(CoreError::InvalidConfiguration(
            "transport distance needs equal grids".into(),
        ));
    }
    let ma: f64 = rho_a.iter().sum();
    let mb: f64 = rho_b.iter().sum();
    if (ma - mb).abs() > 1e-8 * ma.abs().max(1.0) {
        return Err(CoreError::MassMismatch(ma, mb));
    }
    let n_q = (4 * rho_a.len()).max(256);
    let qa = Quantile::build(rho_a, n_q)?;
    let qb = Quantile::build(rho_b, n_q)?;
    let cost = |c: f64| -> f64 {
        let mut acc = 0.0;
        for q in 0..n_q {
            let s = (q as f64 + 0.5) / n_q as f64;
            let d = qa.eval(s) - qb.eval(s + c);
            acc += d * d;
        }
        acc / n_q as f64
    };
    // the cost is convex in the rotation c; coarse scan plus golden refine
    let mut best_c = 0.0;
    let mut best = f64::INFINITY;
    let coarse = 64;
    for i in 0..coarse {
        let c = -1.0 + 2.0 * i as f64 / coarse as f64;
        let v = cost(c);
        if v < best {
            best = v;
            best_c = c;
        }
    }
    let (mut lo, mut hi) = (best_c - 2.0 / coarse as f64, best_c + 2.0 / coarse as f64);
    let gr = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - gr * (hi - lo), lo + gr * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = cost(x2);
        }
    }
    Ok(cost(0.5 * (lo + hi)).min(best).sqrt())
}
