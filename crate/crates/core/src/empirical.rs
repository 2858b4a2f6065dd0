//! Empirical measure of a configuration and its block/mollified averages.

use crate::torus::Torus;

/// Atoms of the empirical measure L^{-d} sum_i eta(i) delta_{i/L}:
/// (site, mass) pairs for occupied sites.
pub fn empirical_measure(torus: &Torus, eta: &[u16]) -> Vec<(usize, f64)> {
    let vol = torus.n_sites() as f64;
    eta.iter()
        .enumerate()
        .filter(|&(_, &n)| n > 0)
        .map(|(i, &n)| (i, n as f64 / vol))
        .collect()
}

/// Block average eta^l(i) = (2l+1)^{-d} sum_{|m|_inf <= l} eta(i + m).
pub fn block_average(torus: &Torus, eta: &[u16], l: usize) -> Vec<f64> {
    let sites = torus.n_sites();
    let width = 2 * l + 1;
    let norm = (width as f64).powi(torus.d as i32);
    let mut out = vec![0.0; sites];
    // separable box filter: average along each axis in turn
    let mut cur: Vec<f64> = eta.iter().map(|&n| n as f64).collect();
    for axis in 0..torus.d {
        let mut next = vec![0.0; sites];
        for (i, nx) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            let mut fwd = i;
            let mut bwd = i;
            s += cur[i];
            for _ in 0..l {
                fwd = torus.neighbor(fwd, axis, 1);
                bwd = torus.neighbor(bwd, axis, -1);
                s += cur[fwd] + cur[bwd];
            }
            *nx = s;
        }
        cur = next;
    }
    for (o, c) in out.iter_mut().zip(&cur) {
        *o = c / norm;
    }
    out
}

/// The empirical measure convolved with the box mollifier of width 2 eps,
/// evaluated at the lattice points: a rescaled block average with
/// l = floor(eps L).
pub fn mollified_density(torus: &Torus, eta: &[u16], eps: f64) -> Vec<f64> {
    let l = (eps * torus.l as f64).floor() as usize;
    let factor = ((2 * l + 1) as f64 / (2.0 * eps * torus.l as f64)).powi(torus.d as i32);
    block_average(torus, eta, l)
        .into_iter()
        .map(|v| factor * v)
        .collect()
}
