//! Thermodynamic scalar functions of a lattice model.
//!
//! Everything derives from the single-site partition function
//! Z(theta) = sum_n e^{theta n} nu(n). The free energy density is its
//! Legendre transform f(a) = a theta(a) - log Z(theta(a)) with theta(a)
//! solving mean_theta = a; f''(a) = 1/var_theta. The transport
//! coefficients are phi(a) = E[d], chi(a) = E[g1] E[g2] under the tilted
//! single-site measure, tied together by phi'(a) = f''(a) chi(a).

use crate::error::{CoreError, Result};
use crate::model::LatticeModel;

/// Tail tolerance for truncated single-site sums.
pub const SERIES_TOL: f64 = 1e-12;
/// Tolerance for the Legendre / mean-inversion root finds.
pub const ROOT_TOL: f64 = 1e-12;

const MAX_TERMS: usize = 200_000;

#[derive(Debug, Clone, Copy)]
pub struct SiteMoments {
    pub log_z: f64,
    pub mean: f64,
    pub var: f64,
    pub e_g1: f64,
    pub e_g2: f64,
    pub e_d: f64,
    /// E[d(n) n] - E[d] E[n], the covariance entering phi'.
    pub cov_d_n: f64,
}

#[derive(Debug, Clone)]
pub struct Scalars<'a> {
    pub model: &'a LatticeModel,
    pub tol: f64,
}

impl<'a> Scalars<'a> {
    pub fn new(model: &'a LatticeModel) -> Self {
        Scalars {
            model,
            tol: SERIES_TOL,
        }
    }

    pub fn max_density(&self) -> f64 {
        self.model.n_max.map_or(f64::INFINITY, |m| m as f64)
    }

    /// Single-site partition function Z(theta), truncated so the bounded
    /// tail is below `tol` relative to the partial sum.
    pub fn z1(&self, theta: f64) -> Result<f64> {
        Ok(self.moments(theta)?.log_z.exp())
    }

    /// All truncated moments of the tilted single-site measure
    /// e^{theta n} nu(n) / Z(theta).
    pub fn moments(&self, theta: f64) -> Result<SiteMoments> {
        if theta >= self.model.theta_sup() {
            return Err(CoreError::Divergence(format!(
                "single-site sum diverges at theta = {theta} (sup {})",
                self.model.theta_sup()
            )));
        }
        // log-domain accumulation relative to the running maximum term
        let mut terms: Vec<(f64, u32)> = Vec::new(); // (log term, n)
        let mut log_max = f64::NEG_INFINITY;
        let mut n: u32 = 0;
        loop {
            if !self.model.admissible(n) {
                break;
            }
            let log_t = theta * n as f64 + self.model.log_nu(n);
            terms.push((log_t, n));
            log_max = log_max.max(log_t);
            // beyond the cap nothing to truncate; otherwise stop when the
            // geometric tail bound drops below tol
            if self.model.n_max.is_none() && n >= 1 {
                let prev = terms[terms.len() - 2].0;
                let ratio = (log_t - prev).exp();
                if ratio < 1.0 {
                    let tail = (log_t - log_max).exp() * ratio / (1.0 - ratio);
                    let partial: f64 = terms.iter().map(|&(lt, _)| (lt - log_max).exp()).sum();
                    if tail < self.tol * partial {
                        break;
                    }
                }
            }
            n += 1;
            if terms.len() > MAX_TERMS {
                return Err(CoreError::Divergence(format!(
                    "single-site sum at theta = {theta} did not truncate within {MAX_TERMS} terms"
                )));
            }
        }
        let mut s0 = 0.0;
        let (mut s_n, mut s_n2, mut s_g1, mut s_g2, mut s_d, mut s_dn) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &(lt, k) in &terms {
            let w = (lt - log_max).exp();
            let kf = k as f64;
            s0 += w;
            s_n += w * kf;
            s_n2 += w * kf * kf;
            s_g1 += w * self.model.g1(k);
            s_g2 += w * self.model.g2(k);
            s_d += w * self.model.dval(k);
            s_dn += w * self.model.dval(k) * kf;
        }
        let mean = s_n / s0;
        let e_d = s_d / s0;
        Ok(SiteMoments {
            log_z: log_max + s0.ln(),
            mean,
            var: (s_n2 / s0 - mean * mean).max(0.0),
            e_g1: s_g1 / s0,
            e_g2: s_g2 / s0,
            e_d,
            cov_d_n: s_dn / s0 - e_d * mean,
        })
    }

    /// theta(a) = f'(a): inverts the strictly increasing map
    /// theta -> mean_theta by bracketing bisection refined with Newton.
    pub fn f_prime(&self, a: f64) -> Result<f64> {
        let hi = self.max_density();
        if !(a > 0.0 && a < hi) {
            return Err(CoreError::Boundary(a, hi));
        }
        let sup = self.model.theta_sup();
        let (mut lo, mut up) = (-1.0f64, if sup.is_finite() { 0.5 * (sup - 1.0) } else { 1.0 });
        let mut grow = 1.0f64;
        while self.moments(lo)?.mean > a {
            grow *= 2.0;
            lo -= grow;
            if lo < -1e6 {
                return Err(CoreError::Numerics(format!("f' bracket failed below, a = {a}")));
            }
        }
        up = up.max(lo);
        if sup.is_finite() {
            // approach the divergence threshold geometrically; the mean
            // blows up there, so a bracket always exists
            let mut gap = sup - up;
            while self.moments(up)?.mean < a {
                gap *= 0.5;
                up = sup - gap;
                if gap < 1e-12 * (1.0 + sup.abs()) {
                    return Err(CoreError::Numerics(format!(
                        "f' bracket failed above, a = {a}"
                    )));
                }
            }
        } else {
            grow = 1.0;
            while self.moments(up)?.mean < a {
                grow *= 2.0;
                up += grow;
                if up > 1e6 {
                    return Err(CoreError::Numerics(format!("f' bracket failed above, a = {a}")));
                }
            }
        }
        let mut theta = 0.5 * (lo + up);
        for _ in 0..200 {
            let m = self.moments(theta)?;
            let err = m.mean - a;
            if err.abs() < ROOT_TOL * (1.0 + a.abs()) {
                return Ok(theta);
            }
            if err > 0.0 {
                up = theta;
            } else {
                lo = theta;
            }
            // Newton step (mean' = var), falling back to bisection
            let newton = theta - err / m.var.max(1e-300);
            theta = if newton > lo && newton < up {
                newton
            } else {
                0.5 * (lo + up)
            };
        }
        Ok(theta)
    }

    /// f(a) = a f'(a) - log Z(f'(a)).
    pub fn free_energy(&self, a: f64) -> Result<f64> {
        let theta = self.f_prime(a)?;
        Ok(a * theta - self.moments(theta)?.log_z)
    }

    /// f''(a) = 1 / var at theta = f'(a).
    pub fn f_second(&self, a: f64) -> Result<f64> {
        let theta = self.f_prime(a)?;
        Ok(1.0 / self.moments(theta)?.var)
    }

    /// (phi(a), chi(a)) = (E[d], E[g1] E[g2]) at theta = f'(a).
    /// Returns the exact boundary values at a = 0 (and a = n_max).
    pub fn phi_chi(&self, a: f64) -> Result<(f64, f64)> {
        let hi = self.max_density();
        if a == 0.0 {
            return Ok((0.0, 0.0));
        }
        if a == hi {
            let n = self.model.n_max.unwrap();
            return Ok((self.model.dval(n), 0.0));
        }
        let theta = self.f_prime(a)?;
        let m = self.moments(theta)?;
        Ok((m.e_d, m.e_g1 * m.e_g2))
    }

    /// phi'(a) computed through the fluctuation identity
    /// phi'(a) = f''(a) Cov(d, n).
    pub fn phi_prime(&self, a: f64) -> Result<f64> {
        let theta = self.f_prime(a)?;
        let m = self.moments(theta)?;
        Ok(m.cov_d_n / m.var)
    }

    /// Inverse of the strictly increasing a -> phi(a).
    pub fn phi_inv(&self, y: f64) -> Result<f64> {
        let hi = self.max_density();
        let (mut lo, mut up) = (0.0f64, if hi.is_finite() { hi } else { 1.0 });
        if !hi.is_finite() {
            while self.phi_chi(up)?.0 < y {
                up *= 2.0;
                if up > 1e9 {
                    return Err(CoreError::Numerics(format!("phi_inv bracket failed, y = {y}")));
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if up - lo < ROOT_TOL * (1.0 + mid) {
                return Ok(mid);
            }
            if self.phi_chi(mid)?.0 < y {
                lo = mid;
            } else {
                up = mid;
            }
        }
        Ok(0.5 * (lo + up))
    }

    /// Local equilibrium profile: f'(rho) = f'(alpha) - v, i.e. the mean of
    /// the single-site measure tilted by theta = f'(alpha) - v.
    pub fn rho_bar(&self, alpha: f64, v: f64) -> Result<f64> {
        let theta = self.f_prime(alpha)? - v;
        Ok(self.moments(theta)?.mean)
    }

    /// max phi' over a density grid in [lo, hi]; the Lipschitz constant of
    /// the diffusion nonlinearity on that range.
    pub fn c_lip(&self, lo: f64, hi: f64, n: usize) -> Result<f64> {
        let mut best = 0.0f64;
        for i in 0..=n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            best = best.max(self.phi_prime(a.clamp(1e-9, self.max_density() - 1e-9))?);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sep_partition_function_closed_form() {
        let m = LatticeModel::sep();
        let s = Scalars::new(&m);
        // Z(theta) = 1 + e^theta
        assert_abs_diff_eq!(s.z1(0.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z1(1.0).unwrap(), 1.0 + 1.0f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn zrp_linear_partition_function_is_exp_exp() {
        let m = LatticeModel::zrp_linear();
        let s = Scalars::new(&m);
        // nu(n) = 1/n! so Z(theta) = exp(e^theta)
        assert_abs_diff_eq!(s.z1(0.0).unwrap(), 1.0f64.exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(s.z1(2.0f64.ln()).unwrap(), 2.0f64.exp(), epsilon = 1e-8);
    }

    #[test]
    fn sep_free_energy_is_binary_entropy() {
        let m = LatticeModel::sep();
        let s = Scalars::new(&m);
        // f(a) = a ln a + (1-a) ln(1-a)
        assert_abs_diff_eq!(s.free_energy(0.5).unwrap(), -(2.0f64.ln()), epsilon = 1e-11);
        assert_abs_diff_eq!(s.f_second(0.5).unwrap(), 4.0, epsilon = 1e-9);
        let a = 0.3f64;
        assert_abs_diff_eq!(
            s.free_energy(a).unwrap(),
            a * a.ln() + (1.0 - a) * (1.0 - a).ln(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn zrp_linear_free_energy_closed_form() {
        let m = LatticeModel::zrp_linear();
        let s = Scalars::new(&m);
        // f(a) = a ln a - a (Poisson), f(1) = -1, f'(a) = ln a, f'' = 1/a
        assert_abs_diff_eq!(s.free_energy(1.0).unwrap(), -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.f_prime(2.0).unwrap(), 2.0f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(s.f_second(0.5).unwrap(), 2.0, epsilon = 1e-8);
        // convexity and normalisation f(0+) -> 0
        assert!(s.free_energy(1e-6).unwrap().abs() < 2e-5);
    }

    #[test]
    fn transport_coefficients() {
        let m = LatticeModel::sep();
        let s = Scalars::new(&m);
        let (phi, chi) = s.phi_chi(0.3).unwrap();
        assert_abs_diff_eq!(phi, 0.3, epsilon = 1e-11);
        assert_abs_diff_eq!(chi, 0.21, epsilon = 1e-11);

        let m = LatticeModel::zrp_linear();
        let s = Scalars::new(&m);
        let (phi, chi) = s.phi_chi(0.7).unwrap();
        // E[g] = mean = 0.7 for Poisson, g2 = 1
        assert_abs_diff_eq!(phi, 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(chi, 0.7, epsilon = 1e-10);
    }

    #[test]
    fn einstein_relation_on_a_grid() {
        for m in [
            LatticeModel::sep(),
            LatticeModel::zrp_linear(),
            LatticeModel::zrp_table(vec![1.0, 1.6, 2.0, 2.3]).unwrap(),
        ] {
            let s = Scalars::new(&m);
            let hi = s.max_density().min(3.0);
            for i in 1..10 {
                let a = hi * i as f64 / 10.0;
                let lhs = s.phi_prime(a).unwrap();
                let rhs = s.f_second(a).unwrap() * s.phi_chi(a).unwrap().1;
                assert!(
                    (lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()),
                    "einstein relation fails at a = {a}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn equilibrium_profile_sep_closed_form() {
        let m = LatticeModel::sep();
        let s = Scalars::new(&m);
        // rho_bar = alpha e^{-v} / (alpha e^{-v} + 1 - alpha)
        let v = 2.0f64.ln();
        assert_abs_diff_eq!(s.rho_bar(0.5, v).unwrap(), 1.0 / 3.0, epsilon = 1e-11);
        // monotone increasing in alpha
        assert!(s.rho_bar(0.6, v).unwrap() > s.rho_bar(0.5, v).unwrap());
    }

    #[test]
    fn boundary_densities_rejected() {
        let m = LatticeModel::sep();
        let s = Scalars::new(&m);
        assert!(s.f_prime(0.0).is_err());
        assert!(s.f_prime(1.0).is_err());
        assert!(s.f_prime(1.5).is_err());
    }

    #[test]
    fn phi_inverse_roundtrips() {
        let m = LatticeModel::zrp_table(vec![1.0, 1.4, 1.7]).unwrap();
        let s = Scalars::new(&m);
        for a in [0.2, 0.9, 1.8, 2.6] {
            let y = s.phi_chi(a).unwrap().0;
            assert_abs_diff_eq!(s.phi_inv(y).unwrap(), a, epsilon = 1e-8);
        }
    }
}
