//! Canonical structure on configuration space: for each unordered pair of
//! configurations connected by the dynamics,
//!
//!   current   j  = mu(a) r(a,b) - mu(b) r(b,a)
//!   mobility  a  = 2 sqrt(mu(a) r(a,b) mu(b) r(b,a))
//!   force     F  = log( mu(a) nu(b) / (mu(b) nu(a)) )
//!
//! oriented from the lower-indexed configuration. The mobility does not
//! depend on the potential (the forward/backward potential factors cancel),
//! and the force does not depend on the chemical-potential tilt of the
//! reference measure (particle number is conserved). The Onsager-Machlup
//! integrand Phi = Psi(j) - <j, F> + Psi*(F) built from
//!
//!   Psi (mu, j) = sum a [ (j/a) arcsinh(j/a) - sqrt(1 + (j/a)^2) + 1 ]
//!   Psi*(mu, F) = sum a [ cosh(F/2) - 1 ]
//!
//! (sums over ordered pairs, so twice the unordered sum) is nonnegative and
//! vanishes exactly at j = a sinh(F/2).

use crate::error::{CoreError, Result};
use crate::master::MasterEngine;
use crate::model::LatticeModel;
use crate::potential::Potential;
use crate::scalars::Scalars;
use crate::sector::ConfigSector;

/// Mobilities below this threshold are treated as zero.
pub const MOBILITY_FLOOR: f64 = 1e-300;
/// A current on a zero-mobility pair above this magnitude is an error.
pub const CURRENT_ATOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct TransitionField {
    /// Current per unordered pair, oriented lo -> hi.
    pub j: Vec<f64>,
    /// Force per pair where defined (both endpoint probabilities positive).
    pub f: Vec<f64>,
    pub f_defined: Vec<bool>,
    /// Mobility per pair (potential-independent).
    pub a: Vec<f64>,
}

/// Aggregated pair rates at time `t`: (rate lo -> hi, rate hi -> lo),
/// including the L^2 scaling.
pub fn pair_rates(engine: &MasterEngine, t: f64) -> (Vec<f64>, Vec<f64>) {
    let s_t = engine.pot.envelope.eval(t);
    let n = engine.sector.pairs.len();
    let (mut fwd, mut bwd) = (vec![0.0; n], vec![0.0; n]);
    for (idx, m) in engine.sector.moves.iter().enumerate() {
        let r = engine.scale * engine.hat_rate(idx, s_t);
        if m.forward {
            fwd[m.pair as usize] += r;
        } else {
            bwd[m.pair as usize] += r;
        }
    }
    (fwd, bwd)
}

/// Current, force and mobility fields of the law `mu` under the rates of
/// `engine` at time `t`, with the force taken against the reference
/// measure of `reference` (its potential frozen at the same time).
pub fn canonical_fields(
    engine: &MasterEngine,
    reference: &Potential,
    t: f64,
    mu: &[f64],
) -> TransitionField {
    let sector = engine.sector;
    let (fwd, bwd) = pair_rates(engine, t);
    let n = sector.pairs.len();
    let mut j = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut f_defined = vec![false; n];
    // log nu^V ratios per pair: from any single move of the pair
    let mut log_nu = vec![f64::NAN; n];
    let torus = &sector.torus;
    let s_ref = reference.envelope.eval(t);
    for m in &sector.moves {
        let p = m.pair as usize;
        if log_nu[p].is_nan() {
            let dest = torus.neighbor(m.site as usize, m.axis as usize, m.sign);
            let du = reference.v.eval(&torus.point(dest)) + s_ref * reference.tilt.eval(&torus.point(dest))
                - reference.v.eval(&torus.point(m.site as usize))
                - s_ref * reference.tilt.eval(&torus.point(m.site as usize));
            // log nu^V(to) - log nu^V(from), oriented lo -> hi
            let ratio = m.log_nu_ratio - du;
            log_nu[p] = if m.forward { ratio } else { -ratio };
        }
    }
    for p in 0..n {
        let (lo, hi) = (sector.pairs[p].lo as usize, sector.pairs[p].hi as usize);
        let out = mu[lo] * fwd[p];
        let back = mu[hi] * bwd[p];
        j[p] = out - back;
        a[p] = 2.0 * (out * back).sqrt();
        if mu[lo] > 0.0 && mu[hi] > 0.0 {
            f[p] = mu[lo].ln() - mu[hi].ln() + log_nu[p];
            f_defined[p] = true;
        }
    }
    TransitionField { j, f, f_defined, a }
}

/// Psi(mu, j): the ordered-pair sum, i.e. twice the unordered sum.
pub fn psi(field: &TransitionField) -> Result<f64> {
    let mut s = 0.0;
    for (p, &a) in field.a.iter().enumerate() {
        let j = field.j[p];
        if a <= MOBILITY_FLOOR {
            if j.abs() > CURRENT_ATOL {
                return Err(CoreError::ZeroMobilityCurrent(j.abs()));
            }
            continue;
        }
        let x = j / a;
        s += a * (x * x.asinh() - (1.0 + x * x).sqrt() + 1.0);
    }
    Ok(2.0 * s)
}

/// Psi*(mu, F): the ordered-pair sum; pairs with zero mobility or
/// undefined force contribute nothing.
pub fn psi_star(field: &TransitionField) -> f64 {
    let mut s = 0.0;
    for (p, &a) in field.a.iter().enumerate() {
        if a <= MOBILITY_FLOOR || !field.f_defined[p] {
            continue;
        }
        s += a * ((0.5 * field.f[p]).cosh() - 1.0);
    }
    2.0 * s
}

/// <j, F>: half the ordered-pair sum of j F over positive-mobility pairs.
pub fn pairing(field: &TransitionField) -> f64 {
    field
        .a
        .iter()
        .enumerate()
        .filter(|&(p, &a)| a > MOBILITY_FLOOR && field.f_defined[p])
        .map(|(p, _)| field.j[p] * field.f[p])
        .sum()
}

/// Onsager-Machlup integrand Phi = Psi - <j, F> + Psi* (nonnegative).
pub fn onsager_machlup(field: &TransitionField) -> Result<f64> {
    Ok(psi(field)? - pairing(field) + psi_star(field))
}

#[derive(Debug, Clone, Copy)]
pub struct MicroFreeEnergy {
    /// Relative entropy against the full-space product reference measure
    /// (which does not sum to one on the sector).
    pub raw: f64,
    /// Relative entropy against the reference conditioned on the sector.
    pub conditioned: f64,
    /// log of the reference mass carried by the sector.
    pub log_sector_mass: f64,
}

/// Relative entropy of `mu` with respect to nu_alpha^V at time `t`:
/// the product measure with site tilts theta_i = f'(alpha) - V_t(i/L),
/// normalised over the unrestricted configuration space.
pub fn micro_free_energy(
    sector: &ConfigSector,
    model: &LatticeModel,
    scalars: &Scalars,
    pot: &Potential,
    t: f64,
    alpha: f64,
    mu: &[f64],
) -> Result<MicroFreeEnergy> {
    let torus = &sector.torus;
    let fpa = scalars.f_prime(alpha)?;
    let s_t = pot.envelope.eval(t);
    let mut theta = Vec::with_capacity(torus.n_sites());
    let mut log_z_sum = 0.0;
    for i in 0..torus.n_sites() {
        let u = torus.point(i);
        let th = fpa - (pot.v.eval(&u) + s_t * pot.tilt.eval(&u));
        log_z_sum += scalars.moments(th)?.log_z;
        theta.push(th);
    }
    let mut raw = 0.0;
    for (ci, cfg) in sector.configs.iter().enumerate() {
        let p = mu[ci];
        if p <= 0.0 {
            continue;
        }
        let log_nu: f64 = cfg
            .iter()
            .enumerate()
            .map(|(i, &n)| theta[i] * n as f64 + model.log_nu(n as u32))
            .sum::<f64>()
            - log_z_sum;
        raw += p * (p.ln() - log_nu);
    }
    let log_mass = sector.log_sector_mass(model, &theta) - log_z_sum;
    Ok(MicroFreeEnergy {
        raw,
        conditioned: raw + log_mass,
        log_sector_mass: log_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::FourierSeries;
    use crate::sector::DEFAULT_STATE_CAP;
    use crate::torus::Torus;
    use approx::assert_abs_diff_eq;

    fn two_site_setup() -> (LatticeModel, ConfigSector, Potential) {
        let model = LatticeModel::sep();
        let sector =
            ConfigSector::enumerate(&model, Torus::new(2, 1), 1, DEFAULT_STATE_CAP).unwrap();
        let pot = Potential::static_only(FourierSeries::zero(1));
        (model, sector, pot)
    }

    #[test]
    fn two_site_current_is_rate_times_imbalance() {
        let (_, sector, pot) = two_site_setup();
        let eng = MasterEngine::new(&sector, &pot).unwrap();
        let i10 = sector.index[&vec![1u16, 0u16].into_boxed_slice()] as usize;
        let p = 0.8;
        let mut mu = vec![0.0; 2];
        mu[i10] = p;
        mu[1 - i10] = 1.0 - p;
        let field = canonical_fields(&eng, &pot, 0.0, &mu);
        // aggregated symmetric rate c = 2 L^2 = 8 between the two states
        let c = 8.0;
        let expect = c * (2.0 * p - 1.0);
        assert_abs_diff_eq!(field.j[0].abs(), expect.abs(), epsilon = 1e-12);
        // force = log(p / (1 - p)) up to orientation, flat reference
        assert_abs_diff_eq!(
            field.f[0].abs(),
            (p / (1.0 - p)).ln().abs(),
            epsilon = 1e-12
        );
        // mobility 2 sqrt(p c (1-p) c)
        assert_abs_diff_eq!(
            field.a[0],
            2.0 * (p * c * (1.0 - p) * c).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn psi_star_single_pair_value() {
        let field = TransitionField {
            j: vec![0.0],
            f: vec![1.0],
            f_defined: vec![true],
            a: vec![2.0],
        };
        // 2 * a (cosh(1/2) - 1) per ordered-pair convention
        assert_abs_diff_eq!(psi_star(&field), 0.5105038608255228, epsilon = 1e-12);
    }

    #[test]
    fn psi_vanishes_at_zero_current_and_grows() {
        let mk = |j: f64| TransitionField {
            j: vec![j],
            f: vec![0.0],
            f_defined: vec![true],
            a: vec![1.3],
        };
        assert_eq!(psi(&mk(0.0)).unwrap(), 0.0);
        assert!(psi(&mk(0.5)).unwrap() > 0.0);
        // even in j
        assert_abs_diff_eq!(
            psi(&mk(0.7)).unwrap(),
            psi(&mk(-0.7)).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_mobility_with_current_is_an_error() {
        let field = TransitionField {
            j: vec![0.1],
            f: vec![0.0],
            f_defined: vec![false],
            a: vec![0.0],
        };
        assert!(matches!(
            psi(&field),
            Err(CoreError::ZeroMobilityCurrent(_))
        ));
    }

    #[test]
    fn fenchel_young_equality_at_optimal_current() {
        // Phi = 0 exactly when j = a sinh(F/2)
        let a = 1.7f64;
        let fval = -0.9f64;
        let field = TransitionField {
            j: vec![a * (0.5 * fval).sinh()],
            f: vec![fval],
            f_defined: vec![true],
            a: vec![a],
        };
        assert_abs_diff_eq!(onsager_machlup(&field).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn kl_two_point_oracle() {
        // KL( (0.9, 0.1) || (0.5, 0.5) ) = 0.9 ln 1.8 + 0.1 ln 0.2
        let (model, sector, pot) = two_site_setup();
        let scal = Scalars::new(&model);
        let i10 = sector.index[&vec![1u16, 0u16].into_boxed_slice()] as usize;
        let mut mu = vec![0.0; 2];
        mu[i10] = 0.9;
        mu[1 - i10] = 0.1;
        let fe = micro_free_energy(&sector, &model, &scal, &pot, 0.0, 0.5, &mu).unwrap();
        assert_abs_diff_eq!(fe.conditioned, 0.3680642071684972, epsilon = 1e-12);
        // flat reference at alpha = 1/2 gives each sector state weight 1/4
        // within the full space of 4 configurations: raw = cond + ln 2
        assert_abs_diff_eq!(fe.raw, fe.conditioned + 2.0f64.ln(), epsilon = 1e-12);
        // vanishes exactly at the conditioned reference
        let nu = MasterEngine::new(&sector, &pot)
            .unwrap()
            .stationary(&model, 0.0);
        let fe0 = micro_free_energy(&sector, &model, &scal, &pot, 0.0, 0.5, &nu).unwrap();
        assert_abs_diff_eq!(fe0.conditioned, 0.0, epsilon = 1e-13);
    }
}
