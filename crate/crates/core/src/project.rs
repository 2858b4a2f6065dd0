//! Site-indexed projections of a law on a sector: density, bond current,
//! bond mobility bound, and the gradient observable. Bond quantities are
//! built from the unscaled rates; the diffusive L^2 lives in the generator,
//! so the discrete continuity equation reads
//! d/dt rho_i = -L^2 sum_k (j_{i, i+e_k} - j_{i-e_k, i}).

use crate::master::MasterEngine;
use crate::sector::ConfigSector;

#[derive(Debug, Clone)]
pub struct SiteFields {
    /// rho_i = E[eta(i)], length sites.
    pub rho: Vec<f64>,
    /// j_{i, i+e_k} = E[ r(eta -> eta^{i,i+e_k}) - r(eta -> eta^{i+e_k,i}) ],
    /// length sites * d, indexed i * d + k, unscaled rates.
    pub current: Vec<f64>,
    /// chi_{i,i+e_k} = E[ (r(eta -> eta^{i,i+e_k}) + r(eta -> eta^{i+e_k,i})) / 2 ].
    pub chi: Vec<f64>,
    /// a_{i,i+e_k} = E[ 2 sqrt(r(eta -> eta') r(eta' -> eta)) ] over the bond move.
    pub mobility: Vec<f64>,
    /// phi_i = E[d(eta(i))].
    pub phi: Vec<f64>,
}

pub fn site_density(sector: &ConfigSector, mu: &[f64]) -> Vec<f64> {
    let sites = sector.torus.n_sites();
    let mut rho = vec![0.0; sites];
    for (ci, cfg) in sector.configs.iter().enumerate() {
        let w = mu[ci];
        if w == 0.0 {
            continue;
        }
        for (i, &n) in cfg.iter().enumerate() {
            rho[i] += w * n as f64;
        }
    }
    rho
}

/// All site/bond projections of `mu` under the engine's rates at time `t`.
pub fn site_fields(engine: &MasterEngine, t: f64, mu: &[f64], model: &crate::model::LatticeModel) -> SiteFields {
    let sector = engine.sector;
    let torus = &sector.torus;
    let sites = torus.n_sites();
    let d = torus.d;
    let s_t = engine.pot.envelope.eval(t);

    let rho = site_density(sector, mu);
    let mut phi = vec![0.0; sites];
    for (ci, cfg) in sector.configs.iter().enumerate() {
        let w = mu[ci];
        if w == 0.0 {
            continue;
        }
        for (i, &n) in cfg.iter().enumerate() {
            phi[i] += w * model.dval(n as u32);
        }
    }

    let mut current = vec![0.0; sites * d];
    let mut chi = vec![0.0; sites * d];
    let mut mobility = vec![0.0; sites * d];
    for (idx, m) in sector.moves.iter().enumerate() {
        let w = mu[m.from as usize];
        let r = engine.hat_rate(idx, s_t);
        let k = m.axis as usize;
        // bond (i, i + e_k): a +-move from site i, or a --move from i + e_k
        let bond = if m.sign == 1 {
            m.site as usize * d + k
        } else {
            torus.neighbor(m.site as usize, k, -1) * d + k
        };
        let signed = if m.sign == 1 { 1.0 } else { -1.0 };
        current[bond] += signed * w * r;
        chi[bond] += 0.5 * w * r;
        // mobility: sqrt of forward/backward flux through this very move
        let dest = torus.neighbor(m.site as usize, k, m.sign);
        let rev = reverse_rate(engine, sector, idx, dest, s_t);
        mobility[bond] += (w * r * mu[m.to as usize] * rev).sqrt();
    }
    SiteFields {
        rho,
        current,
        chi,
        mobility,
        phi,
    }
}

fn reverse_rate(
    engine: &MasterEngine,
    sector: &ConfigSector,
    move_idx: usize,
    dest: usize,
    s_t: f64,
) -> f64 {
    let m = &sector.moves[move_idx];
    // detailed balance of the tilted weights gives the reverse rate without
    // a search: nu^V(eta) r = nu^V(eta') r_rev with
    // log nu^V(eta') - log nu^V(eta) = log_nu_ratio - dV
    let _ = dest;
    let r_fwd = engine.hat_rate(move_idx, s_t);
    let log_ratio = m.log_nu_ratio - (engine.v_diff[move_idx] + s_t * engine.h_diff[move_idx]);
    r_fwd * (-log_ratio).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticeModel;
    use crate::potential::{FourierSeries, Potential};
    use crate::sector::{ConfigSector, DEFAULT_STATE_CAP};
    use crate::torus::Torus;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gradient_identity_for_flat_potential() {
        // with V = 0 the bond current is the gradient of phi:
        // j_{i, i+1} = phi_i - phi_{i+1}
        for model in [LatticeModel::sep(), LatticeModel::zrp_linear()] {
            let sector =
                ConfigSector::enumerate(&model, Torus::new(4, 1), 2, DEFAULT_STATE_CAP).unwrap();
            let pot = Potential::static_only(FourierSeries::zero(1));
            let eng = MasterEngine::new(&sector, &pot).unwrap();
            let n = sector.n_states();
            let mu: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
            let z: f64 = mu.iter().sum();
            let mu: Vec<f64> = mu.iter().map(|x| x / z).collect();
            let f = site_fields(&eng, 0.0, &mu, &model);
            for i in 0..4 {
                let expect = f.phi[i] - f.phi[(i + 1) % 4];
                assert_abs_diff_eq!(f.current[i], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn continuity_along_the_evolution() {
        let model = LatticeModel::zrp_linear();
        let sector =
            ConfigSector::enumerate(&model, Torus::new(4, 1), 3, DEFAULT_STATE_CAP).unwrap();
        let pot = Potential::static_only(FourierSeries::cosine(1, 0, 1, 0.6));
        let eng = MasterEngine::new(&sector, &pot).unwrap();
        let n = sector.n_states();
        let mut mu0 = vec![0.0; n];
        mu0[0] = 1.0;
        let h = 1e-6;
        let path = eng.evolve(&mu0, &[0.0, 0.01 - h, 0.01 + h, 0.02], 1e-12).unwrap();
        let rho_lo = site_density(&sector, &path.states[1]);
        let rho_hi = site_density(&sector, &path.states[2]);
        // midpoint fields
        let mid: Vec<f64> = path.states[1]
            .iter()
            .zip(&path.states[2])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let f = site_fields(&eng, 0.01, &mid, &model);
        let l2 = 16.0;
        for i in 0..4 {
            let drho = (rho_hi[i] - rho_lo[i]) / (2.0 * h);
            let div = f.current[i] - f.current[(i + 3) % 4];
            assert_abs_diff_eq!(drho, -l2 * div, epsilon = 1e-4);
        }
    }

    #[test]
    fn mobility_bounded_by_twice_chi_with_equality_at_equilibrium() {
        let model = LatticeModel::sep();
        let sector =
            ConfigSector::enumerate(&model, Torus::new(4, 1), 2, DEFAULT_STATE_CAP).unwrap();
        let pot = Potential::static_only(FourierSeries::cosine(1, 0, 1, 0.8));
        let eng = MasterEngine::new(&sector, &pot).unwrap();
        // non-equilibrium law: strict inequality
        let n = sector.n_states();
        let mu: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64).collect();
        let z: f64 = mu.iter().sum();
        let mu: Vec<f64> = mu.iter().map(|x| x / z).collect();
        let f = site_fields(&eng, 0.0, &mu, &model);
        for b in 0..f.chi.len() {
            assert!(f.mobility[b] <= 2.0 * f.chi[b] + 1e-12);
        }
        // stationary law: equality bond by bond
        let nu = eng.stationary(&model, 0.0);
        let f = site_fields(&eng, 0.0, &nu, &model);
        for b in 0..f.chi.len() {
            assert_abs_diff_eq!(f.mobility[b], 2.0 * f.chi[b], epsilon = 1e-12);
        }
    }
}
