//! Exact master-equation engine on a particle-number sector.
//!
//! The generator acts at the diffusive time scale: every microscopic rate
//! g1 g2 e^{-(V(i'/L) - V(i/L))/2} is multiplied by L^2.

use crate::error::{CoreError, Result};
use crate::ode;
use crate::potential::Potential;
use crate::sector::ConfigSector;

pub struct MasterEngine<'a> {
    pub sector: &'a ConfigSector,
    pub pot: &'a Potential,
    /// Per-move static potential difference V(i'/L) - V(i/L).
    pub v_diff: Vec<f64>,
    /// Per-move tilt difference H(i'/L) - H(i/L).
    pub h_diff: Vec<f64>,
    /// Parabolic scaling L^2 baked into the generator.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct EvolvedPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl<'a> MasterEngine<'a> {
    pub fn new(sector: &'a ConfigSector, pot: &'a Potential) -> Result<Self> {
        if pot.d() != sector.torus.d {
            return Err(CoreError::InvalidConfiguration(format!(
                "potential dimension {} does not match torus dimension {}",
                pot.d(),
                sector.torus.d
            )));
        }
        let t = &sector.torus;
        let mut v_diff = Vec::with_capacity(sector.moves.len());
        let mut h_diff = Vec::with_capacity(sector.moves.len());
        for m in &sector.moves {
            let dest = t.neighbor(m.site as usize, m.axis as usize, m.sign);
            let (u_from, u_to) = (t.point(m.site as usize), t.point(dest));
            v_diff.push(pot.v.eval(&u_to) - pot.v.eval(&u_from));
            h_diff.push(pot.tilt.eval(&u_to) - pot.tilt.eval(&u_from));
        }
        Ok(MasterEngine {
            sector,
            pot,
            v_diff,
            h_diff,
            scale: (t.l as f64).powi(2),
        })
    }

    /// Unscaled jump rate of move `m` at time `t` (without the L^2 factor).
    #[inline]
    pub fn hat_rate(&self, m: usize, s_t: f64) -> f64 {
        self.sector.moves[m].g_factor
            * (-0.5 * (self.v_diff[m] + s_t * self.h_diff[m])).exp()
    }

    /// d mu / dt.
    pub fn rhs(&self, t: f64, mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let s_t = self.pot.envelope.eval(t);
        for (idx, m) in self.sector.moves.iter().enumerate() {
            let w = self.scale * mu[m.from as usize] * self.hat_rate(idx, s_t);
            out[m.from as usize] -= w;
            out[m.to as usize] += w;
        }
    }

    /// Solves the master equation from mu0, reporting the law at `times`.
    /// Total probability is conserved exactly by construction; drift beyond
    /// roundoff aborts the solve.
    pub fn evolve(&self, mu0: &[f64], times: &[f64], rtol: f64) -> Result<EvolvedPath> {
        if mu0.len() != self.sector.n_states() {
            return Err(CoreError::InvalidConfiguration(format!(
                "initial law has {} entries for {} states",
                mu0.len(),
                self.sector.n_states()
            )));
        }
        let mass0: f64 = mu0.iter().sum();
        if (mass0 - 1.0).abs() > 1e-10 {
            return Err(CoreError::MassMismatch(mass0, 1.0));
        }
        let states = ode::integrate(
            |t, y, dy| self.rhs(t, y, dy),
            mu0,
            times,
            rtol,
            1e-14,
        )?;
        for (ti, st) in states.iter().enumerate() {
            let mass: f64 = st.iter().sum();
            if (mass - 1.0).abs() > 1e-9 {
                return Err(CoreError::Solver(
                    times[ti],
                    format!("probability mass drifted to {mass}"),
                ));
            }
        }
        Ok(EvolvedPath {
            times: times.to_vec(),
            states,
        })
    }

    /// Stationary law at frozen time `t`: reference product weights tilted
    /// by the potential, normalised on the sector.
    pub fn stationary(&self, model: &crate::model::LatticeModel, t: f64) -> Vec<f64> {
        let s_t = self.pot.envelope.eval(t);
        let torus = &self.sector.torus;
        let theta: Vec<f64> = (0..torus.n_sites())
            .map(|i| {
                let u = torus.point(i);
                -(self.pot.v.eval(&u) + s_t * self.pot.tilt.eval(&u))
            })
            .collect();
        let mut logs: Vec<f64> = Vec::with_capacity(self.sector.n_states());
        let mut log_max = f64::NEG_INFINITY;
        for cfg in &self.sector.configs {
            let mut lw = 0.0;
            for (i, &n) in cfg.iter().enumerate() {
                lw += theta[i] * n as f64 + model.log_nu(n as u32);
            }
            log_max = log_max.max(lw);
            logs.push(lw);
        }
        let mut w: Vec<f64> = logs.iter().map(|&l| (l - log_max).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticeModel;
    use crate::potential::FourierSeries;
    use crate::sector::DEFAULT_STATE_CAP;
    use crate::torus::Torus;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_site_exclusion_relaxes_at_rate_sixteen() {
        // L = 2, one particle: both jump directions land on the other site,
        // so the aggregated rate is 2 L^2 = 8 each way and the gap is 16.
        let model = LatticeModel::sep();
        let sector =
            ConfigSector::enumerate(&model, Torus::new(2, 1), 1, DEFAULT_STATE_CAP).unwrap();
        let pot = Potential::static_only(FourierSeries::zero(1));
        let eng = MasterEngine::new(&sector, &pot).unwrap();
        let times: Vec<f64> = (0..=8).map(|i| i as f64 * 0.05).collect();
        // configuration (1, 0) is enumerated after (0, 1)
        let i10 = sector.index[&vec![1u16, 0u16].into_boxed_slice()] as usize;
        let mut mu0 = vec![0.0; 2];
        mu0[i10] = 1.0;
        let path = eng.evolve(&mu0, &times, 1e-10).unwrap();
        for (k, st) in path.states.iter().enumerate() {
            let expect = 0.5 + 0.5 * (-16.0 * times[k]).exp();
            assert_abs_diff_eq!(st[i10], expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn tilted_rate_includes_potential_factor() {
        // ZRP g(k) = k on L = 4 with V(u) = cos(2 pi u): jumping 0 -> 1
        // from occupancy 3 has hat rate 3 e^{(V(0) - V(1/4))/2} = 3 e^{1/2}
        let model = LatticeModel::zrp_linear();
        let sector =
            ConfigSector::enumerate(&model, Torus::new(4, 1), 3, DEFAULT_STATE_CAP).unwrap();
        let pot = Potential::static_only(FourierSeries::cosine(1, 0, 1, 1.0));
        let eng = MasterEngine::new(&sector, &pot).unwrap();
        let from = sector.index[&vec![3u16, 0, 0, 0].into_boxed_slice()];
        let (idx, _) = sector
            .moves
            .iter()
            .enumerate()
            .find(|(_, m)| m.from == from && m.site == 0 && m.sign == 1)
            .unwrap();
        assert_abs_diff_eq!(
            eng.hat_rate(idx, eng.pot.envelope.eval(0.0)),
            3.0 * (0.5f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn probability_mass_is_conserved() {
        let model = LatticeModel::zrp_linear();
        let sector =
            ConfigSector::enumerate(&model, Torus::new(3, 1), 4, DEFAULT_STATE_CAP).unwrap();
        let pot = Potential::static_only(FourierSeries::cosine(1, 0, 1, 0.7));
        let eng = MasterEngine::new(&sector, &pot).unwrap();
        let n = sector.n_states();
        let mu0 = vec![1.0 / n as f64; n];
        let path = eng.evolve(&mu0, &[0.0, 0.02, 0.1], 1e-9).unwrap();
        for st in &path.states {
            assert_abs_diff_eq!(st.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}
