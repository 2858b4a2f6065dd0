//! Enumeration of a fixed-particle-number sector of the configuration
//! space, together with all nearest-neighbour single-particle moves.
//!
//! The dynamics conserve the particle number, so the master equation can
//! be solved sector by sector. Moves are stored individually (for site
//! projections) and grouped by unordered configuration pair (for the
//! canonical current/force/mobility fields: on small tori several moves
//! can connect the same pair of configurations).

use crate::error::{CoreError, Result};
use crate::model::LatticeModel;
use crate::torus::Torus;
use std::collections::HashMap;

pub const DEFAULT_STATE_CAP: usize = 2_000_000;

/// One directed single-particle move eta -> eta^{i, i + sign e_axis}.
#[derive(Debug, Clone)]
pub struct Move {
    pub from: u32,
    pub to: u32,
    pub site: u32,
    pub axis: u8,
    pub sign: i8,
    /// g1(eta(i)) g2(eta(i')): the rate before the potential factor.
    pub g_factor: f64,
    /// log nu(eta') - log nu(eta) of the reference product weights.
    pub log_nu_ratio: f64,
    /// Index of the unordered configuration pair this move connects.
    pub pair: u32,
    /// True when `from` is the lower-indexed configuration of the pair.
    pub forward: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ConfigPair {
    pub lo: u32,
    pub hi: u32,
}

#[derive(Debug)]
pub struct ConfigSector {
    pub torus: Torus,
    pub total: u32,
    pub configs: Vec<Box<[u16]>>,
    pub index: HashMap<Box<[u16]>, u32>,
    pub moves: Vec<Move>,
    pub pairs: Vec<ConfigPair>,
}

impl ConfigSector {
    /// Enumerates all configurations with `total` particles on the torus
    /// (respecting the occupancy cap) in lexicographic order, plus all
    /// admissible moves with nonzero rate.
    pub fn enumerate(
        model: &LatticeModel,
        torus: Torus,
        total: u32,
        state_cap: usize,
    ) -> Result<Self> {
        let sites = torus.n_sites();
        let cap = model.n_max.unwrap_or(total).min(total);
        if let Some(m) = model.n_max {
            if (m as usize) * sites < total as usize {
                return Err(CoreError::InvalidConfiguration(format!(
                    "cannot place {total} particles on {sites} sites with cap {m}"
                )));
            }
        }
        let mut configs: Vec<Box<[u16]>> = Vec::new();
        let mut cur = vec![0u16; sites];
        enumerate_rec(&mut configs, &mut cur, 0, total, cap, state_cap)?;
        let mut index = HashMap::with_capacity(configs.len());
        for (i, c) in configs.iter().enumerate() {
            index.insert(c.clone(), i as u32);
        }

        let mut moves = Vec::new();
        let mut pairs: Vec<ConfigPair> = Vec::new();
        let mut pair_index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut scratch = vec![0u16; sites];
        for (ci, cfg) in configs.iter().enumerate() {
            for site in 0..sites {
                let n_from = cfg[site] as u32;
                if n_from == 0 {
                    continue;
                }
                for axis in 0..torus.d {
                    for sign in [1i8, -1i8] {
                        let dest = torus.neighbor(site, axis, sign);
                        if dest == site {
                            continue;
                        }
                        let n_to = cfg[dest] as u32;
                        if !model.admissible(n_to + 1) {
                            continue;
                        }
                        let g = model.g1(n_from) * model.g2(n_to);
                        if g == 0.0 {
                            continue;
                        }
                        scratch.copy_from_slice(cfg);
                        scratch[site] -= 1;
                        scratch[dest] += 1;
                        let to = *index.get(scratch.as_slice()).ok_or_else(|| {
                            CoreError::Numerics("move target missing from sector".into())
                        })?;
                        let from = ci as u32;
                        let key = (from.min(to), from.max(to));
                        let pair = *pair_index.entry(key).or_insert_with(|| {
                            pairs.push(ConfigPair {
                                lo: key.0,
                                hi: key.1,
                            });
                            (pairs.len() - 1) as u32
                        });
                        let log_nu_ratio = model.log_nu(n_from - 1) + model.log_nu(n_to + 1)
                            - model.log_nu(n_from)
                            - model.log_nu(n_to);
                        moves.push(Move {
                            from,
                            to,
                            site: site as u32,
                            axis: axis as u8,
                            sign,
                            g_factor: g,
                            log_nu_ratio,
                            pair,
                            forward: from == key.0,
                        });
                    }
                }
            }
        }
        Ok(ConfigSector {
            torus,
            total,
            configs,
            index,
            moves,
            pairs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.configs.len()
    }

    /// Unnormalised weight of the sector under the product measure with
    /// single-site tilts theta(i): returns log sum_eta prod_i e^{theta_i
    /// eta_i} nu(eta_i), summed over this sector only.
    pub fn log_sector_mass(&self, model: &LatticeModel, theta: &[f64]) -> f64 {
        let mut log_max = f64::NEG_INFINITY;
        let logs: Vec<f64> = self
            .configs
            .iter()
            .map(|cfg| {
                let lw: f64 = cfg
                    .iter()
                    .zip(theta)
                    .map(|(&n, &th)| th * n as f64 + model.log_nu(n as u32))
                    .sum();
                log_max = log_max.max(lw);
                lw
            })
            .collect();
        log_max + logs.iter().map(|&l| (l - log_max).exp()).sum::<f64>().ln()
    }
}

fn enumerate_rec(
    out: &mut Vec<Box<[u16]>>,
    cur: &mut Vec<u16>,
    site: usize,
    remaining: u32,
    cap: u32,
    state_cap: usize,
) -> Result<()> {
    if site == cur.len() - 1 {
        if remaining <= cap {
            cur[site] = remaining as u16;
            if out.len() >= state_cap {
                return Err(CoreError::SectorTooLarge(out.len() + 1, state_cap));
            }
            out.push(cur.clone().into_boxed_slice());
        }
        return Ok(());
    }
    let hi = remaining.min(cap);
    for n in 0..=hi {
        cur[site] = n as u16;
        enumerate_rec(out, cur, site + 1, remaining - n, cap, state_cap)?;
    }
    cur[site] = 0;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sep_sector_size() {
        // 4 sites, 2 particles, exclusion: C(4,2) = 6 configurations
        let s = ConfigSector::enumerate(
            &LatticeModel::sep(),
            Torus::new(4, 1),
            2,
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert_eq!(s.n_states(), 6);
    }

    #[test]
    fn zrp_sector_size() {
        // 3 sites, 2 particles, unbounded: C(2+3-1, 2) = 6 compositions
        let s = ConfigSector::enumerate(
            &LatticeModel::zrp_linear(),
            Torus::new(3, 1),
            2,
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert_eq!(s.n_states(), 6);
    }

    #[test]
    fn every_move_has_a_reverse() {
        for model in [LatticeModel::sep(), LatticeModel::zrp_linear()] {
            let s = ConfigSector::enumerate(&model, Torus::new(4, 1), 3, DEFAULT_STATE_CAP)
                .unwrap_or_else(|_| {
                    ConfigSector::enumerate(&model, Torus::new(4, 1), 2, DEFAULT_STATE_CAP).unwrap()
                });
            use std::collections::HashSet;
            let fwd: HashSet<(u32, u32)> = s.moves.iter().map(|m| (m.from, m.to)).collect();
            for m in &s.moves {
                assert!(fwd.contains(&(m.to, m.from)), "missing reverse move");
            }
        }
    }

    #[test]
    fn detailed_balance_of_reference_weights() {
        // nu(eta) r0(eta -> eta') = nu(eta') r0(eta' -> eta) pointwise:
        // equivalently g_factor(fwd) * e^{log_nu_ratio} = g_factor(rev)
        // paired on the same (site, axis) bond.
        for model in [
            LatticeModel::sep(),
            LatticeModel::zrp_linear(),
            LatticeModel::zrp_table(vec![0.5, 1.2, 1.8, 2.1]).unwrap(),
        ] {
            for l in [2usize, 3, 4] {
                let total = 4.min(l as u32 * model.n_max.unwrap_or(4));
                let s =
                    ConfigSector::enumerate(&model, Torus::new(l, 1), total, DEFAULT_STATE_CAP)
                        .unwrap();
                for m in &s.moves {
                    // reverse move: from `to`, at the arrival site, opposite sign
                    let arrival = s.torus.neighbor(m.site as usize, m.axis as usize, m.sign);
                    let rev = s
                        .moves
                        .iter()
                        .find(|r| {
                            r.from == m.to
                                && r.to == m.from
                                && r.site as usize == arrival
                                && r.axis == m.axis
                                && (r.sign == -m.sign || s.torus.l == 2)
                        })
                        .expect("reverse move exists");
                    // nu(eta) g_f = nu(eta') g_rev, i.e.
                    // ln g_f - ln g_rev = log nu(eta') - log nu(eta)
                    let lhs = m.g_factor.ln() - m.log_nu_ratio;
                    let rhs = rev.g_factor.ln();
                    assert!(
                        (lhs - rhs).abs() < 1e-12,
                        "detailed balance violated for {:?}",
                        model.kind
                    );
                }
            }
        }
    }

    #[test]
    fn l2_torus_has_parallel_edges() {
        let s = ConfigSector::enumerate(
            &LatticeModel::sep(),
            Torus::new(2, 1),
            1,
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert_eq!(s.n_states(), 2);
        // each configuration has two moves (both directions land on the
        // same neighbour), connected through a single pair
        assert_eq!(s.moves.len(), 4);
        assert_eq!(s.pairs.len(), 1);
    }
}
