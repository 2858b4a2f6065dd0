//! Local-equilibrium defects: how far the block-averaged bond observables
//! of an ensemble are from their equilibrium values at the local block
//! density. Bounded initial free energy and bounded action force these
//! defects to vanish in the hydrodynamic limit; here they are computed for
//! finite L so the decay can be observed directly.

use crate::empirical::block_average;
use crate::error::Result;
use crate::model::LatticeModel;
use crate::scalars::Scalars;
use crate::torus::Torus;

#[derive(Debug, Clone, Copy, Default)]
pub struct DefectPair {
    /// Mobility-type defect, built from the symmetrised bond rates chi.
    pub chi: f64,
    /// Gradient-observable defect, built from d(eta(i)).
    pub phi: f64,
}

/// Per-configuration defect at block radius l = floor(eps L):
///
///   L^{-d} sum_{i,k} | chi^l_{i,i+e_k}(eta) - chi(eta^l(i)) |
///
/// and the analogue with the gradient observable phi. Flat potential.
pub fn config_defect(
    torus: &Torus,
    model: &LatticeModel,
    scalars: &Scalars,
    eta: &[u16],
    eps: f64,
) -> Result<DefectPair> {
    let sites = torus.n_sites();
    let d = torus.d;
    let l = ((eps * torus.l as f64).floor() as usize).max(1);
    let hi = scalars.max_density();
    let clamp = |a: f64| a.clamp(0.0, if hi.is_finite() { hi } else { f64::INFINITY });

    // per-bond chi(delta_eta) = (g1(eta_i) g2(eta_i') + g1(eta_i') g2(eta_i)) / 2
    let mut bond_chi = vec![0.0; sites * d];
    let mut site_phi = vec![0.0; sites];
    for i in 0..sites {
        site_phi[i] = model.dval(eta[i] as u32);
        for k in 0..d {
            let j = torus.neighbor(i, k, 1);
            let (a, b) = (eta[i] as u32, eta[j] as u32);
            bond_chi[i * d + k] =
                0.5 * (model.g1(a) * model.g2(b) + model.g1(b) * model.g2(a));
        }
    }
    let rho_block = block_average(torus, eta, l);
    // block averages of the bond/site observables (same box filter)
    let chi_block = block_average_f64(torus, &bond_chi, l, d);
    let phi_block = block_average_f64(torus, &site_phi, l, 1);

    let vol = sites as f64;
    let mut defect = DefectPair::default();
    for i in 0..sites {
        let a = clamp(rho_block[i]);
        let (phi_eq, chi_eq) = phi_chi_extended(scalars, a)?;
        for k in 0..d {
            defect.chi += (chi_block[i * d + k] - chi_eq).abs();
        }
        defect.phi += (phi_block[i] - phi_eq).abs();
    }
    defect.chi /= vol;
    defect.phi /= vol;
    Ok(defect)
}

/// Equilibrium (phi, chi) extended continuously to the closed density range.
fn phi_chi_extended(scalars: &Scalars, a: f64) -> Result<(f64, f64)> {
    let hi = scalars.max_density();
    let delta = 1e-9;
    if a <= 0.0 || (hi.is_finite() && a >= hi) {
        return scalars.phi_chi(a.clamp(0.0, hi.min(f64::MAX)));
    }
    let a = if hi.is_finite() {
        a.clamp(delta, hi - delta)
    } else {
        a.max(delta)
    };
    scalars.phi_chi(a)
}

/// Weighted ensemble version: sum_w w(eta) * config_defect(eta).
pub fn ensemble_defect<'a, I>(
    torus: &Torus,
    model: &LatticeModel,
    scalars: &Scalars,
    ensemble: I,
    eps: f64,
) -> Result<DefectPair>
where
    I: IntoIterator<Item = (f64, &'a [u16])>,
{
    let mut out = DefectPair::default();
    for (w, eta) in ensemble {
        let d = config_defect(torus, model, scalars, eta, eps)?;
        out.chi += w * d.chi;
        out.phi += w * d.phi;
    }
    Ok(out)
}

/// Box-filters a field with `stride` values per site.
fn block_average_f64(torus: &Torus, field: &[f64], l: usize, stride: usize) -> Vec<f64> {
    let sites = torus.n_sites();
    let mut out = vec![0.0; sites * stride];
    let norm = ((2 * l + 1) as f64).powi(torus.d as i32);
    for s in 0..stride {
        let mut cur: Vec<f64> = (0..sites).map(|i| field[i * stride + s]).collect();
        for axis in 0..torus.d {
            let mut next = vec![0.0; sites];
            for (i, nx) in next.iter_mut().enumerate() {
                let mut acc = cur[i];
                let mut fwd = i;
                let mut bwd = i;
                for _ in 0..l {
                    fwd = torus.neighbor(fwd, axis, 1);
                    bwd = torus.neighbor(bwd, axis, -1);
                    acc += cur[fwd] + cur[bwd];
                }
                *nx = acc;
            }
            cur = next;
        }
        for i in 0..sites {
            out[i * stride + s] = cur[i] / norm;
        }
    }
    out
}
