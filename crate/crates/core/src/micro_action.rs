//! Relative-entropy action of an observed law path against a reference
//! process, and the exact free-energy balance it satisfies.
//!
//! For a path (mu_t) generated by the observed rates, the path-space
//! relative entropy with respect to the reference-potential process is
//!
//!   A = 1/2 int_0^T Phi(mu_t, j_t, F_t) dt,
//!
//! with j_t the observed current and F_t the force against the reference
//! measure. The balance identity decomposes A as
//!
//!   A = 1/2 [ F(mu_T) - F(mu_0) + int Psi dt + int Psi* dt - coupling ],
//!
//! where the coupling term sum_i (rho_i - rho_bar_i) d/dt V_t(i/L)
//! accounts for the motion of the reference measure.

use crate::canonical::{self, micro_free_energy};
use crate::error::Result;
use crate::master::{EvolvedPath, MasterEngine};
use crate::model::LatticeModel;
use crate::potential::Potential;
use crate::project;
use crate::quad;
use crate::scalars::Scalars;

#[derive(Debug, Clone, Copy)]
pub struct ActionBreakdown {
    /// 1/2 int Phi dt, integrated directly.
    pub total: f64,
    pub free_energy_initial: f64,
    pub free_energy_final: f64,
    pub psi_integral: f64,
    pub psi_star_integral: f64,
    /// int sum_i (rho_i(mu_t) - rho_bar_i(t)) dV_t/dt (i/L) dt.
    pub coupling_integral: f64,
    /// int <j_t, F_t> dt.
    pub pairing_integral: f64,
    /// Simpson/Richardson error estimate for the time integrals.
    pub quad_error: f64,
}

impl ActionBreakdown {
    /// The decomposition re-assembled; equals `total` up to quadrature.
    pub fn recomposed(&self) -> f64 {
        0.5 * (self.free_energy_final - self.free_energy_initial
            + self.psi_integral
            + self.psi_star_integral
            - self.coupling_integral)
    }
}

/// Evaluates the action of `path` (generated by `observed`) against the
/// process with potential `reference`, on a uniform time grid.
pub fn micro_action(
    observed: &MasterEngine,
    reference: &Potential,
    model: &LatticeModel,
    scalars: &Scalars,
    alpha: f64,
    path: &EvolvedPath,
) -> Result<ActionBreakdown> {
    let n = path.times.len();
    assert!(n >= 3 && n % 2 == 1, "need a uniform grid with an even interval count");
    let h = path.times[1] - path.times[0];
    let sector = observed.sector;
    let torus = &sector.torus;
    let ref_engine = MasterEngine::new(sector, reference)?;

    let fpa = scalars.f_prime(alpha)?;
    let mut phi_vals = Vec::with_capacity(n);
    let mut psi_vals = Vec::with_capacity(n);
    let mut psi_star_vals = Vec::with_capacity(n);
    let mut pairing_vals = Vec::with_capacity(n);
    let mut coupling_vals = Vec::with_capacity(n);
    for (k, &t) in path.times.iter().enumerate() {
        let mu = &path.states[k];
        // currents from the observed rates, force/mobility against the
        // reference (mobility agrees between the two by cancellation)
        let obs = canonical::canonical_fields(observed, reference, t, mu);
        let mut reff = canonical::canonical_fields(&ref_engine, reference, t, mu);
        reff.j = obs.j.clone();
        let p = canonical::psi(&reff)?;
        let ps = canonical::psi_star(&reff);
        let pr = canonical::pairing(&reff);
        psi_vals.push(p);
        psi_star_vals.push(ps);
        pairing_vals.push(pr);
        phi_vals.push(p - pr + ps);

        // coupling: sites where the reference potential moves in time
        let mut c = 0.0;
        if !reference.is_static() {
            let rho = project::site_density(sector, mu);
            for i in 0..torus.n_sites() {
                let u = torus.point(i);
                let vdot = reference.dt(t, &u);
                if vdot != 0.0 {
                    let v_now = reference.eval(t, &u);
                    let rho_bar = scalars.moments(fpa - v_now)?.mean;
                    c += (rho[i] - rho_bar) * vdot;
                }
            }
        }
        coupling_vals.push(c);
    }

    let (phi_int, e1) = quad::simpson_with_error(&phi_vals, h)?;
    let (psi_int, e2) = quad::simpson_with_error(&psi_vals, h)?;
    let (psi_star_int, e3) = quad::simpson_with_error(&psi_star_vals, h)?;
    let (pairing_int, e4) = quad::simpson_with_error(&pairing_vals, h)?;
    let (coupling_int, e5) = quad::simpson_with_error(&coupling_vals, h)?;

    let fe0 = micro_free_energy(
        sector, model, scalars, reference, path.times[0], alpha, &path.states[0],
    )?;
    let fe1 = micro_free_energy(
        sector,
        model,
        scalars,
        reference,
        path.times[n - 1],
        alpha,
        &path.states[n - 1],
    )?;

    Ok(ActionBreakdown {
        total: 0.5 * phi_int,
        free_energy_initial: fe0.raw,
        free_energy_final: fe1.raw,
        psi_integral: psi_int,
        psi_star_integral: psi_star_int,
        coupling_integral: coupling_int,
        pairing_integral: pairing_int,
        quad_error: e1.max(e2).max(e3).max(e4).max(e5),
    })
}

/// Residual of the exact free-energy balance along the path:
///
///   F(T) - F(0) + int <j, F> dt - int sum_i (rho - rho_bar) dV/dt dt = 0.
pub fn chain_rule_residual(
    observed: &MasterEngine,
    reference: &Potential,
    model: &LatticeModel,
    scalars: &Scalars,
    alpha: f64,
    path: &EvolvedPath,
) -> Result<f64> {
    let b = micro_action(observed, reference, model, scalars, alpha, path)?;
    Ok(b.free_energy_final - b.free_energy_initial + b.pairing_integral - b.coupling_integral)
}
