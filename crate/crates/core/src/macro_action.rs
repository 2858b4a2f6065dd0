//! The macroscopic action of a density path against the nonlinear
//! diffusion with potential V:
//!
//!   A = 1/2 [ F(rho_T) - F(rho_0) + E + E* ]
//!     = 1/4 int || rho' - Lap phi(rho) - div(chi(rho) grad V) ||_{-1,chi(rho)}^2 dt,
//!
//! with E = 1/2 int ||rho'||^2_{-1,chi} dt and
//! E* = 1/2 int ||f''(rho) grad rho + grad V||^2_{chi} dt
//!    = 1/2 int ||Lap phi(rho) + div(chi grad V)||^2_{-1,chi} dt.
//!
//! One spatial dimension. Time derivatives are second-order central
//! differences on the series grid, time integrals composite Simpson.

use crate::error::{CoreError, Result};
use crate::hydro::DensitySeries;
use crate::norms::{SpectralGrid1d, WeightedNormContext};
use crate::potential::Potential;
use crate::quad;
use crate::scalars::Scalars;
use crate::wasserstein::wasserstein_1d;

#[derive(Debug, Clone, Copy)]
pub struct MacroActionBreakdown {
    pub free_energy_initial: f64,
    pub free_energy_final: f64,
    /// E = 1/2 int ||rho'||_{-1,chi}^2 dt.
    pub e: f64,
    /// E* in the weighted-L^2 representation.
    pub e_star: f64,
    /// E* in the dual H^-1 representation (cross-check; equal up to O(h^2)).
    pub e_star_dual: f64,
    /// A = (dF + E + E*) / 2.
    pub total: f64,
    /// 1/4 int ||rho' - Lap phi - div(chi grad V)||_{-1,chi}^2 dt.
    pub quarter_norm_form: f64,
    /// Residual of the macroscopic chain rule
    /// dF + int <rho', Lap phi + div(chi grad V)>_{-1,chi} dt.
    pub chain_rule_residual: f64,
}

/// Minimum chi along the path, used to reject degenerate weights.
const CHI_FLOOR: f64 = 1e-12;

struct PathData {
    times: Vec<f64>,
    rho: Vec<Vec<f64>>,
    rho_dot: Vec<Vec<f64>>,
    chi: Vec<Vec<f64>>,
    /// Lap phi(rho) + div(chi(rho) grad V) per time.
    drive: Vec<Vec<f64>>,
    /// f''(rho) grad rho + grad V per time (the negative force field).
    slope: Vec<Vec<f64>>,
}

fn path_data(
    series: &DensitySeries,
    scalars: &Scalars,
    pot: &Potential,
    grid: &SpectralGrid1d,
) -> Result<PathData> {
    if series.grid.d() != 1 {
        return Err(CoreError::InvalidConfiguration(
            "macroscopic action implemented for d = 1".into(),
        ));
    }
    let m = series.grid.dims[0];
    let nt = series.times.len();
    if nt < 5 || nt % 2 == 0 {
        return Err(CoreError::Numerics(
            "action evaluation needs a uniform odd-length time grid".into(),
        ));
    }
    let dt = series.times[1] - series.times[0];
    let centers: Vec<Vec<f64>> = (0..m).map(|c| series.grid.center(c)).collect();

    let mut chi_t = Vec::with_capacity(nt);
    let mut drive_t = Vec::with_capacity(nt);
    let mut slope_t = Vec::with_capacity(nt);
    for (k, rho) in series.fields.iter().enumerate() {
        let t = series.times[k];
        let mut phi = vec![0.0; m];
        let mut chi = vec![0.0; m];
        let mut fpp = vec![0.0; m];
        for c in 0..m {
            let a = clamp_interior(scalars, rho[c]);
            let (p, x) = scalars.phi_chi(a)?;
            phi[c] = p;
            chi[c] = x.max(CHI_FLOOR);
            fpp[c] = scalars.f_second(a)?;
        }
        let grad_v: Vec<f64> = (0..m).map(|c| pot.grad(t, &centers[c])[0]).collect();
        let dphi = grid.deriv(&phi);
        let lap_phi = grid.deriv(&dphi);
        let chi_gradv: Vec<f64> = chi.iter().zip(&grad_v).map(|(&x, &g)| x * g).collect();
        let div_drift = grid.deriv(&chi_gradv);
        let drive: Vec<f64> = lap_phi.iter().zip(&div_drift).map(|(&a, &b)| a + b).collect();
        let drho = grid.deriv(rho);
        let slope: Vec<f64> = (0..m).map(|c| fpp[c] * drho[c] + grad_v[c]).collect();
        chi_t.push(chi);
        drive_t.push(drive);
        slope_t.push(slope);
    }

    // central time differences, one-sided second order at the ends
    let mut rho_dot = Vec::with_capacity(nt);
    for k in 0..nt {
        let mut d = vec![0.0; m];
        for c in 0..m {
            d[c] = if k == 0 {
                (-3.0 * series.fields[0][c] + 4.0 * series.fields[1][c] - series.fields[2][c])
                    / (2.0 * dt)
            } else if k == nt - 1 {
                (3.0 * series.fields[nt - 1][c] - 4.0 * series.fields[nt - 2][c]
                    + series.fields[nt - 3][c])
                    / (2.0 * dt)
            } else {
                (series.fields[k + 1][c] - series.fields[k - 1][c]) / (2.0 * dt)
            };
        }
        rho_dot.push(d);
    }

    Ok(PathData {
        times: series.times.clone(),
        rho: series.fields.clone(),
        rho_dot,
        chi: chi_t,
        drive: drive_t,
        slope: slope_t,
    })
}

fn clamp_interior(scalars: &Scalars, a: f64) -> f64 {
    const DELTA: f64 = 1e-9;
    let hi = scalars.max_density();
    if hi.is_finite() {
        a.clamp(DELTA, hi - DELTA)
    } else {
        a.max(DELTA)
    }
}

/// Full action breakdown of a solved or prescribed density path.
pub fn macro_action(
    series: &DensitySeries,
    scalars: &Scalars,
    pot: &Potential,
    v_static: &dyn Fn(&[f64]) -> f64,
    alpha: f64,
) -> Result<MacroActionBreakdown> {
    let m = series.grid.dims[0];
    let grid = SpectralGrid1d::new(m)?;
    let data = path_data(series, scalars, pot, &grid)?;
    let nt = data.times.len();
    let dt = data.times[1] - data.times[0];

    let mut e_vals = Vec::with_capacity(nt);
    let mut e_star_vals = Vec::with_capacity(nt);
    let mut e_star_dual_vals = Vec::with_capacity(nt);
    let mut quarter_vals = Vec::with_capacity(nt);
    let mut chain_vals = Vec::with_capacity(nt);
    for k in 0..nt {
        let ctx = WeightedNormContext::new(&grid, data.chi[k].clone())?;
        let e_k = ctx.h_minus1_norm_sq(&data.rho_dot[k])?;
        let es_k = ctx.l2_norm_sq(&data.slope[k]);
        let esd_k = ctx.h_minus1_norm_sq(&data.drive[k])?;
        let diff: Vec<f64> = data.rho_dot[k]
            .iter()
            .zip(&data.drive[k])
            .map(|(&a, &b)| a - b)
            .collect();
        let q_k = ctx.h_minus1_norm_sq(&diff)?;
        let c_k = ctx.h_minus1_inner(&data.rho_dot[k], &data.drive[k])?;
        e_vals.push(e_k);
        e_star_vals.push(es_k);
        e_star_dual_vals.push(esd_k);
        quarter_vals.push(q_k);
        chain_vals.push(c_k);
    }

    let e = 0.5 * quad::simpson(&e_vals, dt);
    let e_star = 0.5 * quad::simpson(&e_star_vals, dt);
    let e_star_dual = 0.5 * quad::simpson(&e_star_dual_vals, dt);
    let quarter = 0.25 * quad::simpson(&quarter_vals, dt);
    let chain = quad::simpson(&chain_vals, dt);

    let fe0 = crate::hydro::macro_free_energy(&series.grid, scalars, v_static, alpha, &data.rho[0])?;
    let fe1 = crate::hydro::macro_free_energy(
        &series.grid,
        scalars,
        v_static,
        alpha,
        &data.rho[nt - 1],
    )?;

    Ok(MacroActionBreakdown {
        free_energy_initial: fe0,
        free_energy_final: fe1,
        e,
        e_star,
        e_star_dual,
        total: 0.5 * (fe1 - fe0 + e + e_star),
        quarter_norm_form: quarter,
        // <rho', drive>_{-1,chi} = -dF/dt: the dual potential of the drive
        // is -(f'(rho) + V) up to a constant
        chain_rule_residual: fe1 - fe0 + chain,
    })
}

/// 1/4 int ||grad H_t||^2_{chi(rho_t)} dt: the limiting rescaled action of
/// the process tilted by H along its own hydrodynamic solution.
pub fn tilt_action_target(series: &DensitySeries, scalars: &Scalars, pot: &Potential) -> Result<f64> {
    let m = series.grid.dims[0];
    let nt = series.times.len();
    let dt = series.times[1] - series.times[0];
    let centers: Vec<Vec<f64>> = (0..m).map(|c| series.grid.center(c)).collect();
    let mut vals = Vec::with_capacity(nt);
    for (k, rho) in series.fields.iter().enumerate() {
        let t = series.times[k];
        let s = pot.envelope.eval(t);
        let mut acc = 0.0;
        for c in 0..m {
            let chi = scalars
                .phi_chi(clamp_interior(scalars, rho[c]))?
                .1
                .max(CHI_FLOOR);
            let gh = s * pot.tilt.grad(&centers[c])[0];
            acc += chi * gh * gh;
        }
        vals.push(acc / m as f64);
    }
    Ok(0.25 * quad::simpson(&vals, dt))
}

#[derive(Debug, Clone)]
pub struct MetricDerivativeRow {
    pub t: f64,
    /// W_2 difference quotient |rho'|(t) ~ W_2(rho_{t-dt}, rho_{t+dt}) / 2dt.
    pub metric_derivative: f64,
    /// sqrt(C_lip) ||rho'||_{-1,chi(rho)}: the claimed upper bound.
    pub bound: f64,
}

/// Pointwise check of |rho'_t| <= sqrt(C_lip) ||rho'_t||_{-1,chi(rho_t)}
/// along a solved path (interior grid times only).
pub fn metric_derivative_check(
    series: &DensitySeries,
    scalars: &Scalars,
    c_lip: f64,
) -> Result<Vec<MetricDerivativeRow>> {
    let m = series.grid.dims[0];
    let grid = SpectralGrid1d::new(m)?;
    let nt = series.times.len();
    let dt = series.times[1] - series.times[0];
    let mut rows = Vec::new();
    for k in 1..nt - 1 {
        let w = wasserstein_1d(&series.fields[k - 1], &series.fields[k + 1])?;
        let md = w / (2.0 * dt);
        let mut chi = vec![0.0; m];
        for c in 0..m {
            chi[c] = scalars
                .phi_chi(clamp_interior(scalars, series.fields[k][c]))?
                .1
                .max(CHI_FLOOR);
        }
        let ctx = WeightedNormContext::new(&grid, chi)?;
        let rho_dot: Vec<f64> = (0..m)
            .map(|c| (series.fields[k + 1][c] - series.fields[k - 1][c]) / (2.0 * dt))
            .collect();
        let bound = (c_lip.max(0.0)).sqrt() * ctx.h_minus1_norm_sq(&rho_dot)?.sqrt();
        rows.push(MetricDerivativeRow {
            t: series.times[k],
            metric_derivative: md,
            bound,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct McCannReport {
    /// Minimum discrete second derivative of s -> s^d f(s^{-d}) over the
    /// scan grid; nonnegative means displacement convexity holds.
    pub min_second_difference: f64,
    pub s_at_min: f64,
}

/// Checks the displacement-convexity criterion: s -> s^d f(s^{-d}) convex
/// on the admissible dilation range.
pub fn mccann_check(scalars: &Scalars, d: usize) -> Result<McCannReport> {
    let hi = scalars.max_density();
    // s such that s^{-d} stays strictly inside the density range
    let (s_lo, s_hi) = if hi.is_finite() {
        ((1.0f64 / hi).powf(1.0 / d as f64) * 1.05, 20.0)
    } else {
        (0.05, 20.0)
    };
    let n = 400;
    let ratio = (s_hi / s_lo).powf(1.0 / n as f64);
    let g = |s: f64| -> Result<f64> {
        let a = s.powi(-(d as i32));
        Ok(s.powi(d as i32) * scalars.free_energy(clamp_interior(scalars, a))?)
    };
    let mut min_dd = f64::INFINITY;
    let mut s_at = s_lo;
    let mut s = s_lo * ratio;
    for _ in 1..n {
        let h = s * (ratio - 1.0);
        let dd = (g(s + h)? - 2.0 * g(s)? + g(s - h)?) / (h * h);
        if dd < min_dd {
            min_dd = dd;
            s_at = s;
        }
        s *= ratio;
    }
    Ok(McCannReport {
        min_second_difference: min_dd,
        s_at_min: s_at,
    })
}
