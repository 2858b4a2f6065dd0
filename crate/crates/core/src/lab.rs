//! Convergence experiments: the rescaled microscopic action of tilted
//! processes against its macroscopic limit, term-by-term lower bounds,
//! two-sided convergence of the decomposition, and local-equilibrium
//! defects of stationary ensembles.

use crate::canonical::micro_free_energy;
use crate::error::Result;
use crate::hydro::{solve_pde, DensitySeries, Grid};
use crate::kmc;
use crate::localeq;
use crate::macro_action::{self, MacroActionBreakdown};
use crate::master::MasterEngine;
use crate::micro_action::{micro_action, ActionBreakdown};
use crate::model::LatticeModel;
use crate::potential::{FourierSeries, Potential};
use crate::scalars::Scalars;
use crate::sector::ConfigSector;
use crate::torus::Torus;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: LatticeModel,
    pub d: usize,
    pub pot: Potential,
    /// Constant initial profile (canonical conditioning needs an integer
    /// particle count per lattice; profiles enter through rho0_modes).
    pub rho0_mean: f64,
    pub rho0_modes: FourierSeries,
    pub t_final: f64,
    /// Output grid intervals for exact evolutions (must be a multiple of 4).
    pub n_time: usize,
    pub exact_l: Vec<usize>,
    pub kmc_l: Vec<usize>,
    pub n_traj: usize,
    pub seed: u64,
    pub grid_m: usize,
    pub state_cap: usize,
    pub ode_rtol: f64,
}

impl Scenario {
    pub fn rho0(&self, u: &[f64]) -> f64 {
        self.rho0_mean + self.rho0_modes.eval(u)
    }

    /// Mean density = alpha for the flat-V reference.
    pub fn alpha(&self) -> f64 {
        self.rho0_mean
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_time)
            .map(|i| self.t_final * i as f64 / self.n_time as f64)
            .collect()
    }

    /// Reference process: static potential only.
    pub fn reference(&self) -> Potential {
        Potential::static_only(self.pot.v.clone())
    }
}

/// The fully standard desk-scale scenario: independent walkers (linear
/// zero-range) in d = 1 tilted by H(u) = 0.2 cos(2 pi u) over T = 0.05.
pub fn independent_walkers_tilted() -> Scenario {
    Scenario {
        model: LatticeModel::zrp_linear(),
        d: 1,
        pot: Potential {
            v: FourierSeries::zero(1),
            tilt: FourierSeries::cosine(1, 0, 1, 0.2),
            envelope: crate::potential::Envelope::Constant { value: 1.0 },
        },
        rho0_mean: 1.0,
        rho0_modes: FourierSeries::zero(1),
        t_final: 0.05,
        n_time: 40,
        exact_l: vec![4, 6, 8],
        kmc_l: vec![16, 32, 64],
        n_traj: 20_000,
        seed: 2026,
        grid_m: 256,
        state_cap: crate::sector::DEFAULT_STATE_CAP,
        ode_rtol: 1e-9,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltedRow {
    pub l: usize,
    pub engine: String,
    pub action_rescaled: f64,
    pub stderr: f64,
    pub macro_target: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendSummary {
    pub strictly_decreasing: bool,
    pub loglog_slope: f64,
    pub passes: bool,
}

/// Strict decrease, or a log-log slope below -0.3, counts as convergence.
pub fn trend(l: &[f64], gap: &[f64]) -> TrendSummary {
    let strictly = gap.windows(2).all(|w| w[1] < w[0]);
    let xs: Vec<f64> = l.iter().map(|&x| x.ln()).collect();
    let ys: Vec<f64> = gap.iter().map(|&g| g.abs().max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    TrendSummary {
        strictly_decreasing: strictly,
        loglog_slope: slope,
        passes: strictly || slope < -0.3,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltedLimitReport {
    pub rows: Vec<TiltedRow>,
    pub macro_target: f64,
    pub macro_target_dual_form: f64,
    pub trend: TrendSummary,
    pub final_relative_gap: f64,
}

/// Macroscopic side of a scenario: the tilted hydrodynamic solution and
/// the limiting action target.
pub struct MacroSide {
    pub series: DensitySeries,
    pub target: f64,
    pub target_dual: f64,
    pub breakdown: MacroActionBreakdown,
}

pub fn macro_side(sc: &Scenario) -> Result<MacroSide> {
    let scal = Scalars::new(&sc.model);
    let grid = Grid::new(vec![sc.grid_m])?;
    let rho0: Vec<f64> = (0..sc.grid_m).map(|c| sc.rho0(&grid.center(c))).collect();
    let series = solve_pde(&grid, &scal, &sc.pot, &rho0, &sc.times(), sc.ode_rtol)?;
    let target = macro_action::tilt_action_target(&series, &scal, &sc.pot)?;
    let v_static = sc.pot.v.clone();
    let breakdown = macro_action::macro_action(
        &series,
        &scal,
        &sc.reference(),
        &|u| v_static.eval(u),
        sc.alpha(),
    )?;
    Ok(MacroSide {
        series,
        target,
        target_dual: breakdown.quarter_norm_form,
        breakdown,
    })
}

/// Exact-engine action on one lattice size, canonically prepared.
pub fn exact_action(sc: &Scenario, l: usize) -> Result<(ActionBreakdown, ConfigSector)> {
    let scal = Scalars::new(&sc.model);
    let torus = Torus::new(l, sc.d);
    let n_target = particle_target(sc, &torus);
    let sector = ConfigSector::enumerate(&sc.model, torus, n_target, sc.state_cap)?;
    let engine = MasterEngine::new(&sector, &sc.pot)?;
    let mu0 = canonical_initial(sc, &sector, &scal)?;
    let path = engine.evolve(&mu0, &sc.times(), sc.ode_rtol)?;
    let reference = sc.reference();
    let b = micro_action(&engine, &reference, &sc.model, &scal, sc.alpha(), &path)?;
    Ok((b, sector))
}

fn particle_target(sc: &Scenario, torus: &Torus) -> u32 {
    let mut mass = 0.0;
    for i in 0..torus.n_sites() {
        mass += sc.rho0(&torus.point(i));
    }
    mass.round() as u32
}

/// Product local-Gibbs law at the initial profile, conditioned on the sector.
fn canonical_initial(sc: &Scenario, sector: &ConfigSector, scal: &Scalars) -> Result<Vec<f64>> {
    let torus = &sector.torus;
    let theta: Vec<f64> = (0..torus.n_sites())
        .map(|i| scal.f_prime(sc.rho0(&torus.point(i))))
        .collect::<Result<_>>()?;
    let mut logs: Vec<f64> = Vec::with_capacity(sector.n_states());
    let mut log_max = f64::NEG_INFINITY;
    for cfg in &sector.configs {
        let lw: f64 = cfg
            .iter()
            .enumerate()
            .map(|(i, &n)| theta[i] * n as f64 + sc.model.log_nu(n as u32))
            .sum();
        log_max = log_max.max(lw);
        logs.push(lw);
    }
    let mut mu: Vec<f64> = logs.iter().map(|&l| (l - log_max).exp()).collect();
    let z: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= z);
    Ok(mu)
}

/// KMC Girsanov estimate of the rescaled action on one lattice size.
pub fn kmc_action(sc: &Scenario, l: usize) -> Result<kmc::EnsembleStats> {
    let scal = Scalars::new(&sc.model);
    let torus = Torus::new(l, sc.d);
    let n_target = particle_target(sc, &torus);
    kmc::action_estimate(
        &sc.model,
        &scal,
        &torus,
        &sc.pot,
        &|u| sc.rho0(u),
        f64::INFINITY,
        Some(n_target),
        sc.t_final,
        sc.n_traj,
        sc.seed,
    )
}

pub fn run_tilted_limit(sc: &Scenario) -> Result<TiltedLimitReport> {
    let mac = macro_side(sc)?;
    let mut rows = Vec::new();
    for &l in &sc.exact_l {
        let vol = (l as f64).powi(sc.d as i32);
        let (b, _) = exact_action(sc, l)?;
        let rescaled = b.total / vol;
        rows.push(TiltedRow {
            l,
            engine: "exact".into(),
            action_rescaled: rescaled,
            stderr: 0.0,
            macro_target: mac.target,
            gap: (rescaled - mac.target).abs(),
        });
    }
    for &l in &sc.kmc_l {
        let vol = (l as f64).powi(sc.d as i32);
        let stats = kmc_action(sc, l)?;
        let rescaled = stats.mean / vol;
        rows.push(TiltedRow {
            l,
            engine: "kmc".into(),
            action_rescaled: rescaled,
            stderr: stats.std_error / vol,
            macro_target: mac.target,
            gap: (rescaled - mac.target).abs(),
        });
    }
    let ls: Vec<f64> = rows.iter().map(|r| r.l as f64).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let trend = trend(&ls, &gaps);
    let final_relative_gap = rows.last().map_or(f64::NAN, |r| r.gap / mac.target.abs());
    Ok(TiltedLimitReport {
        rows,
        macro_target: mac.target,
        macro_target_dual_form: mac.target_dual,
        trend,
        final_relative_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundRow {
    pub l: usize,
    pub engine: String,
    pub quantity: String,
    pub micro: f64,
    pub stderr: f64,
    pub macro_value: f64,
    /// micro - (macro - 3 sigma - scheme tolerance); nonnegative = bound holds.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub rows: Vec<LowerBoundRow>,
    pub violations: usize,
    /// Slack allowed for discretisation of the macroscopic values.
    pub scheme_tolerance: f64,
}

/// Verifies the three term-by-term lower bounds (free energy, Psi, Psi*)
/// on the exact rows and the total-action bound on every row.
pub fn run_lower_bounds(sc: &Scenario, scheme_tolerance: f64) -> Result<LowerBoundReport> {
    let mac = macro_side(sc)?;
    let scal = Scalars::new(&sc.model);
    // macroscopic reference values
    let e = mac.breakdown.e;
    let e_star = mac.breakdown.e_star;
    let fe_final = mac.breakdown.free_energy_final;
    let mut rows: Vec<LowerBoundRow> = Vec::new();
    for &l in &sc.exact_l {
        let vol = (l as f64).powi(sc.d as i32);
        let (b, sector) = exact_action(sc, l)?;
        // free energy at the final time against the static reference
        let engine = MasterEngine::new(&sector, &sc.pot)?;
        let mu0 = canonical_initial(sc, &sector, &scal)?;
        let path = engine.evolve(&mu0, &sc.times(), sc.ode_rtol)?;
        let reference = sc.reference();
        let fe_t = micro_free_energy(
            &sector,
            &sc.model,
            &scal,
            &reference,
            sc.t_final,
            sc.alpha(),
            path.states.last().unwrap(),
        )?;
        // L^{-d} int Psi dt converges to (1/2) int ||rho'||^2 dt = e; the
        // extra 1/2 of the action decomposition belongs to the total only
        for (name, micro, macro_value) in [
            ("psi_integral", b.psi_integral / vol, e),
            ("psi_star_integral", b.psi_star_integral / vol, e_star),
            ("free_energy_final", fe_t.raw / vol, fe_final),
            ("action_total", b.total / vol, mac.breakdown.total),
        ] {
            rows.push(LowerBoundRow {
                l,
                engine: "exact".into(),
                quantity: name.into(),
                micro,
                stderr: 0.0,
                macro_value,
                margin: micro - (macro_value - scheme_tolerance),
            });
        }
    }
    for &l in &sc.kmc_l {
        let vol = (l as f64).powi(sc.d as i32);
        let stats = kmc_action(sc, l)?;
        let micro = stats.mean / vol;
        let sigma = stats.std_error / vol;
        rows.push(LowerBoundRow {
            l,
            engine: "kmc".into(),
            quantity: "action_total".into(),
            micro,
            stderr: sigma,
            macro_value: mac.breakdown.total,
            margin: micro - (mac.breakdown.total - 3.0 * sigma - scheme_tolerance),
        });
    }
    let violations = rows.iter().filter(|r| r.margin < 0.0).count();
    Ok(LowerBoundReport {
        rows,
        violations,
        scheme_tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalLimitRow {
    pub l: usize,
    pub fe_gap: f64,
    pub psi_gap: f64,
    pub psi_star_gap: f64,
    pub action_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalLimitReport {
    pub rows: Vec<FinalLimitRow>,
    pub fe_trend: TrendSummary,
    pub psi_trend: TrendSummary,
    pub psi_star_trend: TrendSummary,
    /// Macroscopic chain-rule residual along the limit path.
    pub macro_chain_residual: f64,
}

/// Two-sided convergence of each decomposition term on the exact rows; the
/// three gaps must shrink together exactly when the macroscopic chain rule
/// holds, which it does for the smooth desk-scale scenarios.
pub fn run_final_convergence(sc: &Scenario) -> Result<FinalLimitReport> {
    let mac = macro_side(sc)?;
    let scal = Scalars::new(&sc.model);
    let reference = sc.reference();
    let mut rows = Vec::new();
    for &l in &sc.exact_l {
        let vol = (l as f64).powi(sc.d as i32);
        let torus = Torus::new(l, sc.d);
        let n_target = particle_target(sc, &torus);
        let sector = ConfigSector::enumerate(&sc.model, torus, n_target, sc.state_cap)?;
        let engine = MasterEngine::new(&sector, &sc.pot)?;
        let mu0 = canonical_initial(sc, &sector, &scal)?;
        let path = engine.evolve(&mu0, &sc.times(), sc.ode_rtol)?;
        let b = micro_action(&engine, &reference, &sc.model, &scal, sc.alpha(), &path)?;
        let fe_t = micro_free_energy(
            &sector,
            &sc.model,
            &scal,
            &reference,
            sc.t_final,
            sc.alpha(),
            path.states.last().unwrap(),
        )?;
        rows.push(FinalLimitRow {
            l,
            fe_gap: (fe_t.raw / vol - mac.breakdown.free_energy_final).abs(),
            psi_gap: (b.psi_integral / vol - mac.breakdown.e).abs(),
            psi_star_gap: (b.psi_star_integral / vol - mac.breakdown.e_star).abs(),
            action_gap: (b.total / vol - mac.breakdown.total).abs(),
        });
    }
    let ls: Vec<f64> = rows.iter().map(|r| r.l as f64).collect();
    Ok(FinalLimitReport {
        fe_trend: trend(&ls, &rows.iter().map(|r| r.fe_gap).collect::<Vec<_>>()),
        psi_trend: trend(&ls, &rows.iter().map(|r| r.psi_gap).collect::<Vec<_>>()),
        psi_star_trend: trend(
            &ls,
            &rows.iter().map(|r| r.psi_star_gap).collect::<Vec<_>>(),
        ),
        macro_chain_residual: mac.breakdown.chain_rule_residual,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalEqRow {
    pub l: usize,
    pub eps: f64,
    pub chi_defect: f64,
    pub chi_stderr: f64,
    pub phi_defect: f64,
    pub phi_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalEqReport {
    pub rows: Vec<LocalEqRow>,
    pub chi_trend_per_eps: Vec<(f64, TrendSummary)>,
    pub phi_trend_per_eps: Vec<(f64, TrendSummary)>,
}

/// Local-equilibrium defects of the stationary product ensemble at density
/// alpha, estimated over `n_samples` sampled configurations per lattice.
pub fn run_local_equilibrium(
    model: &LatticeModel,
    alpha: f64,
    l_list: &[usize],
    eps_list: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<LocalEqReport> {
    let scal = Scalars::new(model);
    let mut rows = Vec::new();
    for &l in l_list {
        let torus = Torus::new(l, 1);
        for &eps in eps_list {
            let vals: Result<Vec<(f64, f64)>> = (0..n_samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = kmc::stream_rng(seed, i);
                    let eta = kmc::sample_initial(
                        model,
                        &scal,
                        &torus,
                        &|_| alpha,
                        f64::INFINITY,
                        &mut rng,
                    )?;
                    let d = localeq::config_defect(&torus, model, &scal, &eta, eps)?;
                    Ok((d.chi, d.phi))
                })
                .collect();
            let vals = vals?;
            let chi_stats = kmc::ensemble_stats(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
            let phi_stats = kmc::ensemble_stats(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
            rows.push(LocalEqRow {
                l,
                eps,
                chi_defect: chi_stats.mean,
                chi_stderr: chi_stats.std_error,
                phi_defect: phi_stats.mean,
                phi_stderr: phi_stats.std_error,
            });
        }
    }
    let mut chi_trends = Vec::new();
    let mut phi_trends = Vec::new();
    for &eps in eps_list {
        let sel: Vec<&LocalEqRow> = rows.iter().filter(|r| r.eps == eps).collect();
        let ls: Vec<f64> = sel.iter().map(|r| r.l as f64).collect();
        chi_trends.push((eps, trend(&ls, &sel.iter().map(|r| r.chi_defect).collect::<Vec<_>>())));
        phi_trends.push((eps, trend(&ls, &sel.iter().map(|r| r.phi_defect).collect::<Vec<_>>())));
    }
    Ok(LocalEqReport {
        rows,
        chi_trend_per_eps: chi_trends,
        phi_trend_per_eps: phi_trends,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckReport {
    pub l: usize,
    pub exact_action: f64,
    pub kmc_mean: f64,
    pub kmc_stderr: f64,
    pub z_score: f64,
}

/// Exact vs Girsanov Monte Carlo on a shared small sector.
pub fn run_cross_check(sc: &Scenario, l: usize) -> Result<CrossCheckReport> {
    let (b, _) = exact_action(sc, l)?;
    let stats = kmc_action(sc, l)?;
    let z = (stats.mean - b.total) / stats.std_error.max(1e-300);
    Ok(CrossCheckReport {
        l,
        exact_action: b.total,
        kmc_mean: stats.mean,
        kmc_stderr: stats.std_error,
        z_score: z,
    })
}
