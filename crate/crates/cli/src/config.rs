//! Run configuration: JSON file schema, presets, and resolution into a
//! `lab::Scenario`. Every field of the file is optional and overlays the
//! chosen preset, so small experiments need tiny configs.

use hydroaction_core::lab::Scenario;
use hydroaction_core::model::LatticeModel;
use hydroaction_core::potential::{Envelope, FourierSeries, Potential};
use hydroaction_core::sector::DEFAULT_STATE_CAP;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    Sep,
    ZrpLinear,
    ZrpTable(Vec<f64>),
}

impl ModelSpec {
    pub fn build(&self) -> Result<LatticeModel, String> {
        match self {
            ModelSpec::Sep => Ok(LatticeModel::sep()),
            ModelSpec::ZrpLinear => Ok(LatticeModel::zrp_linear()),
            ModelSpec::ZrpTable(g) => LatticeModel::zrp_table(g.clone()).map_err(|e| e.to_string()),
        }
    }
}

/// On-disk schema: unknown keys are rejected, missing keys fall back to
/// the preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: Option<ModelSpec>,
    pub d: Option<usize>,
    pub potential: Option<FourierSeries>,
    pub tilt: Option<FourierSeries>,
    pub envelope: Option<Envelope>,
    pub rho0_mean: Option<f64>,
    pub rho0_modes: Option<FourierSeries>,
    pub t_final: Option<f64>,
    pub n_time: Option<usize>,
    pub lattice_l: Option<usize>,
    pub exact_l: Option<Vec<usize>>,
    pub kmc_l: Option<Vec<usize>>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub grid_m: Option<usize>,
    pub state_cap: Option<usize>,
    pub ode_rtol: Option<f64>,
}

/// Fully resolved configuration, echoed to `resolved_config.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub preset: String,
    pub model: ModelSpec,
    pub d: usize,
    pub potential: FourierSeries,
    pub tilt: FourierSeries,
    pub envelope: Envelope,
    pub rho0_mean: f64,
    pub rho0_modes: FourierSeries,
    pub t_final: f64,
    pub n_time: usize,
    /// Lattice size for the single-lattice commands (simulate, exact).
    pub lattice_l: usize,
    pub exact_l: Vec<usize>,
    pub kmc_l: Vec<usize>,
    pub n_traj: usize,
    pub seed: u64,
    pub grid_m: usize,
    pub state_cap: usize,
    pub ode_rtol: f64,
    pub threads: Option<usize>,
}

pub fn preset(name: &str) -> Result<Resolved, String> {
    match name {
        "zrp-linear" => Ok(Resolved {
            preset: name.into(),
            model: ModelSpec::ZrpLinear,
            d: 1,
            potential: FourierSeries::zero(1),
            tilt: FourierSeries::cosine(1, 0, 1, 0.2),
            envelope: Envelope::Constant { value: 1.0 },
            rho0_mean: 1.0,
            rho0_modes: FourierSeries::zero(1),
            t_final: 0.05,
            n_time: 40,
            lattice_l: 6,
            exact_l: vec![4, 6, 8],
            kmc_l: vec![16, 32, 64],
            n_traj: 20_000,
            seed: 2026,
            grid_m: 256,
            state_cap: DEFAULT_STATE_CAP,
            ode_rtol: 1e-9,
            threads: None,
        }),
        "sep" => Ok(Resolved {
            preset: name.into(),
            model: ModelSpec::Sep,
            d: 1,
            potential: FourierSeries::zero(1),
            tilt: FourierSeries::cosine(1, 0, 1, 0.2),
            envelope: Envelope::Constant { value: 1.0 },
            rho0_mean: 0.5,
            rho0_modes: FourierSeries::zero(1),
            t_final: 0.05,
            n_time: 40,
            lattice_l: 6,
            exact_l: vec![4, 6, 8],
            kmc_l: vec![16, 32, 64],
            n_traj: 20_000,
            seed: 2026,
            grid_m: 256,
            state_cap: DEFAULT_STATE_CAP,
            ode_rtol: 1e-9,
            threads: None,
        }),
        other => Err(format!("unknown preset '{other}' (expected sep or zrp-linear)")),
    }
}

impl Resolved {
    pub fn overlay(mut self, f: ConfigFile) -> Self {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { self.$field = v; } )* };
        }
        take!(
            model, d, potential, tilt, envelope, rho0_mean, rho0_modes, t_final, n_time,
            lattice_l, exact_l, kmc_l, n_traj, seed, grid_m, state_cap, ode_rtol
        );
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let model = self.model.build()?;
        if self.d == 0 || self.d > 2 {
            return Err(format!("d = {} is out of range (1 or 2)", self.d));
        }
        for series in [&self.potential, &self.tilt, &self.rho0_modes] {
            if series.d != self.d {
                return Err("potential / tilt / rho0 modes must match the dimension d".into());
            }
        }
        if !(self.t_final > 0.0) {
            return Err(format!("t_final = {} must be positive", self.t_final));
        }
        if self.n_time < 4 || self.n_time % 4 != 0 {
            return Err(format!(
                "n_time = {} must be a positive multiple of 4",
                self.n_time
            ));
        }
        let lo = self.rho0_mean - self.rho0_modes.sup_bound();
        let hi = self.rho0_mean + self.rho0_modes.sup_bound();
        if !(lo > 0.0) {
            return Err(format!("initial density reaches {lo} <= 0"));
        }
        if let Some(cap) = model.n_max {
            if !(hi < cap as f64) {
                return Err(format!(
                    "initial density reaches {hi}, at or above the occupancy cap {cap}"
                ));
            }
        }
        for &l in self.exact_l.iter().chain(&self.kmc_l).chain([&self.lattice_l]) {
            if l < 2 {
                return Err(format!("lattice size {l} is too small (need L >= 2)"));
            }
        }
        if self.n_traj == 0 {
            return Err("n_traj must be positive".into());
        }
        if self.grid_m < 8 {
            return Err(format!("grid_m = {} is too small (need >= 8)", self.grid_m));
        }
        if !(self.ode_rtol > 0.0 && self.ode_rtol < 1e-2) {
            return Err(format!("ode_rtol = {} is out of range", self.ode_rtol));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, String> {
        self.validate()?;
        Ok(Scenario {
            model: self.model.build()?,
            d: self.d,
            pot: Potential {
                v: self.potential.clone(),
                tilt: self.tilt.clone(),
                envelope: self.envelope.clone(),
            },
            rho0_mean: self.rho0_mean,
            rho0_modes: self.rho0_modes.clone(),
            t_final: self.t_final,
            n_time: self.n_time,
            exact_l: self.exact_l.clone(),
            kmc_l: self.kmc_l.clone(),
            n_traj: self.n_traj,
            seed: self.seed,
            grid_m: self.grid_m,
            state_cap: self.state_cap,
            ode_rtol: self.ode_rtol,
        })
    }
}
