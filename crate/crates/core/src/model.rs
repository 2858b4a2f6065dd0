//! Lattice gas models: jump-rate factorisation and reference site weights.
//!
//! A model is specified by two single-site rate factors g1, g2 (a particle
//! jumps from i to a neighbour i' at rate g1(eta(i)) g2(eta(i')) times a
//! potential factor), the gradient observable d with
//! g1(a) g2(b) - g1(b) g2(a) = d(a) - d(b), and the reference weights
//! nu(n) on single-site occupancies fixed by detailed balance.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ZrpRate {
    /// g(k) = k: independent random walkers.
    Linear,
    /// Tabulated g(1), g(2), ..., g(K), extended by g(n) = g(K) for n > K
    /// (bounded rates, unbounded occupancy).
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Zero-range process: g1 = g, g2 = 1, d = g, nu(n) = 1 / (g(1)...g(n)).
    Zrp(ZrpRate),
    /// Simple exclusion: g1(n) = 1{n=1}, g2(n) = 1{n=0}, d(n) = n,
    /// nu(0) = nu(1) = 1, at most one particle per site.
    Sep,
}

#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub kind: ModelKind,
    /// Maximum admissible occupancy, `None` when unbounded.
    pub n_max: Option<u32>,
}

impl LatticeModel {
    pub fn sep() -> Self {
        LatticeModel {
            kind: ModelKind::Sep,
            n_max: Some(1),
        }
    }

    pub fn zrp_linear() -> Self {
        LatticeModel {
            kind: ModelKind::Zrp(ZrpRate::Linear),
            n_max: None,
        }
    }

    pub fn zrp_table(g: Vec<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(CoreError::InvalidConfiguration(
                "zero-range rate table must contain g(1)".into(),
            ));
        }
        let mut prev = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            if !(gk > prev) {
                return Err(CoreError::InvalidConfiguration(format!(
                    "zero-range rates must be strictly increasing: g({}) = {gk} after {prev}",
                    k + 1
                )));
            }
            prev = gk;
        }
        Ok(LatticeModel {
            kind: ModelKind::Zrp(ZrpRate::Table(g)),
            n_max: None,
        })
    }

    /// Rate factor of the departure site.
    pub fn g1(&self, n: u32) -> f64 {
        match &self.kind {
            ModelKind::Zrp(g) => zrp_g(g, n),
            ModelKind::Sep => {
                if n == 1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Rate factor of the arrival site.
    pub fn g2(&self, n: u32) -> f64 {
        match &self.kind {
            ModelKind::Zrp(_) => 1.0,
            ModelKind::Sep => {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Gradient observable: g1(a)g2(b) - g1(b)g2(a) = d(a) - d(b).
    pub fn dval(&self, n: u32) -> f64 {
        match &self.kind {
            ModelKind::Zrp(g) => zrp_g(g, n),
            ModelKind::Sep => n as f64,
        }
    }

    /// log nu(n) of the (unnormalised) reference single-site weight.
    pub fn log_nu(&self, n: u32) -> f64 {
        match &self.kind {
            ModelKind::Zrp(g) => -(1..=n).map(|k| zrp_g(g, k).ln()).sum::<f64>(),
            ModelKind::Sep => 0.0,
        }
    }

    /// Supremum of chemical potentials with a convergent single-site sum:
    /// ln of the limiting jump rate when the rates are bounded.
    pub fn theta_sup(&self) -> f64 {
        match &self.kind {
            ModelKind::Zrp(ZrpRate::Table(g)) => g.last().unwrap().ln(),
            _ => f64::INFINITY,
        }
    }

    pub fn admissible(&self, n: u32) -> bool {
        self.n_max.map_or(true, |m| n <= m)
    }

    /// Largest increment of g1 over the tabulated/linear range; the rate is
    /// Lipschitz in the occupancy with this constant.
    pub fn g1_max_increment(&self) -> f64 {
        match &self.kind {
            ModelKind::Zrp(ZrpRate::Linear) => 1.0,
            ModelKind::Zrp(ZrpRate::Table(g)) => {
                let mut prev = 0.0;
                let mut best = 0.0f64;
                for &gk in g {
                    best = best.max(gk - prev);
                    prev = gk;
                }
                best
            }
            ModelKind::Sep => 1.0,
        }
    }
}

fn zrp_g(g: &ZrpRate, n: u32) -> f64 {
    match g {
        ZrpRate::Linear => n as f64,
        ZrpRate::Table(t) => {
            if n == 0 {
                0.0
            } else {
                t[(n as usize - 1).min(t.len() - 1)]
            }
        }
    }
}
