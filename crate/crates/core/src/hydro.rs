//! Finite-volume solver for the macroscopic equation
//!
//!   d rho / dt = Laplacian phi(rho) + div( chi(rho) grad V_t ),
//!
//! on the unit torus with cell-centred tensor grids (d = 1 or 2). Fluxes
//! are conservative, so the total mass is preserved to roundoff.

use crate::error::{CoreError, Result};
use crate::ode;
use crate::potential::Potential;
use crate::quad;
use crate::scalars::Scalars;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Cells per axis.
    pub dims: Vec<usize>,
}

impl Grid {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 || dims.iter().any(|&m| m < 4) {
            return Err(CoreError::InvalidConfiguration(
                "grid must be 1- or 2-dimensional with at least 4 cells per axis".into(),
            ));
        }
        Ok(Grid { dims })
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn h(&self, axis: usize) -> f64 {
        1.0 / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dims.iter().map(|&m| 1.0 / m as f64).product()
    }

    pub fn coords(&self, cell: usize) -> Vec<usize> {
        let mut c = vec![0; self.d()];
        let mut s = cell;
        for k in 0..self.d() {
            c[k] = s % self.dims[k];
            s /= self.dims[k];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let mut s = 0;
        for k in (0..self.d()).rev() {
            s = s * self.dims[k] + coords[k] % self.dims[k];
        }
        s
    }

    pub fn neighbor(&self, cell: usize, axis: usize, sign: i8) -> usize {
        let stride: usize = self.dims[..axis].iter().product();
        let m = self.dims[axis];
        let along = (cell / stride) % m;
        let base = cell - along * stride;
        let next = if sign > 0 {
            (along + 1) % m
        } else {
            (along + m - 1) % m
        };
        base + next * stride
    }

    /// Centre of a cell.
    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.coords(cell)
            .iter()
            .enumerate()
            .map(|(k, &c)| (c as f64 + 0.5) * self.h(k))
            .collect()
    }

    /// Face between `cell` and its +axis neighbour.
    pub fn face(&self, cell: usize, axis: usize) -> Vec<f64> {
        let mut u = self.center(cell);
        u[axis] += 0.5 * self.h(axis);
        if u[axis] >= 1.0 {
            u[axis] -= 1.0;
        }
        u
    }
}

/// Lookup tables for phi and chi, linearly interpolated on a dense density
/// grid; built once per solve so the right-hand side stays cheap.
pub struct TransportLut {
    lo: f64,
    step: f64,
    phi: Vec<f64>,
    chi: Vec<f64>,
}

impl TransportLut {
    pub fn build(scalars: &Scalars, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let max = scalars.max_density();
        let lo = lo.max(0.0);
        let hi = if max.is_finite() { hi.min(max) } else { hi };
        let step = (hi - lo) / n as f64;
        let mut phi = Vec::with_capacity(n + 1);
        let mut chi = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let a = lo + step * i as f64;
            let a_in = if a <= 0.0 {
                0.0
            } else if max.is_finite() && a >= max {
                max
            } else {
                a
            };
            let (p, c) = scalars.phi_chi(a_in)?;
            phi.push(p);
            chi.push(c);
        }
        Ok(TransportLut { lo, step, phi, chi })
    }

    #[inline]
    fn eval(&self, table: &[f64], a: f64) -> f64 {
        let x = (a - self.lo) / self.step;
        let i = (x.floor() as isize).clamp(0, table.len() as isize - 2) as usize;
        // extrapolate linearly past the table ends: saturating would zero
        // the diffusivity there and destabilise drift-dominated solves
        let frac = x - i as f64;
        table[i] * (1.0 - frac) + table[i + 1] * frac
    }

    #[inline]
    pub fn phi(&self, a: f64) -> f64 {
        self.eval(&self.phi, a)
    }

    #[inline]
    pub fn chi(&self, a: f64) -> f64 {
        self.eval(&self.chi, a)
    }
}

/// Conservative finite-volume right-hand side at time `t`. Face diffusion
/// uses the exact flux difference of phi; the drift uses chi at the
/// arithmetic mean of the adjacent cell densities and the analytic
/// gradient of the potential at the face. Densities outside the model
/// range are clamped for the coefficient evaluation; `clamped` counts how
/// often that happened.
pub fn hydro_rhs(
    grid: &Grid,
    lut: &TransportLut,
    pot: &Potential,
    max_density: f64,
    t: f64,
    rho: &[f64],
    out: &mut [f64],
    clamped: &mut usize,
) {
    const DELTA: f64 = 1e-9;
    let n = grid.n_cells();
    out.iter_mut().for_each(|v| *v = 0.0);
    for axis in 0..grid.d() {
        let h = grid.h(axis);
        for cell in 0..n {
            let nb = grid.neighbor(cell, axis, 1);
            let (mut a, mut b) = (rho[cell], rho[nb]);
            if a < 0.0 || b < 0.0 || a > max_density || b > max_density {
                *clamped += 1;
                a = a.clamp(DELTA, max_density - DELTA);
                b = b.clamp(DELTA, max_density - DELTA);
            }
            let face = grid.face(cell, axis);
            let gradv = pot.grad(t, &face)[axis];
            // flux through the +face of `cell`
            let flux = -(lut.phi(b) - lut.phi(a)) / h - lut.chi(0.5 * (a + b)) * gradv;
            out[cell] -= flux / h;
            out[nb] += flux / h;
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensitySeries {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    /// Number of face evaluations that needed density clamping.
    pub clamped: usize,
}

impl DensitySeries {
    pub fn mass(&self, k: usize) -> f64 {
        self.fields[k].iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Solves the equation from `rho0` with output at `times`.
pub fn solve_pde(
    grid: &Grid,
    scalars: &Scalars,
    pot: &Potential,
    rho0: &[f64],
    times: &[f64],
    rtol: f64,
) -> Result<DensitySeries> {
    if rho0.len() != grid.n_cells() {
        return Err(CoreError::InvalidConfiguration(format!(
            "initial field has {} cells for a {:?} grid",
            rho0.len(),
            grid.dims
        )));
    }
    let max_density = scalars.max_density();
    let span = rho0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    // pad the table range: pure diffusion stays within the initial range,
    // but the drift can concentrate density like exp(-V - s H), so widen
    // by the oscillation bound of the full potential over the horizon
    let t_final = times.last().copied().unwrap_or(0.0);
    let osc = 2.0 * pot.v.sup_bound()
        + 2.0 * pot.envelope.sup_bound(t_final) * pot.tilt.sup_bound();
    let factor = osc.exp();
    let pad = 0.5 * (span.1 - span.0) + 0.1;
    let lut = TransportLut::build(
        scalars,
        (span.0 / factor - pad).max(1e-9),
        if max_density.is_finite() {
            (span.1 * factor + pad).min(max_density - 1e-9)
        } else {
            span.1 * factor + pad
        },
        8192,
    )?;
    let clamped = std::cell::Cell::new(0usize);
    let states = ode::integrate(
        |t, y, dy| {
            let mut c = clamped.get();
            hydro_rhs(grid, &lut, pot, max_density, t, y, dy, &mut c);
            clamped.set(c);
        },
        rho0,
        times,
        rtol,
        1e-12,
    )?;
    let mass0: f64 = rho0.iter().sum();
    for st in &states {
        let m: f64 = st.iter().sum();
        if (m - mass0).abs() > 1e-9 * mass0.abs().max(1.0) {
            return Err(CoreError::MassMismatch(m, mass0));
        }
    }
    Ok(DensitySeries {
        grid: grid.clone(),
        times: times.to_vec(),
        fields: states,
        clamped: clamped.get(),
    })
}

/// Residual of the weak formulation against a space-time test function
/// G_t(u) = g(u) s(t):
///
///   int rho_T G_T - int rho_0 G_0 - int int rho dG/dt
///     = int int phi(rho) Lap G - int int chi(rho) grad V . grad G.
///
/// Spatial integrals use the midpoint rule (spectrally accurate for the
/// smooth test data), time integrals composite Simpson on the series grid.
pub fn weak_residual(
    series: &DensitySeries,
    scalars: &Scalars,
    pot: &Potential,
    test: &Potential,
) -> Result<f64> {
    let grid = &series.grid;
    let n = grid.n_cells();
    let vol = grid.cell_volume();
    let nt = series.times.len();
    if nt < 3 || nt % 2 == 0 {
        return Err(CoreError::Numerics(
            "weak residual needs a uniform odd-length time grid".into(),
        ));
    }
    let h_t = series.times[1] - series.times[0];
    let centers: Vec<Vec<f64>> = (0..n).map(|c| grid.center(c)).collect();

    let space_int = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..n).map(f).sum::<f64>() * vol
    };

    let mut lhs_t = Vec::with_capacity(nt);
    let mut rhs_t = Vec::with_capacity(nt);
    for (k, &t) in series.times.iter().enumerate() {
        let rho = &series.fields[k];
        lhs_t.push(space_int(&|c| rho[c] * test.dt(t, &centers[c])));
        let mut v = 0.0;
        for c in 0..n {
            let u = &centers[c];
            let (p, chi) = scalars.phi_chi(clamp_density(scalars, rho[c]))?;
            let lap_g = test.envelope.eval(t) * test.tilt.laplacian(u) + test.v.laplacian(u);
            let grad_g: Vec<f64> = {
                let s = test.envelope.eval(t);
                test.v
                    .grad(u)
                    .iter()
                    .zip(test.tilt.grad(u))
                    .map(|(a, b)| a + s * b)
                    .collect()
            };
            let grad_v = pot.grad(t, u);
            let dot: f64 = grad_v.iter().zip(&grad_g).map(|(a, b)| a * b).sum();
            v += p * lap_g - chi * dot;
        }
        rhs_t.push(v * vol);
    }
    let boundary = {
        let t0 = series.times[0];
        let t1 = series.times[nt - 1];
        space_int(&|c| series.fields[nt - 1][c] * test.eval(t1, &centers[c]))
            - space_int(&|c| series.fields[0][c] * test.eval(t0, &centers[c]))
    };
    let lhs = boundary - quad::simpson(&lhs_t, h_t);
    let rhs = quad::simpson(&rhs_t, h_t);
    Ok(lhs - rhs)
}

fn clamp_density(scalars: &Scalars, a: f64) -> f64 {
    let hi = scalars.max_density();
    if hi.is_finite() {
        a.clamp(0.0, hi)
    } else {
        a.max(0.0)
    }
}

/// Macroscopic free energy relative to the equilibrium profile of
/// (alpha, V):  int [ f(rho) - f(rbar) - f'(rbar)(rho - rbar) ] du >= 0.
pub fn macro_free_energy(
    grid: &Grid,
    scalars: &Scalars,
    v: &dyn Fn(&[f64]) -> f64,
    alpha: f64,
    rho: &[f64],
) -> Result<f64> {
    let vol = grid.cell_volume();
    let fpa = scalars.f_prime(alpha)?;
    let mut acc = 0.0;
    for c in 0..grid.n_cells() {
        let u = grid.center(c);
        let theta_bar = fpa - v(&u);
        let rbar = scalars.moments(theta_bar)?.mean;
        let a = rho[c];
        let f_rho = if a <= 0.0 {
            0.0 // f(0) = 0 by normalisation, continuous extension
        } else {
            scalars.free_energy(clamp_interior(scalars, a))?
        };
        let f_bar = scalars.free_energy(rbar)?;
        acc += f_rho - f_bar - theta_bar * (a - rbar);
    }
    Ok(acc * vol)
}

/// Variational form of the same functional evaluated at the maximising
/// perturbation h = f'(rho) - f'(rbar):
/// <rho, h> - int log( Z(f'(alpha) + h - V) / Z(f'(alpha) - V) ) du.
pub fn macro_free_energy_variational(
    grid: &Grid,
    scalars: &Scalars,
    v: &dyn Fn(&[f64]) -> f64,
    alpha: f64,
    rho: &[f64],
) -> Result<f64> {
    let vol = grid.cell_volume();
    let fpa = scalars.f_prime(alpha)?;
    let mut acc = 0.0;
    for c in 0..grid.n_cells() {
        let u = grid.center(c);
        let theta_bar = fpa - v(&u);
        let h = scalars.f_prime(clamp_interior(scalars, rho[c]))? - theta_bar;
        let log_z_pert = scalars.moments(theta_bar + h)?.log_z;
        let log_z_bar = scalars.moments(theta_bar)?.log_z;
        acc += rho[c] * h - (log_z_pert - log_z_bar);
    }
    Ok(acc * vol)
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
