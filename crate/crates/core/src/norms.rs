//! Density-weighted H^1 and H^-1 norms on the periodic unit interval.
//!
//! ||g||_{1,w}^2 = int w |g'|^2 and its dual ||theta||_{-1,w}^2, computed
//! by solving -(w g')' = theta on the zero-mean subspace and returning
//! <theta, g>. Derivatives are spectral (the data of interest are smooth),
//! and the variable-coefficient solve is a conjugate-gradient iteration
//! preconditioned with the constant-coefficient spectral inverse.

use crate::error::{CoreError, Result};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub struct SpectralGrid1d {
    pub m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers 2 pi k with FFT ordering.
    k: Vec<f64>,
}

impl SpectralGrid1d {
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 {
            return Err(CoreError::InvalidConfiguration(
                "spectral grid needs at least 8 cells".into(),
            ));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let k: Vec<f64> = (0..m)
            .map(|i| {
                let kk = if i <= m / 2 { i as isize } else { i as isize - m as isize };
                2.0 * PI * kk as f64
            })
            .collect();
        Ok(SpectralGrid1d { m, fwd, inv, k })
    }

    fn fft(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn ifft(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let n = self.m as f64;
        buf.into_iter().map(|c| c.re / n).collect()
    }

    /// Spectral derivative d/du.
    pub fn deriv(&self, f: &[f64]) -> Vec<f64> {
        let mut hat = self.fft(f);
        for (i, h) in hat.iter_mut().enumerate() {
            // the Nyquist mode of a real signal has no well-defined
            // derivative sign; drop it
            let k = if self.m % 2 == 0 && i == self.m / 2 {
                0.0
            } else {
                self.k[i]
            };
            *h = Complex64::new(-k * h.im, k * h.re);
        }
        self.ifft(hat)
    }

    /// Solves -g'' = theta with zero mean (constant coefficient).
    fn poisson(&self, theta: &[f64]) -> Vec<f64> {
        let mut hat = self.fft(theta);
        for (i, h) in hat.iter_mut().enumerate() {
            if i == 0 {
                *h = Complex64::new(0.0, 0.0);
            } else {
                let k2 = self.k[i] * self.k[i];
                *h /= k2;
            }
        }
        self.ifft(hat)
    }
}

pub struct WeightedNormContext<'a> {
    pub grid: &'a SpectralGrid1d,
    pub w: Vec<f64>,
    w_mean: f64,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct DualSolve {
    /// The potential g with -(w g')' = theta, zero mean.
    pub g: Vec<f64>,
    /// ||theta||_{-1,w}^2 = <theta, g> = int w |g'|^2.
    pub norm_sq: f64,
    pub iterations: usize,
}

impl<'a> WeightedNormContext<'a> {
    pub fn new(grid: &'a SpectralGrid1d, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.m {
            return Err(CoreError::InvalidConfiguration(
                "weight length does not match grid".into(),
            ));
        }
        if w.iter().any(|&x| !(x > 0.0)) {
            return Err(CoreError::InvalidConfiguration(
                "weighted norms need a strictly positive weight".into(),
            ));
        }
        let w_mean = w.iter().sum::<f64>() / grid.m as f64;
        Ok(WeightedNormContext {
            grid,
            w,
            w_mean,
            tol: 1e-12,
        })
    }

    /// ||g||_{1,w}^2 = int w |g'|^2 (midpoint rule, spectral derivative).
    pub fn h1_norm_sq(&self, g: &[f64]) -> f64 {
        let dg = self.grid.deriv(g);
        self.integral(&self.w.iter().zip(&dg).map(|(&w, &d)| w * d * d).collect::<Vec<_>>())
    }

    /// Weighted L^2 norm of a vector field v: int w |v|^2.
    pub fn l2_norm_sq(&self, v: &[f64]) -> f64 {
        self.integral(&self.w.iter().zip(v).map(|(&w, &x)| w * x * x).collect::<Vec<_>>())
    }

    fn integral(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / self.grid.m as f64
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        // A g = -(w g')'
        let dg = self.grid.deriv(g);
        let flux: Vec<f64> = self.w.iter().zip(&dg).map(|(&w, &d)| w * d).collect();
        let div = self.grid.deriv(&flux);
        div.into_iter().map(|x| -x).collect()
    }

    /// Solves -(w g')' = theta for zero-mean theta.
    pub fn solve_dual(&self, theta: &[f64]) -> Result<DualSolve> {
        let m = self.grid.m;
        let mean = theta.iter().sum::<f64>() / m as f64;
        let sup = theta.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if mean.abs() > 1e-6 * sup && mean.abs() > 1e-12 {
            return Err(CoreError::InvalidConfiguration(format!(
                "H^-1 norm of a non-zero-mean field (mean {mean:.3e})"
            )));
        }
        // project onto the range of -(w d/du .)': drop the mean and, on an
        // even grid, the Nyquist mode, which the spectral derivative kills
        let mut hat = self.grid.fft(theta);
        hat[0] = Complex64::new(0.0, 0.0);
        if m % 2 == 0 {
            hat[m / 2] = Complex64::new(0.0, 0.0);
        }
        let rhs = self.grid.ifft(hat);
        let norm_rhs = rhs.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if norm_rhs == 0.0 {
            return Ok(DualSolve {
                g: vec![0.0; m],
                norm_sq: 0.0,
                iterations: 0,
            });
        }
        // preconditioned CG with M^{-1} = (-w_mean Lap)^{-1}
        let mut g = vec![0.0; m];
        let mut r = rhs.clone();
        let precond = |r: &[f64]| -> Vec<f64> {
            let mut z = self.grid.poisson(r);
            z.iter_mut().for_each(|x| *x /= self.w_mean);
            z
        };
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut iterations = 0;
        for _ in 0..10 * m {
            iterations += 1;
            let ap = self.apply(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap.abs() < 1e-300 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..m {
                g[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let res = r.iter().map(|&x| x * x).sum::<f64>().sqrt();
            if res <= self.tol * norm_rhs {
                let mean_g = g.iter().sum::<f64>() / m as f64;
                g.iter_mut().for_each(|x| *x -= mean_g);
                let norm_sq = self.integral(
                    &theta.iter().zip(&g).map(|(&t, &gi)| t * gi).collect::<Vec<_>>(),
                );
                return Ok(DualSolve {
                    g,
                    norm_sq,
                    iterations,
                });
            }
            z = precond(&r);
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
        }
        let res = r.iter().map(|&x| x * x).sum::<f64>().sqrt();
        Err(CoreError::Elliptic(res / norm_rhs))
    }

    /// ||theta||_{-1,w}^2.
    pub fn h_minus1_norm_sq(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.solve_dual(theta)?.norm_sq)
    }

    /// H^-1 inner product <a, b>_{-1,w} = <a, g_b>.
    pub fn h_minus1_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let gb = self.solve_dual(b)?.g;
        Ok(self.integral(&a.iter().zip(&gb).map(|(&x, &g)| x * g).collect::<Vec<_>>()))
    }
}
