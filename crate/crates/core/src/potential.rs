//! Smooth periodic potentials: truncated Fourier series in space, optionally
//! modulated in time by a smooth envelope. A `Potential` carries a static
//! part V and a tilt H with V_t(u) = V(u) + s(t) H(u).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FourierMode {
    /// Integer wave vector; length = spatial dimension.
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FourierSeries {
    pub d: usize,
    pub modes: Vec<FourierMode>,
}

impl FourierSeries {
    pub fn zero(d: usize) -> Self {
        FourierSeries { d, modes: vec![] }
    }

    pub fn cosine(d: usize, axis: usize, k: i32, amp: f64) -> Self {
        let mut kv = vec![0i32; d];
        kv[axis] = k;
        FourierSeries {
            d,
            modes: vec![FourierMode {
                k: kv,
                cos: amp,
                sin: 0.0,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.cos == 0.0 && m.sin == 0.0)
    }

    fn phase(m: &FourierMode, u: &[f64]) -> f64 {
        2.0 * PI * m.k.iter().zip(u).map(|(&k, &x)| k as f64 * x).sum::<f64>()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let p = Self::phase(m, u);
                m.cos * p.cos() + m.sin * p.sin()
            })
            .sum()
    }

    pub fn grad(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for m in &self.modes {
            let p = Self::phase(m, u);
            let dp = -m.cos * p.sin() + m.sin * p.cos();
            for (gk, &kk) in g.iter_mut().zip(&m.k) {
                *gk += 2.0 * PI * kk as f64 * dp;
            }
        }
        g
    }

    pub fn laplacian(&self, u: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let k2: f64 = m.k.iter().map(|&k| (k as f64).powi(2)).sum();
                let p = Self::phase(m, u);
                -(2.0 * PI).powi(2) * k2 * (m.cos * p.cos() + m.sin * p.sin())
            })
            .sum()
    }

    /// Upper bound on sup |V|.
    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.cos.hypot(m.sin)).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Constant { value: f64 },
    Cosine { amp: f64, omega: f64, phase: f64 },
    /// s(t) = sum_k coeffs[k] t^k.
    Poly { coeffs: Vec<f64> },
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { value } => *value,
            Envelope::Cosine { amp, omega, phase } => amp * (omega * t + phase).cos(),
            Envelope::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { .. } => 0.0,
            Envelope::Cosine { amp, omega, phase } => -amp * omega * (omega * t + phase).sin(),
            Envelope::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * t + k as f64 * c),
        }
    }

    /// Rigorous bound on sup_{[0,T]} |s(t)|.
    pub fn sup_bound(&self, t_final: f64) -> f64 {
        match self {
            Envelope::Constant { value } => value.abs(),
            Envelope::Cosine { amp, .. } => amp.abs(),
            Envelope::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c.abs() * t_final.powi(k as i32))
                .sum(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Envelope::Constant { .. })
            || matches!(self, Envelope::Poly { coeffs } if coeffs.len() <= 1)
    }
}

/// Time-dependent potential V_t(u) = v(u) + s(t) h(u).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Potential {
    pub v: FourierSeries,
    pub tilt: FourierSeries,
    pub envelope: Envelope,
}

impl Potential {
    pub fn static_only(v: FourierSeries) -> Self {
        let d = v.d;
        Potential {
            v,
            tilt: FourierSeries::zero(d),
            envelope: Envelope::Constant { value: 1.0 },
        }
    }

    pub fn d(&self) -> usize {
        self.v.d
    }

    pub fn eval(&self, t: f64, u: &[f64]) -> f64 {
        self.v.eval(u) + self.envelope.eval(t) * self.tilt.eval(u)
    }

    pub fn dt(&self, t: f64, u: &[f64]) -> f64 {
        self.envelope.deriv(t) * self.tilt.eval(u)
    }

    pub fn grad(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let s = self.envelope.eval(t);
        let mut g = self.v.grad(u);
        for (gi, hi) in g.iter_mut().zip(self.tilt.grad(u)) {
            *gi += s * hi;
        }
        g
    }

    pub fn is_static(&self) -> bool {
        self.tilt.is_zero() || self.envelope.is_constant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gradient_matches_difference_quotient() {
        let f = FourierSeries {
            d: 2,
            modes: vec![
                FourierMode {
                    k: vec![1, 0],
                    cos: 0.3,
                    sin: 0.1,
                },
                FourierMode {
                    k: vec![2, -1],
                    cos: -0.2,
                    sin: 0.4,
                },
            ],
        };
        let u = [0.31, 0.77];
        let h = 1e-6;
        let g = f.grad(&u);
        for ax in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[ax] += h;
            dn[ax] -= h;
            let fd = (f.eval(&up) - f.eval(&dn)) / (2.0 * h);
            assert_abs_diff_eq!(g[ax], fd, epsilon = 1e-6);
        }
        // laplacian against 5-point stencil
        let mut lap = 0.0;
        for ax in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[ax] += h;
            dn[ax] -= h;
            lap += (f.eval(&up) - 2.0 * f.eval(&u) + f.eval(&dn)) / (h * h);
        }
        assert_abs_diff_eq!(f.laplacian(&u), lap, epsilon = 1e-3);
    }

    #[test]
    fn envelope_derivatives() {
        let e = Envelope::Poly {
            coeffs: vec![1.0, -2.0, 0.5],
        };
        assert_abs_diff_eq!(e.eval(2.0), 1.0 - 4.0 + 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.deriv(2.0), -2.0 + 2.0, epsilon = 1e-14);
        let c = Envelope::Cosine {
            amp: 0.7,
            omega: 3.0,
            phase: 0.2,
        };
        let h = 1e-6;
        assert_abs_diff_eq!(
            c.deriv(0.4),
            (c.eval(0.4 + h) - c.eval(0.4 - h)) / (2.0 * h),
            epsilon = 1e-7
        );
        assert!(c.sup_bound(10.0) >= c.eval(0.9).abs());
    }

    #[test]
    fn tilted_potential_combines() {
        let p = Potential {
            v: FourierSeries::cosine(1, 0, 1, 1.0),
            tilt: FourierSeries::cosine(1, 0, 2, 0.5),
            envelope: Envelope::Poly {
                coeffs: vec![0.0, 1.0],
            },
        };
        let u = [0.2];
        assert_abs_diff_eq!(
            p.eval(0.3, &u),
            (2.0 * PI * 0.2).cos() + 0.3 * 0.5 * (4.0 * PI * 0.2).cos(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(p.dt(0.3, &u), 0.5 * (4.0 * PI * 0.2).cos(), epsilon = 1e-14);
        assert!(!p.is_static());
    }
}
