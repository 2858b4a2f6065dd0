//! Adaptive Dormand-Prince 5(4) integrator with output at prescribed
//! times. Runge-Kutta steps are linear in the state, so linear invariants
//! of the right-hand side (total probability, total mass) are preserved
//! exactly up to roundoff.

use crate::error::{CoreError, Result};

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates y' = f(t, y) from outputs[0] to outputs[last], returning the
/// state at each requested time (the first entry is a copy of y0).
pub fn integrate<F>(mut f: F, y0: &[f64], outputs: &[f64], rtol: f64, atol: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    assert!(outputs.len() >= 2, "need at least initial and final time");
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = outputs[0];
    let mut result = Vec::with_capacity(outputs.len());
    result.push(y.clone());

    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];

    f(t, &y, &mut k[0]);
    // initial step heuristic
    let mut h = initial_step(&y, &k[0], outputs[outputs.len() - 1] - t, rtol, atol);

    for &t_out in &outputs[1..] {
        while t < t_out - 1e-14 * t_out.abs().max(1.0) {
            let mut step = h.min(t_out - t);
            let mut accepted = false;
            let mut tries = 0usize;
            while !accepted {
                tries += 1;
                if tries > 10_000 || !(step > 0.0) || step < 1e-16 * (1.0 + t.abs()) {
                    return Err(CoreError::Solver(t, "step size collapsed".into()));
                }
                for s in 0..6 {
                    for (i, v) in ytmp.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (j, kj) in k.iter().enumerate().take(s + 1) {
                            acc += A[s][j] * kj[i];
                        }
                        *v = y[i] + step * acc;
                    }
                    f(t + C[s] * step, &ytmp, &mut k[s + 1]);
                }
                let mut err = 0.0f64;
                for i in 0..n {
                    let mut e5 = 0.0;
                    let mut e4 = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        e5 += B5[j] * kj[i];
                        e4 += B4[j] * kj[i];
                    }
                    y5[i] = y[i] + step * e5;
                    let sc = atol + rtol * y[i].abs().max(y5[i].abs());
                    let d = step * (e5 - e4) / sc;
                    err += d * d;
                }
                err = (err / n as f64).sqrt();
                if err.is_finite() && err <= 1.0 {
                    accepted = true;
                    t += step;
                    std::mem::swap(&mut y, &mut y5);
                    // k7 of the accepted step is f at the new point (FSAL)
                    let (head, tail) = k.split_at_mut(6);
                    head[0].copy_from_slice(&tail[0]);
                    let frac = if err > 0.0 {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    } else {
                        5.0
                    };
                    h = step * frac;
                } else {
                    let frac = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
                    } else {
                        0.1
                    };
                    step *= frac;
                }
            }
        }
        t = t_out;
        result.push(y.clone());
        // restart FSAL derivative at the exact output time
        f(t, &y, &mut k[0]);
    }
    Ok(result)
}

fn initial_step(y: &[f64], dy: &[f64], span: f64, rtol: f64, atol: f64) -> f64 {
    let sc: f64 = y
        .iter()
        .zip(dy)
        .map(|(&yi, &di)| (di / (atol + rtol * yi.abs())).powi(2))
        .sum::<f64>()
        .sqrt();
    let h = if sc > 0.0 { 0.01 / sc } else { span * 1e-3 };
    h.min(span.abs() * 0.1).max(span.abs() * 1e-9)
}
