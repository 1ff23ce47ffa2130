//! Adaptive Dormand–Prince 5(4) integrator that reports the state at prescribed output times.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
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

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates y' = f(t, y) from `t0` through the increasing `outputs`, returning the state at each.
/// Steps are clipped so that every output time is hit exactly.
pub fn integrate<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    tol: Tolerances,
) -> Result<(Vec<Vec<f64>>, Stats)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut out = Vec::with_capacity(outputs.len());
    let mut stats = Stats::default();
    let span = outputs.last().map_or(0.0, |&te| (te - t0).abs());
    let mut h = (span * 1e-3).max(1e-6);
    let h_min = 1e-14 * span.max(1.0);

    f(t, &y, &mut k[0]);
    for &target in outputs {
        while t < target {
            let mut step = h.min(target - t);
            let last = step >= target - t;
            if last {
                step = target - t;
            }
            for s in 1..7 {
                for d in 0..dim {
                    let mut acc = y[d];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += step * A[s][j] * kj[d];
                    }
                    tmp[d] = acc;
                }
                f(t + C[s] * step, &tmp, &mut k[s]);
            }
            // The 7th stage is evaluated at the 5th-order solution (FSAL).
            let mut err = 0.0f64;
            for d in 0..dim {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][d];
                    s4 += B4[s] * k[s][d];
                }
                y5[d] = y[d] + step * s5;
                let sc = tol.atol + tol.rtol * y[d].abs().max(y5[d].abs());
                let e = step * (s5 - s4) / sc;
                err = err.max(e.abs());
            }
            if err <= 1.0 || step <= h_min {
                if step <= h_min && err > 1.0 {
                    return Err(Error::Stiffness(t));
                }
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y5);
                let k6 = k[6].clone();
                k[0].copy_from_slice(&k6);
                stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = step * fac;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Stiffness(t));
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
