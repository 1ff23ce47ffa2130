//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Green's function of the unit square torus by lattice summation in Fourier space:
/// one direction is summed in closed form, the other over |k| ≤ `k_max` modes.
pub fn green_fourier(x: [f64; 2], q: [f64; 2], k_max: i32) -> f64 {
    let mut d = [(x[0] - q[0]).rem_euclid(1.0), (x[1] - q[1]).rem_euclid(1.0)];
    // Sum over k2 converges like exp(−2π|k2|·dist(d0, Z)); pick the better axis.
    let dist = |a: f64| a.min(1.0 - a);
    if dist(d[0]) < dist(d[1]) {
        d.swap(0, 1);
    }
    let (x1, x2) = (d[0], d[1]);
    let mut total = 2.0 * PI * PI * (x1 * x1 - x1 + 1.0 / 6.0);
    for k2 in 1..=k_max {
        let b = k2 as f64;
        let inner = (PI / b) * ((-2.0 * PI * b * x1).exp() + (-2.0 * PI * b * (1.0 - x1)).exp())
            / (1.0 - (-2.0 * PI * b).exp());
        total += 2.0 * (2.0 * PI * b * x2).cos() * inner;
    }
    total / (4.0 * PI * PI)
}

/// Classic fixed-step RK4 on the radial system in t = ln r, state (v, μ).
pub fn radial_rk4(a: &[Vec<f64>], alpha: &[f64], r_max: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.len();
    let f = |t: f64, y: &[f64]| -> Vec<f64> {
        let mut d = vec![0.0; 2 * n];
        for i in 0..n {
            d[i] = -(0..n).map(|j| a[i][j] * y[n + j]).sum::<f64>();
            d[n + i] = (y[i] + 2.0 * t).exp();
        }
        d
    };
    let t0 = (1e-6f64).ln();
    let r0 = 1e-6f64;
    let mut y = vec![0.0; 2 * n];
    for i in 0..n {
        let c: f64 = (0..n).map(|j| a[i][j] * alpha[j].exp()).sum::<f64>() / 4.0;
        y[i] = alpha[i] - c * r0 * r0;
        y[n + i] = alpha[i].exp() * r0 * r0 / 2.0;
    }
    let steps = ((r_max.ln() - t0) / h).round() as usize;
    let h = (r_max.ln() - t0) / steps as f64;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let y2: Vec<f64> = (0..2 * n).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = f(t + 0.5 * h, &y2);
        let y3: Vec<f64> = (0..2 * n).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = f(t + 0.5 * h, &y3);
        let y4: Vec<f64> = (0..2 * n).map(|i| y[i] + h * k3[i]).collect();
        let k4 = f(t + h, &y4);
        for i in 0..2 * n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    (y[..n].to_vec(), y[n..].to_vec())
}
