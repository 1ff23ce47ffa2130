//! Quadrature rules and polar grids.

use std::f64::consts::PI;

/// Composite Simpson weights for `n` equally spaced nodes with spacing `h`.
/// An even node count closes with the 3/8 rule on the last four nodes.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2, "need at least two nodes");
    let mut w = vec![0.0; n];
    if n == 2 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    if n == 3 || n % 2 == 1 {
        for k in (0..n - 1).step_by(2) {
            w[k] += h / 3.0;
            w[k + 1] += 4.0 * h / 3.0;
            w[k + 2] += h / 3.0;
        }
        return w;
    }
    let m = n - 3;
    for k in (0..m - 1).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    let s = m - 1;
    w[s] += 3.0 * h / 8.0;
    w[s + 1] += 9.0 * h / 8.0;
    w[s + 2] += 9.0 * h / 8.0;
    w[s + 3] += 3.0 * h / 8.0;
    w
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Integral of `f` over [a, b] by composite Gauss–Legendre with `panels` panels of `order` points.
pub fn gauss_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(c + 0.5 * h * xi);
        }
    }
    s * 0.5 * h
}

/// Polar grid with nodes uniform in ln r on [r_min, r_max] and uniform in θ.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub dt: f64,
    pub theta: Vec<f64>,
    /// Radial weights for ∫ f r dr = ∫ f r² dt.
    pub w_r: Vec<f64>,
    pub d_theta: f64,
}

impl PolarGrid {
    pub fn new(r_min: f64, r_max: f64, n_r: usize, n_theta: usize) -> Self {
        let t0 = r_min.ln();
        let dt = (r_max.ln() - t0) / (n_r - 1) as f64;
        let t: Vec<f64> = (0..n_r).map(|k| t0 + k as f64 * dt).collect();
        let r: Vec<f64> = t.iter().map(|x| x.exp()).collect();
        let w_r = simpson_weights(n_r, dt)
            .iter()
            .zip(&r)
            .map(|(w, r)| w * r * r)
            .collect();
        let d_theta = 2.0 * PI / n_theta as f64;
        let theta = (0..n_theta).map(|k| k as f64 * d_theta).collect();
        Self {
            r,
            t,
            dt,
            theta,
            w_r,
            d_theta,
        }
    }

    pub fn n_r(&self) -> usize {
        self.r.len()
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    /// ∫∫ f(r, θ) r dr dθ for samples f[k_r][k_θ]; the disk inside r_min is ignored.
    pub fn integrate(&self, f: &[Vec<f64>]) -> f64 {
        let mut s = 0.0;
        for (kr, row) in f.iter().enumerate() {
            s += self.w_r[kr] * row.iter().sum::<f64>();
        }
        s * self.d_theta
    }

    /// ∫ g(r) r dr for radial samples.
    pub fn integrate_radial(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.w_r).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        for n in [5usize, 6, 9, 10] {
            let h = 1.0 / (n - 1) as f64;
            let w = simpson_weights(n, h);
            let s: f64 = (0..n).map(|k| w[k] * (k as f64 * h).powi(3)).sum();
            assert!((s - 0.25).abs() < 1e-14, "n={n}: {s}");
        }
    }

    #[test]
    fn gauss_legendre_exact() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let v = gauss_integrate(|x| x.sin(), 0.0, PI, 4, 10);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polar_area() {
        let g = PolarGrid::new(1e-6, 2.0, 1601, 16);
        let f = vec![vec![1.0; 16]; 1601];
        let err = (g.integrate(&f) - 4.0 * PI).abs();
        assert!(err < 1e-8, "{err}");
    }
}
