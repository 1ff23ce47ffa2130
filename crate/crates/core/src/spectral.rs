//! Spectral Laplacian on a periodic square grid.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Periodic n×n samples, row-major with index a·n + b for the point (a, b)·L/n.
pub struct SpectralField {
    pub n: usize,
    pub box_len: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LaplacianOutput {
    /// Fraction of the energy of Δf carried by modes beyond half the Nyquist index.
    pub tail_fraction: f64,
}

fn fft2(data: &mut [Complex<f64>], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for b in 0..n {
        for a in 0..n {
            col[a] = data[a * n + b];
        }
        fft.process(&mut col);
        for a in 0..n {
            data[a * n + b] = col[a];
        }
    }
}

fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

impl SpectralField {
    pub fn new(n: usize, box_len: f64) -> Self {
        Self { n, box_len }
    }

    /// Δf, with its tail-energy diagnostic.
    pub fn laplacian(&self, f: &[f64]) -> (Vec<f64>, LaplacianOutput) {
        let n = self.n;
        assert_eq!(f.len(), n * n);
        let mut data: Vec<Complex<f64>> = f.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fft2(&mut data, n, false);
        let scale = 2.0 * PI / self.box_len;
        let cut = n as f64 / 4.0;
        let (mut total, mut tail) = (0.0, 0.0);
        for a in 0..n {
            let ka = wavenumber(a, n);
            for b in 0..n {
                let kb = wavenumber(b, n);
                let kk = ka * ka + kb * kb;
                let e = data[a * n + b].norm_sqr() * kk * kk;
                if a != 0 || b != 0 {
                    total += e;
                    if ka.abs().max(kb.abs()) > cut {
                        tail += e;
                    }
                }
                // The Nyquist mode has no well-defined sign; drop it.
                let nyq = (n % 2 == 0) && (a == n / 2 || b == n / 2);
                let k2 = if nyq { 0.0 } else { (ka * ka + kb * kb) * scale * scale };
                data[a * n + b] *= if nyq { 0.0 } else { -k2 };
            }
        }
        fft2(&mut data, n, true);
        let norm = (n * n) as f64;
        (
            data.iter().map(|c| c.re / norm).collect(),
            LaplacianOutput {
                tail_fraction: if total > 0.0 { tail / total } else { 0.0 },
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigonometric_laplacian() {
        let n = 32;
        let sf = SpectralField::new(n, 1.0);
        let f: Vec<f64> = (0..n * n)
            .map(|k| {
                let (a, b) = ((k / n) as f64 / n as f64, (k % n) as f64 / n as f64);
                (2.0 * PI * (3.0 * a + b)).sin()
            })
            .collect();
        let (lap, diag) = sf.laplacian(&f);
        for (l, v) in lap.iter().zip(&f) {
            assert!((l + 4.0 * PI * PI * 10.0 * v).abs() < 1e-9);
        }
        assert!(diag.tail_fraction < 1e-20);
    }
}
