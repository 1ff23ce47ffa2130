//! Green's function of the unit-area square flat torus, weight fields h_i, and the
//! critical-point functional f of the blowup configuration.
//!
//! G solves −ΔG = δ_q − 1 with zero mean. It is evaluated through the heat-kernel split
//! G = (1/4π) Σ_n E1(|x−q−n|²/4s) − s + Σ_{k≠0} e^{−4π²|k|²s} cos(2πk·(x−q)) / (4π²|k|²).

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const CUTOFF: f64 = 40.0;

/// Exponential integral E1(x) for x > 0.
pub fn exp_int_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 1.0 {
        -EULER_GAMMA - x.ln() + ein_series(x)
    } else {
        // Modified Lentz on the continued fraction e^{-x}/(x+1-1/(x+3-4/(x+5-...))).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Ein(z) = Σ_{k≥1} (−1)^{k+1} z^k/(k·k!) = E1(z) + γ_E + ln z, entire.
fn ein_series(z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= -z / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn ein(z: f64) -> f64 {
    if z < 4.0 {
        ein_series(z)
    } else {
        exp_int_e1(z) + EULER_GAMMA + z.ln()
    }
}

/// Wraps a displacement into [−1/2, 1/2)².
pub fn wrap_disp(d: Point) -> Point {
    [d[0] - d[0].round(), d[1] - d[1].round()]
}

pub fn wrap_point(p: Point) -> Point {
    [p[0] - p[0].floor(), p[1] - p[1].floor()]
}

/// Flat local distance on the torus.
pub fn torus_dist(x: Point, q: Point) -> f64 {
    let d = wrap_disp([x[0] - q[0], x[1] - q[1]]);
    d[0].hypot(d[1])
}

/// Value, gradient and Hessian with respect to x.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Point,
    pub hess: Mat2,
}

impl Jet {
    fn add(&mut self, o: &Jet) {
        self.value += o.value;
        for i in 0..2 {
            self.grad[i] += o.grad[i];
            for j in 0..2 {
                self.hess[i][j] += o.hess[i][j];
            }
        }
    }
}

/// Ewald-summed Green's function of the unit square torus.
#[derive(Debug, Clone)]
pub struct TorusGreen {
    s: f64,
    n_max: i32,
    /// (k1, k2, e^{−4π²|k|²s}/(4π²|k|²)), half lattice; doubled in the sum.
    recip: Vec<(f64, f64, f64)>,
    robin: f64,
}

impl Default for TorusGreen {
    fn default() -> Self {
        Self::new(1.0 / (4.0 * PI))
    }
}

impl TorusGreen {
    /// `s` is the heat-kernel split time.
    pub fn new(s: f64) -> Self {
        let n_max = (4.0 * s * CUTOFF).sqrt().ceil() as i32 + 1;
        let k_max = (CUTOFF / (4.0 * PI * PI * s)).sqrt().ceil() as i32 + 1;
        let mut recip = Vec::new();
        for k1 in 0..=k_max {
            for k2 in -k_max..=k_max {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let k2f = (k1 * k1 + k2 * k2) as f64;
                let w = (-4.0 * PI * PI * k2f * s).exp();
                if w < 1e-20 {
                    continue;
                }
                recip.push((k1 as f64, k2 as f64, w / (4.0 * PI * PI * k2f)));
            }
        }
        let mut g = Self {
            s,
            n_max,
            recip,
            robin: 0.0,
        };
        g.robin = g.regular_jet([0.0, 0.0], [0.0, 0.0]).value;
        g
    }

    pub fn split(&self) -> f64 {
        self.s
    }

    /// γ₀ = γ(q, q), the same for every q.
    pub fn robin(&self) -> f64 {
        self.robin
    }

    fn recip_jet(&self, d: Point) -> Jet {
        let mut j = Jet::default();
        for &(k1, k2, w) in &self.recip {
            let ph = 2.0 * PI * (k1 * d[0] + k2 * d[1]);
            let (sn, cs) = ph.sin_cos();
            let w2 = 2.0 * w;
            j.value += w2 * cs;
            let k = [k1, k2];
            for a in 0..2 {
                j.grad[a] -= w2 * 2.0 * PI * k[a] * sn;
                for b in 0..2 {
                    j.hess[a][b] -= w2 * 4.0 * PI * PI * k[a] * k[b] * cs;
                }
            }
        }
        j.value -= self.s;
        j
    }

    /// One real-space image term (1/4π) E1(|y|²/4s) and its derivatives.
    fn image_jet(&self, y: Point) -> Jet {
        let u = y[0] * y[0] + y[1] * y[1];
        let z = u / (4.0 * self.s);
        if z > CUTOFF + 10.0 {
            return Jet::default();
        }
        let ez = (-z).exp();
        let mut j = Jet {
            value: exp_int_e1(z) / (4.0 * PI),
            ..Jet::default()
        };
        for a in 0..2 {
            j.grad[a] = -ez * y[a] / (2.0 * PI * u);
            for b in 0..2 {
                let delta = if a == b { 1.0 } else { 0.0 };
                j.hess[a][b] = -(ez / (2.0 * PI))
                    * (delta / u - 2.0 * y[a] * y[b] / (u * u) - y[a] * y[b] / (2.0 * self.s * u));
            }
        }
        j
    }

    /// The n = 0 image with −(1/2π) ln|y| added back: smooth at y = 0.
    fn regular_image_jet(&self, y: Point) -> Jet {
        let s4 = 4.0 * self.s;
        let u = y[0] * y[0] + y[1] * y[1];
        let z = u / s4;
        // ψ(z) = (1 − e^{−z})/z and its derivative.
        let (psi, dpsi) = if z < 0.5 {
            let mut p = 0.0;
            let mut dp = 0.0;
            let mut fact = 1.0;
            for k in 0..25 {
                fact *= (k + 1) as f64;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                p += sign * z.powi(k) / fact;
                if k >= 1 {
                    dp += sign * k as f64 * z.powi(k - 1) / fact;
                }
            }
            (p, dp)
        } else {
            let em = -(-z).exp_m1();
            (em / z, ((-z).exp() * z - em) / (z * z))
        };
        let phi = psi / s4;
        let dphi = dpsi / (s4 * s4);
        let mut j = Jet {
            value: (ein(z) - EULER_GAMMA + s4.ln()) / (4.0 * PI),
            ..Jet::default()
        };
        for a in 0..2 {
            j.grad[a] = phi * y[a] / (2.0 * PI);
            for b in 0..2 {
                let delta = if a == b { 1.0 } else { 0.0 };
                j.hess[a][b] = (phi * delta + 2.0 * dphi * y[a] * y[b]) / (2.0 * PI);
            }
        }
        j
    }

    fn images_jet(&self, d: Point, skip_origin: bool) -> Jet {
        let mut j = Jet::default();
        for n1 in -self.n_max..=self.n_max {
            for n2 in -self.n_max..=self.n_max {
                if skip_origin && n1 == 0 && n2 == 0 {
                    continue;
                }
                j.add(&self.image_jet([d[0] - n1 as f64, d[1] - n2 as f64]));
            }
        }
        j
    }

    /// G(x, q) with derivatives in x. Errors when x = q.
    pub fn green_jet(&self, x: Point, q: Point) -> Result<Jet> {
        let d = wrap_disp([x[0] - q[0], x[1] - q[1]]);
        if d[0] == 0.0 && d[1] == 0.0 {
            return Err(Error::Singular("green(x, q) at x = q; use regular_part".into()));
        }
        let mut j = self.images_jet(d, false);
        j.add(&self.recip_jet(d));
        Ok(j)
    }

    /// γ(x, q) = G(x, q) + (1/2π) ln d_T(x, q) with derivatives in x; smooth through x = q.
    pub fn regular_jet(&self, x: Point, q: Point) -> Jet {
        let d = wrap_disp([x[0] - q[0], x[1] - q[1]]);
        let mut j = self.images_jet(d, true);
        j.add(&self.regular_image_jet(d));
        j.add(&self.recip_jet(d));
        j
    }

    pub fn green(&self, x: Point, q: Point) -> Result<f64> {
        Ok(self.green_jet(x, q)?.value)
    }

    pub fn grad_green_1(&self, x: Point, q: Point) -> Result<Point> {
        Ok(self.green_jet(x, q)?.grad)
    }

    pub fn regular_part(&self, x: Point, q: Point) -> f64 {
        self.regular_jet(x, q).value
    }

    /// Σ_s G(x, q_s), the singular Green sum over a configuration.
    pub fn green_sum(&self, x: Point, points: &[Point]) -> Result<f64> {
        points.iter().map(|&q| self.green(x, q)).sum()
    }

    /// G*(x; q_t) = γ(x, q_t) + Σ_{s≠t} G(x, q_s) with derivatives in x.
    pub fn g_star_jet(&self, x: Point, points: &[Point], t: usize) -> Result<Jet> {
        let mut j = self.regular_jet(x, points[t]);
        for (s, &q) in points.iter().enumerate() {
            if s != t {
                j.add(&self.green_jet(x, q)?);
            }
        }
        Ok(j)
    }

    pub fn g_star(&self, x: Point, points: &[Point], t: usize) -> Result<f64> {
        Ok(self.g_star_jet(x, points, t)?.value)
    }

    /// ∇_1 G*(q_t; q_t).
    pub fn grad_1_g_star(&self, points: &[Point], t: usize) -> Result<Point> {
        Ok(self.g_star_jet(points[t], points, t)?.grad)
    }
}

/// One real Fourier mode of ln h: a cos(2πk·x) + b sin(2πk·x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierCoeffs {
    #[serde(rename = "const", default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
}

/// A positive weight h = exp(truncated Fourier series) on the torus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HField {
    pub coeffs: FourierCoeffs,
}

impl HField {
    pub fn constant(c: f64) -> Self {
        assert!(c > 0.0);
        Self {
            coeffs: FourierCoeffs {
                constant: c.ln(),
                terms: Vec::new(),
            },
        }
    }

    pub fn from_terms(constant: f64, terms: &[([i32; 2], f64, f64)]) -> Self {
        Self {
            coeffs: FourierCoeffs {
                constant,
                terms: terms
                    .iter()
                    .map(|&(k, c, s)| FourierTerm { k, cos: c, sin: s })
                    .collect(),
            },
        }
    }

    /// ln h with exact gradient and Hessian.
    pub fn ln_jet(&self, x: Point) -> Jet {
        let mut j = Jet {
            value: self.coeffs.constant,
            ..Jet::default()
        };
        for term in &self.coeffs.terms {
            let k = [2.0 * PI * term.k[0] as f64, 2.0 * PI * term.k[1] as f64];
            let (sn, cs) = (k[0] * x[0] + k[1] * x[1]).sin_cos();
            let f = term.cos * cs + term.sin * sn;
            let df = -term.cos * sn + term.sin * cs;
            j.value += f;
            for a in 0..2 {
                j.grad[a] += df * k[a];
                for b in 0..2 {
                    j.hess[a][b] -= f * k[a] * k[b];
                }
            }
        }
        j
    }

    pub fn ln_h(&self, x: Point) -> f64 {
        self.ln_jet(x).value
    }

    pub fn h(&self, x: Point) -> f64 {
        self.ln_h(x).exp()
    }

    /// Translated field x ↦ h(x − shift).
    pub fn translated(&self, shift: Point) -> Self {
        let mut out = self.clone();
        for t in &mut out.coeffs.terms {
            let ph = 2.0 * PI * (t.k[0] as f64 * shift[0] + t.k[1] as f64 * shift[1]);
            let (sn, cs) = ph.sin_cos();
            // a cos(θ−φ) + b sin(θ−φ) = (a cosφ − b sinφ) cos θ + (a sinφ + b cosφ) sin θ
            let (a, b) = (t.cos, t.sin);
            t.cos = a * cs - b * sn;
            t.sin = a * sn + b * cs;
        }
        out
    }

    /// Minimum of h on a 64×64 grid; positivity of h is automatic for this representation.
    pub fn grid_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for a in 0..64 {
            for b in 0..64 {
                m = m.min(self.h([a as f64 / 64.0, b as f64 / 64.0]));
            }
        }
        m
    }
}

/// Minimum pairwise torus distance; infinite for a single point.
pub fn d_min(points: &[Point]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.min(torus_dist(points[i], points[j]));
        }
    }
    d
}

pub fn check_distinct(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Config("no blowup points".into()));
    }
    if d_min(points) < 1e-12 {
        return Err(Error::Config("blowup points are not distinct".into()));
    }
    Ok(())
}

/// Value, gradient and Hessian of f over the 2N point coordinates.
#[derive(Debug, Clone)]
pub struct FunctionalJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// f = Σ_tΣ_i ρ_i[ln h_i(q_t) + πm_iγ(q_t,q_t) + Σ_{s≠t} πm_i G(q_t,q_s)].
pub fn f_functional(
    green: &TorusGreen,
    points: &[Point],
    rho: &[f64],
    m: &[f64],
    h: &[HField],
) -> Result<FunctionalJet> {
    check_distinct(points)?;
    let nn = points.len();
    let p: f64 = rho.iter().zip(m).map(|(r, mi)| r * mi).sum();
    let mut value = 0.0;
    let mut gradient = vec![0.0; 2 * nn];
    let mut hessian = DMatrix::zeros(2 * nn, 2 * nn);
    for (t, &q) in points.iter().enumerate() {
        for (i, hi) in h.iter().enumerate() {
            let lj = hi.ln_jet(q);
            value += rho[i] * (lj.value + PI * m[i] * green.robin());
            for a in 0..2 {
                gradient[2 * t + a] += rho[i] * lj.grad[a];
                for b in 0..2 {
                    hessian[(2 * t + a, 2 * t + b)] += rho[i] * lj.hess[a][b];
                }
            }
        }
        for (s, &qs) in points.iter().enumerate() {
            if s == t {
                continue;
            }
            let gj = green.green_jet(q, qs)?;
            value += PI * p * gj.value;
            for a in 0..2 {
                gradient[2 * t + a] += 2.0 * PI * p * gj.grad[a];
                for b in 0..2 {
                    hessian[(2 * t + a, 2 * t + b)] += 2.0 * PI * p * gj.hess[a][b];
                    hessian[(2 * t + a, 2 * s + b)] -= 2.0 * PI * p * gj.hess[a][b];
                }
            }
        }
    }
    Ok(FunctionalJet {
        value,
        gradient,
        hessian,
    })
}

/// Σ_iρ_i[∇ln h_i(q_t) + 2πm_i∇_1G*(q_t;q_t)] for every t.
pub fn se1_residual(
    green: &TorusGreen,
    points: &[Point],
    rho: &[f64],
    m: &[f64],
    h: &[HField],
) -> Result<Vec<Point>> {
    check_distinct(points)?;
    (0..points.len())
        .map(|t| {
            let gs = green.grad_1_g_star(points, t)?;
            let mut out = [0.0; 2];
            for (i, hi) in h.iter().enumerate() {
                let g = hi.ln_jet(points[t]).grad;
                for a in 0..2 {
                    out[a] += rho[i] * (g[a] + 2.0 * PI * m[i] * gs[a]);
                }
            }
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub points: Vec<Point>,
    pub gradient_norm: f64,
    pub eigenvalues: Vec<f64>,
    pub nondegenerate: bool,
    pub starts_used: usize,
}

fn newton(
    green: &TorusGreen,
    start: &[Point],
    rho: &[f64],
    m: &[f64],
    h: &[HField],
) -> Option<(Vec<Point>, FunctionalJet)> {
    let nn = start.len();
    let mut pts: Vec<Point> = start.to_vec();
    let mut jet = f_functional(green, &pts, rho, m, h).ok()?;
    let gnorm = |j: &FunctionalJet| j.gradient.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for _ in 0..100 {
        if gnorm(&jet) <= 1e-10 {
            return Some((pts, jet));
        }
        let g = nalgebra::DVector::from_column_slice(&jet.gradient);
        let svd = jet.hessian.clone().svd(true, true);
        let cut = 1e-10 * svd.singular_values.max();
        let step = svd.solve(&(-g), cut).ok()?;
        let mut lam = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<Point> = (0..nn)
                .map(|t| wrap_point([pts[t][0] + lam * step[2 * t], pts[t][1] + lam * step[2 * t + 1]]))
                .collect();
            if let Ok(tj) = f_functional(green, &trial, rho, m, h) {
                if gnorm(&tj) < gnorm(&jet) * (1.0 - 1e-4 * lam) || gnorm(&tj) <= 1e-10 {
                    pts = trial;
                    jet = tj;
                    moved = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (gnorm(&jet) <= 1e-10).then_some((pts, jet))
}

/// Newton on ∇f = 0 from `init`, then from seeded jittered restarts.
pub fn find_critical(
    green: &TorusGreen,
    init: &[Point],
    rho: &[f64],
    m: &[f64],
    h: &[HField],
    seed: u64,
    restarts: usize,
) -> Result<CriticalPoint> {
    check_distinct(init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..=restarts {
        let start: Vec<Point> = if attempt == 0 {
            init.to_vec()
        } else {
            let amp = 0.05 * attempt as f64;
            init.iter()
                .map(|q| wrap_point([q[0] + amp * rng.gen_range(-1.0..1.0), q[1] + amp * rng.gen_range(-1.0..1.0)]))
                .collect()
        };
        if check_distinct(&start).is_err() {
            continue;
        }
        if let Some((pts, jet)) = newton(green, &start, rho, m, h) {
            let eig = SymmetricEigen::new(jet.hessian.clone());
            let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let hn = ev.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let mn = ev.iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
            return Ok(CriticalPoint {
                points: pts,
                gradient_norm: jet.gradient.iter().fold(0.0f64, |a, b| a.max(b.abs())),
                eigenvalues: ev,
                nondegenerate: hn > 0.0 && mn > 1e-8 * hn,
                starts_used: attempt + 1,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "Newton failed from {} starts",
        restarts + 1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_known_values() {
        // Abramowitz–Stegun table values.
        assert!((exp_int_e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-15);
        assert!((exp_int_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((exp_int_e1(2.0) - 0.048_900_510_708_061_12).abs() < 1e-16);
        assert!((exp_int_e1(10.0) - 4.156_968_929_685_324e-6).abs() < 1e-20);
    }

    #[test]
    fn ein_branches_agree() {
        for &z in &[3.5, 4.0, 4.5] {
            let a = ein_series(z);
            let b = exp_int_e1(z) + EULER_GAMMA + z.ln();
            assert!((a - b).abs() < 1e-13, "{z}: {a} {b}");
        }
    }

    #[test]
    fn half_period_gradient_vanishes() {
        let g = TorusGreen::default();
        let d = g.grad_green_1([0.5, 0.5], [0.0, 0.0]).unwrap();
        assert!(d[0].abs() < 1e-14 && d[1].abs() < 1e-14);
    }

    #[test]
    fn regular_part_continuous() {
        let g = TorusGreen::default();
        let q = [0.3, 0.7];
        let near = g.regular_part([0.3 + 1e-7, 0.7], q);
        assert!((near - g.robin()).abs() < 1e-12);
        let x = [0.31, 0.68];
        let direct = g.green(x, q).unwrap() + torus_dist(x, q).ln() / (2.0 * PI);
        assert!((direct - g.regular_part(x, q)).abs() < 1e-13);
    }

    #[test]
    fn green_singular_at_diagonal() {
        let g = TorusGreen::default();
        assert!(matches!(g.green([0.2, 0.2], [0.2, 0.2]), Err(Error::Singular(_))));
    }

    #[test]
    fn hfield_translation() {
        let h = HField::from_terms(0.1, &[([1, 0], 0.3, 0.1), ([1, 2], -0.2, 0.05)]);
        let ht = h.translated([0.13, 0.41]);
        let x = [0.7, 0.2];
        assert!((ht.ln_h(x) - h.ln_h([x[0] - 0.13, x[1] - 0.41])).abs() < 1e-14);
    }
}
