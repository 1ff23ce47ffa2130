//! Kernels of the linearized limit system and the frequency-decomposed correction problems.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{simpson_weights, PolarGrid};
use crate::radial_bubble::{RadialBubble, DT};

/// Local data of a weight h_i at a point: value and derivatives of ln h_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HLocalData {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl HLocalData {
    pub fn flat(value: f64) -> Self {
        Self {
            value,
            grad: [0.0; 2],
            hess: [[0.0; 2]; 2],
        }
    }

    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }

    pub fn grad_sq(&self) -> f64 {
        self.grad[0] * self.grad[0] + self.grad[1] * self.grad[1]
    }
}

/// Radial profiles of the three bounded kernel fields.
#[derive(Debug, Clone)]
pub struct KernelFields {
    pub r: Vec<f64>,
    /// Z_{0,i} = r V_i' + 2.
    pub z0: Vec<Vec<f64>>,
    /// Shared profile V_i' of Z_{1,i} (cos θ) and Z_{2,i} (sin θ).
    pub z1: Vec<Vec<f64>>,
    pub residual_z0: f64,
    pub residual_z1: f64,
    /// |Z_{0,i}(R) − (2 − m_i)| per component.
    pub far_gap: Vec<f64>,
}

const D2: [f64; 7] = [
    1.0 / 90.0,
    -3.0 / 20.0,
    3.0 / 2.0,
    -49.0 / 18.0,
    3.0 / 2.0,
    -3.0 / 20.0,
    1.0 / 90.0,
];

/// Scale-relative residual of d²φ/dt² − ℓ²φ + r² Σ_j a_ij e^{V_j} φ_j on the bubble grid.
fn kernel_residual(b: &RadialBubble, phi: &[Vec<f64>], ell: f64) -> f64 {
    let n = b.n();
    let kk = b.t.len();
    let mut scale = 0.0f64;
    let pot = |i: usize, k: usize| -> f64 {
        (0..n)
            .map(|j| b.coupling.get(i, j) * b.v[j][k].exp() * phi[j][k])
            .sum::<f64>()
            * b.r[k]
            * b.r[k]
    };
    for i in 0..n {
        for k in 0..kk {
            scale = scale
                .max(pot(i, k).abs())
                .max(ell * ell * phi[i][k].abs());
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in 3..kk.saturating_sub(5) {
            let d2: f64 = (0..7).map(|s| D2[s] * phi[i][k + s - 3]).sum::<f64>() / (DT * DT);
            let res = d2 - ell * ell * phi[i][k] + pot(i, k);
            worst = worst.max(res.abs() / scale);
        }
    }
    worst
}

pub fn kernel_fields(b: &RadialBubble) -> KernelFields {
    let n = b.n();
    let z0: Vec<Vec<f64>> = (0..n)
        .map(|i| b.dv[i].iter().zip(&b.r).map(|(d, r)| r * d + 2.0).collect())
        .collect();
    let z1: Vec<Vec<f64>> = b.dv.clone();
    // The frequency-1 profile is checked in the variable r·V' = rφ has the same t-form up to
    // the factor r; use φ directly with ℓ = 1.
    let residual_z0 = kernel_residual(b, &z0, 0.0);
    let residual_z1 = kernel_residual(b, &z1, 1.0);
    let last = b.r.len() - 1;
    let far_gap = (0..n)
        .map(|i| (z0[i][last] - (2.0 - b.m[i])).abs())
        .collect();
    KernelFields {
        r: b.r.clone(),
        z0,
        z1,
        residual_z0,
        residual_z1,
        far_gap,
    }
}

/// Z_{0,i}(r) and V_i'(r) at an arbitrary radius.
pub fn kernel_at(b: &RadialBubble, i: usize, r: f64) -> (f64, f64) {
    let (_, dv) = b.eval(i, r);
    (r * dv + 2.0, dv)
}

/// Radial samples on a uniform grid in ln r, interpolated with 4-point Lagrange in t.
#[derive(Debug, Clone)]
pub struct RadialSamples {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl RadialSamples {
    pub fn eval(&self, i: usize, r: f64) -> f64 {
        let v = &self.values[i];
        let nt = self.t.len();
        let t = r.ln();
        if t <= self.t[0] {
            return v[0];
        }
        if t >= self.t[nt - 1] {
            return v[nt - 1];
        }
        let h = self.t[1] - self.t[0];
        let k = (((t - self.t[0]) / h).floor() as usize).clamp(1, nt - 3);
        let s = (t - self.t[k]) / h;
        let (a, b, c, d) = (v[k - 1], v[k], v[k + 1], v[k + 2]);
        // Lagrange on nodes −1, 0, 1, 2.
        -s * (s - 1.0) * (s - 2.0) / 6.0 * a + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * b
            - (s + 1.0) * s * (s - 2.0) / 2.0 * c
            + (s + 1.0) * s * (s - 1.0) / 6.0 * d
    }

    /// d/dr of the interpolant.
    pub fn eval_deriv(&self, i: usize, r: f64) -> f64 {
        let v = &self.values[i];
        let nt = self.t.len();
        let t = r.ln();
        if t <= self.t[0] || t >= self.t[nt - 1] {
            return 0.0;
        }
        let h = self.t[1] - self.t[0];
        let k = (((t - self.t[0]) / h).floor() as usize).clamp(1, nt - 3);
        let s = (t - self.t[k]) / h;
        let (a, b, c, d) = (v[k - 1], v[k], v[k + 1], v[k + 2]);
        let da = -(3.0 * s * s - 6.0 * s + 2.0) / 6.0;
        let db = (3.0 * s * s - 4.0 * s - 1.0) / 2.0;
        let dc = -(3.0 * s * s - 2.0 * s - 2.0) / 2.0;
        let dd = (3.0 * s * s - 1.0) / 6.0;
        (da * a + db * b + dc * c + dd * d) / (h * r)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Solution g of a frequency-ℓ correction problem.
#[derive(Debug, Clone)]
pub struct CorrectionProfile {
    pub ell: u32,
    pub r_out: f64,
    pub samples: RadialSamples,
    /// Max difference between the solve and its grid-doubled counterpart.
    pub error_estimate: f64,
    /// Smallest |eigenvalue| estimate of the discrete operator, and the operator norm.
    pub sigma_min: f64,
    pub op_norm: f64,
    /// True when the kernel direction was projected out.
    pub projected: bool,
}

impl CorrectionProfile {
    pub fn eval(&self, i: usize, r: f64) -> f64 {
        let s = &self.samples;
        let r0 = s.r[0];
        if r >= self.r_out {
            return if self.ell == 0 { s.values[i][s.r.len() - 1] } else { 0.0 };
        }
        if r <= r0 {
            return s.values[i][0] * (r / r0).powi(self.ell as i32);
        }
        s.eval(i, r)
    }

    pub fn eval_deriv(&self, i: usize, r: f64) -> f64 {
        let s = &self.samples;
        let r0 = s.r[0];
        if r >= self.r_out {
            return 0.0;
        }
        if r <= r0 {
            let l = self.ell as i32;
            return if l == 0 { 0.0 } else { l as f64 * s.values[i][0] * (r / r0).powi(l - 1) / r0 };
        }
        s.eval_deriv(i, r)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples
            .values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

pub(crate) fn block_tridiag_solve(
    lower: &[DMatrix<f64>],
    diag: &[DMatrix<f64>],
    upper: &[DMatrix<f64>],
    rhs: &[DVector<f64>],
) -> Option<Vec<DVector<f64>>> {
    let k = diag.len();
    let mut cp: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    let mut dp: Vec<DVector<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let (den, rhs_i) = if i == 0 {
            (diag[0].clone(), rhs[0].clone())
        } else {
            (&diag[i] - &lower[i] * &cp[i - 1], &rhs[i] - &lower[i] * &dp[i - 1])
        };
        let lu = den.lu();
        cp.push(lu.solve(&upper[i])?);
        dp.push(lu.solve(&rhs_i)?);
    }
    let mut x = vec![DVector::zeros(rhs[0].len()); k];
    x[k - 1] = dp[k - 1].clone();
    for i in (0..k - 1).rev() {
        x[i] = &dp[i] - &cp[i] * &x[i + 1];
    }
    Some(x)
}

/// Discrete operator of g_tt − ℓ²g + r² M(r) g (scaled by h²) with the boundary rows.
struct Assembled {
    lower: Vec<DMatrix<f64>>,
    diag: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
}

impl Assembled {
    fn apply_norm(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.diag.len() {
            for i in 0..self.diag[k].nrows() {
                let s: f64 = self.lower[k].row(i).iter().map(|x| x.abs()).sum::<f64>()
                    + self.diag[k].row(i).iter().map(|x| x.abs()).sum::<f64>()
                    + self.upper[k].row(i).iter().map(|x| x.abs()).sum::<f64>();
                worst = worst.max(s);
            }
        }
        worst
    }

    fn solve(&self, rhs: &[DVector<f64>]) -> Option<Vec<DVector<f64>>> {
        block_tridiag_solve(&self.lower, &self.diag, &self.upper, rhs)
    }

    /// Inverse iteration estimate of the smallest |eigenvalue|.
    fn sigma_min_estimate(&self) -> f64 {
        let k = self.diag.len();
        let n = self.diag[0].nrows();
        let mut x: Vec<DVector<f64>> = (0..k)
            .map(|i| DVector::from_fn(n, |c, _| ((i * n + c) as f64 * 0.7 + 0.3).sin()))
            .collect();
        let norm = |v: &[DVector<f64>]| v.iter().map(|a| a.norm_squared()).sum::<f64>().sqrt();
        let mut est = f64::INFINITY;
        for _ in 0..40 {
            let nx = norm(&x);
            let y = match self.solve(&x) {
                Some(y) => y,
                None => return 0.0,
            };
            let ny = norm(&y);
            if !ny.is_finite() || ny == 0.0 {
                return 0.0;
            }
            let new = nx / ny;
            let done = (new - est).abs() < 1e-6 * new;
            est = new;
            x = y.into_iter().map(|v| v / ny).collect();
            if done {
                break;
            }
        }
        est
    }
}

/// Grid shared by the frequency solves.
#[derive(Debug, Clone, Copy)]
pub struct FrequencyGrid {
    pub r_min: f64,
    /// Nodes per unit of ln r.
    pub nodes_per_unit: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            nodes_per_unit: 64,
        }
    }
}

pub(crate) fn log_grid(r_min: f64, r_out: f64, per_unit: usize) -> (Vec<f64>, Vec<f64>) {
    let t0 = r_min.ln();
    let t1 = r_out.ln();
    let nodes = (((t1 - t0) * per_unit as f64).ceil() as usize).max(8);
    let h = (t1 - t0) / nodes as f64;
    let t: Vec<f64> = (0..=nodes).map(|k| t0 + k as f64 * h).collect();
    let r = t.iter().map(|x| x.exp()).collect();
    (t, r)
}

/// Potential matrix M_ij(r) = a_ij H_j(0) e^{V_j(r)}.
fn potential(b: &RadialBubble, h0: &[f64], r: f64) -> DMatrix<f64> {
    let n = b.n();
    let ev: Vec<f64> = (0..n).map(|j| b.eval(j, r).0.exp()).collect();
    DMatrix::from_fn(n, n, |i, j| b.coupling.get(i, j) * h0[j] * ev[j])
}

fn assemble(b: &RadialBubble, ell: u32, h0: &[f64], t: &[f64], r: &[f64]) -> Assembled {
    let n = b.n();
    let h = t[1] - t[0];
    let l2 = (ell * ell) as f64;
    let k = t.len() - 1; // unknowns 0..k−1, node k carries the Dirichlet value
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lower = Vec::with_capacity(k);
    let mut diag = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for i in 0..k {
        let m = potential(b, h0, r[i]) * (r[i] * r[i] * h * h);
        let d = &eye * (-2.0 - l2 * h * h) + m;
        if i == 0 {
            // Ghost node from the regular behaviour g ~ r^ℓ: g_{−1} = g_1 − 2hℓ g_0.
            lower.push(DMatrix::zeros(n, n));
            diag.push(d - &eye * (2.0 * h * ell as f64));
            upper.push(&eye * 2.0);
        } else {
            lower.push(eye.clone());
            diag.push(d);
            upper.push(if i + 1 < k { eye.clone() } else { DMatrix::zeros(n, n) });
        }
    }
    Assembled { lower, diag, upper }
}

fn solve_on_grid(
    b: &RadialBubble,
    ell: u32,
    h0: &[f64],
    source: &dyn Fn(usize, f64) -> f64,
    t: &[f64],
    r: &[f64],
    want_sigma: bool,
) -> Result<(Vec<Vec<f64>>, f64, f64)> {
    let n = b.n();
    let h = t[1] - t[0];
    let nodes = t.len();
    if ell == 0 {
        // Initial-value problem g(0) = g'(0) = 0, marched with the three-point recurrence.
        let mut g = vec![DVector::<f64>::zeros(n); nodes];
        for k in 1..nodes - 1 {
            let m = potential(b, h0, r[k]);
            let s = DVector::from_fn(n, |i, _| source(i, r[k]));
            let acc = (&s - &m * &g[k]) * (r[k] * r[k]);
            g[k + 1] = &g[k] * 2.0 - &g[k - 1] + acc * (h * h);
        }
        let vals = (0..n).map(|i| g.iter().map(|v| v[i]).collect()).collect();
        return Ok((vals, f64::NAN, f64::NAN));
    }
    let op = assemble(b, ell, h0, t, r);
    let rhs: Vec<DVector<f64>> = (0..nodes - 1)
        .map(|k| DVector::from_fn(n, |i, _| source(i, r[k]) * r[k] * r[k] * h * h))
        .collect();
    let (sig, norm) = if want_sigma {
        (op.sigma_min_estimate(), op.apply_norm())
    } else {
        (f64::NAN, f64::NAN)
    };
    if want_sigma && sig < 1e-8 * norm {
        return Err(Error::RequiresProjection {
            sigma_min: sig,
            norm,
        });
    }
    let x = op
        .solve(&rhs)
        .ok_or_else(|| Error::RequiresProjection { sigma_min: 0.0, norm: op.apply_norm() })?;
    let vals = (0..n)
        .map(|i| {
            let mut v: Vec<f64> = x.iter().map(|xk| xk[i]).collect();
            v.push(0.0);
            v
        })
        .collect();
    Ok((vals, sig, norm))
}

/// Solves g_i'' + g_i'/r − (ℓ²/r²)g_i + Σ_j a_ij H_j(0)e^{V_j}g_j = source_i(r),
/// regular at 0 and, for ℓ ≥ 1, g = 0 at `r_out`. For ℓ = 0, g(0) = g'(0) = 0.
/// The result is Richardson-extrapolated from the grid and its refinement.
pub fn solve_frequency(
    b: &RadialBubble,
    ell: u32,
    h0: &[f64],
    source: &dyn Fn(usize, f64) -> f64,
    r_out: f64,
    grid: FrequencyGrid,
) -> Result<CorrectionProfile> {
    if ell > 2 {
        return Err(Error::Config(format!("frequency {ell} not supported")));
    }
    if h0.len() != b.n() {
        return Err(Error::Structural("H(0) has the wrong number of components".into()));
    }
    let (t, r) = log_grid(grid.r_min, r_out, grid.nodes_per_unit);
    let h = t[1] - t[0];
    let tf: Vec<f64> = (0..2 * t.len() - 1).map(|k| t[0] + k as f64 * 0.5 * h).collect();
    let rf: Vec<f64> = tf.iter().map(|x| x.exp()).collect();
    let (coarse, sig, norm) = solve_on_grid(b, ell, h0, source, &t, &r, true)?;
    let (fine, _, _) = solve_on_grid(b, ell, h0, source, &tf, &rf, false)?;
    let n = b.n();
    let mut err = 0.0f64;
    let values: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..t.len())
                .map(|k| {
                    let f = fine[i][2 * k];
                    let c = coarse[i][k];
                    err = err.max((f - c).abs());
                    (4.0 * f - c) / 3.0
                })
                .collect()
        })
        .collect();
    Ok(CorrectionProfile {
        ell,
        r_out,
        samples: RadialSamples { t, r, values },
        error_estimate: err,
        sigma_min: sig,
        op_norm: norm,
        projected: false,
    })
}

/// Source of the first-order problem in direction s: −ε Σ_j a_ij H_j(0) ∂_s ln h_j(0) r e^{V_j}.
pub fn first_order_source<'a>(
    b: &'a RadialBubble,
    h: &'a [HLocalData],
    eps: f64,
    s: usize,
) -> impl Fn(usize, f64) -> f64 + 'a {
    move |i, r| {
        let n = b.n();
        -eps * r
            * (0..n)
                .map(|j| b.coupling.get(i, j) * h[j].value * h[j].grad[s] * b.eval(j, r).0.exp())
                .sum::<f64>()
    }
}

/// Second-order sources on the radial grid of the first-order profiles.
#[derive(Debug, Clone)]
pub struct SecondOrderSources {
    /// Frequency-0 source.
    pub zero: RadialSamples,
    /// Coefficient of cos 2θ.
    pub cos2: RadialSamples,
    /// Coefficient of sin 2θ.
    pub sin2: RadialSamples,
}

/// Builds the ℓ = 0 and ℓ = 2 sources from the Taylor expansion of H and the first-order
/// profiles `g1 = [g_{·,1}, g_{·,2}]` (cos θ and sin θ coefficients).
pub fn second_order_source(
    b: &RadialBubble,
    h: &[HLocalData],
    eps: f64,
    g1: &[CorrectionProfile; 2],
) -> SecondOrderSources {
    let n = b.n();
    let samples = &g1[0].samples;
    let t = samples.t.clone();
    let r = samples.r.clone();
    let mut zero = vec![vec![0.0; r.len()]; n];
    let mut cos2 = vec![vec![0.0; r.len()]; n];
    let mut sin2 = vec![vec![0.0; r.len()]; n];
    for (k, &rk) in r.iter().enumerate() {
        let w: Vec<f64> = (0..n).map(|j| h[j].value * b.eval(j, rk).0.exp()).collect();
        let mut e0 = vec![0.0; n];
        let mut ec = vec![0.0; n];
        let mut es = vec![0.0; n];
        for j in 0..n {
            let p = g1[0].eval(j, rk) + eps * rk * h[j].grad[0];
            let q = g1[1].eval(j, rk) + eps * rk * h[j].grad[1];
            let er2 = eps * eps * rk * rk;
            e0[j] = 0.25 * (er2 * h[j].laplacian() + p * p + q * q);
            ec[j] = 0.25 * (er2 * (h[j].hess[0][0] - h[j].hess[1][1]) + p * p - q * q);
            es[j] = 0.5 * (er2 * h[j].hess[0][1] + p * q);
        }
        for i in 0..n {
            for j in 0..n {
                let c = b.coupling.get(i, j) * w[j];
                zero[i][k] += c * e0[j];
                cos2[i][k] += c * ec[j];
                sin2[i][k] += c * es[j];
            }
        }
    }
    let mk = |values| RadialSamples {
        t: t.clone(),
        r: r.clone(),
        values,
    };
    SecondOrderSources {
        zero: mk(zero),
        cos2: mk(cos2),
        sin2: mk(sin2),
    }
}

/// 2π ∫_0^{R} e^{V_i} Z_{0,i} r³ dr for each component.
pub fn z0_second_moment(b: &RadialBubble, r_out: f64) -> Vec<f64> {
    let t0 = (1e-6f64).ln();
    let t1 = r_out.ln();
    let nodes = (((t1 - t0) / 0.004).ceil() as usize) | 1;
    let h = (t1 - t0) / (nodes - 1) as f64;
    let w = simpson_weights(nodes, h);
    (0..b.n())
        .map(|i| {
            2.0 * PI
                * (0..nodes)
                    .map(|k| {
                        let r = (t0 + k as f64 * h).exp();
                        let (v, dv) = b.eval(i, r);
                        w[k] * v.exp() * (r * dv + 2.0) * r.powi(4)
                    })
                    .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BCoefficient {
    pub b: Vec<f64>,
    /// b_i/(ε² ln(1/ε)).
    pub ratio: Vec<f64>,
    /// 2π ∫_{B_R} e^{V_j} Z_{0,j} r² r dr per component.
    pub moments: Vec<f64>,
    pub warning: Option<String>,
}

/// b_i = −Σ_j a_ij m_j H_j(0)[Δln h_j(0) + |∇ln h_j(0)|²] ε² ∫_{B_R} e^{V_j} Z_{0,j} |y|² dy.
pub fn b_coefficient(b: &RadialBubble, h: &[HLocalData], eps: f64, r_out: f64) -> BCoefficient {
    let n = b.n();
    let moments = z0_second_moment(b, r_out);
    let bs: Vec<f64> = (0..n)
        .map(|i| {
            -(0..n)
                .map(|j| {
                    b.coupling.get(i, j)
                        * b.m[j]
                        * h[j].value
                        * (h[j].laplacian() + h[j].grad_sq())
                        * eps
                        * eps
                        * moments[j]
                })
                .sum::<f64>()
        })
        .collect();
    let denom = eps * eps * (1.0 / eps).ln();
    let m_star = b.m.iter().cloned().fold(f64::INFINITY, f64::min);
    BCoefficient {
        ratio: bs.iter().map(|x| x / denom).collect(),
        b: bs,
        moments,
        warning: ((m_star - 4.0).abs() > 1e-6)
            .then(|| format!("m* = {m_star}: b-coefficients belong to the m* = 4 regime")),
    }
}

/// Per-component samples of a field over a polar grid: values[i][k_r][k_θ].
#[derive(Debug, Clone)]
pub struct PolarField {
    pub grid: PolarGrid,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl PolarField {
    pub fn from_fn(grid: PolarGrid, n: usize, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let values = (0..n)
            .map(|i| {
                grid.r
                    .iter()
                    .map(|&r| grid.theta.iter().map(|&th| f(i, r, th)).collect())
                    .collect()
            })
            .collect();
        Self { grid, values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Σ_i ∫ self_i · other_i.
    pub fn pair(&self, other: &PolarField) -> f64 {
        (0..self.n())
            .map(|i| {
                let prod: Vec<Vec<f64>> = self.values[i]
                    .iter()
                    .zip(&other.values[i])
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
                    .collect();
                self.grid.integrate(&prod)
            })
            .sum()
    }
}

/// Kernel coefficients b_l from Σ_i ∫ e^{V_i} Z_{l,i}(field_i − b_l Z_{l,i}) = 0.
pub fn project_kernels(field: &PolarField, b: &RadialBubble) -> Result<[f64; 3]> {
    let g = &field.grid;
    let n = b.n();
    let mut num = [0.0; 3];
    let mut den = [0.0; 3];
    for i in 0..n {
        for (kr, &r) in g.r.iter().enumerate() {
            let (v, dv) = b.eval(i, r);
            let ev = v.exp();
            let z0 = r * dv + 2.0;
            for (kt, &th) in g.theta.iter().enumerate() {
                let z = [z0, dv * th.cos(), dv * th.sin()];
                let w = g.w_r[kr] * g.d_theta * ev;
                let f = field.values[i][kr][kt];
                for l in 0..3 {
                    num[l] += w * z[l] * f;
                    den[l] += w * z[l] * z[l];
                }
            }
        }
    }
    let mut out = [0.0; 3];
    for l in 0..3 {
        if den[l].abs() < 1e-300 {
            return Err(Error::Degenerate(format!("vanishing Gram value for kernel {l}")));
        }
        out[l] = num[l] / den[l];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingMatrix;
    use crate::radial_bubble::solve_radial;

    fn scalar() -> RadialBubble {
        solve_radial(&CouplingMatrix::scalar(), &[8f64.ln()], 200.0, 1e-10).unwrap()
    }

    #[test]
    fn scalar_kernel_closed_form() {
        let b = scalar();
        let k = kernel_fields(&b);
        for (idx, &r) in b.r.iter().enumerate().step_by(97) {
            let exact = 2.0 * (1.0 - r * r) / (1.0 + r * r);
            assert!((k.z0[0][idx] - exact).abs() < 1e-8, "r={r}");
        }
        assert!(k.residual_z0 < 1e-9, "{}", k.residual_z0);
        assert!(k.residual_z1 < 1e-9, "{}", k.residual_z1);
    }

    #[test]
    fn frequency_solve_against_exact_solution() {
        // g = r(1 − r²/R²)e^{-r} (vanishes at R) generates its own source.
        let b = scalar();
        let r_out = 20.0;
        let gex = |r: f64| r * (1.0 - r * r / (r_out * r_out)) * (-r).exp();
        let lap1 = |r: f64| {
            let d = 1e-4 * r.max(1e-3);
            let g0 = gex(r);
            let gp = (gex(r + d) - gex(r - d)) / (2.0 * d);
            let gpp = (gex(r + d) - 2.0 * g0 + gex(r - d)) / (d * d);
            gpp + gp / r - g0 / (r * r)
        };
        let src = |_: usize, r: f64| lap1(r) + b.eval(0, r).0.exp() * gex(r);
        let p = solve_frequency(&b, 1, &[1.0], &src, r_out, FrequencyGrid::default()).unwrap();
        for &r in &[0.1, 1.0, 3.0, 10.0] {
            assert!((p.eval(0, r) - gex(r)).abs() < 1e-6, "r={r}: {} vs {}", p.eval(0, r), gex(r));
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let b = scalar();
        let p = solve_frequency(&b, 1, &[1.0], &|_, _| 0.0, 50.0, FrequencyGrid::default()).unwrap();
        assert_eq!(p.sup_norm(), 0.0);
        let p = solve_frequency(&b, 0, &[1.0], &|_, _| 0.0, 50.0, FrequencyGrid::default()).unwrap();
        assert_eq!(p.sup_norm(), 0.0);
    }

    #[test]
    fn kernel_projection_picks_modes() {
        let b = scalar();
        let grid = PolarGrid::new(1e-4, 150.0, 1201, 32);
        let z1 = PolarField::from_fn(grid.clone(), 1, |i, r, th| b.eval(i, r).1 * th.cos());
        let p = project_kernels(&z1, &b).unwrap();
        assert!(p[0].abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12 && p[2].abs() < 1e-12);
        let z0 = PolarField::from_fn(grid, 1, |i, r, th| {
            2.5 * (r * b.eval(i, r).1 + 2.0) + (3.0 * th).cos() / (1.0 + r)
        });
        let p = project_kernels(&z0, &b).unwrap();
        assert!((p[0] - 2.5).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
    }
}
