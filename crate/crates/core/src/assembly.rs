//! Approximate multi-bubble solutions on the torus and their consistency checks.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{lambda_in, lambda_scale, m_star, CouplingMatrix, ParamVector};
use crate::criteria::{epsilon_ratios, h_matrix};
use crate::error::{Error, Result};
use crate::fredholm::{chi, FirstOrder};
use crate::linearized::HLocalData;
use crate::quad::PolarGrid;
use crate::radial_bubble::{match_sigma, RadialBubble};
use crate::spectral::SpectralField;
use crate::torus::{check_distinct, d_min, se1_residual, torus_dist, wrap_disp, HField, Point, TorusGreen};

/// A blowup family at a fixed base scale.
#[derive(Debug, Clone)]
pub struct BlowupConfig {
    pub coupling: CouplingMatrix,
    pub rho: ParamVector,
    pub points: Vec<Point>,
    pub h: Vec<HField>,
    pub eps_1: f64,
    pub eps: Vec<f64>,
    pub tau: f64,
    pub bubble: RadialBubble,
    pub green: TorusGreen,
    /// G*(q_t; q_t).
    pub g_star_self: Vec<f64>,
    pub warnings: Vec<String>,
}

fn reference_distance(points: &[Point]) -> f64 {
    if points.len() == 1 {
        1.0
    } else {
        d_min(points)
    }
}

/// Default disk radius: a quarter of the minimal separation.
pub fn default_tau(points: &[Point]) -> f64 {
    reference_distance(points) / 4.0
}

impl BlowupConfig {
    pub fn new(
        coupling: CouplingMatrix,
        rho: ParamVector,
        points: Vec<Point>,
        h: Vec<HField>,
        eps_1: f64,
        tau: f64,
        bubble: RadialBubble,
    ) -> Result<Self> {
        let n = coupling.n();
        if rho.rho.len() != n || h.len() != n || bubble.n() != n {
            return Err(Error::Structural("component counts disagree".into()));
        }
        if rho.n_points != points.len() {
            return Err(Error::Config(format!(
                "rho is set up for {} points, {} given",
                rho.n_points,
                points.len()
            )));
        }
        check_distinct(&points)?;
        let lam = lambda_in(&coupling, &rho);
        if lam.abs() > 1e-10 * lambda_scale(&rho) {
            return Err(Error::Config(format!("rho is off the critical surface: Λ = {lam:e}")));
        }
        let d_ref = reference_distance(&points);
        if !(eps_1 > 0.0 && eps_1 < d_ref / 10.0) {
            return Err(Error::Config(format!("eps_1 = {eps_1} outside (0, {})", d_ref / 10.0)));
        }
        if !(tau > 0.0 && tau <= d_ref / 4.0 + 1e-15) {
            return Err(Error::Config(format!("tau = {tau} outside (0, {}]", d_ref / 4.0)));
        }
        let md = m_star(&coupling, &rho);
        if !md.integrable {
            return Err(Error::NonIntegrable(format!("m* = {}", md.m_star)));
        }
        for i in 0..n {
            let rel = (bubble.sigma[i] - md.sigma[i]).abs() / md.sigma[i];
            if rel > 1e-6 {
                return Err(Error::Config(format!(
                    "bubble mass σ_{} = {} does not match ρ/(2πN) = {}",
                    i + 1,
                    bubble.sigma[i],
                    md.sigma[i]
                )));
            }
        }
        let green = TorusGreen::default();
        let hm = h_matrix(&green, &points, &h, &bubble.m)?;
        let er = epsilon_ratios(&hm, &bubble.m, eps_1)?;
        let mut warnings = Vec::new();
        warnings.extend(er.warning);
        let eps_min = er.eps.iter().cloned().fold(f64::INFINITY, f64::min);
        if bubble.r_max < tau / eps_min {
            return Err(Error::Resolution(format!(
                "bubble integrated to R = {}, need at least τ/ε = {}",
                bubble.r_max,
                tau / eps_min
            )));
        }
        let g_star_self = (0..points.len())
            .map(|t| green.g_star(points[t], &points, t))
            .collect::<Result<_>>()?;
        Ok(Self {
            coupling,
            rho,
            points,
            h,
            eps_1,
            eps: er.eps,
            tau,
            bubble,
            green,
            g_star_self,
            warnings,
        })
    }

    /// Builds the bubble by matching σ = ρ/(2πN), with α_1 fixed at `alpha_1`.
    pub fn with_matched_bubble(
        coupling: CouplingMatrix,
        rho: ParamVector,
        points: Vec<Point>,
        h: Vec<HField>,
        eps_1: f64,
        tau: f64,
        alpha_1: f64,
    ) -> Result<Self> {
        let md = m_star(&coupling, &rho);
        if !md.integrable {
            return Err(Error::NonIntegrable(format!("m* = {}", md.m_star)));
        }
        check_distinct(&points)?;
        let green = TorusGreen::default();
        let hm = h_matrix(&green, &points, &h, &md.m)?;
        let er = epsilon_ratios(&hm, &md.m, eps_1)?;
        let eps_min = er.eps.iter().cloned().fold(f64::INFINITY, f64::min);
        let r_max = (4.0 * tau / eps_min).max(1e3);
        let alpha: Vec<f64> = vec![alpha_1; coupling.n()];
        let bubble = match_sigma(&coupling, &md.sigma, &alpha, r_max, 1e-10)?;
        Self::new(coupling, rho, points, h, eps_1, tau, bubble)
    }

    pub fn n(&self) -> usize {
        self.coupling.n()
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Outer constant ū_i as seen from each point t; these agree when the scales are consistent.
    pub fn u_bar_per_point(&self, i: usize) -> Vec<f64> {
        let m = self.bubble.m[i];
        (0..self.n_points())
            .map(|t| {
                let q = self.points[t];
                (1.0 - m / 2.0) * 2.0 * (1.0 / self.eps[t]).ln()
                    - (self.rho.rho[i] * self.h[i].h(q)).ln()
                    - 2.0 * PI * m * self.g_star_self[t]
                    + self.bubble.big_i[i]
            })
            .collect()
    }

    fn u_bar(&self, i: usize) -> f64 {
        self.u_bar_per_point(i)[0]
    }

    /// Inner form around q_t.
    pub fn inner(&self, i: usize, t: usize, x: Point) -> Result<f64> {
        let q = self.points[t];
        let e = self.eps[t];
        let d = torus_dist(x, q);
        let gs = self.green.g_star(x, &self.points, t)?;
        Ok(self.bubble.eval(i, d / e).0 - 2.0 * e.ln() - (self.rho.rho[i] * self.h[i].h(q)).ln()
            + 2.0 * PI * self.bubble.m[i] * (gs - self.g_star_self[t]))
    }

    /// Outer Green-sum form.
    pub fn outer(&self, i: usize, x: Point) -> Result<f64> {
        Ok(self.u_bar(i) + 2.0 * PI * self.bubble.m[i] * self.green.green_sum(x, &self.points)?)
    }

    /// Closest point and its distance.
    fn nearest(&self, x: Point) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(t, &q)| (t, torus_dist(x, q)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Assembled u_i(x): inner form on B_{τ/2}, outer form off B_τ, C² blend between.
    pub fn u(&self, i: usize, x: Point) -> Result<f64> {
        let (t, d) = self.nearest(x);
        if d >= self.tau {
            return self.outer(i, x);
        }
        let inner = self.inner(i, t, x)?;
        if d <= self.tau / 2.0 {
            return Ok(inner);
        }
        let w = chi(d, self.tau / 2.0);
        Ok(w * inner + (1.0 - w) * self.outer(i, x)?)
    }

    /// Chart data of the local weight at q_t.
    pub fn chart_data(&self, t: usize) -> Result<Vec<HLocalData>> {
        local_chart(&self.green, &self.points, &self.h, &self.bubble.m, t)
    }
}

/// Chart data of H_i = h_i e^{2πm_i(G* − G*(q_t))} at q_t, normalized to H_i(q_t) = 1.
pub fn local_chart(
    green: &TorusGreen,
    points: &[Point],
    h: &[HField],
    m: &[f64],
    t: usize,
) -> Result<Vec<HLocalData>> {
    let q = points[t];
    let gj = green.g_star_jet(q, points, t)?;
    Ok(h
        .iter()
        .zip(m)
        .map(|(hi, &mi)| {
            let lj = hi.ln_jet(q);
            let c = 2.0 * PI * mi;
            let mut hess = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    hess[a][b] = lj.hess[a][b] + c * gj.hess[a][b];
                }
            }
            HLocalData {
                value: 1.0,
                grad: [lj.grad[0] + c * gj.grad[0], lj.grad[1] + c * gj.grad[1]],
                hess,
            }
        })
        .collect())
}

/// u_i sampled on the n×n torus grid at points (a/n, b/n).
#[derive(Debug, Clone, Serialize)]
pub struct ApproxSolution {
    pub n_grid: usize,
    pub values: Vec<Vec<f64>>,
    /// Index of the disk B_τ(q_t) containing each grid point, if any.
    pub labels: Vec<Option<usize>>,
    /// Outer constants ū_i (the averages ∫u_i).
    pub u_bar: Vec<f64>,
    /// Largest disagreement of ū_i between points.
    pub u_bar_spread: f64,
    /// Sup over ∂B_τ(q_t) of |inner − outer|, indexed [i][t].
    pub mismatch: Vec<Vec<f64>>,
}

impl ApproxSolution {
    pub fn max_mismatch(&self) -> f64 {
        self.mismatch.iter().flatten().fold(0.0f64, |a, &b| a.max(b))
    }
}

fn grid_point(k: usize, n: usize) -> Point {
    [(k / n) as f64 / n as f64, (k % n) as f64 / n as f64]
}

/// Sup over ∂B_τ(q_t) of |inner − outer|, indexed [i][t].
pub fn mismatch(config: &BlowupConfig) -> Result<Vec<Vec<f64>>> {
    const SAMPLES: usize = 64;
    (0..config.n())
        .map(|i| {
            (0..config.n_points())
                .map(|t| {
                    let q = config.points[t];
                    let mut worst = 0.0f64;
                    for k in 0..SAMPLES {
                        let th = 2.0 * PI * k as f64 / SAMPLES as f64;
                        let x = [q[0] + config.tau * th.cos(), q[1] + config.tau * th.sin()];
                        let diff = config.inner(i, t, x)? - config.outer(i, x)?;
                        worst = worst.max(diff.abs());
                    }
                    Ok(worst)
                })
                .collect()
        })
        .collect()
}

pub fn assemble(config: &BlowupConfig, n_grid: usize) -> Result<ApproxSolution> {
    let n = config.n();
    let total = n_grid * n_grid;
    let rows: Vec<(Vec<f64>, Option<usize>)> = (0..total)
        .into_par_iter()
        .map(|k| {
            let x = grid_point(k, n_grid);
            let (t, d) = config.nearest(x);
            let vals = (0..n).map(|i| config.u(i, x)).collect::<Result<Vec<f64>>>()?;
            Ok((vals, (d < config.tau).then_some(t)))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; total]; n];
    let mut labels = Vec::with_capacity(total);
    for (k, (v, l)) in rows.into_iter().enumerate() {
        for i in 0..n {
            values[i][k] = v[i];
        }
        labels.push(l);
    }
    let mut spread = 0.0f64;
    let mut u_bar = Vec::with_capacity(n);
    for i in 0..n {
        let per = config.u_bar_per_point(i);
        let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
        u_bar.push(per[0]);
    }
    Ok(ApproxSolution {
        n_grid,
        values,
        labels,
        u_bar,
        u_bar_spread: spread,
        mismatch: mismatch(config)?,
    })
}

/// Polar resolution used around each point for integrals of h e^u.
const POLAR_NR: usize = 1201;
const POLAR_NTHETA: usize = 64;

/// ∫ h_i e^{u_i} ξ_i for every i: polar quadrature on B_{2τ}(q_t) weighted by χ,
/// grid quadrature of the remainder.
fn weighted_integrals(
    config: &BlowupConfig,
    sol: &ApproxSolution,
    xi: &(dyn Fn(usize, Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let n = config.n();
    let tau = config.tau;
    let ng = sol.n_grid;
    let cell = 1.0 / (ng * ng) as f64;
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let grid_part: f64 = (0..ng * ng)
            .into_par_iter()
            .map(|k| {
                let x = grid_point(k, ng);
                let psi: f64 = config.points.iter().map(|&q| chi(torus_dist(x, q), tau)).sum();
                (1.0 - psi) * config.h[i].h(x) * sol.values[i][k].exp() * xi(i, x)
            })
            .sum();
        *o = grid_part * cell;
    }
    for t in 0..config.n_points() {
        let q = config.points[t];
        let grid = PolarGrid::new(config.eps[t] * 1e-6, 2.0 * tau, POLAR_NR, POLAR_NTHETA);
        for (i, o) in out.iter_mut().enumerate() {
            let rows: Vec<Vec<f64>> = grid
                .r
                .par_iter()
                .map(|&r| {
                    grid.theta
                        .iter()
                        .map(|&th| {
                            let x = [q[0] + r * th.cos(), q[1] + r * th.sin()];
                            Ok(chi(r, tau) * config.h[i].h(x) * config.u(i, x)?.exp() * xi(i, x))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            *o += grid.integrate(&rows);
        }
    }
    Ok(out)
}

/// ∫_T h_i e^{u_i} for each component.
pub fn mass_integrals(config: &BlowupConfig, sol: &ApproxSolution) -> Result<Vec<f64>> {
    weighted_integrals(config, sol, &|_, _| 1.0)
}

/// Σ_j a_ij ρ_j ∫ h_j e^{u_j} ξ_j for each i.
pub fn global_cancellation(
    config: &BlowupConfig,
    sol: &ApproxSolution,
    xi: &(dyn Fn(usize, Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let w = weighted_integrals(config, sol, xi)?;
    let n = config.n();
    Ok((0..n)
        .map(|i| (0..n).map(|j| config.coupling.get(i, j) * config.rho.rho[j] * w[j]).sum())
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// −Δu_i − Σ_j a_ij ρ_j (h_j e^{u_j}/∫h_j e^{u_j} − 1) on the grid.
    #[serde(skip)]
    pub fields: Vec<Vec<f64>>,
    /// L² norm over the grid outside the excluded disks.
    pub l2: Vec<f64>,
    pub sup: Vec<f64>,
    pub masses: Vec<f64>,
    pub tail_fraction: f64,
    pub exclude_radius: f64,
}

/// Spectral residual of the assembled field. Norms skip B_{exclude}(q_t).
pub fn residual(config: &BlowupConfig, sol: &ApproxSolution, exclude: f64) -> Result<ResidualReport> {
    let n = config.n();
    let ng = sol.n_grid;
    let sf = SpectralField::new(ng, 1.0);
    let masses = mass_integrals(config, sol)?;
    let mut laps = Vec::with_capacity(n);
    let mut tail = 0.0f64;
    for i in 0..n {
        let (lap, diag) = sf.laplacian(&sol.values[i]);
        tail = tail.max(diag.tail_fraction);
        laps.push(lap);
    }
    if tail > 1e-3 {
        return Err(Error::Resolution(format!(
            "spectral tail holds {tail:e} of the energy; refine the grid"
        )));
    }
    let hx: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..ng * ng).map(|k| config.h[j].h(grid_point(k, ng))).collect())
        .collect();
    let mask: Vec<bool> = (0..ng * ng)
        .map(|k| {
            let x = grid_point(k, ng);
            config.points.iter().all(|&q| torus_dist(x, q) >= exclude)
        })
        .collect();
    let cell = 1.0 / (ng * ng) as f64;
    let mut fields = Vec::with_capacity(n);
    let (mut l2, mut sup) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let f: Vec<f64> = (0..ng * ng)
            .map(|k| {
                let rhs: f64 = (0..n)
                    .map(|j| {
                        config.coupling.get(i, j)
                            * config.rho.rho[j]
                            * (hx[j][k] * sol.values[j][k].exp() / masses[j] - 1.0)
                    })
                    .sum();
                -laps[i][k] - rhs
            })
            .collect();
        let (mut s2, mut s) = (0.0, 0.0f64);
        for (k, v) in f.iter().enumerate() {
            if mask[k] {
                s2 += v * v * cell;
                s = s.max(v.abs());
            }
        }
        l2.push(s2.sqrt());
        sup.push(s);
        fields.push(f);
    }
    Ok(ResidualReport {
        fields,
        l2,
        sup,
        masses,
        tail_fraction: tail,
        exclude_radius: exclude,
    })
}

/// Per-point SE1 residual alongside ∇_{q_t} f.
#[derive(Debug, Clone, Serialize)]
pub struct LocationReport {
    pub residuals: Vec<Point>,
    pub grad_f: Vec<Point>,
    pub identity_gap: f64,
}

pub fn location_check(config: &BlowupConfig) -> Result<LocationReport> {
    let md = m_star(&config.coupling, &config.rho);
    let res = se1_residual(&config.green, &config.points, &config.rho.rho, &md.m, &config.h)?;
    let fj = crate::torus::f_functional(&config.green, &config.points, &config.rho.rho, &md.m, &config.h)?;
    let grad_f: Vec<Point> = (0..config.n_points())
        .map(|t| [fj.gradient[2 * t], fj.gradient[2 * t + 1]])
        .collect();
    let gap = res
        .iter()
        .zip(&grad_f)
        .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
        .fold(0.0f64, f64::max);
    Ok(LocationReport {
        residuals: res,
        grad_f,
        identity_gap: gap,
    })
}

/// All components at one point: (value, gradient) per component.
type LocalField<'a> = Box<dyn Fn(Point) -> Vec<(f64, Point)> + Sync + 'a>;

/// Local data on B_R in blown-up coordinates: v_i and H_i with their gradients.
pub struct LocalDisk<'a> {
    pub coupling: &'a CouplingMatrix,
    pub radius: f64,
    pub v: LocalField<'a>,
    pub big_h: LocalField<'a>,
}

fn bubble_field<'a>(b: &'a RadialBubble, correction: Option<&FirstOrder>) -> LocalField<'a> {
    let profiles = correction.map(|c| c.profiles.clone());
    Box::new(move |y| {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        (0..b.n())
            .map(|i| {
                let (v, dv) = b.eval(i, r);
                let mut val = v;
                let mut grad = if r > 0.0 { [dv * y[0] / r, dv * y[1] / r] } else { [0.0, 0.0] };
                if let (Some(p), true) = (&profiles, r > 0.0) {
                    // g(r) y_s / r has gradient k'(r) y_s y / r + k e_s with k = g/r.
                    for (s, prof) in p.iter().enumerate() {
                        let g = prof.eval(i, r);
                        let dg = prof.eval_deriv(i, r);
                        let k = g / r;
                        let dk = dg / r - g / (r * r);
                        val += k * y[s];
                        grad[0] += dk * y[s] * y[0] / r;
                        grad[1] += dk * y[s] * y[1] / r;
                        grad[s] += k;
                    }
                }
                (val, grad)
            })
            .collect()
    })
}

impl<'a> LocalDisk<'a> {
    /// v = V (+ first-order correction), H_i(y) = 1 + ε a_i·y.
    pub fn linear_weight(
        b: &'a RadialBubble,
        a: &[Point],
        eps: f64,
        radius: f64,
        correction: Option<&FirstOrder>,
    ) -> Self {
        let a = a.to_vec();
        Self {
            coupling: &b.coupling,
            radius,
            v: bubble_field(b, correction),
            big_h: Box::new(move |y| {
                a.iter()
                    .map(|ai| {
                        (
                            1.0 + eps * (ai[0] * y[0] + ai[1] * y[1]),
                            [eps * ai[0], eps * ai[1]],
                        )
                    })
                    .collect()
            }),
        }
    }

    /// Inner data around q_t: v = V (+ correction), H_i(y) = h_i(q+εy)/h_i(q)·e^{2πm_i(G*(q+εy) − G*(q))}.
    pub fn from_config(config: &'a BlowupConfig, t: usize, correction: Option<&FirstOrder>) -> Self {
        let q = config.points[t];
        let eps = config.eps[t];
        Self {
            coupling: &config.coupling,
            radius: config.tau / eps,
            v: bubble_field(&config.bubble, correction),
            big_h: Box::new(move |y| {
                let x = [q[0] + eps * y[0], q[1] + eps * y[1]];
                let gj = config
                    .green
                    .g_star_jet(x, &config.points, t)
                    .expect("inside B_τ(q_t) no other point is hit");
                (0..config.n())
                    .map(|i| {
                        let lj = config.h[i].ln_jet(x);
                        let lq = config.h[i].ln_h(q);
                        let c = 2.0 * PI * config.bubble.m[i];
                        let val = (lj.value - lq + c * (gj.value - config.g_star_self[t])).exp();
                        (
                            val,
                            [
                                val * eps * (lj.grad[0] + c * gj.grad[0]),
                                val * eps * (lj.grad[1] + c * gj.grad[1]),
                            ],
                        )
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PohozaevReport {
    pub volume: f64,
    pub boundary: f64,
    pub imbalance: f64,
    /// Change of the imbalance under halving both resolutions.
    pub quadrature_tol: f64,
}

/// (volume, boundary) for both directions.
fn pohozaev_once(disk: &LocalDisk, n_r: usize, n_theta: usize) -> Result<[(f64, f64); 2]> {
    let n = disk.coupling.n();
    let ainv = disk
        .coupling
        .inverse()
        .ok_or_else(|| Error::Singular("coupling matrix is not invertible".into()))?;
    let grid = PolarGrid::new(1e-8, disk.radius, n_r, n_theta);
    let rows: Vec<[Vec<f64>; 2]> = grid
        .r
        .par_iter()
        .map(|&r| {
            let mut out = [vec![0.0; n_theta], vec![0.0; n_theta]];
            for (k, &th) in grid.theta.iter().enumerate() {
                let y = [r * th.cos(), r * th.sin()];
                let hs = (disk.big_h)(y);
                let vs = (disk.v)(y);
                for i in 0..n {
                    let e = vs[i].0.exp();
                    out[0][k] += hs[i].1[0] * e;
                    out[1][k] += hs[i].1[1] * e;
                }
            }
            out
        })
        .collect();
    let vol = |s: usize| {
        let f: Vec<Vec<f64>> = rows.iter().map(|r| r[s].clone()).collect();
        grid.integrate(&f)
    };
    let volume = [vol(0), vol(1)];
    let big_r = disk.radius;
    let dth = 2.0 * PI / n_theta as f64;
    let mut boundary = [0.0; 2];
    for k in 0..n_theta {
        let th = k as f64 * dth;
        let nu = [th.cos(), th.sin()];
        let y = [big_r * nu[0], big_r * nu[1]];
        let vs = (disk.v)(y);
        let hs = (disk.big_h)(y);
        for (s, bs) in boundary.iter_mut().enumerate() {
            let mut f = 0.0;
            for i in 0..n {
                f += nu[s] * hs[i].0 * vs[i].0.exp();
            }
            for i in 0..n {
                for j in 0..n {
                    let gi = vs[i].1;
                    let gj = vs[j].1;
                    let dnu_j = gj[0] * nu[0] + gj[1] * nu[1];
                    let dot = gi[0] * gj[0] + gi[1] * gj[1];
                    f += ainv[(i, j)] * (gi[s] * dnu_j - 0.5 * dot * nu[s]);
                }
            }
            *bs += f * big_r * dth;
        }
    }
    Ok([(volume[0], boundary[0]), (volume[1], boundary[1])])
}

/// Pohozaev balance on the disk in both coordinate directions.
pub fn pohozaev_balance_both(disk: &LocalDisk) -> Result<[PohozaevReport; 2]> {
    let fine = pohozaev_once(disk, 1601, 128)?;
    let coarse = pohozaev_once(disk, 801, 64)?;
    let mut out = [PohozaevReport {
        volume: 0.0,
        boundary: 0.0,
        imbalance: 0.0,
        quadrature_tol: 0.0,
    }; 2];
    for s in 0..2 {
        let (v, b) = fine[s];
        let (v2, b2) = coarse[s];
        let tol = ((v - b) - (v2 - b2)).abs();
        if !tol.is_finite() {
            return Err(Error::Resolution("Pohozaev quadrature is not finite".into()));
        }
        out[s] = PohozaevReport {
            volume: v,
            boundary: b,
            imbalance: v - b,
            quadrature_tol: tol,
        };
    }
    Ok(out)
}

/// Pohozaev balance on the disk in direction s ∈ {0, 1}.
pub fn pohozaev_balance(disk: &LocalDisk, s: usize) -> Result<PohozaevReport> {
    Ok(pohozaev_balance_both(disk)?[s])
}

/// Periodic displacement helper for callers building odd test fields.
pub fn displacement(x: Point, q: Point) -> Point {
    wrap_disp([x[0] - q[0], x[1] - q[1]])
}
