//! Blowup criteria on the torus: H_it, D_it, L_it, the regime table, scale ratios and the
//! leading-order predictions for Λ along a blowup family.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::torus::{check_distinct, d_min, torus_dist, HField, Point, TorusGreen};

/// H_it = 2π m_i G*(q_t; q_t) + ln h_i(q_t), indexed [i][t].
pub fn h_matrix(
    green: &TorusGreen,
    points: &[Point],
    h: &[HField],
    m: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_distinct(points)?;
    let gs: Vec<f64> = (0..points.len())
        .map(|t| green.g_star(points[t], points, t))
        .collect::<Result<_>>()?;
    Ok(h.iter()
        .zip(m)
        .map(|(hi, &mi)| {
            points
                .iter()
                .zip(&gs)
                .map(|(&q, g)| 2.0 * PI * mi * g + hi.ln_h(q))
                .collect()
        })
        .collect())
}

/// L_it = Δln h_i(q_t) + 8πN + |∇ln h_i(q_t) + 8π∇_1G*(q_t; q_t)|² on the flat torus.
pub fn l_coefficients(green: &TorusGreen, points: &[Point], h: &[HField]) -> Result<Vec<Vec<f64>>> {
    check_distinct(points)?;
    let nn = points.len() as f64;
    let grads: Vec<Point> = (0..points.len())
        .map(|t| green.grad_1_g_star(points, t))
        .collect::<Result<_>>()?;
    Ok(h.iter()
        .map(|hi| {
            points
                .iter()
                .zip(&grads)
                .map(|(&q, g)| {
                    let j = hi.ln_jet(q);
                    let gx = j.grad[0] + 8.0 * PI * g[0];
                    let gy = j.grad[1] + 8.0 * PI * g[1];
                    j.hess[0][0] + j.hess[1][1] + 8.0 * PI * nn + gx * gx + gy * gy
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    A,
    B,
    C,
    Unclassified,
    Degenerate,
}

/// Case table: A if m* < 4 and S_D ≠ 0; B if m* = 4 and S_L ≠ 0; C if m* = 4, S_L = 0, S_D ≠ 0.
/// `scale_d`, `scale_l` set the zero thresholds (1e-8 of each).
pub fn classify_regime(m_star: f64, s_d: f64, s_l: f64, scale_d: f64, scale_l: f64) -> Regime {
    if !(m_star > 2.0) || !s_d.is_finite() && m_star < 4.0 {
        return Regime::Degenerate;
    }
    let nz_d = s_d.is_finite() && s_d.abs() > 1e-8 * scale_d.max(f64::MIN_POSITIVE);
    let nz_l = s_l.abs() > 1e-8 * scale_l.max(f64::MIN_POSITIVE);
    let four = (m_star - 4.0).abs() < 1e-9;
    if four {
        if nz_l {
            Regime::B
        } else if nz_d {
            Regime::C
        } else {
            Regime::Unclassified
        }
    } else if m_star < 4.0 && nz_d {
        Regime::A
    } else {
        Regime::Unclassified
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRatios {
    pub eps: Vec<f64>,
    /// max over i, t of |(H_it − H_i1)/(m_i − 2) − (H_1t − H_11)/(m_1 − 2)|.
    pub inconsistency: f64,
    pub warning: Option<String>,
}

/// ε_t = ε_1 (e^{H_1t − H_11})^{1/(m_1 − 2)}, with a cross-component consistency check.
pub fn epsilon_ratios(hm: &[Vec<f64>], m: &[f64], eps_1: f64) -> Result<EpsilonRatios> {
    if m.iter().any(|&mi| mi <= 2.0) {
        return Err(Error::NonIntegrable(format!("masses {m:?}")));
    }
    let nn = hm[0].len();
    let rate = |i: usize, t: usize| (hm[i][t] - hm[i][0]) / (m[i] - 2.0);
    let eps = (0..nn).map(|t| eps_1 * rate(0, t).exp()).collect();
    let mut worst = 0.0f64;
    for i in 1..hm.len() {
        for t in 0..nn {
            worst = worst.max((rate(i, t) - rate(0, t)).abs());
        }
    }
    Ok(EpsilonRatios {
        eps,
        inconsistency: worst,
        warning: (worst > 1e-6).then(|| {
            format!("scale ratios disagree across components by {worst:e}; using component 1")
        }),
    })
}

/// Quadrature settings for D_it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DQuadrature {
    /// Outer tensor grid is grid × grid over the torus.
    pub grid: usize,
    pub n_theta: usize,
    /// Gauss–Legendre panels per unit of ln r on the inner annulus.
    pub panels_per_unit: usize,
    pub order: usize,
}

impl Default for DQuadrature {
    fn default() -> Self {
        Self {
            grid: 256,
            n_theta: 64,
            panels_per_unit: 4,
            order: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DTrace {
    pub taus: Vec<f64>,
    pub f: Vec<f64>,
    /// F with the τ^{4−m} term removed (equal to F when m_i ≥ 4).
    pub f_reduced: Vec<f64>,
    pub exponents: [f64; 2],
    /// Leading-exponent Richardson estimates on consecutive τ pairs.
    pub pair_estimates: Vec<f64>,
    pub spread: f64,
    /// True when the ln(1/τ) term (m_i = 4) was removed; D is then the finite part.
    pub log_subtracted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DReport {
    /// D[i][t]; None where m_i ≥ 6 (the finite part needs fourth-order data).
    pub d: Vec<Vec<Option<f64>>>,
    pub traces: Vec<Vec<Option<DTrace>>>,
    pub partition: String,
    /// Radius of the disk handled in polar coordinates.
    pub rho0: f64,
}

struct Sample {
    x: Point,
    w: f64,
    owner: usize,
    r: f64,
    green_sum: f64,
}

fn owner_of(x: Point, points: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (t, &q) in points.iter().enumerate() {
        let d = torus_dist(x, q);
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

fn cut(r: f64, rho0: f64) -> f64 {
    // 1 on r ≤ ρ0/2, 0 on r ≥ ρ0, quintic in between.
    let x = ((r - 0.5 * rho0) / (0.5 * rho0)).clamp(0.0, 1.0);
    1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Cell-masked outer samples; grid cells near a Voronoi boundary are split 4×4.
fn outer_samples(
    green: &TorusGreen,
    points: &[Point],
    grid: usize,
    rho0: f64,
) -> Result<Vec<Sample>> {
    let hgrid = 1.0 / grid as f64;
    let rows: Vec<Result<Vec<Sample>>> = (0..grid)
        .into_par_iter()
        .map(|a| {
            let mut out = Vec::new();
            for b in 0..grid {
                // Split every cell the Voronoi boundary may cross, decided symmetrically.
                let c = [(a as f64 + 0.5) * hgrid, (b as f64 + 0.5) * hgrid];
                let mut dist: Vec<f64> = points.iter().map(|&q| torus_dist(c, q)).collect();
                dist.sort_by(|x, y| x.total_cmp(y));
                let split = dist.len() > 1 && dist[1] - dist[0] < 1.5 * hgrid;
                let sub = if split { 4 } else { 1 };
                let hs = hgrid / sub as f64;
                for sa in 0..sub {
                    for sb in 0..sub {
                        let x = [
                            a as f64 * hgrid + (sa as f64 + 0.5) * hs,
                            b as f64 * hgrid + (sb as f64 + 0.5) * hs,
                        ];
                        let (owner, r) = owner_of(x, points);
                        if r <= 0.5 * rho0 {
                            continue;
                        }
                        out.push(Sample {
                            x,
                            w: hs * hs,
                            owner,
                            r,
                            green_sum: green.green_sum(x, points)?,
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in rows {
        all.extend(r?);
    }
    Ok(all)
}

fn richardson(taus: &[f64], f: &[f64], p: [f64; 2]) -> (f64, Vec<f64>) {
    let k = taus.len();
    // Full solve on the three smallest τ: F = D + c1 τ^p1 + c2 τ^p2.
    let idx = [k - 3, k - 2, k - 1];
    let m = nalgebra::Matrix3::from_fn(|r, c| match c {
        0 => 1.0,
        1 => taus[idx[r]].powf(p[0]),
        _ => taus[idx[r]].powf(p[1]),
    });
    let rhs = nalgebra::Vector3::new(f[idx[0]], f[idx[1]], f[idx[2]]);
    let d = m.lu().solve(&rhs).map(|s| s[0]).unwrap_or(f64::NAN);
    let pairs = (0..k - 1)
        .map(|j| {
            let (a, b) = (taus[j].powf(p[0]), taus[j + 1].powf(p[0]));
            (f[j + 1] * a - f[j] * b) / (a - b)
        })
        .collect();
    (d, pairs)
}

/// D_it by singular subtraction and Richardson extrapolation in τ. The exponent of the
/// integrand uses the full Green sum Σ_s G(x, q_s), so it behaves like |x − q_t|^{−m_i} near q_t.
/// `tau_factors` are multiples of d_min (of 1 for a single point), at least three, decreasing.
pub fn d_coefficients(
    green: &TorusGreen,
    points: &[Point],
    h: &[HField],
    m: &[f64],
    big_i: &[f64],
    tau_factors: &[f64],
    quad: DQuadrature,
) -> Result<DReport> {
    check_distinct(points)?;
    if tau_factors.len() < 3 {
        return Err(Error::Config("D_it needs at least three τ values".into()));
    }
    if tau_factors.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("τ values must decrease".into()));
    }
    let d_ref = if points.len() > 1 { d_min(points) } else { 1.0 };
    let taus: Vec<f64> = tau_factors.iter().map(|f| f * d_ref).collect();
    let rho0 = 0.45 * d_ref;
    let rho1 = 0.5 * rho0;
    if taus[0] >= rho1 {
        return Err(Error::Config(format!(
            "τ = {} must stay below {rho1}",
            taus[0]
        )));
    }
    if let Some(&mi) = m.iter().find(|&&mi| mi <= 2.0) {
        return Err(Error::NonIntegrable(format!("m_i = {mi}")));
    }
    let samples = outer_samples(green, points, quad.grid, rho0)?;
    let ln_h: Vec<Vec<f64>> = h
        .iter()
        .map(|hi| samples.iter().map(|s| hi.ln_h(s.x)).collect())
        .collect();
    let (gx, gw) = gauss_legendre(quad.order);
    let nt = quad.n_theta;
    let dth = 2.0 * PI / nt as f64;
    let n = h.len();
    let nn = points.len();
    let mut d = vec![vec![None; nn]; n];
    let mut traces = vec![vec![None; nn]; n];
    for t in 0..nn {
        let q = points[t];
        let gq = green.g_star_jet(q, points, t)?;
        // Angular sums of Σ_s G over circles about q_t, cached per radius.
        let circle = |r: f64| -> Result<Vec<f64>> {
            (0..nt)
                .map(|k| {
                    let th = k as f64 * dth;
                    green.green_sum([q[0] + r * th.cos(), q[1] + r * th.sin()], points)
                })
                .collect()
        };
        let ln_h_circle = |i: usize, r: f64| -> Vec<f64> {
            (0..nt)
                .map(|k| {
                    let th = k as f64 * dth;
                    h[i].ln_h([q[0] + r * th.cos(), q[1] + r * th.sin()])
                })
                .collect()
        };
        // Gauss nodes in ln r on [ln a, ln b].
        let nodes = |a: f64, b: f64| -> Vec<(f64, f64)> {
            let (la, lb) = (a.ln(), b.ln());
            let panels = ((lb - la) * quad.panels_per_unit as f64).ceil().max(1.0) as usize;
            let hp = (lb - la) / panels as f64;
            let mut out = Vec::new();
            for p in 0..panels {
                let c = la + (p as f64 + 0.5) * hp;
                for (x, w) in gx.iter().zip(&gw) {
                    let s = c + 0.5 * hp * x;
                    out.push((s.exp(), 0.5 * hp * w));
                }
            }
            out
        };
        let ring_nodes = nodes(rho1, rho0);
        let ring_sums: Vec<Vec<f64>> = ring_nodes.iter().map(|&(r, _)| circle(r)).collect::<Result<_>>()?;
        let inner: Vec<(Vec<(f64, f64)>, Vec<Vec<f64>>)> = taus
            .iter()
            .map(|&tau| {
                let nd = nodes(tau, rho1);
                let sums = nd.iter().map(|&(r, _)| circle(r)).collect::<Result<Vec<_>>>()?;
                Ok((nd, sums))
            })
            .collect::<Result<_>>()?;
        for i in 0..n {
            let mi = m[i];
            if mi >= 6.0 - 1e-6 {
                continue;
            }
            let lj = h[i].ln_jet(q);
            let gstar_qq = gq.value;
            let lnh_q = lj.value;
            let grad = [
                lj.grad[0] + 2.0 * PI * mi * gq.grad[0],
                lj.grad[1] + 2.0 * PI * mi * gq.grad[1],
            ];
            let lap = lj.hess[0][0] + lj.hess[1][1] + 2.0 * PI * mi * (gq.hess[0][0] + gq.hess[1][1]);
            let c2 = 0.25 * (lap + grad[0] * grad[0] + grad[1] * grad[1]);
            let f_at = |lnh: f64, gsum: f64| (lnh - lnh_q + 2.0 * PI * mi * (gsum - gstar_qq)).exp();
            // Outer part with weight 1 − ψ.
            let outer: f64 = samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.owner == t)
                .map(|(k, s)| s.w * f_at(ln_h[i][k], s.green_sum) * (1.0 - cut(s.r, rho0)))
                .sum();
            // Ring ρ0/2 ≤ r ≤ ρ0 with weight ψ.
            let mut ring = 0.0;
            for ((r, w), sums) in ring_nodes.iter().zip(&ring_sums) {
                let lh = ln_h_circle(i, *r);
                let ang: f64 = lh.iter().zip(sums).map(|(&a, &b)| f_at(a, b)).sum::<f64>() * dth;
                ring += w * r * r * ang * cut(*r, rho0);
            }
            let mut fv = Vec::with_capacity(taus.len());
            for (k, &tau) in taus.iter().enumerate() {
                let (nd, sums) = &inner[k];
                let mut core = 0.0;
                for ((r, w), s) in nd.iter().zip(sums) {
                    let lh = ln_h_circle(i, *r);
                    let sub = r.powf(-mi) * (1.0 + c2 * r * r);
                    let ang: f64 = lh
                        .iter()
                        .zip(s)
                        .map(|(&a, &b)| f_at(a, b) - sub)
                        .sum::<f64>()
                        * dth;
                    core += w * r * r * ang;
                }
                let analytic = -2.0 * PI * rho1.powf(2.0 - mi) / (mi - 2.0)
                    + if mi < 4.0 - 1e-9 {
                        2.0 * PI * c2 * (rho1.powf(4.0 - mi) - tau.powf(4.0 - mi)) / (4.0 - mi)
                    } else if (mi - 4.0).abs() < 1e-9 {
                        2.0 * PI * c2 * rho1.ln()
                    } else {
                        -2.0 * PI * c2 * rho1.powf(4.0 - mi) / (mi - 4.0)
                    };
                fv.push(big_i[i].exp() * (core + analytic + ring + outer));
            }
            // The τ^{4−m} term is known exactly; Richardson acts on what remains.
            let reduced: Vec<f64> = taus
                .iter()
                .zip(&fv)
                .map(|(&tau, &f)| {
                    if mi < 4.0 - 1e-9 {
                        f + big_i[i].exp() * 2.0 * PI * c2 * tau.powf(4.0 - mi) / (4.0 - mi)
                    } else {
                        f
                    }
                })
                .collect();
            let p = [6.0 - mi, 8.0 - mi];
            let (dv, pairs) = richardson(&taus, &reduced, p);
            let spread = (pairs[pairs.len() - 1] - pairs[pairs.len() - 2]).abs() / dv.abs();
            if !(spread <= 1e-3) {
                return Err(Error::Resolution(format!(
                    "D_{}{} extrapolation spread {spread:e}",
                    i + 1,
                    t + 1
                )));
            }
            d[i][t] = Some(dv);
            traces[i][t] = Some(DTrace {
                taus: taus.clone(),
                f: fv,
                f_reduced: reduced,
                exponents: p,
                pair_estimates: pairs,
                spread,
                log_subtracted: mi >= 4.0 - 1e-9,
            });
        }
    }
    Ok(DReport {
        d,
        traces,
        partition: "torus Voronoi cells of the blowup points".into(),
        rho0,
    })
}

/// Which Λ expansion to evaluate for m* < 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaForm {
    /// Sum over the components achieving m* only.
    Restricted,
    /// Sum over all components, each with its own power ε^{m_i − 2}.
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriteriaReport {
    pub h: Vec<Vec<f64>>,
    pub d: Vec<Vec<Option<f64>>>,
    pub l: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub m_star: f64,
    /// Components achieving m*.
    pub minimizers: Vec<usize>,
    pub s_d: f64,
    pub s_l: f64,
    pub regime: Regime,
    pub partition: String,
    pub d_traces: Vec<Vec<Option<DTrace>>>,
}

impl CriteriaReport {
    fn weight(&self, i: usize, t: usize) -> f64 {
        (self.h[i][t] - self.h[i][0]).exp()
    }
}

/// Assembles the report; S_D sums over the components achieving m*, S_L over all components.
pub fn criteria_report(
    green: &TorusGreen,
    points: &[Point],
    h: &[HField],
    m: &[f64],
    big_i: &[f64],
    tau_factors: &[f64],
    quad: DQuadrature,
) -> Result<CriteriaReport> {
    let hm = h_matrix(green, points, h, m)?;
    let l = l_coefficients(green, points, h)?;
    let dr = d_coefficients(green, points, h, m, big_i, tau_factors, quad)?;
    let m_star = m.iter().cloned().fold(f64::INFINITY, f64::min);
    let minimizers: Vec<usize> = (0..m.len()).filter(|&i| (m[i] - m_star).abs() < 1e-9).collect();
    let mut report = CriteriaReport {
        h: hm,
        d: dr.d,
        l,
        m: m.to_vec(),
        m_star,
        minimizers,
        s_d: 0.0,
        s_l: 0.0,
        regime: Regime::Unclassified,
        partition: dr.partition,
        d_traces: dr.traces,
    };
    let nn = points.len();
    let (mut sd, mut scale_d) = (0.0, 0.0);
    for &i in &report.minimizers {
        for t in 0..nn {
            let v = report.d[i][t].unwrap_or(f64::NAN) * report.weight(i, t);
            sd += v;
            scale_d += v.abs();
        }
    }
    let (mut sl, mut scale_l) = (0.0, 0.0);
    for i in 0..m.len() {
        for t in 0..nn {
            let v = report.l[i][t] * report.weight(i, t);
            sl += v;
            scale_l += v.abs();
        }
    }
    report.s_d = sd;
    report.s_l = sl;
    report.regime = classify_regime(m_star, sd, sl, scale_d, scale_l);
    Ok(report)
}

/// Leading-order Λ along the family at base scale ε_1.
pub fn lambda_prediction(report: &CriteriaReport, eps_1: f64, form: LambdaForm) -> Result<f64> {
    let nn = report.h[0].len() as f64;
    let n = report.m.len();
    let d_at = |i: usize, t: usize| {
        report.d[i][t].ok_or_else(|| {
            Error::Config(format!("D_{}{} is unavailable (m_i ≥ 6)", i + 1, t + 1))
        })
    };
    match report.regime {
        Regime::A => {
            let comps: Vec<usize> = match form {
                LambdaForm::Restricted => report.minimizers.clone(),
                LambdaForm::Full => (0..n).collect(),
            };
            let mut s = 0.0;
            for i in comps {
                let mi = match form {
                    LambdaForm::Restricted => report.m_star,
                    LambdaForm::Full => report.m[i],
                };
                for t in 0..report.h[0].len() {
                    s += (2.0 - mi) / nn * d_at(i, t)? * report.weight(i, t) * eps_1.powf(mi - 2.0);
                }
            }
            Ok(s)
        }
        Regime::B => Ok(-2.0 / nn * report.s_l * eps_1 * eps_1 * (1.0 / eps_1).ln()),
        Regime::C => {
            let mut s = 0.0;
            for i in 0..n {
                for t in 0..report.h[0].len() {
                    s += (2.0 - report.m[i]) / nn * d_at(i, t)? * report.weight(i, t);
                }
            }
            Ok(s * eps_1 * eps_1)
        }
        r => Err(Error::Config(format!("no Λ prediction for regime {r:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_table() {
        assert_eq!(classify_regime(3.0, 1.0, 0.0, 1.0, 1.0), Regime::A);
        assert_eq!(classify_regime(4.0, 0.0, 1.0, 1.0, 1.0), Regime::B);
        assert_eq!(classify_regime(4.0, 1.0, 0.0, 1.0, 1.0), Regime::C);
        assert_eq!(classify_regime(4.0, 0.0, 0.0, 1.0, 1.0), Regime::Unclassified);
        assert_eq!(classify_regime(3.0, 0.0, 5.0, 1.0, 1.0), Regime::Unclassified);
    }

    #[test]
    fn single_point_l_and_h() {
        let g = TorusGreen::default();
        let h = vec![HField::constant(1.0)];
        let l = l_coefficients(&g, &[[0.3, 0.6]], &h).unwrap();
        assert!((l[0][0] - 8.0 * PI).abs() < 1e-10);
        let hm = h_matrix(&g, &[[0.3, 0.6]], &h, &[4.0]).unwrap();
        assert!((hm[0][0] - 8.0 * PI * g.robin()).abs() < 1e-12);
    }

    #[test]
    fn eps_ratio_substitution() {
        let hm = vec![vec![0.5, 0.5 + 1.0 * 0.3], vec![0.1, 0.1 + 4.0 * 0.3]];
        let r = epsilon_ratios(&hm, &[3.0, 6.0], 0.01).unwrap();
        assert!((r.eps[1] - 0.01 * 0.3f64.exp()).abs() < 1e-15);
        assert!(r.warning.is_none());
    }
}
