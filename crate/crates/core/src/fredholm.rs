//! Weighted spaces, cutoff-modified kernels and the projected frequency-1 problem on B_{3τ/ε}.
//!
//! The operator is L u = Δ(A⁻¹u) + H(0)e^V u. In the frequency-1 block a field is
//! u_i(r)cos θ (direction 1) or u_i(r)sin θ (direction 2), and pairings carry a factor π.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linearized::{
    block_tridiag_solve, log_grid, CorrectionProfile, FrequencyGrid, HLocalData, PolarField,
    RadialSamples,
};
use crate::radial_bubble::RadialBubble;

/// C² quintic smoothstep on [0, 1].
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// χ: 1 on |x| ≤ τ, 0 on |x| ≥ 2τ.
pub fn chi(x: f64, tau: f64) -> f64 {
    1.0 - smoothstep((x - tau) / tau)
}

/// χ_*: 1 on [7τ/3, 8τ/3], 0 outside [2τ, 3τ].
pub fn chi_star(x: f64, tau: f64) -> f64 {
    let w = tau / 3.0;
    if x <= 7.0 * w {
        smoothstep((x - 2.0 * tau) / w)
    } else {
        1.0 - smoothstep((x - 8.0 * w) / w)
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Z_{ε,0}, Z_{ε,1}, Z_{ε,2} built from the bubble kernels and the cutoffs.
#[derive(Debug, Clone, Serialize)]
pub struct ModifiedKernelSet {
    pub eps: f64,
    pub tau: f64,
    pub t: [f64; 2],
    /// sgn(∂_s h_i(0)) per direction and component.
    pub signs: [Vec<f64>; 2],
}

impl ModifiedKernelSet {
    pub fn new(eps: f64, tau: f64, t: [f64; 2], h: &[HLocalData]) -> Self {
        let signs = [
            h.iter().map(|d| sgn(d.grad[0])).collect(),
            h.iter().map(|d| sgn(d.grad[1])).collect(),
        ];
        Self { eps, tau, t, signs }
    }

    pub fn r_out(&self) -> f64 {
        3.0 * self.tau / self.eps
    }

    /// Radial profile of Z_{ε,s,i} (s = 1, 2), multiplying cos θ or sin θ.
    pub fn radial(&self, b: &RadialBubble, s: usize, i: usize, r: f64) -> f64 {
        let x = self.eps * r;
        let dv = b.eval(i, r).1;
        dv * (chi(x, self.tau) + self.t[s - 1] * chi_star(x, self.tau) * self.signs[s - 1][i])
    }

    /// Z_{ε,0,i}(r).
    pub fn radial0(&self, b: &RadialBubble, i: usize, r: f64) -> f64 {
        let dv = b.eval(i, r).1;
        (r * dv + 2.0) * chi(self.eps * r, self.tau)
    }
}

fn log_nodes(r_min: f64, r_max: f64, n: usize) -> (Vec<f64>, f64) {
    let t0 = r_min.ln();
    let h = (r_max.ln() - t0) / (n - 1) as f64;
    ((0..n).map(|k| (t0 + k as f64 * h).exp()).collect(), h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Orthogonality {
    pub t: [f64; 2],
    /// Pairing of y·∇h e^V with the χ-cut kernel.
    pub p: [f64; 2],
    /// Coefficient of t_s (annulus integral).
    pub q: [f64; 2],
}

/// Chooses t_s so that Σ_i ∫_{B_{3τ/ε}} (y·∇h_i(0)) e^{V_i} Z_{ε,s,i}(y; t_s) dy = 0.
pub fn solve_orthogonality(
    b: &RadialBubble,
    h: &[HLocalData],
    eps: f64,
    tau: f64,
) -> Result<Orthogonality> {
    let n = b.n();
    let (r, dt) = log_nodes(1e-6, 3.0 * tau / eps, 6001);
    let w = crate::quad::simpson_weights(r.len(), dt);
    let mut p = [0.0; 2];
    let mut q = [0.0; 2];
    let mut t = [0.0; 2];
    for s in 0..2 {
        let dh: Vec<f64> = h.iter().map(|d| d.value * d.grad[s]).collect();
        if dh.iter().all(|&x| x == 0.0) {
            continue;
        }
        for (k, &rk) in r.iter().enumerate() {
            let x = eps * rk;
            for i in 0..n {
                let (v, dv) = b.eval(i, rk);
                // Angular integral of (y·∇h) Z_s gives π r ∂_s h; r dr = r² dt.
                let base = PI * rk * v.exp() * dv * rk * rk * w[k];
                p[s] += dh[i] * base * chi(x, tau);
                q[s] += dh[i].abs() * base * chi_star(x, tau);
            }
        }
        if q[s].abs() < 1e-12 {
            return Err(Error::Degenerate(format!(
                "annulus coefficient of t_{} is {:e}",
                s + 1,
                q[s]
            )));
        }
        t[s] = -p[s] / q[s];
    }
    Ok(Orthogonality { t, p, q })
}

/// Discrete (‖u‖_X, ‖u‖_Y) with ρ_β = (1+r)^{1+β/2} and ρ̃_β = 1/((1+r) ln(2+r)^{1+β/2}).
/// The field's grid must span B_{3τ/ε}.
pub fn weighted_norms(field: &PolarField, beta: f64, eps: f64, tau: f64) -> Result<(f64, f64)> {
    let g = &field.grid;
    let r_max = *g.r.last().unwrap();
    if (r_max / (3.0 * tau / eps) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "field grid ends at {r_max}, expected 3τ/ε = {}",
            3.0 * tau / eps
        )));
    }
    let nr = g.n_r();
    let nt = g.n_theta();
    let h = g.dt;
    let mut x2 = 0.0;
    let mut y2 = 0.0;
    for comp in &field.values {
        let mut lap = vec![vec![0.0; nt]; nr];
        for kr in 0..nr {
            for kt in 0..nt {
                let f = |a: usize| comp[a][kt];
                let ftt = if kr == 0 {
                    (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / (h * h)
                } else if kr == nr - 1 {
                    (2.0 * f(kr) - 5.0 * f(kr - 1) + 4.0 * f(kr - 2) - f(kr - 3)) / (h * h)
                } else {
                    (f(kr + 1) - 2.0 * f(kr) + f(kr - 1)) / (h * h)
                };
                let row = &comp[kr];
                let fqq = (row[(kt + 1) % nt] - 2.0 * row[kt] + row[(kt + nt - 1) % nt])
                    / (g.d_theta * g.d_theta);
                lap[kr][kt] = (ftt + fqq) / (g.r[kr] * g.r[kr]);
            }
        }
        let mut lx = vec![vec![0.0; nt]; nr];
        let mut ly = vec![vec![0.0; nt]; nr];
        for kr in 0..nr {
            let r = g.r[kr];
            let rho = (1.0 + r).powf(1.0 + beta / 2.0);
            let rho_t = 1.0 / ((1.0 + r) * (2.0 + r).ln().powf(1.0 + beta / 2.0));
            for kt in 0..nt {
                let u = comp[kr][kt];
                lx[kr][kt] = (lap[kr][kt] * rho).powi(2) + (u * rho_t).powi(2);
                ly[kr][kt] = (u * rho).powi(2);
            }
        }
        x2 += g.integrate(&lx);
        y2 += g.integrate(&ly);
    }
    Ok((x2.sqrt(), y2.sqrt()))
}

/// Q_ε u = u − Σ_s r_s e^V Z_{ε,s}, with r_s making the result pair to zero with Z_{ε,1}, Z_{ε,2}.
/// Returns the projected field and (r_1, r_2).
pub fn project_q(
    field: &PolarField,
    kernels: &ModifiedKernelSet,
    b: &RadialBubble,
) -> Result<(PolarField, [f64; 2])> {
    let g = &field.grid;
    let n = field.n();
    let z = |s: usize| {
        PolarField::from_fn(g.clone(), n, |i, r, th| {
            let ang = if s == 1 { th.cos() } else { th.sin() };
            kernels.radial(b, s, i, r) * ang
        })
    };
    let z1 = z(1);
    let z2 = z(2);
    let weighted = |zf: &PolarField| {
        let mut out = zf.clone();
        for i in 0..n {
            for (kr, &r) in g.r.iter().enumerate() {
                let ev = b.eval(i, r).0.exp();
                for val in out.values[i][kr].iter_mut() {
                    *val *= ev;
                }
            }
        }
        out
    };
    let e1 = weighted(&z1);
    let e2 = weighted(&z2);
    let gram = nalgebra::Matrix2::new(e1.pair(&z1), e2.pair(&z1), e1.pair(&z2), e2.pair(&z2));
    let rhs = nalgebra::Vector2::new(field.pair(&z1), field.pair(&z2));
    let scale = gram.abs().max();
    if gram.determinant().abs() <= 1e-14 * scale * scale {
        return Err(Error::Degenerate("singular Gram matrix of modified kernels".into()));
    }
    let coef = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("singular Gram matrix".into()))?;
    let mut out = field.clone();
    for i in 0..n {
        for kr in 0..g.n_r() {
            for kt in 0..g.n_theta() {
                out.values[i][kr][kt] -=
                    coef[0] * e1.values[i][kr][kt] + coef[1] * e2.values[i][kr][kt];
            }
        }
    }
    Ok((out, [coef[0], coef[1]]))
}

struct Bordered {
    lower: Vec<DMatrix<f64>>,
    diag: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
}

impl Bordered {
    fn apply(&self, x: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let k = x.len();
        (0..k)
            .map(|i| {
                let mut y = &self.diag[i] * &x[i];
                if i > 0 {
                    y += &self.lower[i] * &x[i - 1];
                }
                if i + 1 < k {
                    y += &self.upper[i] * &x[i + 1];
                }
                y
            })
            .collect()
    }

    fn solve(&self, rhs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        block_tridiag_solve(&self.lower, &self.diag, &self.upper, rhs)
            .ok_or_else(|| Error::Singular("frequency-1 block".into()))
    }
}

fn dot_all(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Solves L u = f + c e^V Z_{ε,s} with Σ_i ∫ u_i Y_{ε,s,i} = 0 on one grid, u = 0 at r_out.
fn projected_on_grid(
    b: &RadialBubble,
    h0: &[f64],
    kernels: &ModifiedKernelSet,
    s: usize,
    f: &dyn Fn(usize, f64) -> f64,
    t: &[f64],
    r: &[f64],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = b.n();
    let ainv = b
        .coupling
        .inverse()
        .ok_or_else(|| Error::Singular("coupling matrix".into()))?
        .clone();
    let h = t[1] - t[0];
    let k = t.len() - 1;
    let mut lower = Vec::with_capacity(k);
    let mut diag = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for i in 0..k {
        let ev = DMatrix::from_fn(n, n, |a, c| {
            if a == c {
                h0[a] * b.eval(a, r[i]).0.exp()
            } else {
                0.0
            }
        });
        let d = &ainv * (-2.0 - h * h) + ev * (r[i] * r[i] * h * h);
        if i == 0 {
            lower.push(DMatrix::zeros(n, n));
            diag.push(d - &ainv * (2.0 * h));
            upper.push(&ainv * 2.0);
        } else {
            lower.push(ainv.clone());
            diag.push(d);
            upper.push(if i + 1 < k { ainv.clone() } else { DMatrix::zeros(n, n) });
        }
    }
    let op = Bordered { lower, diag, upper };
    let scaled = |k: usize, v: DVector<f64>| v * (r[k] * r[k] * h * h);
    let rhs: Vec<DVector<f64>> = (0..k)
        .map(|kk| scaled(kk, DVector::from_fn(n, |i, _| f(i, r[kk]))))
        .collect();
    let zed: Vec<DVector<f64>> = (0..=k)
        .map(|kk| DVector::from_fn(n, |i, _| kernels.radial(b, s, i, r[kk])))
        .collect();
    let w: Vec<DVector<f64>> = (0..k)
        .map(|kk| {
            scaled(
                kk,
                DVector::from_fn(n, |i, _| b.eval(i, r[kk]).0.exp() * zed[kk][i]),
            )
        })
        .collect();
    // Y = Δ(A⁻¹Z) on the grid; z·u = Σ_k π h r_k² Y_k·u_k.
    let az: Vec<DVector<f64>> = zed.iter().map(|v| &ainv * v).collect();
    let zc: Vec<DVector<f64>> = (0..k)
        .map(|kk| {
            let prev = if kk == 0 {
                &az[1] - &az[0] * (2.0 * h)
            } else {
                az[kk - 1].clone()
            };
            let y = (&az[kk + 1] - &az[kk] * 2.0 + prev) / (h * h) - &az[kk];
            y * (PI * h)
        })
        .collect();
    let y2 = op.solve(&w)?;
    let zy2 = dot_all(&zc, &y2);
    if zy2.abs() < 1e-300 {
        return Err(Error::Degenerate("bordered frequency-1 system".into()));
    }
    let mut u: Vec<DVector<f64>> = vec![DVector::zeros(n); k];
    let mut c = 0.0;
    let mut res = rhs.clone();
    let mut res_c = 0.0;
    for _ in 0..4 {
        let y1 = op.solve(&res)?;
        let dc = (res_c - dot_all(&zc, &y1)) / zy2;
        for (ui, (a, bb)) in u.iter_mut().zip(y1.iter().zip(&y2)) {
            *ui += a + bb * dc;
        }
        c += dc;
        let lu = op.apply(&u);
        res = (0..k).map(|kk| &rhs[kk] - &lu[kk] + &w[kk] * c).collect();
        res_c = -dot_all(&zc, &u);
    }
    let vals = (0..n)
        .map(|i| {
            let mut v: Vec<f64> = u.iter().map(|x| x[i]).collect();
            v.push(0.0);
            v
        })
        .collect();
    Ok((vals, -c))
}

/// Projected frequency-1 solve on B_{3τ/ε}: u in E_ε, L u = f − c e^V Z_{ε,s} with f = A⁻¹·source.
/// `source` is in the linearized-module convention (Δg + A H e^V g = source).
/// Returns the profile and the multiplier c.
pub fn solve_projected(
    b: &RadialBubble,
    h0: &[f64],
    kernels: &ModifiedKernelSet,
    s: usize,
    source: &dyn Fn(usize, f64) -> f64,
    grid: FrequencyGrid,
) -> Result<(CorrectionProfile, f64)> {
    let n = b.n();
    let ainv = b
        .coupling
        .inverse()
        .ok_or_else(|| Error::Singular("coupling matrix".into()))?
        .clone();
    let f = |i: usize, r: f64| (0..n).map(|j| ainv[(i, j)] * source(j, r)).sum::<f64>();
    let r_out = kernels.r_out();
    let (t, r) = log_grid(grid.r_min, r_out, grid.nodes_per_unit);
    let h = t[1] - t[0];
    let tf: Vec<f64> = (0..2 * t.len() - 1).map(|k| t[0] + k as f64 * 0.5 * h).collect();
    let rf: Vec<f64> = tf.iter().map(|x| x.exp()).collect();
    let (coarse, cc) = projected_on_grid(b, h0, kernels, s, &f, &t, &r)?;
    let (fine, cf) = projected_on_grid(b, h0, kernels, s, &f, &tf, &rf)?;
    let mut err = 0.0f64;
    let values: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..t.len())
                .map(|k| {
                    let (a, c) = (fine[i][2 * k], coarse[i][k]);
                    err = err.max((a - c).abs());
                    (4.0 * a - c) / 3.0
                })
                .collect()
        })
        .collect();
    Ok((
        CorrectionProfile {
            ell: 1,
            r_out,
            samples: RadialSamples { t, r, values },
            error_estimate: err,
            sigma_min: f64::NAN,
            op_norm: f64::NAN,
            projected: true,
        },
        (4.0 * cf - cc) / 3.0,
    ))
}

/// First-order correction (cos θ and sin θ profiles) on B_{3τ/ε}.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub profiles: [CorrectionProfile; 2],
    pub orthogonality: Orthogonality,
    pub multipliers: [f64; 2],
}

/// Solves the frequency-1 problems with sources −εΣ_j a_ij H_j ∂_s ln h_j r e^{V_j}.
/// The plain Dirichlet solve is used unless its singular-value check trips, in which
/// case the solve moves to the projected subspace.
pub fn first_order_correction(
    b: &RadialBubble,
    h: &[HLocalData],
    eps: f64,
    tau: f64,
    grid: FrequencyGrid,
    force_projection: bool,
) -> Result<FirstOrder> {
    let h0: Vec<f64> = h.iter().map(|d| d.value).collect();
    let orth = solve_orthogonality(b, h, eps, tau)?;
    let kernels = ModifiedKernelSet::new(eps, tau, orth.t, h);
    let mut out = Vec::with_capacity(2);
    let mut mult = [0.0; 2];
    for s in 0..2 {
        let src = crate::linearized::first_order_source(b, h, eps, s);
        let plain = if force_projection {
            Err(Error::RequiresProjection {
                sigma_min: f64::NAN,
                norm: f64::NAN,
            })
        } else {
            crate::linearized::solve_frequency(b, 1, &h0, &src, kernels.r_out(), grid)
        };
        match plain {
            Ok(p) => out.push(p),
            Err(Error::RequiresProjection { .. }) => {
                let (p, c) = solve_projected(b, &h0, &kernels, s + 1, &src, grid)?;
                mult[s] = c;
                out.push(p);
            }
            Err(e) => return Err(e),
        }
    }
    let p1 = out.pop().unwrap();
    let p0 = out.pop().unwrap();
    Ok(FirstOrder {
        profiles: [p0, p1],
        orthogonality: orth,
        multipliers: mult,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertibilityRow {
    pub eps: f64,
    pub sigma_constrained: f64,
    pub sigma_unconstrained: f64,
    /// σ_min (constrained) on the doubled grid.
    pub sigma_refined: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Smallest singular values of the frequency-1 block of Q_ε L_ε on E_ε (and of L_ε alone),
/// measured from the X norm to the Y norm.
fn sigma_min_block(
    b: &RadialBubble,
    h0: &[f64],
    kernels: &ModifiedKernelSet,
    beta: f64,
    r_min: f64,
    nodes: usize,
) -> Result<(f64, f64)> {
    let n = b.n();
    let ainv = b
        .coupling
        .inverse()
        .ok_or_else(|| Error::Singular("coupling matrix".into()))?
        .clone();
    let (r_all, h) = log_nodes(r_min, kernels.r_out(), nodes + 1);
    let r = &r_all[..nodes];
    let dim = n * nodes;
    let idx = |k: usize, i: usize| k * n + i;
    // Frequency-1 Laplacian on the log grid with the regular ghost node and u = 0 at r_out.
    let mut lap = DMatrix::<f64>::zeros(nodes, nodes);
    for k in 0..nodes {
        let c = 1.0 / (r[k] * r[k] * h * h);
        if k == 0 {
            lap[(0, 0)] = c * (-2.0 - 2.0 * h - h * h);
            lap[(0, 1)] = 2.0 * c;
        } else {
            lap[(k, k - 1)] = c;
            lap[(k, k)] = c * (-2.0 - h * h);
            if k + 1 < nodes {
                lap[(k, k + 1)] = c;
            }
        }
    }
    let mut l = DMatrix::<f64>::zeros(dim, dim);
    let mut dx = DMatrix::<f64>::zeros(2 * dim, dim);
    let mut wy = DVector::<f64>::zeros(dim);
    let mut wq = DVector::<f64>::zeros(dim);
    let mut ez = DVector::<f64>::zeros(dim);
    let mut zv = DVector::<f64>::zeros(dim);
    let mut azv = DVector::<f64>::zeros(dim);
    for k in 0..nodes {
        let w = PI * h * r[k] * r[k] * if k == 0 { 0.5 } else { 1.0 };
        let rho = (1.0 + r[k]).powf(1.0 + beta / 2.0);
        let rho_t = 1.0 / ((1.0 + r[k]) * (2.0 + r[k]).ln().powf(1.0 + beta / 2.0));
        for i in 0..n {
            let (v, _) = b.eval(i, r[k]);
            let row = idx(k, i);
            for k2 in k.saturating_sub(1)..(k + 2).min(nodes) {
                let d = lap[(k, k2)];
                if d == 0.0 {
                    continue;
                }
                for j in 0..n {
                    l[(row, idx(k2, j))] += ainv[(i, j)] * d;
                }
                dx[(row, idx(k2, i))] = w.sqrt() * rho * d;
            }
            l[(row, row)] += h0[i] * v.exp();
            dx[(dim + row, row)] = w.sqrt() * rho_t;
            wy[row] = w.sqrt() * rho;
            wq[row] = w;
            zv[row] = kernels.radial(b, 1, i, r[k]);
            ez[row] = v.exp() * zv[row];
        }
    }
    for k in 0..nodes {
        for i in 0..n {
            azv[idx(k, i)] = (0..n).map(|j| ainv[(i, j)] * zv[idx(k, j)]).sum();
        }
    }
    // Y = Δ(A⁻¹Z) block by block.
    let mut yv = DVector::<f64>::zeros(dim);
    for i in 0..n {
        let comp = DVector::from_fn(nodes, |k, _| azv[idx(k, i)]);
        let y = &lap * comp;
        for k in 0..nodes {
            yv[idx(k, i)] = y[k];
        }
    }
    // Q = I − (e^V Z)(W Z)ᵀ / ⟨e^V Z, Z⟩.
    let wz = zv.component_mul(&wq);
    let denom = ez.dot(&wz);
    if denom.abs() < 1e-300 {
        return Err(Error::Degenerate("vanishing kernel Gram value".into()));
    }
    let q = DMatrix::<f64>::identity(dim, dim) - &ez * wz.transpose() / denom;
    // Orthonormal basis of {u : ⟨u, Y⟩ = 0} from a Householder reflection.
    let c = yv.component_mul(&wq);
    let mut v = c.clone();
    v[0] += c[0].signum() * c.norm();
    let hh = DMatrix::<f64>::identity(dim, dim) - &v * v.transpose() * (2.0 / v.norm_squared());
    let basis = hh.columns(1, dim - 1).into_owned();

    let sigma = |op: DMatrix<f64>, xmat: DMatrix<f64>| -> Result<f64> {
        let qr = xmat.qr();
        let rr = qr.r();
        let mt = op.transpose();
        let sol = rr
            .transpose()
            .solve_lower_triangular(&mt)
            .ok_or_else(|| Error::Singular("X-norm factor".into()))?;
        let sv = sol.transpose().singular_values();
        Ok(sv.iter().cloned().fold(f64::INFINITY, f64::min))
    };
    let wl = DMatrix::from_diagonal(&wy) * &l;
    let unconstrained = sigma(wl, dx.clone())?;
    let constrained = sigma(
        DMatrix::from_diagonal(&wy) * q * &l * &basis,
        dx * &basis,
    )?;
    Ok((constrained, unconstrained))
}

/// σ_min per ε of Q_εL_ε on E_ε (frequency-1 block) and of L_ε without projection or constraint.
/// Each constrained value is recomputed on a doubled grid; a change above 10% is a resolution error.
pub fn invertibility_check(
    b: &RadialBubble,
    h: &[HLocalData],
    eps_list: &[f64],
    tau: f64,
    beta: f64,
    nodes: usize,
) -> Result<Vec<InvertibilityRow>> {
    let h0: Vec<f64> = h.iter().map(|d| d.value).collect();
    eps_list
        .iter()
        .map(|&eps| {
            let orth = solve_orthogonality(b, h, eps, tau)?;
            let kernels = ModifiedKernelSet::new(eps, tau, orth.t, h);
            let r_min = 1e-3;
            let (c, u) = sigma_min_block(b, &h0, &kernels, beta, r_min, nodes)?;
            let (c2, _) = sigma_min_block(b, &h0, &kernels, beta, r_min, 2 * nodes)?;
            if (c - c2).abs() > 0.1 * c2 {
                return Err(Error::Resolution(format!(
                    "σ_min at ε = {eps}: {c:e} vs {c2:e} on the doubled grid"
                )));
            }
            Ok(InvertibilityRow {
                eps,
                sigma_constrained: c2,
                sigma_unconstrained: u,
                sigma_refined: c2,
                t1: orth.t[0],
                t2: orth.t[1],
            })
        })
        .collect()
}

/// Relative max |Q(Qf) − Qf|, or the larger residual pairing, for a fixed mixed-frequency field.
pub fn projection_idempotency(b: &RadialBubble, h: &[HLocalData], eps: f64, tau: f64) -> Result<f64> {
    let o = solve_orthogonality(b, h, eps, tau)?;
    let k = ModifiedKernelSet::new(eps, tau, o.t, h);
    let grid = crate::quad::PolarGrid::new(1e-3, 3.0 * tau / eps, 401, 16);
    let f = PolarField::from_fn(grid, b.n(), |i, r, th| {
        let c = 1.0 + 0.5 * i as f64;
        c * r / (1.0 + r * r) * (th.cos() + 0.3 * th.sin()) + (3.0 * th).sin() / (1.0 + r)
    });
    let (q1, _) = project_q(&f, &k, b)?;
    let (q2, rr) = project_q(&q1, &k, b)?;
    let scale = q1.values.iter().flatten().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let diff = q1
        .values
        .iter()
        .flatten()
        .flatten()
        .zip(q2.values.iter().flatten().flatten())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Ok((diff / scale.max(1e-300)).max(rr[0].abs()).max(rr[1].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingMatrix;
    use crate::quad::PolarGrid;
    use crate::radial_bubble::solve_radial;

    fn scalar() -> RadialBubble {
        solve_radial(&CouplingMatrix::scalar(), &[8f64.ln()], 400.0, 1e-10).unwrap()
    }

    #[test]
    fn cutoff_geometry() {
        let tau = 0.3;
        assert_eq!(chi(0.29, tau), 1.0);
        assert_eq!(chi(0.61, tau), 0.0);
        assert_eq!(chi_star(0.59, tau), 0.0);
        assert_eq!(chi_star(0.75, tau), 1.0);
        assert_eq!(chi_star(0.91, tau), 0.0);
        assert!((chi(0.45, tau) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orthogonality_zero_gradient() {
        let b = scalar();
        let o = solve_orthogonality(&b, &[HLocalData::flat(1.0)], 0.01, 0.25).unwrap();
        assert_eq!(o.t, [0.0, 0.0]);
    }

    #[test]
    fn projection_is_idempotent() {
        let b = scalar();
        let (eps, tau) = (0.05, 0.25);
        let h = [HLocalData {
            value: 1.0,
            grad: [1.0, 0.5],
            hess: [[0.0; 2]; 2],
        }];
        let o = solve_orthogonality(&b, &h, eps, tau).unwrap();
        let k = ModifiedKernelSet::new(eps, tau, o.t, &h);
        let grid = PolarGrid::new(1e-3, 3.0 * tau / eps, 401, 16);
        let f = PolarField::from_fn(grid, 1, |_, r, th| {
            r / (1.0 + r * r) * (th.cos() + 0.3 * th.sin()) + (3.0 * th).sin() / (1.0 + r)
        });
        let (q1, _) = project_q(&f, &k, &b).unwrap();
        let (q2, rr) = project_q(&q1, &k, &b).unwrap();
        assert!(rr[0].abs() < 1e-12 && rr[1].abs() < 1e-12, "{rr:?}");
        let diff = q1
            .values[0]
            .iter()
            .flatten()
            .zip(q2.values[0].iter().flatten())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff < 1e-12);
    }
}
