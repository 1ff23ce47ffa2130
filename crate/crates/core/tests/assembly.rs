use std::f64::consts::PI;

use liouville::assembly::*;
use liouville::coupling::{CouplingMatrix, ParamVector};
use liouville::fredholm::first_order_correction;
use liouville::linearized::FrequencyGrid;
use liouville::radial_bubble::match_sigma;
use liouville::torus::{HField, Point};

fn toda() -> CouplingMatrix {
    CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

/// Balanced weights: Σ_i ρ_i ∇ln h_i(q) = 0 at q = (1/2, 1/2).
fn balanced_h() -> Vec<HField> {
    let c = 1.0 / (2.0 * PI);
    vec![
        HField::from_terms(0.0, &[([1, 0], 0.1, -2.0 * c), ([0, 1], 0.0, -0.6 * c)]),
        HField::from_terms(0.0, &[([1, 0], 0.0, c), ([0, 1], 0.15, 0.3 * c)]),
    ]
}

fn m3_config(eps: f64) -> BlowupConfig {
    let rho = ParamVector::new(vec![2.0 * PI * 3.0, 2.0 * PI * 6.0], 1).unwrap();
    BlowupConfig::with_matched_bubble(toda(), rho, vec![[0.5, 0.5]], balanced_h(), eps, 0.25, 2.0).unwrap()
}

fn symmetric_pair(eps: f64) -> BlowupConfig {
    let rho = ParamVector::new(vec![2.0 * PI * 2.0 * 3.0, 2.0 * PI * 2.0 * 6.0], 2).unwrap();
    let pts = vec![[0.25, 0.5], [0.75, 0.5]];
    let tau = default_tau(&pts);
    BlowupConfig::with_matched_bubble(toda(), rho, pts, vec![HField::default(); 2], eps, tau, 2.0).unwrap()
}

#[test]
fn equal_components_coincide() {
    let rho = ParamVector::new(vec![8.0 * PI, 8.0 * PI], 1).unwrap();
    let c = BlowupConfig::with_matched_bubble(toda(), rho, vec![[0.5, 0.5]], vec![HField::default(); 2], 0.02, 0.25, 1.0)
        .unwrap();
    let sol = assemble(&c, 64).unwrap();
    let worst = sol.values[0].iter().zip(&sol.values[1]).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn masses_approach_one() {
    let mut prev = [f64::INFINITY; 2];
    for eps in [0.04, 0.02] {
        let c = m3_config(eps);
        let sol = assemble(&c, 256).unwrap();
        let m = mass_integrals(&c, &sol).unwrap();
        for i in 0..2 {
            let d = (1.0 - m[i]).abs();
            assert!(d < 0.2 && d < prev[i], "ε = {eps}, component {i}: mass {}", m[i]);
            prev[i] = d;
        }
    }
}

#[test]
fn residual_decreases_and_is_grid_converged() {
    let mut prev = f64::INFINITY;
    for eps in [0.04, 0.02] {
        let c = m3_config(eps);
        let sol = assemble(&c, 256).unwrap();
        let r = residual(&c, &sol, c.tau / 4.0).unwrap();
        let l2 = r.l2.iter().cloned().fold(0.0f64, f64::max);
        assert!(l2 < prev, "ε = {eps}: {l2} after {prev}");
        prev = l2;
        if eps == 0.02 {
            let fine = assemble(&c, 512).unwrap();
            let rf = residual(&c, &fine, c.tau / 4.0).unwrap();
            for i in 0..2 {
                let rel = (rf.l2[i] - r.l2[i]).abs() / rf.l2[i];
                assert!(rel < 0.05, "component {i}: {} vs {}", r.l2[i], rf.l2[i]);
            }
        }
    }
}

#[test]
fn unresolved_bubble_is_rejected() {
    let c = m3_config(0.005);
    let sol = assemble(&c, 64).unwrap();
    assert!(residual(&c, &sol, c.tau / 4.0).is_err());
}

#[test]
fn location_residual_is_grad_f() {
    let c = m3_config(0.01);
    let loc = location_check(&c).unwrap();
    let scale = loc.grad_f.iter().flat_map(|p| p.iter()).fold(1.0f64, |a, b| a.max(b.abs()));
    assert!(loc.identity_gap <= 1e-12 * scale);

    let rho = ParamVector::new(vec![2.0 * PI * 3.0, 2.0 * PI * 6.0], 1).unwrap();
    let flat = BlowupConfig::with_matched_bubble(toda(), rho, vec![[0.3, 0.8]], vec![HField::default(); 2], 0.01, 0.25, 2.0)
        .unwrap();
    let loc = location_check(&flat).unwrap();
    assert!(loc.residuals[0].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn global_cancellation_cases() {
    let c = symmetric_pair(0.02);
    let sol = assemble(&c, 256).unwrap();
    let zero = global_cancellation(&c, &sol, &|_, _| 0.0).unwrap();
    assert!(zero.iter().all(|&x| x == 0.0));
    let one = global_cancellation(&c, &sol, &|_, _| 1.0).unwrap();
    let m = mass_integrals(&c, &sol).unwrap();
    for i in 0..2 {
        let base: f64 = (0..2).map(|j| c.coupling.get(i, j) * c.rho.rho[j] * m[j]).sum();
        assert!((one[i] - base).abs() < 1e-12 * base.abs());
    }
    // Odd under the reflection x₁ ↦ 1 − x₁ that swaps the two points.
    let odd = global_cancellation(&c, &sol, &|i, x: Point| (1.0 + i as f64) * (2.0 * PI * x[0]).sin()).unwrap();
    for i in 0..2 {
        assert!(odd[i].abs() < 1e-10 * one[i].abs(), "{odd:?}");
    }
}

#[test]
fn symmetric_pair_has_consistent_constants() {
    let c = symmetric_pair(0.01);
    for i in 0..2 {
        let u = c.u_bar_per_point(i);
        assert!((u[0] - u[1]).abs() < 1e-12);
    }
    assert!((c.eps[0] - c.eps[1]).abs() < 1e-15);
}

fn rotate(p: Point, th: f64) -> Point {
    [th.cos() * p[0] - th.sin() * p[1], th.sin() * p[0] + th.cos() * p[1]]
}

#[test]
fn pohozaev_rotation_covariance() {
    let b = match_sigma(&toda(), &[3.0, 6.0], &[2.0, 2.0], 1e5, 1e-10).unwrap();
    let a = [[2.0, 0.6], [-1.0, -0.3]];
    let (eps, radius) = (0.01, 25.0);
    let base = pohozaev_balance_both(&LocalDisk::linear_weight(&b, &a, eps, radius, None)).unwrap();
    let p = [base[0].imbalance, base[1].imbalance];
    for th in [PI / 2.0, PI / 4.0] {
        let ar: Vec<Point> = a.iter().map(|x| rotate(*x, th)).collect();
        let rot = pohozaev_balance_both(&LocalDisk::linear_weight(&b, &ar, eps, radius, None)).unwrap();
        let expect = rotate(p, th);
        for s in 0..2 {
            let tol = 1e-9 * base[s].volume.abs().max(base[1 - s].volume.abs()) + 10.0 * base[s].quadrature_tol;
            assert!((rot[s].imbalance - expect[s]).abs() <= tol, "θ = {th}, s = {s}");
        }
    }
}

#[test]
fn corrected_balance_is_second_order() {
    let c = m3_config(0.005);
    let h = c.chart_data(0).unwrap();
    let fo = first_order_correction(&c.bubble, &h, c.eps[0], c.tau, FrequencyGrid::default(), true).unwrap();
    let corrected = pohozaev_balance_both(&LocalDisk::from_config(&c, 0, Some(&fo))).unwrap();
    let worst = corrected.iter().map(|p| p.imbalance.abs()).fold(0.0f64, f64::max);
    let e2 = c.eps[0] * c.eps[0];
    assert!(worst / e2 < 500.0, "imbalance/ε² = {}", worst / e2);
}

#[test]
fn rejects_bad_configurations() {
    let rho = ParamVector::new(vec![2.0 * PI * 3.0, 2.0 * PI * 6.0], 1).unwrap();
    let off = ParamVector::new(vec![2.0 * PI * 3.0, 2.0 * PI * 7.0], 1).unwrap();
    let h = vec![HField::default(); 2];
    assert!(BlowupConfig::with_matched_bubble(toda(), off, vec![[0.5, 0.5]], h.clone(), 0.01, 0.25, 2.0).is_err());
    assert!(BlowupConfig::with_matched_bubble(toda(), rho.clone(), vec![[0.5, 0.5]], h.clone(), 0.2, 0.25, 2.0).is_err());
    assert!(BlowupConfig::with_matched_bubble(toda(), rho, vec![[0.5, 0.5]], h, 0.01, 0.3, 2.0).is_err());
}
