mod common;

use liouville::coupling::CouplingMatrix;
use liouville::radial_bubble::{match_sigma, solve_radial};

fn rows(a: &CouplingMatrix) -> Vec<Vec<f64>> {
    (0..a.n()).map(|i| (0..a.n()).map(|j| a.get(i, j)).collect()).collect()
}

#[test]
fn agrees_with_fixed_step_rk4() {
    for (a, alpha) in [
        (CouplingMatrix::scalar(), vec![0.3]),
        (CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), vec![1.05, 0.95]),
        (CouplingMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(), vec![0.5, -0.4]),
    ] {
        let b = solve_radial(&a, &alpha, 200.0, 1e-10).unwrap();
        let (v, mu) = common::radial_rk4(&rows(&a), &alpha, 200.0, 2e-3);
        for i in 0..a.n() {
            let k = b.r.len() - 1;
            assert!((b.v[i][k] - v[i]).abs() < 1e-8, "v_{i}: {} vs {}", b.v[i][k], v[i]);
            assert!((b.mu[i][k] - mu[i]).abs() < 1e-8 * mu[i], "μ_{i}: {} vs {}", b.mu[i][k], mu[i]);
        }
    }
}

#[test]
fn matching_hits_target_masses() {
    let a = CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let b = match_sigma(&a, &[3.0, 6.0], &[2.0, 2.0], 1e5, 1e-10).unwrap();
    assert!((b.sigma[0] - 3.0).abs() < 1e-8 && (b.sigma[1] - 6.0).abs() < 1e-8);
    assert!((b.alpha[0] - 2.0).abs() < 1e-14, "α_1 is held fixed");
    assert!((b.m[1] - 3.0).abs() < 1e-8);
}

#[test]
fn far_field_continues_the_solution() {
    let b = solve_radial(&CouplingMatrix::scalar(), &[8f64.ln()], 100.0, 1e-10).unwrap();
    for r in [150.0, 1e3, 1e4] {
        let exact = (8.0 / (1.0f64 + r * r).powi(2)).ln();
        assert!((b.eval(0, r).0 - exact).abs() < 1e-8, "r = {r}");
    }
}

#[test]
fn non_integrable_data_is_an_error() {
    let a = CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(solve_radial(&a, &[1.5, 0.5], 1e5, 1e-10).is_err());
    assert!(solve_radial(&a, &[1.18, 0.82], 1e5, 1e-10).is_err());
}
