use liouville::coupling::CouplingMatrix;
use liouville::linearized::*;
use liouville::radial_bubble::match_sigma;

fn toda_bubble() -> liouville::radial_bubble::RadialBubble {
    let a = CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    match_sigma(&a, &[3.0, 6.0], &[2.0, 2.0], 1e5, 1e-10).unwrap()
}

#[test]
fn frequency_one_manufactured_solution() {
    let b = toda_bubble();
    let r_out = 50.0;
    let k = 1.0 / (1.0 + r_out * r_out);
    let c = [1.0, -0.5];
    // g = c(r/(1+r²) − kr) is regular, vanishes at r_out, and kr is annihilated by the ℓ = 1 Laplacian.
    let g = move |i: usize, r: f64| c[i] * (r / (1.0 + r * r) - k * r);
    let lap = move |i: usize, r: f64| {
        let d = 1.0 + r * r;
        let g1 = (1.0 - r * r) / (d * d);
        let g2 = (2.0 * r * r * r - 6.0 * r) / (d * d * d);
        let g0 = r / d;
        c[i] * (g2 + g1 / r - g0 / (r * r))
    };
    let h0 = [1.0, 1.0];
    let src = |i: usize, r: f64| {
        lap(i, r) + (0..2).map(|j| b.coupling.get(i, j) * b.eval(j, r).0.exp() * g(j, r)).sum::<f64>()
    };
    let p = solve_frequency(&b, 1, &h0, &src, r_out, FrequencyGrid::default()).unwrap();
    for r in [1e-3, 0.1, 1.0, 3.0, 10.0, 40.0] {
        for i in 0..2 {
            let err = (p.eval(i, r) - g(i, r)).abs();
            assert!(err < 1e-5 && err < p.error_estimate, "r = {r}, i = {i}: error {err:e}");
        }
    }
    assert!(p.error_estimate < 1e-3);
}

#[test]
fn kernel_residuals_small_for_system() {
    let b = toda_bubble();
    let k = kernel_fields(&b);
    assert!(k.residual_z0 < 10.0 * b.tol && k.residual_z1 < 10.0 * b.tol);
    for (i, gap) in k.far_gap.iter().enumerate() {
        assert!(*gap < 5.0 * b.r_max.powf(2.0 - 3.0), "component {i}: {gap}");
    }
}

#[test]
fn first_order_source_is_linear_in_eps() {
    let b = toda_bubble();
    let h = [
        HLocalData { value: 1.0, grad: [2.0, 0.6], hess: [[0.0; 2]; 2] },
        HLocalData { value: 1.0, grad: [-1.0, -0.3], hess: [[0.0; 2]; 2] },
    ];
    let s1 = first_order_source(&b, &h, 0.01, 0);
    let s2 = first_order_source(&b, &h, 0.02, 0);
    for r in [0.1, 1.0, 10.0] {
        for i in 0..2 {
            assert!((2.0 * s1(i, r) - s2(i, r)).abs() <= 1e-15 * s2(i, r).abs().max(1e-300));
        }
    }
}
