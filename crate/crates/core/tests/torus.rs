mod common;

use liouville::torus::*;

#[test]
fn ewald_matches_fourier_oracle() {
    let g = TorusGreen::default();
    for (x, q) in [([0.1, 0.2], [0.7, 0.9]), ([0.5, 0.5], [0.0, 0.0]), ([0.31, 0.02], [0.3, 0.9])] {
        let e = g.green(x, q).unwrap();
        let f = common::green_fourier(x, q, 400);
        assert!((e - f).abs() < 1e-10, "{x:?} {q:?}: {e} vs {f}");
    }
}

#[test]
fn symmetric_and_translation_invariant() {
    let g = TorusGreen::default();
    let (x, q) = ([0.13, 0.77], [0.61, 0.4]);
    let s = [0.37, -0.22];
    let gxq = g.green(x, q).unwrap();
    assert!((gxq - g.green(q, x).unwrap()).abs() < 1e-13);
    let shifted = g.green(wrap_point([x[0] + s[0], x[1] + s[1]]), wrap_point([q[0] + s[0], q[1] + s[1]])).unwrap();
    assert!((gxq - shifted).abs() < 1e-12);
}

#[test]
fn laplacian_is_the_background_density() {
    // −ΔG = δ_q − 1, so ΔG = 1 away from q.
    let g = TorusGreen::default();
    let q = [0.2, 0.3];
    let h = 1e-3;
    for x in [[0.6, 0.6], [0.45, 0.1], [0.9, 0.95]] {
        let c = g.green(x, q).unwrap();
        let lap = (g.green([x[0] + h, x[1]], q).unwrap()
            + g.green([x[0] - h, x[1]], q).unwrap()
            + g.green([x[0], x[1] + h], q).unwrap()
            + g.green([x[0], x[1] - h], q).unwrap()
            - 4.0 * c)
            / (h * h);
        assert!((lap - 1.0).abs() < 1e-4, "{x:?}: {lap}");
        let j = g.green_jet(x, q).unwrap();
        assert!((j.hess[0][0] + j.hess[1][1] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn jet_matches_finite_differences() {
    let g = TorusGreen::default();
    let (x, q) = ([0.42, 0.81], [0.05, 0.33]);
    let j = g.green_jet(x, q).unwrap();
    let h = 1e-5;
    for a in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[a] += h;
        xm[a] -= h;
        let fd = (g.green(xp, q).unwrap() - g.green(xm, q).unwrap()) / (2.0 * h);
        assert!((fd - j.grad[a]).abs() < 1e-8);
        let jp = g.green_jet(xp, q).unwrap();
        let jm = g.green_jet(xm, q).unwrap();
        for b in 0..2 {
            let fd = (jp.grad[b] - jm.grad[b]) / (2.0 * h);
            assert!((fd - j.hess[a][b]).abs() < 1e-6);
        }
    }
}

#[test]
fn symmetric_pair_is_critical() {
    let g = TorusGreen::default();
    let pts = [[0.25, 0.5], [0.75, 0.5]];
    let rho = [8.0 * std::f64::consts::PI];
    let h = [HField::default()];
    let res = se1_residual(&g, &pts, &rho, &[4.0], &h).unwrap();
    assert!(res.iter().all(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12));
    let cp = find_critical(&g, &[[0.26, 0.49], [0.74, 0.52]], &rho, &[4.0], &h, 0, 5).unwrap();
    assert!(cp.gradient_norm <= 1e-10);
    let sep = torus_dist(cp.points[0], cp.points[1]);
    assert!((sep - 0.5).abs() < 1e-6 || (sep - 0.5f64.sqrt()).abs() < 1e-6, "separation {sep}");
}

#[test]
fn coincident_points_rejected() {
    assert!(check_distinct(&[[0.1, 0.1], [1.1, 0.1]]).is_err());
    assert!(TorusGreen::default().green([0.3, 0.3], [0.3, 0.3]).is_err());
}
