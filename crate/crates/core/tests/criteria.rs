use std::f64::consts::PI;

use liouville::criteria::*;
use liouville::torus::{HField, Point, TorusGreen};

fn sample_h() -> Vec<HField> {
    vec![
        HField::from_terms(0.0, &[([1, 0], 0.1, -0.3), ([0, 1], 0.0, 0.2)]),
        HField::from_terms(0.2, &[([1, 1], 0.05, 0.1)]),
    ]
}

fn shifted(points: &[Point], s: Point) -> Vec<Point> {
    points.iter().map(|q| [(q[0] + s[0]).rem_euclid(1.0), (q[1] + s[1]).rem_euclid(1.0)]).collect()
}

#[test]
fn translation_invariance() {
    let g = TorusGreen::default();
    let pts = [[0.2, 0.3], [0.65, 0.7]];
    let s = [0.31, -0.17];
    let h = sample_h();
    let ht: Vec<HField> = h.iter().map(|f| f.translated(s)).collect();
    let m = [3.0, 6.0];
    let (h0, h1) = (h_matrix(&g, &pts, &h, &m).unwrap(), h_matrix(&g, &shifted(&pts, s), &ht, &m).unwrap());
    let (l0, l1) = (l_coefficients(&g, &pts, &h).unwrap(), l_coefficients(&g, &shifted(&pts, s), &ht).unwrap());
    for i in 0..2 {
        for t in 0..2 {
            assert!((h0[i][t] - h1[i][t]).abs() < 1e-12);
            assert!((l0[i][t] - l1[i][t]).abs() < 1e-10 * l0[i][t].abs());
        }
    }
    let quad = DQuadrature { grid: 128, ..Default::default() };
    let d0 = d_coefficients(&g, &pts, &h, &m, &[0.0, 0.0], &[0.2, 0.1, 0.05], quad).unwrap();
    let d1 = d_coefficients(&g, &shifted(&pts, s), &ht, &m, &[0.0, 0.0], &[0.2, 0.1, 0.05], quad).unwrap();
    for t in 0..2 {
        let (a, b) = (d0.d[0][t].unwrap(), d1.d[0][t].unwrap());
        assert!((a - b).abs() < 1e-3 * a.abs(), "D_1{t}: {a} vs {b}");
        assert!(d0.d[1][t].is_none(), "m = 6 has no finite part at this order");
    }
}

#[test]
fn symmetric_pair_l_and_ratios() {
    let g = TorusGreen::default();
    let pts = [[0.25, 0.5], [0.75, 0.5]];
    let h = vec![HField::default()];
    let l = l_coefficients(&g, &pts, &h).unwrap();
    assert!((l[0][0] - 16.0 * PI).abs() < 1e-9 && (l[0][1] - 16.0 * PI).abs() < 1e-9);
    let hm = h_matrix(&g, &pts, &h, &[4.0]).unwrap();
    let r = epsilon_ratios(&hm, &[4.0], 0.01).unwrap();
    assert!((r.eps[1] - 0.01).abs() < 1e-15);
}

#[test]
fn inconsistent_scales_warn() {
    let hm = vec![vec![0.0, 0.3], vec![0.0, 0.9]];
    let r = epsilon_ratios(&hm, &[3.0, 4.0], 0.01).unwrap();
    assert!(r.warning.is_some());
    assert!(epsilon_ratios(&hm, &[2.0, 4.0], 0.01).is_err());
}

#[test]
fn regime_a_prediction_scales_with_eps() {
    let g = TorusGreen::default();
    let rep = criteria_report(
        &g,
        &[[0.5, 0.5]],
        &sample_h(),
        &[6.0, 3.0],
        &[1.0, 2.0],
        &[0.2, 0.1, 0.05],
        DQuadrature::default(),
    )
    .unwrap();
    assert_eq!(rep.regime, Regime::A);
    assert_eq!(rep.minimizers, vec![1]);
    let a = lambda_prediction(&rep, 1e-2, LambdaForm::Restricted).unwrap();
    let b = lambda_prediction(&rep, 1e-3, LambdaForm::Restricted).unwrap();
    assert!((a / b - 10.0).abs() < 1e-10);
    // The full form adds the m = 6 component, which has no D at this order.
    assert!(lambda_prediction(&rep, 1e-2, LambdaForm::Full).is_err());
}
