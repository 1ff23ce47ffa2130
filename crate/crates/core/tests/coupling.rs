use liouville::coupling::*;
use proptest::prelude::*;

fn toda() -> CouplingMatrix {
    CouplingMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

fn three() -> CouplingMatrix {
    CouplingMatrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![2.0, 1.0, 1.0], vec![0.5, 1.0, 2.0]]).unwrap()
}

#[test]
fn projection_of_sample_ray() {
    let a = CouplingMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    let rho = gamma_project(&a, &[1.0, 1.5], 2).unwrap();
    assert!(lambda_in(&a, &rho).abs() <= 1e-12 * lambda_scale(&rho));
    let md = m_star(&a, &rho);
    assert!(pohozaev_defect(&a, &md.sigma).abs() < 1e-10);
}

#[test]
fn masses_for_toda() {
    let rho = ParamVector::new(vec![2.0 * std::f64::consts::PI * 3.0, 2.0 * std::f64::consts::PI * 6.0], 1).unwrap();
    let md = m_star(&toda(), &rho);
    assert!((md.m[0] - 6.0).abs() < 1e-12 && (md.m[1] - 3.0).abs() < 1e-12);
    assert_eq!(md.minimizers(1e-9), vec![1]);
    assert!(md.integrable);
}

#[test]
fn toda_is_admissible() {
    assert!(check_hypotheses(&toda()).admissible());
}

proptest! {
    #[test]
    fn projection_lands_on_surface(r in prop::collection::vec(0.1f64..10.0, 3), n in 1usize..4) {
        let a = three();
        let rho = gamma_project(&a, &r, n).unwrap();
        prop_assert!(lambda_in(&a, &rho).abs() <= 1e-12 * lambda_scale(&rho));
        // The projection only rescales the ray.
        let k = rho.rho[0] / r[0];
        for (x, y) in rho.rho.iter().zip(&r) {
            prop_assert!((x / y - k).abs() <= 1e-12 * k);
        }
    }

    #[test]
    fn permutation_covariance(r in prop::collection::vec(0.1f64..10.0, 3), p in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let a = three();
        let ap = a.permuted(&p);
        let rp: Vec<f64> = p.iter().map(|&i| r[i]).collect();
        let rho = gamma_project(&a, &r, 1).unwrap();
        let rhop = gamma_project(&ap, &rp, 1).unwrap();
        for (k, &i) in p.iter().enumerate() {
            prop_assert!((rhop.rho[k] - rho.rho[i]).abs() <= 1e-12 * rho.rho[i]);
        }
        prop_assert_eq!(check_hypotheses(&a).pass, check_hypotheses(&ap).pass);
        let md = m_star(&a, &rho);
        let mdp = m_star(&ap, &rhop);
        prop_assert!((md.m_star - mdp.m_star).abs() <= 1e-12 * md.m_star);
    }
}
