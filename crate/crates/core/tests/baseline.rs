mod common;

use acpd_core::baseline_cpd::cpd_m_step;
use acpd_core::nalgebra::{DMatrix, SymmetricEigen};
use acpd_core::posterior::DEFAULT_EPS_RHO;
use acpd_core::shapes::clusters3d;
use acpd_core::{
    apply_bump_blend, compute_posterior, cpd_register, gaussian_kernel, make_bump_blend_field, normalize_pair,
    normalize_single, param_count, register, CpdConfig, EngineConfig, SynthParams,
};
use common::{cube_points, rng};
use rand::Rng;

#[test]
fn regularized_kernel_system_is_positive_definite() {
    let mut r = rng(31);
    for _ in 0..20 {
        let m = r.random_range(2..40);
        let y = cube_points(&mut r, 3, m);
        let n = r.random_range(2..40);
        let x = cube_points(&mut r, 3, n);
        let sigma2 = r.random_range(0.01..1.0);
        let g = gaussian_kernel(&y, r.random_range(0.3..3.0)).unwrap();
        assert_eq!(g, g.transpose());
        let stats = compute_posterior(&x, &y, sigma2, 0.1, DEFAULT_EPS_RHO).unwrap();
        let mut a = g.clone();
        for i in 0..m {
            a[(i, i)] += 2.0 * sigma2 / stats.rho[i];
        }
        let eig = SymmetricEigen::new(a);
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0), "{:?}", eig.eigenvalues);
    }
}

#[test]
fn multiplied_m_step_matches_the_divided_form() {
    let mut r = rng(32);
    let y = cube_points(&mut r, 2, 25);
    let x = cube_points(&mut r, 2, 30);
    let (lambda, sigma2) = (2.0, 0.3);
    let g = gaussian_kernel(&y, 2.0).unwrap();
    let stats = compute_posterior(&x, &y, sigma2, 0.1, DEFAULT_EPS_RHO).unwrap();
    let w = cpd_m_step(&g, &stats, &y, lambda, sigma2).unwrap();

    // (G + lambda sigma2 diag(rho)^-1) W = diag(rho)^-1 P X - Y
    let mut a = g.clone();
    let mut rhs = DMatrix::zeros(25, 2);
    for i in 0..25 {
        a[(i, i)] += lambda * sigma2 / stats.rho[i];
        for l in 0..2 {
            rhs[(i, l)] = stats.sx[(i, l)] / stats.rho[i] - y.point(i)[l];
        }
    }
    let oracle = a.lu().solve(&rhs).unwrap();
    assert!((w - &oracle).amax() < 1e-9 * oracle.amax().max(1.0));
}

#[test]
fn kernel_system_grows_with_the_moving_set_while_the_analytic_one_does_not() {
    let x = normalize_single(&clusters3d(500)).unwrap().0;
    let field = make_bump_blend_field(&x, &SynthParams::default()).unwrap();
    let fixed = apply_bump_blend(&field, &x).unwrap();
    let (fx, my, _) = normalize_pair(&fixed, &x).unwrap();
    let cpd = cpd_register(
        &fx,
        &my,
        &CpdConfig {
            max_iters: 3,
            ..CpdConfig::default()
        },
    )
    .unwrap();
    assert_eq!(cpd.system_size, 500);
    let ours = register(
        &fx,
        &my,
        &EngineConfig {
            t_max: 3,
            ..EngineConfig::default()
        },
    )
    .unwrap();
    assert!(ours
        .maps
        .iter()
        .all(|m| m.coefficient_count() == param_count(3, m.order()).unwrap()));
    assert!(ours.maps.iter().all(|m| m.coefficient_count() < 500));
}

#[test]
fn baseline_reduces_a_bump_blend_error() {
    let x = normalize_single(&clusters3d(300)).unwrap().0;
    let field = make_bump_blend_field(
        &x,
        &SynthParams {
            seed: 2,
            ..SynthParams::default()
        },
    )
    .unwrap();
    let fixed = apply_bump_blend(&field, &x).unwrap();
    let (fx, my, _) = normalize_pair(&fixed, &x).unwrap();
    let cfg = CpdConfig {
        record_external_rmse: true,
        ..CpdConfig::default()
    };
    let r = cpd_register(&fx, &my, &cfg).unwrap();
    assert!(r.trace.best_score * 10.0 < r.trace.initial_external_rmse.unwrap());
}
