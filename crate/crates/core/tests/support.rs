mod common;

use std::f64::consts::PI;

use common::{angle, circle, v};
use mfit_core::geometry::GeometricBounds;
use mfit_core::manifold::omega_d;
use mfit_core::noise::generate_observations;
use mfit_core::support::{
    find_distance, glivenko_cantelli_check, make_params, slab_fraction, theoretical_sample_bound, ExactSupport,
};
use mfit_core::PointCloud;
use nalgebra::DVector;

fn circle_bounds() -> GeometricBounds {
    GeometricBounds { d: 1, n: 2, tau: 1.0, volume: 2.0 * PI, r_exposed: 1.0, lambda: 1.0 }
}

#[test]
fn kappa_ratio_cancels_sigma() {
    for (sigma, eps) in [(0.5, 0.05), (0.9, 0.03), (0.3, 0.02)] {
        let p = make_params(&circle_bounds(), sigma, eps, 0.1).unwrap();
        let want = 2.0 * PI / (p.delta.sqrt() * omega_d(1).unwrap());
        assert!((p.kappa1 / p.kappa0 - want).abs() < 1e-12 * want);
    }
}

#[test]
fn desk_params_reference_values() {
    // independent high-precision evaluation
    let p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
    assert_eq!(p.delta, 0.003125);
    assert!((p.kappa0 - 1.253_314_137_315_500_3).abs() < 1e-14);
    assert!((p.kappa1 - 70.434_396_915_484_21).abs() < 1e-10);
    assert!((p.r_delta - 322.311_230_699_702_9).abs() < 1e-9);
    assert!((p.ln_gamma_delta - -207_773.313_552_050_6).abs() < 1e-6);
    assert!(p.ln_gamma_delta + p.kappa1.ln() <= -8.0);
}

#[test]
fn params_reject_bad_eps() {
    assert!(make_params(&circle_bounds(), 0.5, 0.07, 0.1).is_err());
    assert!(make_params(&circle_bounds(), 0.5, 0.0, 0.1).is_err());
    assert!(make_params(&circle_bounds(), 0.5, 0.05, 0.6).is_err());
    assert!(make_params(&circle_bounds(), 0.0, 0.05, 0.1).is_err());
}

#[test]
fn slab_fraction_examples() {
    let b = v(&[1.0, 0.0]);
    let below = PointCloud::from_vectors(&[v(&[0.1, 5.0]), v(&[0.2, -1.0])]).unwrap();
    assert_eq!(slab_fraction(&below, &b, 0.5, 0.1).unwrap(), 0.0);

    let uniform: Vec<DVector<f64>> = (0..100).map(|k| v(&[(k as f64 + 0.5) / 100.0, 0.0])).collect();
    let f = slab_fraction(&PointCloud::from_vectors(&uniform).unwrap(), &b, 0.5, 0.1).unwrap();
    // binomial sd of the count is about 3, i.e. 0.3 in density
    assert!((f - 1.0).abs() <= 0.3, "{f}");

    let at_gamma = PointCloud::from_vectors(&vec![v(&[0.5, 0.0]); 10]).unwrap();
    assert_eq!(slab_fraction(&at_gamma, &b, 0.5, 0.1).unwrap(), 0.0);
    assert!(slab_fraction(&at_gamma, &b, 0.5, 0.0).is_err());
}

#[test]
fn empty_scan_fails() {
    let mut p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
    p.j_plus = p.j_minus;
    let pts = generate_observations(&circle(1.0, 2), 1000, 0.5, 1).unwrap().observations;
    assert!(find_distance(&pts, &v(&[1.0, 0.0]), &p).unwrap().failed);
    let ex = ExactSupport::from_atoms(PointCloud::from_vectors(&[v(&[0.0, 0.0])]).unwrap(), &[1.0], 0.5).unwrap();
    assert!(ex.find_distance(&v(&[1.0, 0.0]), &p).unwrap().failed);
}

#[test]
fn find_distance_rejects_non_unit_direction() {
    let p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
    let pts = PointCloud::from_vectors(&[v(&[0.0, 0.0])]).unwrap();
    assert!(find_distance(&pts, &v(&[2.0, 0.0]), &p).is_err());
}

#[test]
fn exact_support_of_circle_directions() {
    let m = circle(1.0, 2);
    let p = make_params(m.bounds(), 0.5, 0.05, 0.1).unwrap();
    let ex = ExactSupport::from_manifold(&m, None, 0.5, p.r_delta).unwrap();
    for k in 0..8 {
        let b = angle(k as f64 * PI / 4.0 + 0.1);
        let est = ex.find_distance(&b, &p).unwrap();
        assert!(!est.failed);
        assert!((est.s_est - 1.0).abs() < p.eps, "{k}: {}", est.s_est);
    }
}

#[test]
fn point_mass_support_is_zero() {
    let p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
    let ex = ExactSupport::from_atoms(PointCloud::from_vectors(&[v(&[0.0, 0.0])]).unwrap(), &[1.0], 0.5).unwrap();
    // the scan window sits near s = 1; widen it down to s = 0
    let mut wide = p.clone();
    wide.j_minus -= (1.5 / p.delta) as i64;
    for k in 0..6 {
        let est = ex.find_distance(&angle(k as f64), &wide).unwrap();
        assert!(!est.failed);
        assert!(est.s_est.abs() < p.eps, "{}", est.s_est);
    }
}

#[test]
fn gamma_exact_matches_quadrature_oracle() {
    let m = circle(1.0, 2);
    let ex = ExactSupport::from_manifold(&m, None, 0.5, 1.0).unwrap();
    let b = v(&[1.0, 0.0]);
    // mpmath quadrature of the circle average of the Gaussian density
    assert!((ex.gamma(&b, 1.0).unwrap() - 0.295_055_559_555_563_5).abs() < 1e-9);
    assert!((ex.gamma(&b, 1.3).unwrap() - 0.188_501_047_316_346_9).abs() < 1e-9);
    assert!(ex.gamma(&b, 60.0).unwrap() < 1e-300);
    assert!(ex.ln_gamma(&b, 1e4).unwrap() < -1e8);
}

#[test]
fn gamma_monotone_sandwich_and_gap() {
    let m = circle(1.0, 2);
    let p = make_params(m.bounds(), 0.5, 0.05, 0.1).unwrap();
    let ex = ExactSupport::from_manifold(&m, None, 0.5, p.r_delta).unwrap();
    let b = angle(0.3);
    let mut last = f64::INFINITY;
    let mut gap_checked = 0;
    for k in 0..100 {
        let g = 1.01 + k as f64 * 4.0;
        let lg = ex.ln_gamma(&b, g).unwrap();
        assert!(lg < last, "not decreasing at {g}");
        last = lg;
        let (lo, hi) = p.sandwich(lg);
        let h = g - 1.0;
        assert!(lo <= h && h <= hi, "{lo} {h} {hi}");
        if p.gap_hypothesis(lg) {
            assert!(p.gap(lg) <= 2.0 * p.bounds.tau * p.delta);
            gap_checked += 1;
        }
    }
    assert!(gap_checked > 0);
}

#[test]
fn ell_slope_below_d0() {
    let p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
    let lo = p.ln_gamma_delta - 2f64.ln();
    let hi = 1.0 - p.kappa1.ln();
    for k in 0..=200 {
        let lg = lo + (hi - lo) * k as f64 / 200.0;
        if lg + p.kappa1.ln() >= -1e-3 {
            continue;
        }
        // ell as a function of Gamma: d ell / d Gamma = ell'(ln G) / G
        let h = 1e-4;
        let slope = (p.ell(lg + h) - p.ell(lg - h)) / (2.0 * h);
        let ln_fd = slope.abs().ln() - lg;
        assert!(ln_fd <= p.ln_d0 + 1e-6, "{lg}: {ln_fd} > {}", p.ln_d0);
        assert!((ln_fd - p.ln_ell_slope(lg)).abs() < 1e-4);
    }
}

#[test]
fn moving_average_is_bracketed() {
    let m = circle(1.0, 2);
    let p = make_params(m.bounds(), 0.5, 0.05, 0.1).unwrap();
    let ex = ExactSupport::from_manifold(&m, None, 0.5, p.r_delta).unwrap();
    let b = angle(1.1);
    for j in (p.j_minus..p.j_plus).step_by(37) {
        let g = j as f64 * p.delta;
        let av = ex.ln_gamma_av(&b, g, p.delta).unwrap();
        let at_hi = ex.ln_gamma(&b, g + p.delta).unwrap();
        let at_lo = ex.ln_gamma(&b, g).unwrap();
        assert!(p.ell(at_hi) > p.ell(av) && p.ell(av) > p.ell(at_lo));
    }
}

#[test]
fn theoretical_bound_behaviour() {
    let p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
    let n = theoretical_sample_bound(&p).unwrap();
    assert!(n.is_finite() && n > 9.0);
    let mut q = p.clone();
    q.eta = p.eta / std::f64::consts::E;
    assert!(theoretical_sample_bound(&q).unwrap() > n);
    let mut last = 0.0;
    for eps in [0.06, 0.04, 0.02, 0.01, 0.005] {
        let b = theoretical_sample_bound(&make_params(&circle_bounds(), 0.5, eps, 0.1).unwrap()).unwrap();
        assert!(b > last);
        last = b;
    }
}

fn tail_directions(k: usize) -> Vec<DVector<f64>> {
    (0..k).map(|i| angle(i as f64 * PI / k as f64)).collect()
}

#[test]
fn glivenko_cantelli_within_dkw_level() {
    let m = circle(1.0, 2);
    let sigma = 0.5;
    let model = ExactSupport::from_manifold(&m, None, sigma, 1.0).unwrap();
    let dirs = tail_directions(4);
    let gammas: Vec<f64> = (0..41).map(|k| -2.0 + k as f64 * 0.1).collect();
    let n = 100_000;
    let eta = 0.1;
    // DKW level for a union over the directions
    let a = ((2.0 * dirs.len() as f64 / eta).ln() / (2.0 * n as f64)).sqrt();
    let mut exceeded = 0;
    for seed in 0..20 {
        let pts = generate_observations(&m, n, sigma, 1000 + seed).unwrap().observations;
        if glivenko_cantelli_check(&pts, &dirs, a, &model, &gammas).unwrap().exceeded {
            exceeded += 1;
        }
    }
    assert!(exceeded as f64 / 20.0 <= eta, "{exceeded}");
}

#[test]
fn glivenko_cantelli_small_sample_reports() {
    let m = circle(1.0, 2);
    let model = ExactSupport::from_manifold(&m, None, 0.5, 1.0).unwrap();
    let pts = generate_observations(&m, 10, 0.5, 3).unwrap().observations;
    let rep = glivenko_cantelli_check(&pts, &tail_directions(3), 0.01, &model, &[0.0, 0.5]).unwrap();
    assert_eq!(rep.evaluations, 6);
    assert!(rep.sup_deviation.is_finite());
}

#[test]
fn glivenko_cantelli_identical_points() {
    let q = v(&[0.3, 0.0]);
    let pts = PointCloud::from_vectors(&vec![q.clone(); 50]).unwrap();
    let model =
        ExactSupport::from_atoms(PointCloud::from_vectors(&[v(&[0.0, 0.0])]).unwrap(), &[1.0], 0.2).unwrap();
    let b = v(&[1.0, 0.0]);
    let gammas: Vec<f64> = (0..30).map(|k| -0.6 + k as f64 * 0.05).collect();
    let rep = glivenko_cantelli_check(&pts, &[b.clone()], 0.0, &model, &gammas).unwrap();
    let brute = gammas
        .iter()
        .map(|&g| {
            let emp = if 0.3 > g { 1.0 } else { 0.0 };
            let exact = 0.5 * libm::erfc(g / (0.2 * 2f64.sqrt()));
            (emp - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!((rep.sup_deviation - brute).abs() < 1e-12, "{} {brute}", rep.sup_deviation);
}
