mod common;

use std::f64::consts::PI;

use common::{angle, circle, v};
use mfit_core::manifold::uniform_sample;
use mfit_core::output::{
    bump_weights_solve, build_atlas, evaluate_reconstruction, find_disc, fine_tune_disc, pi_hi_contour, reconstruct,
    subnet, tube_samples, DiscAtlas,
};
use mfit_core::{ImplicitManifold, MfError, OutputConfig, PointCloud};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn ring(count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|k| angle(2.0 * PI * k as f64 / count as f64)).collect()
}

fn cloud(points: &[DVector<f64>]) -> PointCloud {
    PointCloud::from_vectors(points).unwrap()
}

/// Exact centers and exact tangent frames on the unit circle.
fn exact_circle_atlas(count: usize, radius: f64) -> ImplicitManifold {
    let centers = ring(count);
    let frames = centers.iter().map(|c| vec![v(&[-c[1], c[0]])]).collect();
    let atlas = DiscAtlas::new(centers, frames, radius).unwrap();
    ImplicitManifold::new(atlas, vec![1.0; count], 0.1).unwrap()
}

fn single_disc(radius: f64) -> ImplicitManifold {
    let atlas = DiscAtlas::new(vec![v(&[0.0, 0.0])], vec![vec![v(&[1.0, 0.0])]], radius).unwrap();
    ImplicitManifold::new(atlas, vec![1.0], 0.1).unwrap()
}

fn circle_reconstruction() -> ImplicitManifold {
    let net = cloud(&uniform_sample(&circle(1.0, 2), 400, 3));
    reconstruct(&net, 1, 1.0, &OutputConfig::default(), 5).unwrap().0
}

#[test]
fn subnet_examples() {
    let net = cloud(&ring(629));
    assert_eq!(subnet(&net, 0.005).unwrap(), net);
    let sub = subnet(&net, 0.2).unwrap().to_vectors();
    // Grid steps of 2 pi / 629: a chord of 0.2 needs 21 steps, so the greedy
    // keeps indices 0, 21, ..., 588 and rejects 609 (20 steps from 0).
    assert_eq!(sub.len(), 29);
    for (i, a) in sub.iter().enumerate() {
        for b in &sub[i + 1..] {
            assert!((a - b).norm() >= 0.2);
        }
    }
    for x in net.to_vectors() {
        assert!(sub.iter().any(|s| (s - &x).norm() < 0.2));
    }
    let one = cloud(&[v(&[0.3, 0.4])]);
    assert_eq!(subnet(&one, 1.0).unwrap(), one);
    assert!(subnet(&PointCloud::new(2), 1.0).is_err());
    assert!(subnet(&one, 0.0).is_err());
}

#[test]
fn find_disc_examples() {
    let cands = vec![v(&[0.3, 0.3, 0.0]), v(&[1.0, 0.0, 0.0]), v(&[0.0, 2.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 0.5])];
    assert_eq!(find_disc(&cands, 2).unwrap(), vec![1, 3]);
    // d = 1: the candidate closest to unit distance.
    let cands = vec![v(&[0.5, 0.0]), v(&[0.0, 1.2]), v(&[0.9 * 0.6, 0.9 * 0.8]), v(&[-1.3, 0.0])];
    assert_eq!(find_disc(&cands, 1).unwrap(), vec![2]);
    let dup = vec![v(&[0.0, 0.7]), v(&[1.0, 0.0]), v(&[1.0, 0.0])];
    assert_eq!(find_disc(&dup, 1).unwrap(), vec![1]);
    assert!(matches!(find_disc(&dup[..1], 2), Err(MfError::InvalidInput(_))));
}

#[test]
fn fine_tune_on_plane_and_circle() {
    let p = v(&[0.0, 0.0, 1.0]);
    let plane: Vec<DVector<f64>> = (0..30).map(|k| v(&[(k % 6) as f64 * 0.1, (k / 6) as f64 * 0.1 - 0.2, 1.0])).collect();
    let tilted = vec![v(&[1.0, 0.0, 0.1]), v(&[0.0, 1.0, -0.1])];
    let ft = fine_tune_disc(&p, &plane, &tilted).unwrap();
    assert!(ft.residual_after < 1e-28 && !ft.degenerate);

    let base = v(&[1.0, 0.0]);
    let local: Vec<DVector<f64>> = (0..10).map(|k| angle(-0.1 + 0.02 * k as f64)).collect();
    let frame = vec![angle(PI / 2.0 + 0.1)];
    let ft = fine_tune_disc(&base, &local, &frame).unwrap();
    let tilt = ft.frame[0][0].abs().asin();
    assert!(tilt < 0.1 && ft.residual_after.is_finite(), "{tilt}");
    assert!(ft.residual_after <= ft.residual_before);
    assert!(fine_tune_disc(&base, &local[..9], &frame).is_err());
}

#[test]
fn fine_tune_keeps_frame_on_degenerate_design() {
    let p = v(&[0.0, 0.0]);
    let same = vec![v(&[0.0, 0.5]); 12];
    let ft = fine_tune_disc(&p, &same, &[v(&[1.0, 0.0])]).unwrap();
    assert!(ft.degenerate);
    assert_eq!(ft.frame[0], v(&[1.0, 0.0]));
}

#[test]
fn single_disc_weight_and_function() {
    let im = single_disc(2.0);
    let atlas = im.atlas.clone();
    let (w, rep) = bump_weights_solve(&atlas, &[v(&[0.0, 0.0])], 0.1, 10, 8.0, 1).unwrap();
    assert_eq!(w, vec![1.0]);
    assert_eq!(rep.iterations, 0);
    assert_eq!(im.alpha_tilde(&v(&[0.0, 0.0])), 1.0);
    let x = v(&[0.7, -0.4]);
    let f = im.evaluate_frec(&x).unwrap().value;
    assert!((f - v(&[0.0, -0.4])).norm() < 1e-15);
    let y = im.project(&x).unwrap();
    assert!((y - v(&[0.7, 0.0])).norm() < 1e-12);
}

#[test]
fn weights_reject_samples_outside_supports() {
    let atlas = single_disc(1.0).atlas;
    let err = bump_weights_solve(&atlas, &[v(&[0.0, 0.0]), v(&[3.0, 0.0])], 0.1, 10, 8.0, 1).unwrap_err();
    assert!(err.to_string().contains("outside every disc"), "{err}");
}

#[test]
fn circle_weights_keep_band_on_tube() {
    let net = cloud(&uniform_sample(&circle(1.0, 2), 400, 3));
    let cfg = OutputConfig::default();
    let (im, _, rep) = reconstruct(&net, 1, 1.0, &cfg, 5).unwrap();
    assert!(rep.min_alpha > cfg.c_lo && rep.max_alpha < 1.0 / cfg.c_lo);
    for z in tube_samples(&im.atlas, &net, 10_000, 17).unwrap() {
        let a = im.alpha_tilde(&z);
        assert!(a > cfg.c_lo && a < 1.0 / cfg.c_lo, "{a}");
    }
    // Lines at angle t have ||Pi_i - Pi_j||_F = sqrt 2 sin t; overlapping
    // discs on the unit circle are at most 2 asin(r) apart.
    let t = 2.0 * im.atlas.radius.asin();
    assert!(im.atlas.max_overlap_frobenius() < 2f64.sqrt() * t.sin() + 0.1);
}

#[test]
fn frec_vanishes_at_isolated_center() {
    let atlas = DiscAtlas::new(vec![v(&[0.0, 0.0]), v(&[10.0, 0.0])], vec![vec![v(&[1.0, 0.0])], vec![angle(0.3)]], 1.0).unwrap();
    let im = ImplicitManifold::new(atlas, vec![1.0, 2.0], 0.1).unwrap();
    let c = v(&[10.0, 0.0]);
    assert_eq!(im.evaluate_frec(&c).unwrap().value.norm(), 0.0);
    assert_eq!(im.project(&c).unwrap(), c);
    assert!(im.evaluate_frec(&v(&[5.0, 0.0])).is_err());
}

#[test]
fn spectral_gap_violation_reported() {
    let atlas = DiscAtlas::new(vec![v(&[0.0, 0.0]); 2], vec![vec![v(&[1.0, 0.0])], vec![v(&[0.0, 1.0])]], 1.0).unwrap();
    let im = ImplicitManifold::new(atlas, vec![1.0, 1.0], 0.1).unwrap();
    assert!(matches!(im.evaluate_frec(&v(&[0.1, 0.1])), Err(MfError::SpectralGap(_))));
}

#[test]
fn circle_frec_small_on_truth_and_projection_converges() {
    let im = circle_reconstruction();
    let centers = cloud(&im.atlas.centers);
    let truth = uniform_sample(&circle(1.0, 2), 1000, 8);
    let resolution = truth
        .iter()
        .map(|t| centers.to_vectors().iter().map(|c| (c - t).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let worst = truth.iter().map(|x| im.evaluate_frec(x).unwrap().value.norm()).fold(0.0, f64::max);
    assert!(worst <= resolution, "{worst} vs {resolution}");
    for k in 0..20 {
        let x0 = angle(0.3 * k as f64) * 1.05;
        let y = im.project(&x0).unwrap();
        assert!(im.evaluate_frec(&y).unwrap().value.norm() < 1e-9);
        assert!((y.norm() - 1.0).abs() < worst + 1e-6, "{}", y.norm());
    }
}

#[test]
fn exact_atlas_hausdorff_within_twice_resolution() {
    let count = 64;
    let resolution = (PI / count as f64).sin();
    let im = exact_circle_atlas(count, 3.0 * 2.0 * resolution);
    let met = evaluate_reconstruction(&im, &circle(1.0, 2), 400, 2).unwrap();
    assert_eq!(met.projection_failures, 0);
    assert!(met.hausdorff <= 2.0 * resolution, "{} vs {resolution}", met.hausdorff);
    assert!(met.reach_estimate > 0.0 && met.reach_estimate.is_finite());
}

#[test]
fn single_disc_reach_is_infinite() {
    let met = evaluate_reconstruction(&single_disc(3.0), &circle(1.0, 2), 50, 2).unwrap();
    assert_eq!(met.reach_estimate, f64::INFINITY);
}

#[test]
fn document_round_trip() {
    let im = circle_reconstruction();
    let doc = im.to_document();
    let text = serde_json::to_string(&doc).unwrap();
    let back = ImplicitManifold::from_document(&serde_json::from_str(&text).unwrap()).unwrap();
    let again = back.to_document();
    assert_eq!((again.centers.clone(), again.weights.clone(), again.radius), (doc.centers.clone(), doc.weights.clone(), doc.radius));
    for (a, b) in again.frames.iter().flatten().zip(doc.frames.iter().flatten()) {
        assert!((a - b).abs() < 1e-15);
    }
    let keys: Vec<&str> = ["\"format\"", "\"version\"", "\"d\"", "\"n\"", "\"radius\"", "\"c_lo\"", "\"exponent\"", "\"centers\"", "\"frames\"", "\"weights\""]
        .into_iter()
        .collect();
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    let mut bad = doc.clone();
    bad.version = 9;
    assert!(matches!(ImplicitManifold::from_document(&bad), Err(MfError::Format(_))));
}

#[test]
fn atlas_needs_neighbours() {
    let lonely = cloud(&[v(&[0.0, 0.0]), v(&[5.0, 0.0])]);
    assert!(build_atlas(&lonely, 1, 0.2, 0.6).is_err());
}

fn circle_region() -> impl Strategy<Value = DVector<f64>> {
    (0.0..2.0 * PI, 0.9f64..1.1).prop_map(|(t, r)| angle(t) * r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_of_unity(x in circle_region()) {
        let im = exact_circle_atlas(64, 0.3);
        let total: f64 = im.alphas(&x).unwrap().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn pi_x_is_an_orthogonal_projector(x in circle_region()) {
        let im = exact_circle_atlas(64, 0.3);
        let (pi, _) = im.pi_x(&x).unwrap();
        prop_assert!((&pi * &pi - &pi).norm() <= 1e-9);
        prop_assert!((&pi - pi.transpose()).norm() <= 1e-12);
        prop_assert!((pi.trace() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn contour_matches_eigenprojection(x in circle_region()) {
        let im = exact_circle_atlas(64, 0.3);
        let (pi, _) = im.pi_x(&x).unwrap();
        let a: DMatrix<f64> = im.a_matrix(&x).unwrap();
        prop_assert!((pi_hi_contour(&a, 256).unwrap() - pi).amax() <= 1e-6);
    }

    #[test]
    fn bump_is_compactly_supported(s in 0.0f64..1.5) {
        let im = single_disc(1.0);
        let b = im.bump(0, &v(&[s, 0.0]));
        if s >= 1.0 {
            prop_assert_eq!(b, 0.0);
        } else {
            prop_assert!((b - (1.0 - s * s).powi(3)).abs() < 1e-15);
        }
    }
}
