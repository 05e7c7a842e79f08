use std::f64::consts::PI;

use mfit_core::geometry::{cone_distance, subspace_distance, Cone};
use mfit_core::pca::pca_fit;
use mfit_core::{PointCloud, Subspace};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    a.qr().q()
}

/// Pointed cones: generators with positive first coordinate.
fn pointed_cone(n: usize) -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), 1..6).prop_map(move |gs| {
        gs.into_iter()
            .map(|mut g| {
                g[0] = g[0].abs() + 0.2;
                DVector::from_vec(g)
            })
            .collect()
    })
}

fn sector(start: f64, width: f64) -> Cone {
    Cone::new(vec![
        DVector::from_vec(vec![start.cos(), start.sin()]),
        DVector::from_vec(vec![(start + width).cos(), (start + width).sin()]),
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bipolar_membership(gens in (2usize..4).prop_flat_map(pointed_cone), seed in any::<u64>()) {
        let n = gens[0].len();
        let k = Cone::new(gens).unwrap();
        let bipolar = k.polar().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let x = gaussian(n, &mut rng);
            // Skip the 1e-6 band around the boundary where both tests are slack-dependent.
            let d = k.dist(&x);
            if d > 1e-8 && d < 1e-6 {
                continue;
            }
            prop_assert_eq!(bipolar.polar_contains(&x), k.contains(&x), "x = {}", x);
        }
    }

    #[test]
    fn planar_polar_distance_equality(a in 0.0..2.0 * PI, wa in 0.0..3.0, b in 0.0..2.0 * PI, wb in 0.0..3.0) {
        let (k1, k2) = (sector(a, wa), sector(b, wb));
        let direct = cone_distance(&k1, &k2, 10_000).unwrap();
        let polar = cone_distance(&k1.polar().unwrap(), &k2.polar().unwrap(), 10_000).unwrap();
        let tol = 2.0 * direct.resolution.max(polar.resolution);
        prop_assert!((direct.estimate - polar.estimate).abs() <= tol, "{} vs {}", direct.estimate, polar.estimate);
    }

    #[test]
    fn pca_is_rotation_equivariant(seed in any::<u64>(), dim in 1usize..3) {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = [3.0, 2.0, 0.5, 0.1];
        let pts: Vec<DVector<f64>> = (0..200)
            .map(|_| DVector::from_fn(n, |i, _| scales[i] * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let q = rotation(n, seed ^ 0x5eed);
        let rotated: Vec<DVector<f64>> = pts.iter().map(|p| &q * p).collect();
        let a = pca_fit(&PointCloud::from_vectors(&pts).unwrap(), dim).unwrap();
        let b = pca_fit(&PointCloud::from_vectors(&rotated).unwrap(), dim).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-8 * a.objective.max(1.0));
        let mapped: Vec<DVector<f64>> = a.subspace.linear.basis().iter().map(|e| &q * e).collect();
        let mapped = Subspace::new(&mapped).unwrap();
        prop_assert!(subspace_distance(&mapped, &b.subspace.linear).unwrap() < 1e-6);
        prop_assert!((&q * &a.subspace.origin - &b.subspace.origin).norm() < 1e-9);
    }

    #[test]
    fn affine_projection_contracts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<DVector<f64>> = (0..20).map(|_| gaussian(5, &mut rng)).collect();
        let s = pca_fit(&PointCloud::from_vectors(&pts).unwrap(), 2).unwrap().subspace;
        for _ in 0..100 {
            let (y, z) = (gaussian(5, &mut rng) * 3.0, gaussian(5, &mut rng) * 3.0);
            let py = s.lift(&s.coords(&y));
            let pz = s.lift(&s.coords(&z));
            prop_assert!((py - pz).norm() <= (&y - &z).norm() * (1.0 + 1e-12));
        }
    }
}
