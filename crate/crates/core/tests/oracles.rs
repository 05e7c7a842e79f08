mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::{angle, circle, v};
use mfit_core::manifold::uniform_sample;
use mfit_core::oracles::{
    iteration_cap, BatchSource, ExactSource, OracleBudget, OracleChain, SampledSource, SupportSource, WeakAnswer,
};
use mfit_core::support::{make_params, ExactSupport};
use mfit_core::{MfError, PointCloud};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 0.05;
const SIGMA: f64 = 0.5;

fn circle_source() -> ExactSource {
    let m = circle(1.0, 2);
    let p = make_params(m.bounds(), SIGMA, EPS, 0.1).unwrap();
    let ex = ExactSupport::from_manifold(&m, None, SIGMA, p.r_delta).unwrap();
    ExactSource::new(ex, p)
}

fn chain() -> &'static OracleChain<'static> {
    static SRC: OnceLock<ExactSource> = OnceLock::new();
    static CHAIN: OnceLock<OracleChain<'static>> = OnceLock::new();
    CHAIN.get_or_init(|| OracleChain::new(SRC.get_or_init(circle_source)))
}

/// Points of the unit disc at depth >= delta.
fn inner_disc(count: usize, delta: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = (1.0 - delta) * rng.random::<f64>().sqrt();
            angle(rng.random::<f64>() * 2.0 * PI) * r
        })
        .collect()
}

fn assert_separates(ans: &WeakAnswer, y: &DVector<f64>, delta: f64, inner: &[DVector<f64>]) {
    if let WeakAnswer::SeparatingHyperplane { b, offset } = ans {
        assert!((b.amax() - 1.0).abs() < 1e-12);
        assert!((b.dot(y) - offset).abs() < 1e-12);
        for x in inner {
            assert!(b.dot(x) < b.dot(y) + delta, "violated at {x}");
        }
    }
}

#[test]
fn validity_examples() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    let e1 = v(&[1.0, 0.0]);
    assert_eq!(c.weak_validity(&e1, 1.2, EPS, &budget).unwrap(), WeakAnswer::Valid);
    assert!(matches!(c.weak_validity(&e1, 0.8, EPS, &budget).unwrap(), WeakAnswer::AlmostViolated { .. }));
    let s = c.source().estimate(&e1, &budget).unwrap().s_est;
    assert_ne!(c.weak_validity(&e1, s, EPS, &budget).unwrap(), WeakAnswer::Failed);
}

#[test]
fn separation_examples() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    let delta = 0.05;
    assert_eq!(c.weak_separation(&v(&[0.0, 0.0]), delta, &budget).unwrap(), WeakAnswer::InBody);

    let y = v(&[2.0, 0.0]);
    let ans = c.weak_separation(&y, delta, &budget).unwrap();
    match &ans {
        WeakAnswer::SeparatingHyperplane { b, .. } => {
            let u = b.normalize();
            assert!((u - v(&[1.0, 0.0])).norm() < 0.05);
            // exact support of the circle is 1 along every direction
            assert!(b.dot(&y) > b.norm());
        }
        other => panic!("{other:?}"),
    }
    assert_separates(&ans, &y, delta, &inner_disc(1000, delta, 1));

    let on_boundary = angle(0.7);
    let ans = c.weak_separation(&on_boundary, delta, &budget).unwrap();
    assert_ne!(ans, WeakAnswer::Failed);
    assert_separates(&ans, &on_boundary, delta, &inner_disc(1000, delta, 2));
}

#[test]
fn hyperplanes_never_cut_the_shrunken_body() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    let delta = 0.05;
    let inner = inner_disc(1000, delta, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut planes = 0;
    for _ in 0..60 {
        let y = angle(rng.random::<f64>() * 2.0 * PI) * (0.8 + 0.4 * rng.random::<f64>());
        let ans = c.weak_separation(&y, delta, &budget).unwrap();
        if let WeakAnswer::SeparatingHyperplane { .. } = ans {
            planes += 1;
        }
        if y.norm() < 1.0 - delta {
            assert_eq!(ans, WeakAnswer::InBody, "{y}");
        }
        assert_separates(&ans, &y, delta, &inner);
    }
    assert!(planes > 10);
}

#[test]
fn optimization_near_support_point() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    let e1 = v(&[1.0, 0.0]);
    let WeakAnswer::OptPoint(y) = c.weak_optimization(&e1, EPS, &budget).unwrap() else { panic!() };
    // every point of S(K, eps) with <e1, y> >= 1 - 2 eps lies this close to (1, 0)
    let bound = (4.0 * EPS + EPS * EPS).sqrt();
    assert!((&y - &e1).norm() <= bound, "{y}");
    assert!((y[0] - 1.0).abs() <= EPS, "{y}");
}

#[test]
fn optimization_is_one_sided() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    for k in 0..12 {
        let b = angle(k as f64 * 0.53);
        let WeakAnswer::OptPoint(y) = c.weak_optimization(&b, EPS, &budget).unwrap() else { panic!() };
        assert!(b.dot(&y) <= 1.0 + EPS, "{k}: {}", b.dot(&y));
        assert!(y.norm() <= 1.0 + EPS);
    }
}

#[test]
fn optimization_width_along_b() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    for k in 0..4 {
        let b = angle(k as f64 * 0.9 + 0.2);
        let WeakAnswer::OptPoint(yp) = c.weak_optimization(&b, EPS, &budget).unwrap() else { panic!() };
        let nb = -&b;
        let WeakAnswer::OptPoint(ym) = c.weak_optimization(&nb, EPS, &budget).unwrap() else { panic!() };
        let width = b.dot(&yp) + nb.dot(&ym);
        assert!((width - 2.0).abs() <= 2.0 * EPS, "{width}");
    }
}

#[test]
fn optimization_on_point_mass() {
    let m = circle(1.0, 2);
    let p = make_params(m.bounds(), SIGMA, EPS, 0.1).unwrap();
    let q = v(&[0.3, -0.2]);
    let ex = ExactSupport::from_atoms(PointCloud::from_vectors(&[q.clone()]).unwrap(), &[1.0], SIGMA).unwrap();
    let src = ExactSource::new(ex, p);
    let c = OracleChain::new(&src);
    let budget = OracleBudget::unlimited();
    for k in 0..5 {
        let b = angle(k as f64 * 1.3);
        match c.weak_optimization(&b, EPS, &budget).unwrap() {
            WeakAnswer::OptPoint(y) => assert!((&y - &q).norm() <= EPS, "{k}: {}", (&y - &q).norm()),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn call_count_within_cap() {
    let src = circle_source();
    let c = OracleChain::new(&src);
    let budget = OracleBudget::unlimited();
    c.weak_optimization(&angle(0.4), EPS, &budget).unwrap();
    assert!(budget.used() <= c.call_cap(EPS), "{} > {}", budget.used(), c.call_cap(EPS));
    assert!(c.queries() > 0);
}

#[test]
fn iteration_cap_monotone() {
    for d in 1..6 {
        assert!(iteration_cap(d + 1, 0.05) > iteration_cap(d, 0.05));
        assert!(iteration_cap(d, 0.01) > iteration_cap(d, 0.05));
    }
    assert_eq!(iteration_cap(2, 0.05), (40.0 * (4.0f64 / 0.05).ln()).ceil() as usize);
}

#[test]
fn budget_is_exhausted() {
    let b = OracleBudget::new(10, 2, 0.1);
    assert!((b.eta_split - 0.05).abs() < 1e-15);
    assert_eq!(b.consume().unwrap(), 0);
    assert_eq!(b.consume().unwrap(), 1);
    assert!(matches!(b.consume(), Err(MfError::BudgetExhausted(2))));
    assert_eq!(b.used(), 2);
}

#[test]
fn sampled_source_uses_fresh_batches() {
    let m = circle(1.0, 2);
    let p = make_params(m.bounds(), SIGMA, EPS, 0.1).unwrap();
    let pool = mfit_core::noise::generate_observations(&m, 1000, SIGMA, 8).unwrap().observations;
    let src = SampledSource::new(p.clone(), BatchSource::Pool(pool), 300).unwrap();
    assert_eq!(src.pool_batches(), Some(3));
    let budget = OracleBudget::new(300, 3, 0.1);
    let e1 = v(&[1.0, 0.0]);
    for _ in 0..3 {
        // Gamma_delta is far below 1/(N delta): the first empty slab already
        // passes the threshold, so the scan stops at the bottom of its window
        let est = src.estimate(&e1, &budget).unwrap();
        assert!(!est.failed);
        assert_eq!(est.j_star, p.j_minus + 1);
        assert!(est.s_est < -1.0);
    }
    assert!(matches!(src.estimate(&e1, &budget), Err(MfError::BudgetExhausted(_))));

    let gen = SampledSource::new(
        p.clone(),
        BatchSource::Generator { manifold: m.clone(), frame: None, sigma: SIGMA, seed: 5 },
        200,
    )
    .unwrap();
    assert_eq!(gen.pool_batches(), None);
    let est = gen.estimate(&e1, &OracleBudget::unlimited()).unwrap();
    assert_eq!(est.samples_used, 200);
    assert!(SampledSource::new(p, BatchSource::Pool(PointCloud::new(2)), 10).is_err());
}

#[test]
fn exact_source_memoizes() {
    let src = circle_source();
    let budget = OracleBudget::unlimited();
    let a = src.estimate(&angle(0.3), &budget).unwrap();
    let b = src.estimate(&angle(0.3), &budget).unwrap();
    assert_eq!(a.s_est, b.s_est);
    assert_eq!(src.cached(), 1);
    assert_eq!(budget.used(), 2);
    assert!(src.deterministic());
}

#[test]
fn optimization_rejects_bad_input() {
    let c = chain();
    let budget = OracleBudget::unlimited();
    assert!(c.weak_optimization(&v(&[2.0, 0.0]), EPS, &budget).is_err());
    assert!(c.weak_optimization(&v(&[1.0, 0.0]), 0.0, &budget).is_err());
    assert!(c.weak_separation(&v(&[1.0, 0.0, 0.0]), 0.1, &budget).is_err());
}

#[test]
fn hull_samples_are_valid_for_support() {
    // sanity for the oracle tests: the exact support of conv(M) is 1
    let pts = uniform_sample(&circle(1.0, 2), 2000, 9);
    let s = pts.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
    assert!(s <= 1.0 && s > 0.999);
}
