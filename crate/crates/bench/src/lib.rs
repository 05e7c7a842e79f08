//! Shared fixtures for the benchmarks.

use mfit_core::manifold::{uniform_sample, ManifoldSpec, Shape};
use mfit_core::oracles::ExactSource;
use mfit_core::output::{reconstruct, ImplicitManifold, OutputConfig};
use mfit_core::support::{make_params, ExactSupport};
use mfit_core::{AnalyticManifold, PointCloud, Result};
use nalgebra::DVector;

pub const SIGMA: f64 = 0.5;
pub const EPS: f64 = 0.05;

pub fn unit_circle() -> AnalyticManifold {
    ManifoldSpec::new(Shape::Circle { radius: 1.0 }, 2).build().expect("unit circle")
}

/// Exact support source for the unit circle at the bench noise level.
pub fn circle_source(m: &AnalyticManifold) -> Result<ExactSource> {
    let p = make_params(m.bounds(), SIGMA, EPS, 0.1)?;
    let ex = ExactSupport::from_manifold(m, None, SIGMA, p.r_delta)?;
    Ok(ExactSource::new(ex, p))
}

pub fn circle_net(m: &AnalyticManifold, count: usize, seed: u64) -> PointCloud {
    let pts = uniform_sample(m, count, seed);
    PointCloud::from_vectors(&pts).expect("nonempty sample")
}

/// Reconstruction from clean samples, skipping the oracle stages.
pub fn circle_reconstruction(m: &AnalyticManifold) -> Result<ImplicitManifold> {
    let net = circle_net(m, 200, 3);
    Ok(reconstruct(&net, 1, 1.0, &OutputConfig::default(), 5)?.0)
}

pub fn off_manifold(r: f64, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / count as f64;
            DVector::from_vec(vec![r * t.cos(), r * t.sin()])
        })
        .collect()
}
