#![allow(dead_code)]

use mfit_core::manifold::{ManifoldSpec, Shape};
use mfit_core::AnalyticManifold;
use nalgebra::DVector;

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

pub fn circle(radius: f64, n: usize) -> AnalyticManifold {
    ManifoldSpec::new(Shape::Circle { radius }, n).build().unwrap()
}

pub fn sphere(radius: f64, n: usize) -> AnalyticManifold {
    ManifoldSpec::new(Shape::Sphere { radius }, n).build().unwrap()
}

pub fn ellipse() -> AnalyticManifold {
    ManifoldSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 2).build().unwrap()
}

pub fn angle(t: f64) -> DVector<f64> {
    v(&[t.cos(), t.sin()])
}

/// Points and exact tangents of `count` uniform samples.
pub fn samples_with_tangents(
    m: &AnalyticManifold,
    count: usize,
    seed: u64,
) -> (Vec<DVector<f64>>, Vec<mfit_core::Subspace>) {
    m.sample_with_params(count, seed)
        .into_iter()
        .map(|(t, x)| (x, m.tangent_at(&t).unwrap()))
        .unzip()
}
