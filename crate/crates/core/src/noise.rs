//! Gaussian observation model y = x + zeta.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{MfError, Result};
use crate::manifold::AnalyticManifold;
use crate::rng::stage_rng;

/// One draw from N(0, sigma^2 I_n).
pub fn gaussian_noise<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Result<DVector<f64>> {
    let dist = normal(sigma)?;
    Ok(DVector::from_fn(n, |_, _| dist.sample(rng)))
}

pub fn gaussian_noise_seeded(n: usize, sigma: f64, seed: u64) -> Result<DVector<f64>> {
    gaussian_noise(n, sigma, &mut stage_rng(seed, "noise"))
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MfError::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Normal::new(0.0, sigma).map_err(|e| MfError::invalid(e.to_string()))
}

/// Clean samples, their noise draws and the observations.
#[derive(Debug, Clone)]
pub struct NoisyDataset {
    pub clean: PointCloud,
    pub noise: PointCloud,
    pub observations: PointCloud,
    pub sigma: f64,
    pub seed: u64,
}

impl NoisyDataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// N uniform samples of M plus independent Gaussian noise.
pub fn generate_observations(
    m: &AnalyticManifold,
    count: usize,
    sigma: f64,
    seed: u64,
) -> Result<NoisyDataset> {
    if count == 0 {
        return Err(MfError::invalid("need at least one observation"));
    }
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(MfError::invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    let n = m.ambient_dim();
    let mut clean = PointCloud::with_capacity(n, count);
    m.sample_into(count, &mut stage_rng(seed, "clean"), &mut clean);
    let mut zeta = vec![0.0; n * count];
    if sigma > 0.0 {
        let dist = normal(sigma)?;
        let mut rng = stage_rng(seed, "noise");
        for z in zeta.iter_mut() {
            *z = dist.sample(&mut rng);
        }
    }
    let obs: Vec<f64> = clean.data().iter().zip(&zeta).map(|(x, z)| x + z).collect();
    Ok(NoisyDataset {
        clean,
        noise: PointCloud::from_flat(n, zeta)?,
        observations: PointCloud::from_flat(n, obs)?,
        sigma,
        seed,
    })
}
