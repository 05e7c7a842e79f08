use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DVector;

use super::OracleBudget;
use crate::cloud::PointCloud;
use crate::error::{check_dim, MfError, Result};
use crate::manifold::AnalyticManifold;
use crate::noise::generate_observations;
use crate::pca::AffineSubspace;
use crate::rng::stage_seed;
use crate::support::{find_distance, ExactSupport, SupportEstimate, SupportOracleParams};

/// Support-function estimates of K = conv(M) in the working coordinates.
pub trait SupportSource: Sync {
    fn dim(&self) -> usize;
    fn params(&self) -> &SupportOracleParams;
    /// Repeated queries return the same estimate.
    fn deterministic(&self) -> bool {
        false
    }
    fn estimate(&self, b: &DVector<f64>, budget: &OracleBudget) -> Result<SupportEstimate>;
}

/// Find-Distance on exact slab densities. Deterministic, so estimates are
/// memoized by direction.
pub struct ExactSource {
    support: ExactSupport,
    params: SupportOracleParams,
    memo: Mutex<HashMap<Vec<u64>, SupportEstimate>>,
}

impl ExactSource {
    pub fn new(support: ExactSupport, params: SupportOracleParams) -> Self {
        ExactSource { support, params, memo: Mutex::new(HashMap::new()) }
    }

    pub fn support(&self) -> &ExactSupport {
        &self.support
    }

    pub fn cached(&self) -> usize {
        self.memo.lock().map(|m| m.len()).unwrap_or(0)
    }
}

impl SupportSource for ExactSource {
    fn dim(&self) -> usize {
        self.support.dim()
    }

    fn params(&self) -> &SupportOracleParams {
        &self.params
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn estimate(&self, b: &DVector<f64>, budget: &OracleBudget) -> Result<SupportEstimate> {
        budget.consume()?;
        let key: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let est = self.support.find_distance(b, &self.params)?;
        self.memo.lock().expect("memo lock").insert(key, est.clone());
        Ok(est)
    }
}

/// Where the fresh batch for each call comes from.
pub enum BatchSource {
    /// Disjoint consecutive blocks of a fixed pool.
    Pool(PointCloud),
    /// Fresh observations drawn per batch index.
    Generator { manifold: AnalyticManifold, frame: Option<AffineSubspace>, sigma: f64, seed: u64 },
}

/// Find-Distance on a fresh batch of N noisy samples per call.
pub struct SampledSource {
    params: SupportOracleParams,
    batches: BatchSource,
    per_call: usize,
    dim: usize,
}

impl SampledSource {
    pub fn new(params: SupportOracleParams, batches: BatchSource, per_call: usize) -> Result<Self> {
        if per_call == 0 {
            return Err(MfError::invalid("per-call sample count must be positive"));
        }
        let dim = match &batches {
            BatchSource::Pool(p) => {
                if p.len() < per_call {
                    return Err(MfError::invalid("sample pool is smaller than one batch"));
                }
                p.dim()
            }
            BatchSource::Generator { manifold, frame, .. } => {
                frame.as_ref().map(|f| f.dim()).unwrap_or(manifold.ambient_dim())
            }
        };
        Ok(SampledSource { params, batches, per_call, dim })
    }

    pub fn per_call(&self) -> usize {
        self.per_call
    }

    /// Number of disjoint batches a pool can serve.
    pub fn pool_batches(&self) -> Option<usize> {
        match &self.batches {
            BatchSource::Pool(p) => Some(p.len() / self.per_call),
            BatchSource::Generator { .. } => None,
        }
    }

    fn batch(&self, k: usize) -> Result<PointCloud> {
        match &self.batches {
            BatchSource::Pool(p) => {
                let n = self.per_call;
                if (k + 1) * n > p.len() {
                    return Err(MfError::BudgetExhausted(p.len() / n));
                }
                let d = p.dim();
                PointCloud::from_flat(d, p.data()[k * n * d..(k + 1) * n * d].to_vec())
            }
            BatchSource::Generator { manifold, frame, sigma, seed } => {
                let s = stage_seed(*seed, &format!("batch-{k}"));
                let obs = generate_observations(manifold, self.per_call, *sigma, s)?.observations;
                Ok(match frame {
                    Some(f) => f.project_cloud(&obs),
                    None => obs,
                })
            }
        }
    }
}

impl SupportSource for SampledSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &SupportOracleParams {
        &self.params
    }

    fn estimate(&self, b: &DVector<f64>, budget: &OracleBudget) -> Result<SupportEstimate> {
        check_dim(self.dim, b.len())?;
        let k = budget.consume()?;
        let pts = self.batch(k)?;
        find_distance(&pts, b, &self.params)
    }
}
