//! Find-Distance: estimating the support function of the hidden manifold
//! from slab counts of noisy samples.

mod exact;
pub mod special;

pub use exact::{glivenko_cantelli_check, ExactSupport, GcReport};

use nalgebra::DVector;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{check_dim, MfError, Result};
use crate::geometry::GeometricBounds;
use crate::manifold::omega_d;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Constants of one Find-Distance run. Quantities that underflow are kept
/// as natural logarithms.
#[derive(Debug, Clone, Serialize)]
pub struct SupportOracleParams {
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub bounds: GeometricBounds,
    pub kappa0: f64,
    pub kappa1: f64,
    pub ln_gamma_delta: f64,
    pub r_delta: f64,
    pub j_minus: i64,
    pub j_plus: i64,
    pub ln_d0: f64,
    pub ln_a: f64,
    pub eta: f64,
}

impl SupportOracleParams {
    pub fn gamma_delta(&self) -> f64 {
        self.ln_gamma_delta.exp()
    }

    /// ln(kappa1 / kappa0) = ln(V / ((sqrt(delta) tau)^d omega_d)).
    pub fn ln_ratio(&self) -> f64 {
        (self.kappa1 / self.kappa0).ln()
    }

    /// ell(Gamma) = sqrt(2 sigma^2 ln(1/(Gamma kappa1))), zero where the log is negative.
    pub fn ell(&self, ln_gamma: f64) -> f64 {
        let l = -(ln_gamma + self.kappa1.ln());
        (2.0 * self.sigma * self.sigma * l.max(0.0)).sqrt()
    }

    /// Upper distance bound sqrt(2 sigma^2 ln(1/(Gamma kappa0))).
    pub fn ell_upper(&self, ln_gamma: f64) -> f64 {
        let l = -(ln_gamma + self.kappa0.ln());
        (2.0 * self.sigma * self.sigma * l.max(0.0)).sqrt()
    }

    /// (lower, upper) bracket of dist(H, M) from Gamma(H).
    pub fn sandwich(&self, ln_gamma: f64) -> (f64, f64) {
        (-self.delta * self.bounds.tau + self.ell(ln_gamma), self.ell_upper(ln_gamma))
    }

    pub fn gap(&self, ln_gamma: f64) -> f64 {
        let (lo, hi) = self.sandwich(ln_gamma);
        hi - lo
    }

    /// sigma ln(kappa1/kappa0) <= delta tau sqrt(2 ln(1/(Gamma kappa1)))
    pub fn gap_hypothesis(&self, ln_gamma: f64) -> bool {
        let l = -(ln_gamma + self.kappa1.ln());
        l >= 0.0 && self.sigma * self.ln_ratio() <= self.delta * self.bounds.tau * (2.0 * l).sqrt()
    }

    /// ln |d ell / d Gamma| at Gamma = exp(ln_gamma).
    pub fn ln_ell_slope(&self, ln_gamma: f64) -> f64 {
        let l = -(ln_gamma + self.kappa1.ln());
        self.sigma.ln() - ln_gamma - 0.5 * (2.0 * l).ln()
    }

    /// Can a sample of this size see a slab density as small as Gamma_delta?
    /// A single point in a slab already gives 1/(N delta).
    pub fn sampled_resolvable(&self, sample_count: usize) -> bool {
        self.ln_gamma_delta + (sample_count as f64).ln() + self.delta.ln() >= 0.0
    }
}

pub fn make_params(bounds: &GeometricBounds, sigma: f64, eps: f64, eta: f64) -> Result<SupportOracleParams> {
    bounds.validate()?;
    let tau = bounds.tau;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MfError::invalid("sigma must be positive"));
    }
    let cap = (1.0f64 / 16.0).min(sigma / tau).min(sigma * sigma / tau);
    if !(eps > 0.0 && eps < cap) {
        return Err(MfError::precondition(format!(
            "need 0 < eps < min(1/16, sigma/tau, sigma^2/tau) = {cap:.6}, got eps = {eps}"
        )));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(MfError::invalid("eta must lie in (0, 1/2)"));
    }
    let delta = eps / 16.0;
    let d = bounds.d as i32;
    let ln_ratio = bounds.volume.ln() - d as f64 * (delta.sqrt() * tau).ln() - omega_d(bounds.d as i64)?.ln();
    let kappa0 = (2.0 * std::f64::consts::PI).sqrt() * sigma;
    let kappa1 = ln_ratio.exp() * kappa0;
    let q = sigma / (delta * tau) * ln_ratio;
    let ln_gamma_delta = -kappa1.ln() - 0.5 * q * q;
    let r_delta = sigma * sigma / (delta * tau) * ln_ratio;
    let j_minus = ((r_delta - 1.0 - delta * tau) / delta).floor() as i64 - 1;
    let j_plus = ((r_delta + 1.0 + delta * tau) / delta).floor() as i64 + 1;
    let ln_d0 = (std::f64::consts::SQRT_2 * sigma * kappa1).ln() + 0.5 * q * q;
    let ln_a = 2.0 * delta.ln() - 6f64.ln() - ln_d0;
    Ok(SupportOracleParams {
        eps,
        delta,
        sigma,
        bounds: *bounds,
        kappa0,
        kappa1,
        ln_gamma_delta,
        r_delta,
        j_minus,
        j_plus,
        ln_d0,
        ln_a,
        eta,
    })
}

/// Result of one Find-Distance call.
#[derive(Debug, Clone, Serialize)]
pub struct SupportEstimate {
    pub b: Vec<f64>,
    pub s_est: f64,
    pub j_star: i64,
    pub failed: bool,
    pub samples_used: usize,
}

/// #{i : gamma < <X_i, b> <= gamma + delta} / (N delta)
pub fn slab_fraction(points: &PointCloud, b: &DVector<f64>, gamma: f64, delta: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(MfError::invalid("slab fraction of an empty sample"));
    }
    check_dim(points.dim(), b.len())?;
    if !(delta > 0.0) {
        return Err(MfError::invalid("slab width must be positive"));
    }
    let hi = gamma + delta;
    let count = points
        .dot_all(b)
        .into_iter()
        .filter(|&t| gamma < t && t <= hi)
        .count();
    Ok(count as f64 / (points.len() as f64 * delta))
}

fn check_unit(b: &DVector<f64>) -> Result<()> {
    if (b.norm() - 1.0).abs() > 1e-9 {
        return Err(MfError::invalid("direction b must be a unit vector"));
    }
    Ok(())
}

/// Slab index j with j delta < t <= (j+1) delta.
fn slab_index(t: f64, delta: f64) -> i64 {
    let mut j = (t / delta).ceil() as i64 - 1;
    while (j as f64) * delta >= t {
        j -= 1;
    }
    while ((j + 1) as f64) * delta < t {
        j += 1;
    }
    j
}

/// Scan j = j_- + 1, ..., j_+ until the slab density drops to Gamma_delta.
pub fn find_distance(
    points: &PointCloud,
    b: &DVector<f64>,
    params: &SupportOracleParams,
) -> Result<SupportEstimate> {
    if points.is_empty() {
        return Err(MfError::invalid("Find-Distance needs samples"));
    }
    check_dim(points.dim(), b.len())?;
    check_unit(b)?;
    let lo = params.j_minus + 1;
    let span = (params.j_plus + 1 - lo).max(0) as usize;
    let mut hist = vec![0usize; span];
    for t in points.dot_all(b) {
        let j = slab_index(t, params.delta);
        if j >= lo && j <= params.j_plus {
            hist[(j - lo) as usize] += 1;
        }
    }
    let n = points.len();
    let ln_scale = (n as f64).ln() + params.delta.ln();
    let hit = hist.iter().position(|&c| {
        let ln_est = if c == 0 { f64::NEG_INFINITY } else { (c as f64).ln() - ln_scale };
        ln_est <= params.ln_gamma_delta
    });
    Ok(match hit {
        Some(k) => {
            let j = lo + k as i64;
            SupportEstimate {
                b: b.iter().copied().collect(),
                s_est: j as f64 * params.delta - params.r_delta,
                j_star: j,
                failed: false,
                samples_used: n,
            }
        }
        None => SupportEstimate {
            b: b.iter().copied().collect(),
            s_est: params.j_plus as f64 * params.delta - params.r_delta,
            j_star: params.j_plus,
            failed: true,
            samples_used: n,
        },
    })
}

/// log10 of the sample size that guarantees an eps-accurate estimate with
/// probability 1 - eta.
pub fn theoretical_sample_bound(params: &SupportOracleParams) -> Result<f64> {
    let b = &params.bounds;
    let (eps, sigma, tau) = (params.eps, params.sigma, b.tau);
    let w = omega_d(b.d as i64)?;
    let ln_vol_ratio = b.volume.ln() - b.d as f64 * (eps.sqrt() * tau / 4.0).ln() - w.ln();
    let ln_lead = (3.0 * 1024.0f64).ln() + LN_SQRT_2PI + 2.0 * sigma.ln() - 2.0 * params.delta.ln()
        + ln_vol_ratio;
    let q = sigma / (eps * tau / 4.0) * ln_vol_ratio;
    let ln_n = 3.0 * ln_lead + q * q + (1.0 / params.eta).ln().ln();
    Ok(ln_n / std::f64::consts::LN_10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_bounds() -> GeometricBounds {
        GeometricBounds { d: 1, n: 2, tau: 1.0, volume: 2.0 * std::f64::consts::PI, r_exposed: 1.0, lambda: 2.0 }
    }

    #[test]
    fn slab_boundaries() {
        assert_eq!(slab_index(0.3, 0.1), 2);
        assert_eq!(slab_index(0.2, 0.1), 1);
        assert_eq!(slab_index(-0.05, 0.1), -1);
    }

    #[test]
    fn eps_hypothesis_enforced() {
        assert!(make_params(&circle_bounds(), 0.5, 0.07, 0.1).is_err());
        assert!(make_params(&circle_bounds(), 0.3, 0.05, 0.1).is_ok());
        assert!(make_params(&circle_bounds(), 0.1, 0.011, 0.1).is_err());
    }

    #[test]
    fn empty_scan_fails() {
        let mut p = make_params(&circle_bounds(), 0.5, 0.05, 0.1).unwrap();
        p.j_plus = p.j_minus;
        let pts = PointCloud::from_flat(2, vec![0.0, 0.0]).unwrap();
        let b = DVector::from_column_slice(&[1.0, 0.0]);
        let est = find_distance(&pts, &b, &p).unwrap();
        assert!(est.failed);
    }
}
