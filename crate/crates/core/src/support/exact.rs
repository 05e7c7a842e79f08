//! Slab densities of mu * G_sigma evaluated by quadrature over M instead
//! of by counting samples.

use nalgebra::DVector;
use serde::Serialize;

use super::special::{ln_normal_interval, ln_normal_tail, log_sum_exp};
use super::{check_unit, SupportEstimate, SupportOracleParams, LN_SQRT_2PI};
use crate::cloud::PointCloud;
use crate::error::{check_dim, MfError, Result};
use crate::manifold::AnalyticManifold;
use crate::pca::AffineSubspace;

/// Weighted atoms approximating the sampling measure mu on M.
#[derive(Debug, Clone)]
pub struct ExactSupport {
    points: PointCloud,
    ln_w: Vec<f64>,
    sigma: f64,
    spacing: f64,
}

const PRUNE_NATS: f64 = 60.0;

impl ExactSupport {
    /// Quadrature fine enough for hyperplanes at distance about `r_scale`:
    /// the integrand then concentrates on arcs of length sigma sqrt(tau / r).
    pub fn from_manifold(
        m: &AnalyticManifold,
        frame: Option<&AffineSubspace>,
        sigma: f64,
        r_scale: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(MfError::invalid("sigma must be positive"));
        }
        let tau = m.bounds().tau;
        let width = sigma * (tau / r_scale.max(1.0)).sqrt();
        let d = m.intrinsic_dim();
        let ranges = m.param_ranges();
        let probe = m.quadrature(if d == 1 { 512 } else { 32 * 32 });
        // Arc length per parameter from the coarse grid.
        let per_dim: f64 = (0..d)
            .map(|i| {
                let (lo, hi, _) = ranges[i];
                let top = probe
                    .params
                    .iter()
                    .map(|t| m.jacobian(t).column(i).norm())
                    .fold(0.0, f64::max);
                (4.0 * (hi - lo) * top / width).ceil().max(16.0)
            })
            .product();
        if per_dim > 4.0e6 {
            return Err(MfError::numerical(format!(
                "quadrature would need {per_dim:.3e} nodes; widen sigma or reduce the distance scale"
            )));
        }
        let grid = m.quadrature(per_dim as usize);
        let points = match frame {
            Some(f) => f.project_cloud(&grid.points),
            None => grid.points,
        };
        let ln_w = grid.weights.iter().map(|w| w.ln()).collect();
        Ok(ExactSupport { points, ln_w, sigma, spacing: grid.spacing })
    }

    /// Atoms with non-negative weights; weights are normalized.
    pub fn from_atoms(points: PointCloud, weights: &[f64], sigma: f64) -> Result<Self> {
        check_dim(points.len(), weights.len())?;
        if points.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(MfError::invalid("atoms need non-negative weights"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(MfError::invalid("atom weights sum to zero"));
        }
        Ok(ExactSupport {
            points,
            ln_w: weights.iter().map(|w| (w / total).ln()).collect(),
            sigma,
            spacing: 0.0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// max over atoms of <x, b>.
    pub fn atom_support(&self, b: &DVector<f64>) -> f64 {
        self.points.dot_all(b).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Projections and log weights of atoms that can matter for hyperplanes
    /// at offsets >= gamma_lo.
    fn active(&self, b: &DVector<f64>, gamma_lo: f64) -> (Vec<f64>, Vec<f64>) {
        let t = self.points.dot_all(b);
        let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = gamma_lo - t_max;
        if gap <= 0.0 {
            return (t, self.ln_w.clone());
        }
        let cut = PRUNE_NATS * self.sigma * self.sigma / gap;
        t.iter()
            .zip(&self.ln_w)
            .filter(|(&ti, _)| t_max - ti <= cut)
            .map(|(&ti, &w)| (ti, w))
            .unzip()
    }

    /// ln Gamma(H_{gamma, b}): the density of <Y, b> at gamma.
    pub fn ln_gamma(&self, b: &DVector<f64>, gamma: f64) -> Result<f64> {
        check_dim(self.dim(), b.len())?;
        let (t, w) = self.active(b, gamma);
        let s2 = 2.0 * self.sigma * self.sigma;
        Ok(log_sum_exp(t.iter().zip(&w).map(|(ti, wi)| wi - (gamma - ti).powi(2) / s2))
            - LN_SQRT_2PI
            - self.sigma.ln())
    }

    pub fn gamma(&self, b: &DVector<f64>, gamma: f64) -> Result<f64> {
        Ok(self.ln_gamma(b, gamma)?.exp())
    }

    /// ln of (1/delta) times the integral of Gamma over [gamma, gamma + delta].
    pub fn ln_gamma_av(&self, b: &DVector<f64>, gamma: f64, delta: f64) -> Result<f64> {
        check_dim(self.dim(), b.len())?;
        let (t, w) = self.active(b, gamma);
        Ok(self.ln_av_on(&t, &w, gamma, delta))
    }

    fn ln_av_on(&self, t: &[f64], w: &[f64], gamma: f64, delta: f64) -> f64 {
        let s = self.sigma;
        log_sum_exp(
            t.iter()
                .zip(w)
                .map(|(ti, wi)| wi + ln_normal_interval((gamma - ti) / s, (gamma + delta - ti) / s)),
        ) - delta.ln()
    }

    /// ln P(<Y, b> > gamma).
    pub fn ln_tail(&self, b: &DVector<f64>, gamma: f64) -> Result<f64> {
        check_dim(self.dim(), b.len())?;
        let (t, w) = self.active(b, gamma);
        let s = self.sigma;
        Ok(log_sum_exp(t.iter().zip(&w).map(|(ti, wi)| wi + ln_normal_tail((gamma - ti) / s))))
    }

    /// Find-Distance with the slab density replaced by its exact value.
    pub fn find_distance(&self, b: &DVector<f64>, params: &SupportOracleParams) -> Result<SupportEstimate> {
        check_dim(self.dim(), b.len())?;
        check_unit(b)?;
        let lo = params.j_minus + 1;
        let hi = params.j_plus + 1;
        let delta = params.delta;
        let failed = |j: i64| SupportEstimate {
            b: b.iter().copied().collect(),
            s_est: j as f64 * delta - params.r_delta,
            j_star: j,
            failed: true,
            samples_used: 0,
        };
        if lo >= hi {
            return Ok(failed(params.j_plus));
        }
        let (t, w) = self.active(b, lo as f64 * delta);
        let below = |j: i64| self.ln_av_on(&t, &w, j as f64 * delta, delta) <= params.ln_gamma_delta;
        if !below(hi - 1) {
            return Ok(failed(params.j_plus));
        }
        let (mut a, mut z) = (lo, hi - 1);
        if !below(a) {
            // Invariant: below(z) holds and below(a) does not.
            while z - a > 1 {
                let mid = a + (z - a) / 2;
                if below(mid) {
                    z = mid;
                } else {
                    a = mid;
                }
            }
        } else {
            z = a;
        }
        Ok(SupportEstimate {
            b: b.iter().copied().collect(),
            s_est: z as f64 * delta - params.r_delta,
            j_star: z,
            failed: false,
            samples_used: 0,
        })
    }
}

/// Uniform deviation of empirical half-space frequencies from their means.
#[derive(Debug, Clone, Serialize)]
pub struct GcReport {
    pub sup_deviation: f64,
    pub a: f64,
    pub exceeded: bool,
    pub evaluations: usize,
}

/// sup over the gamma grid and directions of |F_{gamma,N} - E f_gamma|,
/// with f_gamma the indicator of {<b, y> > gamma}.
pub fn glivenko_cantelli_check(
    points: &PointCloud,
    directions: &[DVector<f64>],
    a: f64,
    model: &ExactSupport,
    gammas: &[f64],
) -> Result<GcReport> {
    if points.is_empty() {
        return Err(MfError::invalid("no points"));
    }
    let n = points.len() as f64;
    let mut sup: f64 = 0.0;
    let mut evaluations = 0;
    for b in directions {
        check_dim(points.dim(), b.len())?;
        let mut proj = points.dot_all(b);
        proj.sort_by(f64::total_cmp);
        for &g in gammas {
            let above = proj.len() - proj.partition_point(|&t| t <= g);
            let emp = above as f64 / n;
            let exact = model.ln_tail(b, g)?.exp();
            sup = sup.max((emp - exact).abs());
            evaluations += 1;
        }
    }
    Ok(GcReport { sup_deviation: sup, a, exceeded: sup > a, evaluations })
}
