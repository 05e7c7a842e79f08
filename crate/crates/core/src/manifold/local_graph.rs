//! M near p as the graph of f: T_pM -> T_pM^perp.

use nalgebra::{DMatrix, DVector};

use super::AnalyticManifold;
use crate::error::{check_dim, MfError, Result};
use crate::geometry::Subspace;

#[derive(Debug, Clone)]
pub struct LocalGraph {
    manifold: AnalyticManifold,
    base_params: Vec<f64>,
    pub p: DVector<f64>,
    pub tangent: Subspace,
    pub normal: Subspace,
    /// tau / 8
    pub radius: f64,
    et: DMatrix<f64>,
    en: DMatrix<f64>,
}

/// Worst ratios against |f(x)| <= |x|^2/tau, ||d_x f|| <= C|x|/tau,
/// ||d^2_x f|| <= C/tau on a grid of the domain.
#[derive(Debug, Clone, Copy)]
pub struct GraphBoundsReport {
    pub value_ratio: f64,
    pub slope_ratio: f64,
    pub hessian_ratio: f64,
    pub grid_points: usize,
}

/// Covering and slope checks on the tau/4 window around p.
#[derive(Debug, Clone, Copy)]
pub struct WindowReport {
    pub max_residual: f64,
    pub all_in_window: bool,
    /// Worst ||A_z|| tau / |x| over grid points with |x| <= tau/8.
    pub slope_ratio: f64,
    pub grid_points: usize,
}

pub fn local_graph(m: &AnalyticManifold, p: &DVector<f64>) -> Result<LocalGraph> {
    let t = m.nearest_params(p)?;
    let x = m.embed(&t);
    let off = (&x - p).norm();
    if off > 1e-8 {
        return Err(MfError::invalid(format!("point is {off:.3e} away from the manifold")));
    }
    LocalGraph::at_params(m, &t)
}

impl LocalGraph {
    pub fn at_params(m: &AnalyticManifold, t: &[f64]) -> Result<Self> {
        let tangent = m.tangent_at(t)?;
        let normal = tangent
            .complement()
            .ok_or_else(|| MfError::numerical("tangent space fills the ambient space"))?;
        let et = tangent.basis_matrix();
        let en = normal.basis_matrix();
        Ok(LocalGraph {
            manifold: m.clone(),
            base_params: t.to_vec(),
            p: m.embed(t),
            radius: m.bounds().tau / 8.0,
            tangent,
            normal,
            et,
            en,
        })
    }

    pub fn tau(&self) -> f64 {
        self.manifold.bounds().tau
    }

    /// Parameters of the point of M over tangent coordinates `x`.
    fn preimage(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        check_dim(self.tangent.dim(), x.len())?;
        let mut t = self.base_params.clone();
        // Continuation keeps Newton inside its basin for larger |x|.
        let stages = 4;
        for s in 1..=stages {
            let target = x * (s as f64 / stages as f64);
            for _ in 0..50 {
                let pos = self.manifold.embed(&t) - &self.p;
                let res = self.et.transpose() * pos - &target;
                if res.norm() < 1e-14 {
                    break;
                }
                let a = self.et.transpose() * self.manifold.jacobian(&t);
                let step = a
                    .lu()
                    .solve(&res)
                    .ok_or_else(|| MfError::numerical("graph chart is singular"))?;
                for i in 0..t.len() {
                    t[i] -= step[i];
                }
                if step.norm() < 1e-15 {
                    break;
                }
            }
        }
        Ok(t)
    }

    /// |Pi_T(x(t) - p) - x| after solving for the preimage.
    pub fn preimage_residual(&self, x: &DVector<f64>) -> Result<f64> {
        let t = self.preimage(x)?;
        let pos = self.manifold.embed(&t) - &self.p;
        Ok((self.et.transpose() * pos - x).norm())
    }

    /// f(x) in normal-frame coordinates.
    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let t = self.preimage(x)?;
        Ok(self.en.transpose() * (self.manifold.embed(&t) - &self.p))
    }

    /// p + x + f(x) in ambient coordinates.
    pub fn eval_ambient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.p + &self.et * x + &self.en * self.eval(x)?)
    }

    /// d_x f as an (n-d) x d matrix.
    pub fn differential(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let t = self.preimage(x)?;
        let j = self.manifold.jacobian(&t);
        let a = self.et.transpose() * &j;
        let ainv = a
            .try_inverse()
            .ok_or_else(|| MfError::numerical("graph chart is singular"))?;
        Ok(self.en.transpose() * j * ainv)
    }

    /// d^2_x f by central differences of d f; entry k is the derivative along e_k.
    pub fn second_differential(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let h = 1e-5 * self.tau();
        (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                Ok((self.differential(&xp)? - self.differential(&xm)?) / (2.0 * h))
            })
            .collect()
    }

    /// |f(x+y) - f(y) - d_y f(x) - f(x)| / (|x|^2 |y|).
    pub fn third_order_ratio(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let lhs = self.eval(&(x + y))? - self.eval(y)? - self.differential(y)? * x - self.eval(x)?;
        Ok(lhs.norm() / (x.norm_squared() * y.norm()))
    }

    fn ball_grid(&self, radius: f64, per_axis: usize) -> Vec<DVector<f64>> {
        let d = self.tangent.dim();
        let k = per_axis.max(2);
        let step = 2.0 * radius / (k - 1) as f64;
        let total = k.pow(d as u32);
        let mut out = Vec::new();
        for idx in 0..total {
            let mut r = idx;
            let x = DVector::from_fn(d, |_, _| {
                let i = r % k;
                r /= k;
                -radius + step * i as f64
            });
            if x.norm() <= radius * (1.0 + 1e-12) {
                out.push(x);
            }
        }
        out
    }

    pub fn check_bounds(&self, per_axis: usize) -> Result<GraphBoundsReport> {
        let tau = self.tau();
        let mut rep = GraphBoundsReport {
            value_ratio: 0.0,
            slope_ratio: 0.0,
            hessian_ratio: 0.0,
            grid_points: 0,
        };
        for x in self.ball_grid(self.radius, per_axis) {
            let r = x.norm();
            rep.grid_points += 1;
            if r > 1e-12 {
                rep.value_ratio = rep.value_ratio.max(self.eval(&x)?.norm() * tau / (r * r));
                rep.slope_ratio = rep.slope_ratio.max(self.differential(&x)?.norm() * tau / r);
            }
            let h2 = self.second_differential(&x)?;
            let worst = h2.iter().map(|m| m.norm()).fold(0.0, f64::max);
            rep.hessian_ratio = rep.hessian_ratio.max(worst * tau);
        }
        Ok(rep)
    }

    /// Every grid point of the tau/4 tangent ball has a preimage in the
    /// tau/4 window; slopes obey the linear bound within tau/8.
    pub fn window_check(&self, per_axis: usize) -> Result<WindowReport> {
        let tau = self.tau();
        let mut rep =
            WindowReport { max_residual: 0.0, all_in_window: true, slope_ratio: 0.0, grid_points: 0 };
        for x in self.ball_grid(tau / 4.0, per_axis) {
            rep.grid_points += 1;
            rep.max_residual = rep.max_residual.max(self.preimage_residual(&x)?);
            if self.eval(&x)?.norm() > tau / 4.0 {
                rep.all_in_window = false;
            }
            let r = x.norm();
            if r > 1e-12 && r <= tau / 8.0 {
                let a = crate::linalg::spectral_norm(&self.differential(&x)?);
                rep.slope_ratio = rep.slope_ratio.max(a * tau / r);
            }
        }
        Ok(rep)
    }
}
