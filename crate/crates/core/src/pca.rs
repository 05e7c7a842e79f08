//! PCA reduction to D dimensions and checks of its geometric guarantees.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{MfError, Result};
use crate::geometry::{exposedness_margin, federer_reach_estimate, GeometricBounds, Subspace};
use crate::linalg::{complement_basis, orthonormalize, sym_eigen_desc};
use crate::manifold::AnalyticManifold;

/// origin + span(linear).
#[derive(Debug, Clone)]
pub struct AffineSubspace {
    pub origin: DVector<f64>,
    pub linear: Subspace,
}

impl AffineSubspace {
    pub fn whole(n: usize) -> Self {
        AffineSubspace {
            origin: DVector::zeros(n),
            linear: Subspace::coordinate(n, n).expect("n > 0"),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    /// Coordinates of y in the frame of S.
    pub fn coords(&self, y: &DVector<f64>) -> DVector<f64> {
        self.linear.coords(&(y - &self.origin))
    }

    pub fn lift(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.origin + self.linear.basis_matrix() * c
    }

    pub fn dist(&self, y: &DVector<f64>) -> f64 {
        self.linear.dist(&(y - &self.origin))
    }

    pub fn project_cloud(&self, cloud: &PointCloud) -> PointCloud {
        let n = cloud.dim();
        if self.dim() == n && self.origin.iter().all(|&x| x == 0.0) {
            let ident = self
                .linear
                .basis()
                .iter()
                .enumerate()
                .all(|(i, b)| (b[i] - 1.0).abs() < 1e-15);
            if ident {
                return cloud.clone();
            }
        }
        let u = self.linear.basis_matrix();
        let dd = self.dim();
        let mut out = PointCloud::with_capacity(dd, cloud.len());
        let mut buf = vec![0.0; dd];
        for row in cloud.rows() {
            for (k, b) in buf.iter_mut().enumerate() {
                let col = u.column(k);
                *b = row
                    .iter()
                    .zip(self.origin.iter())
                    .zip(col.iter())
                    .map(|((y, o), c)| (y - o) * c)
                    .sum();
            }
            out.push(&buf);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    pub subspace: AffineSubspace,
    /// Sum over the points of dist(y_i, S)^2.
    pub objective: f64,
    pub sample_count: usize,
    /// Eigenvalues of the centered scatter matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Fewer than D informative directions; the rest is arbitrary.
    pub padded: bool,
    /// D >= n: S is the whole space and no fit was done.
    pub full_space: bool,
}

pub fn pca_fit(points: &PointCloud, big_d: usize) -> Result<PcaResult> {
    let n = points.dim();
    let count = points.len();
    if big_d == 0 {
        return Err(MfError::invalid("D must be positive"));
    }
    if big_d >= n {
        return Ok(PcaResult {
            subspace: AffineSubspace::whole(n),
            objective: 0.0,
            sample_count: count,
            eigenvalues: Vec::new(),
            padded: false,
            full_space: true,
        });
    }
    if count < big_d + 1 {
        return Err(MfError::invalid(format!("PCA to D = {big_d} needs at least {} points", big_d + 1)));
    }
    let mut mean = DVector::zeros(n);
    for r in points.rows() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean /= count as f64;
    let mut scatter = DMatrix::zeros(n, n);
    let mut c = vec![0.0; n];
    for r in points.rows() {
        for k in 0..n {
            c[k] = r[k] - mean[k];
        }
        for j in 0..n {
            let cj = c[j];
            for i in j..n {
                scatter[(i, j)] += c[i] * cj;
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            scatter[(i, j)] = scatter[(j, i)];
        }
    }
    let (vals, vecs) = sym_eigen_desc(&scatter);
    let top = vals[0].abs().max(1e-300);
    let informative = vals.iter().take(big_d).filter(|&&v| v > 1e-12 * top).count();
    let mut basis: Vec<DVector<f64>> =
        (0..informative).map(|k| vecs.column(k).into_owned()).collect();
    let padded = informative < big_d;
    if padded {
        let extra = complement_basis(&basis, n);
        basis.extend(extra.into_iter().take(big_d - informative));
    }
    let basis = orthonormalize(&basis, 1e-12);
    let linear = Subspace::from_orthonormal(basis)?;
    let subspace = AffineSubspace { origin: mean, linear };
    let objective = points
        .rows()
        .map(|r| subspace.dist(&DVector::from_column_slice(r)).powi(2))
        .sum();
    Ok(PcaResult { subspace, objective, sample_count: count, eigenvalues: vals, padded, full_space: false })
}

/// floor(C (n s^2 + s^2 log(C n s^2/(eps delta))) sqrt(log(C/delta)) D/eps^2),
/// saturating at u64::MAX.
pub fn nd_sample_size(
    bounds: &GeometricBounds,
    big_d: usize,
    sigma: f64,
    eps: f64,
    delta: f64,
    c: f64,
) -> Result<u64> {
    for (name, v) in [("sigma", sigma), ("eps", eps), ("delta", delta), ("C", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(MfError::invalid(format!("{name} must be positive")));
        }
    }
    let n = bounds.n as f64;
    let s2 = sigma * sigma;
    let lead = c * (n * s2 + s2 * (c * n * s2 / (eps * delta)).ln());
    let v = lead * (c / delta).ln().sqrt() * big_d as f64 / (eps * eps);
    if !(v >= 0.0) {
        return Err(MfError::numerical(format!("sample size formula gave {v}")));
    }
    Ok(if v >= u64::MAX as f64 { u64::MAX } else { v.floor() as u64 })
}

/// Numerical checks of what a good PCA plane guarantees.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub alpha: f64,
    pub sup_dist: f64,
    /// sqrt(sup_dist / tau): the smallest alpha the data supports.
    pub alpha_implied: f64,
    pub angle_max: f64,
    pub angle_bound: f64,
    pub angle_ok: bool,
    /// None when M carries no exposing normals.
    pub exposed_margin: Option<f64>,
    pub exposed_ok: Option<bool>,
    pub reach_estimate: f64,
    pub reach_bound: f64,
    pub reach_ok: bool,
    pub samples: usize,
}

impl ProjectionReport {
    pub fn all_ok(&self) -> bool {
        self.angle_ok && self.reach_ok && self.exposed_ok.unwrap_or(true)
    }
}

pub fn verify_projection_bounds(
    m: &AnalyticManifold,
    s: &AffineSubspace,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<ProjectionReport> {
    if !(alpha > 0.0 && alpha < 0.25) {
        return Err(MfError::invalid("alpha must lie in (0, 1/4)"));
    }
    let b = m.bounds();
    let draws = m.sample_with_params(samples.max(8), seed);
    let sup_dist = draws.iter().map(|(_, x)| s.dist(x)).fold(0.0, f64::max);
    if sup_dist > alpha * alpha * b.tau {
        return Err(MfError::precondition(format!(
            "tangent-angle hypothesis fails: sup dist(x, S) = {sup_dist:.4e} > alpha^2 tau = {:.4e}",
            alpha * alpha * b.tau
        )));
    }
    let mut angle_max: f64 = 0.0;
    let mut proj_pts = Vec::with_capacity(draws.len());
    let mut proj_tan = Vec::with_capacity(draws.len());
    let mut normals = Vec::with_capacity(draws.len());
    for (t, x) in &draws {
        let tan = m.tangent_at(t)?;
        // Worst unit tangent direction: largest singular value of Pi_{S^perp} E.
        let e = tan.basis_matrix();
        let pe = s.linear.basis_matrix().transpose() * &e;
        let perp = e.clone() - s.linear.basis_matrix() * &pe;
        angle_max = angle_max.max(crate::linalg::spectral_norm(&perp));
        let cols: Vec<DVector<f64>> = pe.column_iter().map(|c| c.into_owned()).collect();
        let ptan = Subspace::new(&cols)?;
        proj_pts.push(s.coords(x));
        if let Some(nu) = m.exposing_normal(t) {
            let pn = s.linear.coords(&nu);
            let pn = ptan.residual(&pn);
            let len = pn.norm();
            normals.push(if len > 1e-12 { Some(pn / len) } else { None });
        }
        proj_tan.push(ptan);
    }
    let angle_bound = 3.0 * alpha;
    let (exposed_margin, exposed_ok) = if normals.len() == draws.len() {
        let mut worst = f64::INFINITY;
        for (p, nu) in proj_pts.iter().zip(&normals) {
            match nu {
                Some(nu) => {
                    worst = worst.min(exposedness_margin(p, nu, &proj_pts, 2.0 * b.r_exposed)?)
                }
                None => worst = f64::NEG_INFINITY,
            }
        }
        (Some(worst), Some(worst >= -1e-10))
    } else {
        (None, None)
    };
    let reach_estimate = federer_reach_estimate(&proj_pts, &proj_tan)?;
    let reach_bound = (1.0 - 4.0 * alpha * alpha) * b.tau;
    Ok(ProjectionReport {
        alpha,
        sup_dist,
        alpha_implied: (sup_dist / b.tau).sqrt(),
        angle_max,
        angle_bound,
        angle_ok: angle_max <= angle_bound,
        exposed_margin,
        exposed_ok,
        reach_estimate,
        reach_bound,
        reach_ok: reach_estimate >= reach_bound,
        samples: draws.len(),
    })
}
