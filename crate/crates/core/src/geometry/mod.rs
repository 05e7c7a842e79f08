//! Subspaces, reach and exposedness primitives, Hausdorff distance.

pub mod bundle;
pub mod cone;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, MfError, Result};
use crate::linalg::{complement_basis, orthonormalize, projector, spectral_norm};

pub use bundle::{
    bilinear_norm, cone_volume_checks, shape_operator, ConeVolumeReport, SecondFundamentalForm,
};
pub use cone::{
    cone_distance, normal_cone_at, polar_cone_distance_pair, Cone, ConeDistanceReport,
};

const ORTHO_TOL: f64 = 1e-10;

/// A linear subspace of R^n with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Vec<DVector<f64>>,
    ambient_dim: usize,
}

impl Subspace {
    /// Span of the given vectors. Fails when they are rank deficient.
    pub fn new(vectors: &[DVector<f64>]) -> Result<Self> {
        let n = vectors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| MfError::invalid("subspace needs at least one vector"))?;
        for v in vectors {
            check_dim(n, v.len())?;
        }
        let basis = orthonormalize(vectors, 1e-9);
        if basis.len() != vectors.len() {
            return Err(MfError::invalid(format!(
                "rank deficient spanning set: {} vectors span dimension {}",
                vectors.len(),
                basis.len()
            )));
        }
        Ok(Subspace { basis, ambient_dim: n })
    }

    /// Wraps an orthonormal basis after checking it.
    pub fn from_orthonormal(basis: Vec<DVector<f64>>) -> Result<Self> {
        let n = basis
            .first()
            .map(|v| v.len())
            .ok_or_else(|| MfError::invalid("subspace needs at least one vector"))?;
        for (i, a) in basis.iter().enumerate() {
            check_dim(n, a.len())?;
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (a.dot(b) - target).abs() > ORTHO_TOL {
                    return Err(MfError::invalid("basis is not orthonormal"));
                }
            }
        }
        if basis.len() > n {
            return Err(MfError::invalid("more basis vectors than the ambient dimension"));
        }
        Ok(Subspace { basis, ambient_dim: n })
    }

    /// Span of the first `k` coordinate axes of R^n.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(MfError::invalid("need 0 < k <= n"));
        }
        let basis = (0..k)
            .map(|i| {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
        Ok(Subspace { basis, ambient_dim: n })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    /// Basis vectors as the columns of an n x k matrix.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    pub fn projector(&self) -> DMatrix<f64> {
        projector(&self.basis, self.ambient_dim)
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_dim);
        for q in &self.basis {
            out.axpy(q.dot(v), q, 1.0);
        }
        out
    }

    /// Coordinates of the projection in the stored basis.
    pub fn coords(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|q| q.dot(v)))
    }

    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project(v)
    }

    pub fn dist(&self, v: &DVector<f64>) -> f64 {
        self.residual(v).norm()
    }

    /// Orthogonal complement, or None when the subspace is everything.
    pub fn complement(&self) -> Option<Subspace> {
        if self.dim() == self.ambient_dim {
            return None;
        }
        Some(Subspace {
            basis: complement_basis(&self.basis, self.ambient_dim),
            ambient_dim: self.ambient_dim,
        })
    }

    /// Largest deviation of the basis from orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }
}

/// The assumption tuple (d, n, tau, V, R, Lambda).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricBounds {
    pub d: usize,
    pub n: usize,
    pub tau: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "R")]
    pub r_exposed: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

impl GeometricBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(MfError::invalid("tau must be positive"));
        }
        if !(self.volume > 0.0) {
            return Err(MfError::invalid("volume bound must be positive"));
        }
        if self.lambda < self.tau.powi(-2) * (1.0 - 1e-12) {
            return Err(MfError::invalid(format!(
                "Lambda = {} is below tau^-2 = {}",
                self.lambda,
                self.tau.powi(-2)
            )));
        }
        if self.r_exposed < self.tau * (1.0 - 1e-12) {
            return Err(MfError::invalid(format!(
                "R = {} is below tau = {}",
                self.r_exposed, self.tau
            )));
        }
        if self.d == 0 || self.d >= self.n {
            return Err(MfError::invalid("need 0 < d < n"));
        }
        Ok(())
    }
}

/// Operator norm of the difference of the two orthogonal projectors.
pub fn subspace_distance(x: &Subspace, y: &Subspace) -> Result<f64> {
    check_dim(x.ambient_dim, y.ambient_dim)?;
    check_dim(x.dim(), y.dim())?;
    let diff = x.projector() - y.projector();
    Ok(spectral_norm(&diff).clamp(0.0, 1.0))
}

/// Reach estimate from points with known tangent spaces:
/// the inverse of sup over ordered pairs of 2|q-p|^-2 dist(q-p, T_p).
/// Returns `f64::INFINITY` for affine data.
///
/// Pairs closer than `1e-5` times the bounding-box diameter are skipped;
/// their ratio is dominated by rounding in the input coordinates.
pub fn federer_reach_estimate(points: &[DVector<f64>], tangents: &[Subspace]) -> Result<f64> {
    if points.len() < 2 {
        return Err(MfError::invalid("federer reach needs at least 2 points"));
    }
    let floor = 1e-5 * bounding_diameter(points);
    federer_reach_estimate_with_floor(points, tangents, floor)
}

pub fn federer_reach_estimate_with_floor(
    points: &[DVector<f64>],
    tangents: &[Subspace],
    min_pair_dist: f64,
) -> Result<f64> {
    if points.len() < 2 {
        return Err(MfError::invalid("federer reach needs at least 2 points"));
    }
    check_dim(points.len(), tangents.len())?;
    let n = points[0].len();
    for (p, t) in points.iter().zip(tangents) {
        check_dim(n, p.len())?;
        check_dim(n, t.ambient_dim())?;
    }
    let m = points.len();
    let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().cloned()).collect();
    // Normal bases, flattened per point; the perpendicular part is summed
    // directly to avoid cancellation.
    let normals: Vec<Vec<f64>> = tangents
        .iter()
        .map(|t| match t.complement() {
            Some(c) => c.basis().iter().flat_map(|e| e.iter().cloned()).collect(),
            None => Vec::new(),
        })
        .collect();
    let floor2 = min_pair_dist * min_pair_dist;
    let mut sup: f64 = 0.0;
    let mut w = vec![0.0; n];
    for i in 0..m {
        let p = &flat[i * n..(i + 1) * n];
        let nb = &normals[i];
        if nb.is_empty() {
            continue;
        }
        for j in 0..m {
            if i == j {
                continue;
            }
            let q = &flat[j * n..(j + 1) * n];
            let mut len2 = 0.0;
            for k in 0..n {
                w[k] = q[k] - p[k];
                len2 += w[k] * w[k];
            }
            if len2 <= floor2 {
                continue;
            }
            let mut perp2 = 0.0;
            for e in nb.chunks_exact(n) {
                let mut c = 0.0;
                for k in 0..n {
                    c += e[k] * w[k];
                }
                perp2 += c * c;
            }
            let ratio = 2.0 * perp2.sqrt() / len2;
            if ratio > sup {
                sup = ratio;
            }
        }
    }
    if sup <= 1e-14 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / sup)
    }
}

fn bounding_diameter(points: &[DVector<f64>]) -> f64 {
    let n = points[0].len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in points {
        for k in 0..n {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (0..n).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
}

/// True iff |Pi_{T_p perp}(q - p)| <= |q - p|^2 / (2 tau).
pub fn check_reach_inequality(
    p: &DVector<f64>,
    q: &DVector<f64>,
    t_p: &Subspace,
    tau: f64,
) -> Result<bool> {
    check_dim(p.len(), q.len())?;
    check_dim(p.len(), t_p.ambient_dim())?;
    let w = q - p;
    let len2 = w.norm_squared();
    if len2 == 0.0 {
        return Err(MfError::invalid("reach inequality needs p != q"));
    }
    let lhs = t_p.dist(&w);
    let rhs = len2 / (2.0 * tau);
    // q - p carries round-off of order eps (|p| + |q|)
    let slack = 1e-12 * rhs.max(lhs) + 4.0 * f64::EPSILON * (p.norm() + q.norm());
    Ok(lhs <= rhs + slack)
}

/// Smallest value of <q-p, nu> - |q-p|^2/(2R) over the samples.
pub fn exposedness_margin(
    p: &DVector<f64>,
    nu_p: &DVector<f64>,
    samples: &[DVector<f64>],
    r: f64,
) -> Result<f64> {
    check_dim(p.len(), nu_p.len())?;
    if (nu_p.norm() - 1.0).abs() > 1e-10 {
        return Err(MfError::invalid("nu_p must be a unit vector"));
    }
    let mut worst = f64::INFINITY;
    for q in samples {
        check_dim(p.len(), q.len())?;
        let w = q - p;
        let m = w.dot(nu_p) - w.norm_squared() / (2.0 * r);
        worst = worst.min(m);
    }
    Ok(worst)
}

/// True iff <q-p, nu_p> >= |q-p|^2/(2R) for every sample q.
pub fn check_exposedness(
    p: &DVector<f64>,
    nu_p: &DVector<f64>,
    samples: &[DVector<f64>],
    r: f64,
) -> Result<bool> {
    Ok(exposedness_margin(p, nu_p, samples, r)? >= -1e-12)
}

/// Largest distance from a point of `a` to its nearest point of `b`.
pub fn directed_hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(MfError::invalid("hausdorff distance of an empty set"));
    }
    let n = a[0].len();
    let fb: Vec<f64> = b
        .iter()
        .map(|v| {
            check_dim(n, v.len())?;
            Ok(v.iter().cloned().collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let mut worst: f64 = 0.0;
    for x in a {
        check_dim(n, x.len())?;
        let mut best = f64::INFINITY;
        for row in fb.chunks_exact(n) {
            let mut s = 0.0;
            for k in 0..n {
                let t = x[k] - row[k];
                s += t * t;
            }
            if s < best {
                best = s;
                if best <= worst * worst {
                    break;
                }
            }
        }
        worst = worst.max(best.sqrt());
    }
    Ok(worst)
}

pub fn hausdorff_distance(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}
