//! Flatten-and-project construction producing R-exposed manifolds.

use nalgebra::DVector;

use super::{AnalyticManifold, SphereMap};
use crate::error::{MfError, Result};
use crate::linalg::{complement_basis, orthonormalize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    /// Upper limit on eps.
    pub c0: f64,
    /// Reach loss factor: tau' = tau (1 - c_proj eps).
    pub c_proj: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { c0: 0.1, c_proj: 2.0 }
    }
}

/// M1 = Pi_R(Pi_H M) with R = 1/(eps tau).
pub fn sphere_projection_construct(
    m: &AnalyticManifold,
    eps: f64,
    cfg: &ProjectionConfig,
) -> Result<AnalyticManifold> {
    let mut out = project(m, eps, cfg)?;
    out.spec.shape = super::Shape::SphereProjectedGraph {
        base: Box::new(m.spec.shape.clone()),
        eps,
        c0: cfg.c0,
        c_proj: cfg.c_proj,
    };
    Ok(out)
}

pub(super) fn project(m: &AnalyticManifold, eps: f64, cfg: &ProjectionConfig) -> Result<AnalyticManifold> {
    if m.sphere_map.is_some() {
        return Err(MfError::invalid("manifold is already sphere-projected"));
    }
    if !(eps > 0.0 && eps < cfg.c0) {
        return Err(MfError::invalid(format!("eps = {eps} must lie in (0, {})", cfg.c0)));
    }
    if cfg.c_proj * eps >= 1.0 {
        return Err(MfError::invalid("c_proj * eps must be below 1"));
    }
    let n = m.ambient_dim();
    let tau = m.bounds().tau;
    let scale = eps * tau;

    // Farthest-point traversal on a grid much finer than the net scale.
    let grid = m.quadrature(
        ((m.volume() / (0.05 * scale).powi(m.intrinsic_dim() as i32)) as usize).clamp(1024, 400_000),
    );
    let cover = scale - grid.spacing;
    if cover <= 0.0 {
        return Err(MfError::numerical("search grid is too coarse for the net scale"));
    }
    let pts = grid.points.to_vectors();
    let mut net: Vec<DVector<f64>> = vec![pts[0].clone()];
    let mut gap: Vec<f64> = pts.iter().map(|p| (p - &pts[0]).norm()).collect();
    loop {
        let (far, &g) = gap
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is non-empty");
        if g <= cover {
            break;
        }
        if net.len() >= n {
            return Err(MfError::precondition(format!(
                "ambient dimension {n} is too small: an eps*tau net needs more than {n} points, \
                 but the net-size bound requires |N| <= n"
            )));
        }
        let q = pts[far].clone();
        for (gp, p) in gap.iter_mut().zip(&pts) {
            *gp = gp.min((p - &q).norm());
        }
        net.push(q);
    }

    let origin = net[0].clone();
    let diffs: Vec<DVector<f64>> = net[1..].iter().map(|x| x - &origin).collect();
    let span = orthonormalize(&diffs, 1e-10);
    if span.len() >= n {
        return Err(MfError::precondition("net spans R^n; no hyperplane contains it"));
    }
    let comp = complement_basis(&span, n);
    let mut u = comp[0].clone();
    let mut offset = origin.dot(&u);
    if offset > 0.0 {
        u = -u;
        offset = -offset;
    }
    let foot = &u * offset;
    let radius = 1.0 / scale;
    let center = &foot + &u * radius;

    let mut out = m.clone();
    out.sphere_map = Some(SphereMap {
        foot,
        normal: u,
        center,
        radius,
        scale: 1.0,
        net_size: net.len(),
    });
    out.search_grid = Default::default();
    let extent = out
        .quadrature(4096)
        .points
        .rows()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let s = if extent > 1.0 { 1.0 / (extent * (1.0 + 1e-9)) } else { 1.0 };
    if let Some(map) = out.sphere_map.as_mut() {
        map.scale = s;
    }
    out.rescale *= s;
    out.max_speeds = speeds(&out);
    let probe = out.quadrature(4096);
    out.max_area = probe
        .params
        .iter()
        .map(|t| out.area_element(t))
        .fold(0.0, f64::max)
        * 1.05;
    out.volume = out.quadrature(if out.intrinsic_dim() == 1 { 16_384 } else { 160_000 }).total_area;
    let tau1 = s * tau * (1.0 - cfg.c_proj * eps);
    out.bounds.tau = tau1;
    out.bounds.volume = out.volume;
    out.bounds.r_exposed = s * radius;
    out.bounds.lambda = out.estimate_lambda(0x5eed).max(tau1.powi(-2));
    out.bounds.validate()?;
    Ok(out)
}

fn speeds(m: &AnalyticManifold) -> Vec<f64> {
    let d = m.intrinsic_dim();
    let mut top = vec![0.0f64; d];
    let probe = m.quadrature(if d == 1 { 2048 } else { 64 * 64 });
    for t in &probe.params {
        let j = m.jacobian(t);
        for (i, c) in j.column_iter().enumerate() {
            top[i] = top[i].max(c.norm());
        }
    }
    top.iter().map(|s| s * 1.05).collect()
}
