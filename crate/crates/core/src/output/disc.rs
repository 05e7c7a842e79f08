use nalgebra::{DMatrix, DVector};

use crate::cloud::PointCloud;
use crate::error::{MfError, Result};
use crate::linalg::orthonormalize;

/// Greedy maximal subset with pairwise distances >= scale, in input order.
pub fn subnet(points: &PointCloud, scale: f64) -> Result<PointCloud> {
    if points.is_empty() {
        return Err(MfError::invalid("subnet of an empty net"));
    }
    if !(scale > 0.0) {
        return Err(MfError::invalid("subnet scale must be positive"));
    }
    let mut kept = PointCloud::new(points.dim());
    for p in points.rows() {
        let far = kept.rows().all(|q| {
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 >= scale * scale
        });
        if far {
            kept.push(p);
        }
    }
    Ok(kept)
}

/// FindDisc on candidate offsets x' (already centered at the base point and
/// scaled so the disc radius is 1). Returns the indices of the d picks.
pub fn find_disc(candidates: &[DVector<f64>], d: usize) -> Result<Vec<usize>> {
    if candidates.len() < d {
        return Err(MfError::invalid(format!(
            "FindDisc needs at least d = {d} candidates, got {}",
            candidates.len()
        )));
    }
    let mut picked: Vec<usize> = Vec::with_capacity(d);
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, x) in candidates.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let mut score = (1.0 - x.norm()).abs();
            for u in &dirs {
                score = score.max(u.dot(x).abs());
            }
            // Strict comparison keeps the lowest index on ties.
            if score < best.1 {
                best = (i, score);
            }
        }
        let x = &candidates[best.0];
        let nx = x.norm();
        if !(nx > 0.0) {
            return Err(MfError::numerical("FindDisc picked a zero offset"));
        }
        dirs.push(x / nx);
        picked.push(best.0);
    }
    Ok(picked)
}

#[derive(Debug, Clone)]
pub struct FineTuned {
    pub frame: Vec<DVector<f64>>,
    /// Mean squared distance of the samples to p + span(frame).
    pub residual_before: f64,
    pub residual_after: f64,
    /// The design was degenerate and the putative frame was kept.
    pub degenerate: bool,
}

fn plane_residual(p: &DVector<f64>, frame: &[DVector<f64>], samples: &[DVector<f64>]) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|y| {
            let mut w = y - p;
            for e in frame {
                let c = e.dot(&w);
                w.axpy(-c, e, 1.0);
            }
            w.norm_squared()
        })
        .sum();
    total / samples.len() as f64
}

/// Least-squares linear graph over the putative tangent plane at p.
pub fn fine_tune_disc(p: &DVector<f64>, samples: &[DVector<f64>], frame: &[DVector<f64>]) -> Result<FineTuned> {
    let d = frame.len();
    if d == 0 {
        return Err(MfError::invalid("fine-tuning needs a nonempty frame"));
    }
    if samples.len() < 10 * d {
        return Err(MfError::invalid(format!(
            "fine-tuning needs at least {} local samples, got {}",
            10 * d,
            samples.len()
        )));
    }
    let frame = orthonormalize(frame, 1e-12);
    if frame.len() != d {
        return Err(MfError::invalid("putative frame is rank deficient"));
    }
    let n = p.len();
    let before = plane_residual(p, &frame, samples);
    let k = samples.len();
    let mut t = DMatrix::zeros(d, k);
    let mut w = DMatrix::zeros(n, k);
    for (j, y) in samples.iter().enumerate() {
        let mut r = y - p;
        for (a, e) in frame.iter().enumerate() {
            let c = e.dot(&r);
            t[(a, j)] = c;
            r.axpy(-c, e, 1.0);
        }
        w.set_column(j, &r);
    }
    let gram = &t * t.transpose();
    let keep = |frame: Vec<DVector<f64>>| FineTuned { frame, residual_before: before, residual_after: before, degenerate: true };
    let eig = gram.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo > 1e-12 * hi.max(1e-300)) {
        return Ok(keep(frame));
    }
    let inv = match gram.try_inverse() {
        Some(g) => g,
        None => return Ok(keep(frame)),
    };
    // Normal components as a linear function of tangent coordinates.
    let b = &w * t.transpose() * inv;
    let tilted: Vec<DVector<f64>> = frame.iter().enumerate().map(|(a, e)| e + b.column(a)).collect();
    let refined = orthonormalize(&tilted, 1e-12);
    if refined.len() != d {
        return Ok(keep(frame));
    }
    let after = plane_residual(p, &refined, samples);
    Ok(if after <= before {
        FineTuned { frame: refined, residual_before: before, residual_after: after, degenerate: false }
    } else {
        FineTuned { frame, residual_before: before, residual_after: before, degenerate: false }
    })
}
