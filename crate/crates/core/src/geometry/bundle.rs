//! Second fundamental form, shape operator, and Monte-Carlo checks of the
//! normal-bundle measure bounds.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{GeometricBounds, Subspace};
use crate::error::{check_dim, MfError, Result};
use crate::linalg::{spectral_norm, sym_eigen_desc, unit};
use crate::manifold::omega_d;

/// II_p in an orthonormal tangent frame: `values[i][j] = II(e_i, e_j)`.
#[derive(Debug, Clone)]
pub struct SecondFundamentalForm {
    pub point: DVector<f64>,
    pub tangent: Subspace,
    pub values: Vec<Vec<DVector<f64>>>,
}

impl SecondFundamentalForm {
    /// II(xi, eta) for tangent vectors given in frame coordinates.
    pub fn apply(&self, xi: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let n = self.point.len();
        let mut out = DVector::zeros(n);
        for i in 0..self.values.len() {
            for j in 0..self.values.len() {
                out.axpy(xi[i] * eta[j], &self.values[i][j], 1.0);
            }
        }
        out
    }

    /// Component matrices B_k of the ambient extension
    /// B(u, v) = II(Pi_T u, Pi_T v), one n x n matrix per output coordinate.
    pub fn ambient_components(&self) -> Vec<DMatrix<f64>> {
        let n = self.point.len();
        let e = self.tangent.basis();
        (0..n)
            .map(|k| {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..e.len() {
                    for j in 0..e.len() {
                        m.ger(self.values[i][j][k], &e[i], &e[j], 1.0);
                    }
                }
                m
            })
            .collect()
    }
}

/// Matrix of L_{p,v} in the tangent frame:
/// <L(e_j), e_i> = -<II(e_j, e_i), v>.
pub fn shape_operator(ii: &SecondFundamentalForm, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim(ii.point.len(), v.len())?;
    let tangential = ii.tangent.project(v).norm();
    if tangential > 1e-8 * v.norm().max(1.0) {
        return Err(MfError::invalid(format!(
            "v is not normal: tangential part {tangential:.3e}"
        )));
    }
    let d = ii.values.len();
    Ok(DMatrix::from_fn(d, d, |i, j| -ii.values[j][i].dot(v)))
}

/// max over unit u, v of |B(u, v)| for a symmetric vector-valued bilinear
/// form given by its component matrices; equals max over unit w of the
/// spectral norm of sum_k w_k B_k.
pub fn bilinear_norm(components: &[DMatrix<f64>]) -> f64 {
    let m = components.len();
    if m == 0 {
        return 0.0;
    }
    let n = components[0].nrows();
    let eval = |w: &DVector<f64>| {
        let mut acc = DMatrix::zeros(n, n);
        for (k, b) in components.iter().enumerate() {
            acc += b * w[k];
        }
        spectral_norm(&acc)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut best_w = DVector::zeros(m);
    best_w[0] = 1.0;
    let mut best = 0.0;
    let trial = |w: DVector<f64>, best: &mut f64, best_w: &mut DVector<f64>| {
        if let Some(u) = unit(&w) {
            let val = eval(&u);
            if val > *best {
                *best = val;
                *best_w = u;
            }
        }
    };
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = 1.0;
        trial(e, &mut best, &mut best_w);
    }
    for _ in 0..(64 * m).min(512) {
        let w = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        trial(w, &mut best, &mut best_w);
    }
    // local refinement around the best direction
    let mut step = 0.3;
    for _ in 0..60 {
        let mut improved = false;
        for _ in 0..4 * m {
            let pert = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)) * step;
            let cand = &best_w + pert;
            let before = best;
            trial(cand, &mut best, &mut best_w);
            improved |= best > before;
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeVolumeReport {
    /// Monte-Carlo estimate of the integral over M of vol(S_K(p)).
    pub integral_estimate: f64,
    pub integral_sigma: f64,
    /// tau^d omega_D
    pub integral_lower_bound: f64,
    pub integral_ok: bool,
    /// Smallest inscribed-ball radius of S_K(p) over the tested base points.
    pub min_thick_radius: f64,
    /// tau / (tau + R)
    pub thick_radius_bound: f64,
    pub thick_ok: bool,
    /// Fraction of uniform unit directions at distance >= r0 from the
    /// relative boundary of N_K(x_v).
    pub deep_fraction: f64,
    pub deep_sigma: f64,
    /// 2^{-2D} (tau/R)^{D+d}
    pub deep_lower_bound: f64,
    pub deep_ok: bool,
    /// vol_D(G)/omega_D for the set G of vectors with an eps-ball of the
    /// fiber inside their normal cone, eps = `deep_eps`.
    pub deep_eps: f64,
    pub g_volume_ratio: f64,
    pub g_volume_sigma: f64,
    /// (eps tau / R)^d times the smallest per-fiber fraction of S_K(p) in G.
    pub g_volume_bound: f64,
    pub g_ok: bool,
    pub base_points: usize,
    pub mc_samples: usize,
}

impl ConeVolumeReport {
    pub fn all_ok(&self) -> bool {
        self.integral_ok && self.thick_ok && self.deep_ok && self.g_ok
    }
}

struct Fiber {
    basis: Vec<DVector<f64>>,
    /// Normal parts Pi_perp(x - p) of the hull samples, unit-normalized,
    /// in fiber coordinates; tiny ones are dropped.
    halfspaces: Vec<DVector<f64>>,
}

impl Fiber {
    fn build(samples: &[DVector<f64>], p: &DVector<f64>, tangent: &Subspace) -> Option<Fiber> {
        let comp = tangent.complement()?;
        let basis = comp.basis().to_vec();
        let halfspaces = samples
            .iter()
            .filter_map(|x| {
                let w = x - p;
                let c = DVector::from_iterator(basis.len(), basis.iter().map(|b| b.dot(&w)));
                if c.norm() > 1e-12 {
                    Some(c.normalize())
                } else {
                    None
                }
            })
            .collect();
        Some(Fiber { basis, halfspaces })
    }

    /// Signed distance from fiber point c to the boundary of the cone
    /// {w : <w, a> <= 0 for all a} (negative when outside).
    fn depth(&self, c: &DVector<f64>) -> f64 {
        self.halfspaces
            .iter()
            .map(|a| -a.dot(c))
            .fold(f64::INFINITY, f64::min)
    }
}

fn uniform_ball(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(u) = unit(&g) {
            let r: f64 = rng.random::<f64>().powf(1.0 / k as f64);
            return u * r;
        }
    }
}

fn uniform_sphere(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(u) = unit(&g) {
            return u;
        }
    }
}

/// Monte-Carlo checks of the cone-volume lower bound, the thick outer cone
/// radius, the deep-interior probability and the measure of the deep set G.
///
/// `samples` are uniform draws from M (the hull is their convex hull) with
/// exact tangent spaces; `bounds.volume` is used as the exact volume |M|.
pub fn cone_volume_checks(
    samples: &[DVector<f64>],
    tangents: &[Subspace],
    bounds: &GeometricBounds,
    mc_samples: usize,
    seed: u64,
) -> Result<ConeVolumeReport> {
    bounds.validate()?;
    check_dim(samples.len(), tangents.len())?;
    if samples.len() < 16 || mc_samples < 100 {
        return Err(MfError::invalid(
            "cone volume checks need at least 16 manifold samples and 100 Monte-Carlo draws",
        ));
    }
    let n = bounds.n;
    let d = bounds.d;
    let k = n - d;
    let tau = bounds.tau;
    let r = bounds.r_exposed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let base_count = samples.len().min(200);
    let stride = samples.len() as f64 / base_count as f64;
    let per_point = (mc_samples / base_count).max(8);
    let omega_k = omega_d(k as i64)?;
    let deep_eps = 0.1 * tau / (tau + r);

    let mut hits = 0usize;
    let mut total = 0usize;
    let mut min_thick = f64::INFINITY;
    let mut min_g_fraction = f64::INFINITY;
    for b in 0..base_count {
        let i = (b as f64 * stride) as usize;
        let p = &samples[i];
        let fiber = Fiber::build(samples, p, &tangents[i])
            .ok_or_else(|| MfError::invalid("tangent space equals the ambient space"))?;
        let mut local_hits = 0usize;
        let mut local_g = 0usize;
        for _ in 0..per_point {
            let v = uniform_ball(k, &mut rng);
            let depth = fiber.depth(&v);
            if depth >= -1e-12 {
                local_hits += 1;
                if depth >= deep_eps {
                    local_g += 1;
                }
            }
        }
        hits += local_hits;
        total += per_point;
        if local_hits > 0 {
            min_g_fraction = min_g_fraction.min(local_g as f64 / local_hits as f64);
        }
        // Inscribed ball of S_K(p): for a unit direction u with cone depth h,
        // the best ball centered on the ray through u has radius h/(1+h).
        let mut best: f64 = 0.0;
        let mut candidates: Vec<DVector<f64>> = Vec::new();
        if k == 1 {
            candidates.push(DVector::from_vec(vec![1.0]));
            candidates.push(DVector::from_vec(vec![-1.0]));
        } else {
            for _ in 0..256 {
                candidates.push(uniform_sphere(k, &mut rng));
            }
        }
        for u in &mut candidates {
            // short projected ascent on the depth
            let mut h = fiber.depth(u);
            let mut step = 0.2;
            if k > 1 {
                for _ in 0..40 {
                    let trial = unit(&(&*u + uniform_sphere(k, &mut rng) * step)).unwrap();
                    let ht = fiber.depth(&trial);
                    if ht > h {
                        *u = trial;
                        h = ht;
                    } else {
                        step *= 0.85;
                    }
                }
            }
            if h > 0.0 {
                best = best.max(h / (1.0 + h));
            }
        }
        min_thick = min_thick.min(best);
    }
    let volume = bounds.volume;
    let p_hat = hits as f64 / total as f64;
    let integral_estimate = volume * omega_k * p_hat;
    let integral_sigma = volume * omega_k * (p_hat * (1.0 - p_hat) / total as f64).sqrt();
    let integral_lower_bound = tau.powi(d as i32) * omega_d(n as i64)?;

    // Deep-interior probability for uniform unit directions, and the
    // volume of G for uniform points of the unit ball.
    let r0 = tau / (2.0 * tau + 2.0 * r);
    let dir_count = mc_samples.min(4000);
    let mut deep = 0usize;
    let mut g_hits = 0usize;
    let flat: Vec<&DVector<f64>> = samples.iter().collect();
    for t in 0..dir_count {
        let v = if t % 2 == 0 {
            uniform_sphere(n, &mut rng)
        } else {
            uniform_ball(n, &mut rng)
        };
        let (imax, _) = flat
            .iter()
            .enumerate()
            .map(|(j, x)| (j, x.dot(&v)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let fiber = Fiber::build(samples, &samples[imax], &tangents[imax])
            .ok_or_else(|| MfError::invalid("tangent space equals the ambient space"))?;
        let w = DVector::from_iterator(k, fiber.basis.iter().map(|b| b.dot(&v)));
        let depth = fiber.depth(&w);
        if t % 2 == 0 {
            if depth >= r0 {
                deep += 1;
            }
        } else if depth >= deep_eps {
            g_hits += 1;
        }
    }
    let nd = dir_count.div_ceil(2) as f64;
    let ng = (dir_count / 2).max(1) as f64;
    let deep_fraction = deep as f64 / nd;
    let deep_sigma = (deep_fraction * (1.0 - deep_fraction) / nd).sqrt().max(1.0 / nd);
    let deep_lower_bound = 2f64.powi(-2 * n as i32) * (tau / r).powi((n + d) as i32);
    let g_ratio = g_hits as f64 / ng;
    let g_sigma = (g_ratio * (1.0 - g_ratio) / ng).sqrt().max(1.0 / ng);
    let g_bound = (deep_eps * tau / r).powi(d as i32) * min_g_fraction.min(1.0);

    let thick_bound = tau / (tau + r);
    Ok(ConeVolumeReport {
        integral_estimate,
        integral_sigma,
        integral_lower_bound,
        integral_ok: integral_estimate + 3.0 * integral_sigma >= integral_lower_bound,
        min_thick_radius: min_thick,
        thick_radius_bound: thick_bound,
        thick_ok: min_thick >= thick_bound - 1e-9,
        deep_fraction,
        deep_sigma,
        deep_lower_bound,
        deep_ok: deep_fraction + 3.0 * deep_sigma >= deep_lower_bound,
        deep_eps,
        g_volume_ratio: g_ratio,
        g_volume_sigma: g_sigma,
        g_volume_bound: g_bound,
        g_ok: g_ratio + 3.0 * g_sigma >= g_bound,
        base_points: base_count,
        mc_samples: total + dir_count,
    })
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn sym_spectral_radius(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen_desc(m);
    vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
}
