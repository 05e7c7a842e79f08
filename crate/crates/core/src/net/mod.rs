//! The delta-ball tester and Find-points: from an optimization oracle to a
//! net of points near M.

mod sphere;

pub use sphere::sphere_net;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{check_dim, MfError, Result};
use crate::geometry::GeometricBounds;
use crate::manifold::{omega_d, AnalyticManifold};
use crate::oracles::{OracleBudget, OracleChain, WeakAnswer};
use crate::rng::stage_rng;

/// Tunable constants of the net stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub c_cone: f64,
    pub c_acc: f64,
    /// The precondition is eps < c_eps tau / d.
    pub c_eps: f64,
    pub n0_cap: usize,
    /// Truncates the greedy sphere net; greedy order keeps the best
    /// coverage for the retained count.
    pub sphere_net_cap: Option<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { c_cone: 4.0, c_acc: 4.0, c_eps: 0.5, n0_cap: 200, sphere_net_cap: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NetParams {
    pub eps: f64,
    pub big_d: usize,
    pub d: usize,
    pub r1: f64,
    pub r0: f64,
    pub delta: f64,
    pub eps_prime: f64,
    /// L = C_cone R (Lambda + tau^-2).
    pub lipschitz: f64,
    pub script_n: usize,
    /// True when script_n is the volumetric estimate rather than a
    /// constructed net size.
    pub script_n_estimated: bool,
    pub n0: usize,
    /// ln of the uncapped N0 formula.
    pub ln_n0_formula: f64,
    pub accept_radius: f64,
    pub tau: f64,
    pub r_exposed: f64,
    pub config: NetConfig,
}

impl NetParams {
    /// 2^(-2D) (tau/R)^(D+d): lower bound on the deep-direction probability.
    pub fn acceptance_bound(&self) -> f64 {
        let e = (self.big_d + self.d) as i32;
        2f64.powi(-2 * self.big_d as i32) * (self.tau / self.r_exposed).powi(e)
    }

    /// Sphere-net size used by the ball tester.
    pub fn tester_net_size(&self) -> usize {
        match self.config.sphere_net_cap {
            Some(c) => self.script_n.min(c.max(1)),
            None => self.script_n,
        }
    }
}

const SCRIPT_N_LIMIT: usize = 50_000;

pub fn net_params(bounds: &GeometricBounds, eps: f64, big_d: usize, config: &NetConfig) -> Result<NetParams> {
    bounds.validate()?;
    if big_d < 2 {
        return Err(MfError::invalid("working dimension D must be at least 2"));
    }
    let (tau, r, d) = (bounds.tau, bounds.r_exposed, bounds.d);
    if !r.is_finite() {
        return Err(MfError::precondition("M is not R-exposed for any finite R"));
    }
    let eps_max = config.c_eps * tau / d as f64;
    if !(eps > 0.0 && eps < eps_max) {
        return Err(MfError::precondition(format!(
            "need 0 < eps < c tau / d = {eps_max:.6}, got eps = {eps}"
        )));
    }
    let r1 = tau / (tau + r);
    let r0 = r1 / 2.0;
    let l = config.c_cone * r * (bounds.lambda + tau.powi(-2));
    let delta = (eps / (2.0 * r * l * l)).cbrt().min((r0 * r0 / (r * l) + 1.0) * r0);
    let eps_prime = r1 / (4.0 * l);
    let volumetric = volumetric_net_size(big_d, eps_prime)?;
    let (script_n, script_n_estimated) = if big_d > 2 && volumetric > SCRIPT_N_LIMIT / 10 {
        (volumetric, true)
    } else {
        match sphere_net(&unit_e1(big_d), delta, eps_prime, big_d, Some(SCRIPT_N_LIMIT)) {
            Ok(net) if net.len() < SCRIPT_N_LIMIT => (net.len(), false),
            _ => (volumetric, true),
        }
    };
    let ln_n0_formula = (big_d + d) as f64 * (4.0 * r / tau).ln() + bounds.volume.ln()
        - omega_d(d as i64)?.ln()
        - d as f64 * eps.ln();
    let n0 = if ln_n0_formula < (config.n0_cap as f64).ln() {
        ln_n0_formula.exp().ceil() as usize
    } else {
        config.n0_cap
    };
    let accept_radius = config.c_acc * (eps * r / (r1 * delta)).sqrt();
    Ok(NetParams {
        eps,
        big_d,
        d,
        r1,
        r0,
        delta,
        eps_prime,
        lipschitz: l,
        script_n,
        script_n_estimated,
        n0: n0.max(1),
        ln_n0_formula,
        accept_radius,
        tau,
        r_exposed: r,
        config: config.clone(),
    })
}

fn unit_e1(n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[0] = 1.0;
    v
}

/// Sphere area over the area of a cap of angular radius eps'.
fn volumetric_net_size(big_d: usize, eps_prime: f64) -> Result<usize> {
    let k = (big_d - 1) as i64;
    let sphere = (k + 1) as f64 * omega_d(k + 1)?;
    let cap = omega_d(k)? * eps_prime.powi(k as i32);
    Ok((sphere / cap).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BallTest {
    Accepted { point: DVector<f64>, spread: f64 },
    /// v is declared within r0 of the boundary of its normal cone.
    DeclaredBoundary { spread: f64 },
    Failed,
}

/// Runs weak optimization along each sphere-net direction around v.
pub fn ball_tester(
    v: &DVector<f64>,
    params: &NetParams,
    chain: &OracleChain,
    budget: &OracleBudget,
) -> Result<BallTest> {
    check_dim(params.big_d, v.len())?;
    let net = sphere_net(v, params.delta, params.eps_prime, params.big_d, Some(params.tester_net_size()))?;
    let mut first: Option<DVector<f64>> = None;
    let mut spread: f64 = 0.0;
    for w in &net {
        let dir = w.normalize();
        match chain.weak_optimization(&dir, params.eps, budget)? {
            WeakAnswer::OptPoint(y) => match &first {
                None => first = Some(y),
                Some(y1) => spread = spread.max((y1 - &y).norm()),
            },
            _ => return Ok(BallTest::Failed),
        }
    }
    let y1 = first.ok_or_else(|| MfError::numerical("empty sphere net"))?;
    Ok(if spread < params.accept_radius {
        BallTest::Accepted { point: y1, spread }
    } else {
        BallTest::DeclaredBoundary { spread }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetStatus {
    Accepted,
    Boundary,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetEntry {
    pub v: Vec<f64>,
    pub point: Option<Vec<f64>>,
    pub status: NetStatus,
    pub spread: f64,
}

impl NetEntry {
    pub fn accepted(&self) -> bool {
        self.status == NetStatus::Accepted
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionNet {
    pub params: NetParams,
    pub entries: Vec<NetEntry>,
    pub acceptance_rate: f64,
    pub rate_bound: f64,
    /// Monte-Carlo standard deviation of the rate at the bound.
    pub rate_sigma: f64,
}

impl ReconstructionNet {
    pub fn accepted_count(&self) -> usize {
        self.entries.iter().filter(|e| e.accepted()).count()
    }

    pub fn failed_count(&self) -> usize {
        self.entries.iter().filter(|e| e.status == NetStatus::Failed).count()
    }

    /// The net X_1.
    pub fn points(&self) -> PointCloud {
        let mut out = PointCloud::with_capacity(self.params.big_d, self.accepted_count());
        for p in self.entries.iter().filter_map(|e| e.point.as_ref()) {
            out.push(p);
        }
        out
    }

    /// Column names of `table`.
    pub fn columns(&self) -> Vec<String> {
        let dd = self.params.big_d;
        let mut names: Vec<String> = (0..dd).map(|i| format!("x{i}")).collect();
        names.extend((0..dd).map(|i| format!("v{i}")));
        names.push("accepted".into());
        names.push("spread".into());
        names
    }

    /// One row per tested direction; coordinates are NaN when nothing was
    /// accepted.
    pub fn table(&self) -> PointCloud {
        let dd = self.params.big_d;
        let mut out = PointCloud::with_capacity(2 * dd + 2, self.entries.len());
        let mut row = Vec::with_capacity(2 * dd + 2);
        for e in &self.entries {
            row.clear();
            match &e.point {
                Some(p) => row.extend_from_slice(p),
                None => row.extend(std::iter::repeat(f64::NAN).take(dd)),
            }
            row.extend_from_slice(&e.v);
            row.push(if e.accepted() { 1.0 } else { 0.0 });
            row.push(e.spread);
            out.push(&row);
        }
        out
    }
}

pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// N0 ball tests on uniformly random directions.
pub fn find_points(
    params: &NetParams,
    chain: &OracleChain,
    budget: &OracleBudget,
    seed: u64,
) -> Result<ReconstructionNet> {
    find_points_threaded(params, chain, budget, seed, 1)
}

fn test_direction(
    j: usize,
    params: &NetParams,
    chain: &OracleChain,
    budget: &OracleBudget,
    seed: u64,
) -> Result<NetEntry> {
    let mut rng = stage_rng(seed, &format!("direction-{j}"));
    let v = random_unit(params.big_d, &mut rng);
    let (point, status, spread) = match ball_tester(&v, params, chain, budget)? {
        BallTest::Accepted { point, spread } => (Some(point.iter().copied().collect()), NetStatus::Accepted, spread),
        BallTest::DeclaredBoundary { spread } => (None, NetStatus::Boundary, spread),
        BallTest::Failed => (None, NetStatus::Failed, f64::NAN),
    };
    Ok(NetEntry { v: v.iter().copied().collect(), point, status, spread })
}

/// Find-points with the outer loop split over `threads` workers. Sources
/// that consume fresh batches run on one thread so batch assignment stays
/// deterministic.
pub fn find_points_threaded(
    params: &NetParams,
    chain: &OracleChain,
    budget: &OracleBudget,
    seed: u64,
    threads: usize,
) -> Result<ReconstructionNet> {
    check_dim(params.big_d, chain.dim())?;
    let threads = if chain.source().deterministic() { threads.clamp(1, params.n0) } else { 1 };
    let entries: Vec<NetEntry> = if threads == 1 {
        (0..params.n0).map(|j| test_direction(j, params, chain, budget, seed)).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<NetEntry>>> = (0..params.n0).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    scope.spawn(move || {
                        (t..params.n0)
                            .step_by(threads)
                            .map(|j| (j, test_direction(j, params, chain, budget, seed)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (j, r) in h.join().expect("find-points worker panicked") {
                    slots[j] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every direction is tested")).collect::<Result<_>>()?
    };
    if entries.iter().all(|e| e.status == NetStatus::Failed) {
        return Err(MfError::numerical(format!("all {} ball tests failed", entries.len())));
    }
    let n = entries.len() as f64;
    let acceptance_rate = entries.iter().filter(|e| e.accepted()).count() as f64 / n;
    let rate_bound = params.acceptance_bound();
    Ok(ReconstructionNet {
        params: params.clone(),
        entries,
        acceptance_rate,
        rate_bound,
        rate_sigma: (rate_bound * (1.0 - rate_bound) / n).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberReport {
    pub pairs: usize,
    /// max |p - p'| / |v - v'| over the sampled pairs.
    pub max_ratio: f64,
    /// R L / r0^2, the displacement factor allowed per unit of |v - v'|.
    pub ratio_bound: f64,
    pub displacement_ok: bool,
    pub ball_checks: usize,
    pub hull_samples: usize,
    /// Largest |y - c| - R/delta over hull samples y (<= 0 when contained).
    pub max_ball_excess: f64,
    pub ball_ok: bool,
}

/// Base-point displacement under small changes of the normal direction and
/// containment of K in the circumscribing balls B_{R/delta}(p - R v/delta).
pub fn fiber_stability_check(
    m: &AnalyticManifold,
    pairs: usize,
    hull_samples: usize,
    params: &NetParams,
    seed: u64,
) -> Result<FiberReport> {
    let n = m.ambient_dim();
    check_dim(params.big_d, n)?;
    let r = m.bounds().r_exposed;
    if !r.is_finite() {
        return Err(MfError::precondition("fiber checks need a finite exposedness radius"));
    }
    let mut rng = stage_rng(seed, "fiber-pairs");
    let mut max_ratio: f64 = 0.0;
    for _ in 0..pairs {
        let v = random_unit(n, &mut rng);
        let step = params.delta * rng.random::<f64>();
        let w = random_unit(n, &mut rng);
        let v2 = (&v + w * step).normalize();
        let dv = (&v - &v2).norm();
        if dv < 1e-14 {
            continue;
        }
        let p = m.support(&v)?.point;
        let p2 = m.support(&v2)?.point;
        max_ratio = max_ratio.max((p - p2).norm() / dv);
    }
    let ratio_bound = r * params.lipschitz / (params.r0 * params.r0);
    let hull = hull_points(m, hull_samples, seed)?;
    let checks = pairs.clamp(1, 64);
    let radius = r / params.delta;
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..checks {
        let v = random_unit(n, &mut rng);
        let p = m.support(&v)?.point;
        let c = &p - &v * radius;
        for y in &hull {
            max_excess = max_excess.max((y - &c).norm() - radius);
        }
    }
    let tol = 1e-9 * radius;
    Ok(FiberReport {
        pairs,
        max_ratio,
        ratio_bound,
        displacement_ok: max_ratio <= ratio_bound,
        ball_checks: checks,
        hull_samples: hull.len(),
        max_ball_excess: max_excess,
        ball_ok: max_excess <= tol,
    })
}

/// Random convex combinations of manifold samples.
pub fn hull_points(m: &AnalyticManifold, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let base = crate::manifold::uniform_sample(m, count.max(2), seed);
    let mut rng = stage_rng(seed, "hull-weights");
    Ok((0..count)
        .map(|_| {
            let k = rng.random_range(1..=4usize);
            let mut acc = DVector::zeros(m.ambient_dim());
            let mut total = 0.0;
            for _ in 0..k {
                let w: f64 = rng.random::<f64>() + 1e-3;
                acc += &base[rng.random_range(0..base.len())] * w;
                total += w;
            }
            acc / total
        })
        .collect())
}
