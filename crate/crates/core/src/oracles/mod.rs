//! Weak validity, separation and optimization oracles for K = conv(M),
//! built on support-function estimates.

mod source;

pub use source::{BatchSource, ExactSource, SampledSource, SupportSource};

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, MfError, Result};

/// Sample batches available to one composite run.
#[derive(Debug)]
pub struct OracleBudget {
    pub per_call: usize,
    pub batches: usize,
    /// Failure probability allotted to each call.
    pub eta_split: f64,
    used: AtomicUsize,
}

impl OracleBudget {
    pub fn new(per_call: usize, batches: usize, eta: f64) -> Self {
        OracleBudget {
            per_call,
            batches,
            eta_split: eta / batches.max(1) as f64,
            used: AtomicUsize::new(0),
        }
    }

    /// No batch limit; used with deterministic sources that only count calls.
    pub fn unlimited() -> Self {
        OracleBudget { per_call: 0, batches: usize::MAX, eta_split: 0.0, used: AtomicUsize::new(0) }
    }

    /// Index of the next unused batch.
    pub fn consume(&self) -> Result<usize> {
        let k = self.used.fetch_add(1, Ordering::Relaxed);
        if k >= self.batches {
            self.used.fetch_sub(1, Ordering::Relaxed);
            return Err(MfError::BudgetExhausted(self.batches));
        }
        Ok(k)
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeakAnswer {
    Valid,
    /// The estimated support value exceeds the queried level.
    AlmostViolated { support_estimate: f64 },
    InBody,
    /// <b, x> <= offset + delta on S(K, -delta), with ||b||_inf = 1.
    SeparatingHyperplane { b: DVector<f64>, offset: f64 },
    OptPoint(DVector<f64>),
    Failed,
}

/// ceil(10 D^2 ln(4/eps)), the ellipsoid iteration cap.
pub fn iteration_cap(big_d: usize, eps: f64) -> usize {
    (10.0 * (big_d * big_d) as f64 * (4.0 / eps).ln()).ceil() as usize
}

/// The oracle chain over one support source.
pub struct OracleChain<'a> {
    source: &'a dyn SupportSource,
    grid: Vec<DVector<f64>>,
    /// Every unit vector is within this distance of a grid direction.
    grid_radius: f64,
    /// Grid estimates, kept only for deterministic sources.
    grid_values: OnceLock<Vec<Option<f64>>>,
    queries: AtomicUsize,
}

impl<'a> OracleChain<'a> {
    /// Grid sized for separation at accuracy about eps / 2.
    pub fn new(source: &'a dyn SupportSource) -> Self {
        let d = source.dim();
        let (grid, grid_radius) = direction_grid(d, source.params().eps);
        OracleChain { source, grid, grid_radius, grid_values: OnceLock::new(), queries: AtomicUsize::new(0) }
    }

    /// Support queries issued so far, including cached ones.
    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    fn query(&self, u: &DVector<f64>, budget: &OracleBudget) -> Result<Option<f64>> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let est = self.source.estimate(u, budget)?;
        Ok(if est.failed { None } else { Some(est.s_est) })
    }

    fn grid_support(&self, budget: &OracleBudget) -> Result<Option<&[Option<f64>]>> {
        if !self.source.deterministic() {
            return Ok(None);
        }
        if let Some(v) = self.grid_values.get() {
            self.queries.fetch_add(v.len(), Ordering::Relaxed);
            return Ok(Some(v));
        }
        let mut vals = Vec::with_capacity(self.grid.len());
        for u in &self.grid {
            vals.push(self.query(u, budget)?);
        }
        let _ = self.grid_values.set(vals);
        Ok(self.grid_values.get().map(|v| v.as_slice()))
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn source(&self) -> &dyn SupportSource {
        self.source
    }

    pub fn weak_validity(&self, b: &DVector<f64>, t: f64, eps: f64, budget: &OracleBudget) -> Result<WeakAnswer> {
        check_dim(self.dim(), b.len())?;
        Ok(match self.query(b, budget)? {
            None => WeakAnswer::Failed,
            Some(s) if s <= t + eps / 2.0 => WeakAnswer::Valid,
            Some(s) => WeakAnswer::AlmostViolated { support_estimate: s },
        })
    }

    fn gap(&self, u: &DVector<f64>, y: &DVector<f64>, budget: &OracleBudget) -> Result<Option<f64>> {
        Ok(self.query(u, budget)?.map(|s| u.dot(y) - s))
    }

    pub fn weak_separation(&self, y: &DVector<f64>, delta: f64, budget: &OracleBudget) -> Result<WeakAnswer> {
        check_dim(self.dim(), y.len())?;
        if y.norm() > 1.0 + delta + 1e-12 {
            // Outside the circumscribing ball: the radial direction separates.
            return Ok(hyperplane(y.clone(), y));
        }
        let thresh = delta / 2.0;
        let mut scored = Vec::with_capacity(self.grid.len());
        let cached = self.grid_support(budget)?;
        for (k, u) in self.grid.iter().enumerate() {
            let g = match cached {
                Some(vals) => vals[k].map(|s| u.dot(y) - s),
                None => self.gap(u, y, budget)?,
            };
            match g {
                None => return Ok(WeakAnswer::Failed),
                Some(g) => {
                    if g > thresh {
                        return Ok(hyperplane(u.clone(), y));
                    }
                    scored.push(g);
                }
            }
        }
        let slack = (y.norm() + 1.0) * self.grid_radius;
        let best = scored.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // The threshold delta/2 leaves delta/4 for grid slack.
        if best + slack <= thresh || slack <= delta / 4.0 {
            return Ok(WeakAnswer::InBody);
        }
        // Close call: refine around the strongest grid directions.
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| scored[b].total_cmp(&scored[a]));
        for &k in order.iter().take(3) {
            if scored[k] + slack <= thresh {
                break;
            }
            if let Some(u) = self.refine(&self.grid[k], y, thresh, budget)? {
                return Ok(hyperplane(u, y));
            }
        }
        Ok(WeakAnswer::InBody)
    }

    /// Local search for a direction with gap above `thresh`.
    fn refine(
        &self,
        u0: &DVector<f64>,
        y: &DVector<f64>,
        thresh: f64,
        budget: &OracleBudget,
    ) -> Result<Option<DVector<f64>>> {
        let d = self.dim();
        let basis = crate::linalg::complement_basis(&[u0.clone()], d);
        let span = 2.0 * self.grid_radius;
        for e in &basis {
            // Golden-section search along a great circle through u0.
            let dir = |a: f64| (u0 * a.cos() + e * a.sin()).normalize();
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (-span, span);
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let mut f1 = self.gap(&dir(x1), y, budget)?.unwrap_or(f64::NEG_INFINITY);
            let mut f2 = self.gap(&dir(x2), y, budget)?.unwrap_or(f64::NEG_INFINITY);
            for _ in 0..12 {
                if f1.max(f2) > thresh {
                    break;
                }
                if f1 > f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = self.gap(&dir(x1), y, budget)?.unwrap_or(f64::NEG_INFINITY);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = self.gap(&dir(x2), y, budget)?.unwrap_or(f64::NEG_INFINITY);
                }
            }
            if f1 > thresh {
                return Ok(Some(dir(x1)));
            }
            if f2 > thresh {
                return Ok(Some(dir(x2)));
            }
        }
        Ok(None)
    }

    /// Central-cut ellipsoid for a point of S(K, eps) nearly maximizing <b, .>.
    pub fn weak_optimization(&self, b: &DVector<f64>, eps: f64, budget: &OracleBudget) -> Result<WeakAnswer> {
        let d = self.dim();
        check_dim(d, b.len())?;
        if (b.norm() - 1.0).abs() > 1e-9 {
            return Err(MfError::invalid("objective direction must be a unit vector"));
        }
        if !(eps > 0.0) {
            return Err(MfError::invalid("eps must be positive"));
        }
        // Objective level from validity bisection.
        let (mut t_lo, mut t_hi) = (-(1.0 + eps), 1.0 + eps);
        match self.weak_validity(b, t_lo, eps, budget)? {
            WeakAnswer::Failed => return Ok(WeakAnswer::Failed),
            WeakAnswer::Valid => return Ok(WeakAnswer::Failed),
            _ => {}
        }
        while t_hi - t_lo > eps / 16.0 {
            let mid = 0.5 * (t_lo + t_hi);
            match self.weak_validity(b, mid, eps, budget)? {
                WeakAnswer::Failed => return Ok(WeakAnswer::Failed),
                WeakAnswer::Valid => t_hi = mid,
                _ => t_lo = mid,
            }
        }
        let level = t_lo;
        let sep_delta = eps / 2.0;
        let r0 = 1.0 + eps;
        let mut c = DVector::zeros(d);
        let mut a = DMatrix::identity(d, d) * (r0 * r0);
        let df = d as f64;
        let mut best: Option<(f64, DVector<f64>)> = None;
        for _ in 0..iteration_cap(d, eps) {
            let value = c.dot(b);
            let cut = if value < level {
                -b.clone()
            } else {
                match self.weak_separation(&c, sep_delta, budget)? {
                    WeakAnswer::InBody => {
                        // Feasible: keep it and push the objective further.
                        if best.as_ref().map_or(true, |(v, _)| value > *v) {
                            best = Some((value, c.clone()));
                        }
                        -b.clone()
                    }
                    WeakAnswer::SeparatingHyperplane { b: h, .. } => h,
                    _ => return Ok(WeakAnswer::Failed),
                }
            };
            // Keep {x : <cut, x> <= <cut, c>}.
            let ag = &a * &cut;
            let gag = cut.dot(&ag);
            if !(gag > 1e-300) {
                break;
            }
            let g = &ag / gag.sqrt();
            c -= &g / (df + 1.0);
            a = (a - (&g * g.transpose()) * (2.0 / (df + 1.0))) * (df * df / (df * df - 1.0));
            a = (&a + a.transpose()) * 0.5;
            if best.is_some() && b.dot(&(&a * b)).sqrt() < eps / 16.0 {
                break;
            }
        }
        Ok(match best {
            Some((_, y)) => WeakAnswer::OptPoint(y),
            None => WeakAnswer::Failed,
        })
    }

    /// Upper bound on oracle calls of one weak_optimization run.
    pub fn call_cap(&self, eps: f64) -> usize {
        let bisection = ((2.0 * (1.0 + eps)) / (eps / 16.0)).log2().ceil() as usize + 2;
        let per_separation = self.grid.len() + 3 * self.dim().saturating_sub(1) * 14;
        bisection + iteration_cap(self.dim(), eps) * per_separation
    }
}

fn hyperplane(u: DVector<f64>, y: &DVector<f64>) -> WeakAnswer {
    let inf = u.amax();
    let b = u / inf;
    let offset = b.dot(y);
    WeakAnswer::SeparatingHyperplane { b, offset }
}

/// Unit directions with a bound on the covering radius.
fn direction_grid(d: usize, eps: f64) -> (Vec<DVector<f64>>, f64) {
    match d {
        1 => (vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)], 0.0),
        2 => {
            // Covering radius about pi/k <= eps/24, so slack <= delta/4 for |y| <= 1 + eps.
            let k = ((24.0 * PI / eps).ceil() as usize).max(256);
            let grid = (0..k)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / k as f64;
                    DVector::from_column_slice(&[a.cos(), a.sin()])
                })
                .collect();
            (grid, 2.0 * (PI / k as f64 / 2.0).sin())
        }
        _ => {
            // Random directions; the covering radius is measured on probes.
            let count = 3000 * (d - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(0x6d66_6974 + d as u64);
            let mut draw = || {
                let v = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                v.normalize()
            };
            let grid: Vec<DVector<f64>> = (0..count).map(|_| draw()).collect();
            let mut radius: f64 = 0.0;
            for _ in 0..2000 {
                let p = draw();
                let best = grid.iter().map(|g| g.dot(&p)).fold(-1.0, f64::max);
                radius = radius.max((2.0 - 2.0 * best).max(0.0).sqrt());
            }
            (grid, radius * 1.25)
        }
    }
}
