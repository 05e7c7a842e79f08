//! The output manifold M_rec = {x : Pi_x F(x) = 0} built from tangent discs
//! around a subnet of the reconstruction net.

mod disc;

pub use disc::{find_disc, fine_tune_disc, subnet, FineTuned};

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{check_dim, MfError, Result};
use crate::geometry::{federer_reach_estimate, Subspace};
use crate::linalg::{orthonormalize, sym_eigen_desc};
use crate::manifold::AnalyticManifold;
use crate::net::random_unit;
use crate::pca::AffineSubspace;
use crate::rng::stage_rng;

pub const FORMAT_NAME: &str = "mfit-manifold";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// Subnet scale is c_subnet tau / d.
    pub c_subnet: f64,
    /// Disc radius over subnet scale.
    pub radius_factor: f64,
    pub c_lo: f64,
    pub ipf_cap: usize,
    /// C in the |X1| (C d)^(2d) operation budget of the weight solve.
    pub c_w: f64,
    pub tube_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { c_subnet: 0.2, radius_factor: 3.0, c_lo: 0.1, ipf_cap: 1000, c_w: 8.0, tube_samples: 2000 }
    }
}

/// Tangent discs: centers, orthonormal frames, common radius and the
/// normal projections Pi^i = I - E E^T.
#[derive(Debug, Clone)]
pub struct DiscAtlas {
    pub centers: Vec<DVector<f64>>,
    pub frames: Vec<Vec<DVector<f64>>>,
    pub radius: f64,
    pub projections: Vec<DMatrix<f64>>,
}

impl DiscAtlas {
    pub fn new(centers: Vec<DVector<f64>>, frames: Vec<Vec<DVector<f64>>>, radius: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(MfError::invalid("atlas needs at least one disc"));
        }
        check_dim(centers.len(), frames.len())?;
        if !(radius > 0.0) {
            return Err(MfError::invalid("disc radius must be positive"));
        }
        let n = centers[0].len();
        let d = frames[0].len();
        let mut projections = Vec::with_capacity(frames.len());
        let mut clean = Vec::with_capacity(frames.len());
        for (c, f) in centers.iter().zip(&frames) {
            check_dim(n, c.len())?;
            let f = orthonormalize(f, 1e-10);
            if f.len() != d || d == 0 || d >= n {
                return Err(MfError::invalid("disc frames must be orthonormal d-frames with 0 < d < n"));
            }
            let mut p = DMatrix::identity(n, n);
            for e in &f {
                p.ger(-1.0, e, e, 1.0);
            }
            projections.push(p);
            clean.push(f);
        }
        Ok(DiscAtlas { centers, frames: clean, radius, projections })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.frames[0].len()
    }

    /// Largest ||Pi^i - Pi^j||_F over discs whose supports overlap.
    pub fn max_overlap_frobenius(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if (&self.centers[i] - &self.centers[j]).norm() < 2.0 * self.radius {
                    worst = worst.max((&self.projections[i] - &self.projections[j]).norm());
                }
            }
        }
        worst
    }
}

/// Per-disc diagnostics of the atlas construction.
#[derive(Debug, Clone, Serialize)]
pub struct DiscReport {
    pub neighbours: usize,
    pub fine_tuned: bool,
    pub residual_before: f64,
    pub residual_after: f64,
}

/// Subnet at scale `scale`, FindDisc on neighbours at distance about the
/// disc radius, then least-squares fine-tuning on the points inside the disc.
pub fn build_atlas(net: &PointCloud, d: usize, scale: f64, radius: f64) -> Result<(DiscAtlas, Vec<DiscReport>)> {
    let centers_cloud = subnet(net, scale)?;
    let pts = net.to_vectors();
    let mut centers = Vec::new();
    let mut frames = Vec::new();
    let mut reports = Vec::new();
    for c in centers_cloud.to_vectors() {
        let near: Vec<DVector<f64>> = pts
            .iter()
            .filter(|y| {
                let r = (*y - &c).norm();
                r > 1e-12 && r <= 1.5 * radius
            })
            .cloned()
            .collect();
        let offsets: Vec<DVector<f64>> = near.iter().map(|y| (y - &c) / radius).collect();
        let picks = find_disc(&offsets, d)
            .map_err(|e| MfError::invalid(format!("disc at {:?}: {e}", c.as_slice())))?;
        let putative: Vec<DVector<f64>> = picks.iter().map(|&i| offsets[i].clone()).collect();
        let inside: Vec<DVector<f64>> = near.iter().filter(|y| (*y - &c).norm() <= radius).cloned().collect();
        let (frame, report) = if inside.len() >= 10 * d {
            let ft = fine_tune_disc(&c, &inside, &putative)?;
            let rep = DiscReport {
                neighbours: inside.len(),
                fine_tuned: !ft.degenerate,
                residual_before: ft.residual_before,
                residual_after: ft.residual_after,
            };
            (ft.frame, rep)
        } else {
            let rep = DiscReport { neighbours: inside.len(), fine_tuned: false, residual_before: f64::NAN, residual_after: f64::NAN };
            (orthonormalize(&putative, 1e-12), rep)
        };
        centers.push(c);
        frames.push(frame);
        reports.push(report);
    }
    Ok((DiscAtlas::new(centers, frames, radius)?, reports))
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightReport {
    pub iterations: usize,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub operations: u64,
    /// |X1| (C d)^(2d).
    pub operation_budget: f64,
    pub within_budget: bool,
}

/// The implicit output manifold.
#[derive(Debug, Clone)]
pub struct ImplicitManifold {
    pub atlas: DiscAtlas,
    pub weights: Vec<f64>,
    pub c_lo: f64,
    /// Maps working coordinates to the ambient space when the net was built
    /// in a PCA frame.
    pub frame: Option<AffineSubspace>,
}

/// F_rec(x) with the spectrum of A_x (decreasing).
#[derive(Debug, Clone)]
pub struct FrecValue {
    pub value: DVector<f64>,
    pub spectrum: Vec<f64>,
}

impl ImplicitManifold {
    pub fn new(atlas: DiscAtlas, weights: Vec<f64>, c_lo: f64) -> Result<Self> {
        check_dim(atlas.len(), weights.len())?;
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(MfError::invalid("bump weights must be positive"));
        }
        Ok(ImplicitManifold { atlas, weights, c_lo, frame: None })
    }

    pub fn with_frame(mut self, frame: AffineSubspace) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.atlas.ambient_dim()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.atlas.intrinsic_dim()
    }

    pub fn exponent(&self) -> i32 {
        self.intrinsic_dim() as i32 + 2
    }

    /// (1 - |v|^2)^(d+2) with x = p_i + r v, or 0 outside the ball.
    pub fn bump(&self, i: usize, x: &DVector<f64>) -> f64 {
        let r = self.atlas.radius;
        let s = (x - &self.atlas.centers[i]).norm_squared() / (r * r);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(self.exponent())
        }
    }

    pub fn alpha_tilde_i(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.weights[i] * self.bump(i, x)
    }

    pub fn alpha_tilde(&self, x: &DVector<f64>) -> f64 {
        (0..self.atlas.len()).map(|i| self.alpha_tilde_i(i, x)).sum()
    }

    /// Nonzero normalized weights alpha_i(x).
    pub fn alphas(&self, x: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
        check_dim(self.ambient_dim(), x.len())?;
        let raw: Vec<(usize, f64)> =
            (0..self.atlas.len()).map(|i| (i, self.alpha_tilde_i(i, x))).filter(|&(_, a)| a > 0.0).collect();
        let total: f64 = raw.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(MfError::invalid("point lies outside every disc support"));
        }
        Ok(raw.into_iter().map(|(i, a)| (i, a / total)).collect())
    }

    pub fn f(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(x.len());
        for (i, a) in self.alphas(x)? {
            out += (&self.atlas.projections[i] * (x - &self.atlas.centers[i])) * a;
        }
        Ok(out)
    }

    pub fn a_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut a = DMatrix::zeros(n, n);
        for (i, w) in self.alphas(x)? {
            a += &self.atlas.projections[i] * w;
        }
        Ok(a)
    }

    /// Pi_x together with the spectrum of A_x.
    pub fn pi_x(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let a = self.a_matrix(x)?;
        let (vals, vecs) = sym_eigen_desc(&a);
        let k = self.ambient_dim() - self.intrinsic_dim();
        let split_ok = vals[..k].iter().all(|&l| l > 0.5 && l < 1.5) && vals[k..].iter().all(|&l| l > -0.5 && l < 0.5);
        if !split_ok {
            return Err(MfError::SpectralGap(format!(
                "A_x needs {k} eigenvalues in (1/2, 3/2) and the rest in (-1/2, 1/2); spectrum {vals:?}"
            )));
        }
        let u = vecs.columns(0, k);
        Ok((&u * u.transpose(), vals))
    }

    pub fn evaluate_frec(&self, x: &DVector<f64>) -> Result<FrecValue> {
        let (pi, spectrum) = self.pi_x(x)?;
        Ok(FrecValue { value: pi * self.f(x)?, spectrum })
    }

    /// Damped fixed-point iteration x <- x - lambda F_rec(x).
    pub fn project(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = x0.clone();
        let mut fx = self.evaluate_frec(&x)?.value;
        let mut res = fx.norm();
        let mut lambda = 1.0;
        for _ in 0..200 {
            if res < 1e-9 {
                return Ok(x);
            }
            let trial = &x - &fx * lambda;
            match self.evaluate_frec(&trial) {
                Ok(ft) if ft.value.norm() < res => {
                    x = trial;
                    res = ft.value.norm();
                    fx = ft.value;
                    lambda = (lambda * 2.0).min(1.0);
                }
                _ => {
                    lambda *= 0.5;
                    if lambda < 1e-6 {
                        break;
                    }
                }
            }
        }
        if res < 1e-9 {
            return Ok(x);
        }
        Err(MfError::numerical(format!("projection onto M_rec stalled at residual {res:.3e}")))
    }

    /// Tangent space of M_rec at x: the near-null right singular vectors of
    /// the finite-difference Jacobian of F_rec.
    pub fn tangent_at(&self, x: &DVector<f64>) -> Result<Subspace> {
        let n = x.len();
        let h = 1e-6 * self.atlas.radius.max(1e-3);
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (self.evaluate_frec(&xp)?.value - self.evaluate_frec(&xm)?.value) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let (_, vecs) = sym_eigen_desc(&(jac.transpose() * &jac));
        let d = self.intrinsic_dim();
        let basis: Vec<DVector<f64>> = (n - d..n).map(|c| vecs.column(c).into_owned()).collect();
        Subspace::new(&basis)
    }

    pub fn to_document(&self) -> ManifoldDocument {
        ManifoldDocument {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            d: self.intrinsic_dim(),
            n: self.ambient_dim(),
            radius: self.atlas.radius,
            c_lo: self.c_lo,
            exponent: self.exponent(),
            centers: self.atlas.centers.iter().map(|c| c.iter().copied().collect()).collect(),
            frames: self
                .atlas
                .frames
                .iter()
                .map(|f| f.iter().flat_map(|e| e.iter().copied()).collect())
                .collect(),
            weights: self.weights.clone(),
            frame: self.frame.as_ref().map(|f| FrameDocument {
                origin: f.origin.iter().copied().collect(),
                basis: f.linear.basis().iter().flat_map(|e| e.iter().copied()).collect(),
                dim: f.dim(),
            }),
        }
    }

    pub fn from_document(doc: &ManifoldDocument) -> Result<Self> {
        if doc.format != FORMAT_NAME {
            return Err(MfError::Format(format!("unexpected format tag {:?}", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(MfError::Format(format!("unsupported manifold format version {}", doc.version)));
        }
        let (n, d) = (doc.n, doc.d);
        let centers: Vec<DVector<f64>> = doc
            .centers
            .iter()
            .map(|c| {
                check_dim(n, c.len())?;
                Ok(DVector::from_column_slice(c))
            })
            .collect::<Result<_>>()?;
        let frames: Vec<Vec<DVector<f64>>> = doc
            .frames
            .iter()
            .map(|f| {
                check_dim(n * d, f.len())?;
                Ok(f.chunks(n).map(DVector::from_column_slice).collect())
            })
            .collect::<Result<_>>()?;
        let atlas = DiscAtlas::new(centers, frames, doc.radius)?;
        let mut im = ImplicitManifold::new(atlas, doc.weights.clone(), doc.c_lo)?;
        if let Some(f) = &doc.frame {
            if f.dim != n || f.basis.len() % f.dim != 0 || f.basis.len() / f.dim != f.origin.len() {
                return Err(MfError::Format("inconsistent frame block".into()));
            }
            let basis: Vec<DVector<f64>> = f.basis.chunks(f.origin.len()).map(DVector::from_column_slice).collect();
            im.frame = Some(AffineSubspace {
                origin: DVector::from_column_slice(&f.origin),
                linear: Subspace::from_orthonormal(basis)?,
            });
        }
        Ok(im)
    }
}

/// Serialized form of an ImplicitManifold. Frames are row-major d x n
/// blocks, one per disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDocument {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub n: usize,
    pub radius: f64,
    pub c_lo: f64,
    pub exponent: i32,
    pub centers: Vec<Vec<f64>>,
    pub frames: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameDocument>,
}

/// PCA frame: working coordinates c map to origin + basis^T c. The basis is
/// row-major, dim rows of ambient length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDocument {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub basis: Vec<f64>,
}

/// Points within r/(4d) of the net: offsets along the normal space of the
/// nearest disc.
pub fn tube_samples(atlas: &DiscAtlas, net: &PointCloud, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if net.is_empty() {
        return Err(MfError::invalid("tube samples need a nonempty net"));
    }
    let n = atlas.ambient_dim();
    check_dim(n, net.dim())?;
    let reach = atlas.radius / (4.0 * atlas.intrinsic_dim() as f64);
    let mut rng = stage_rng(seed, "tube");
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = net.vector(rng.random_range(0..net.len()));
        let i = (0..atlas.len())
            .min_by(|&a, &b| {
                (&x - &atlas.centers[a]).norm().total_cmp(&(&x - &atlas.centers[b]).norm())
            })
            .expect("atlas is nonempty");
        let dir = &atlas.projections[i] * random_unit(n, &mut rng);
        let len = dir.norm();
        let t: f64 = rng.random::<f64>() * reach;
        out.push(if len > 1e-12 { x + dir * (t / len) } else { x });
    }
    Ok(out)
}

/// Iterative proportional fitting of the bump weights until
/// c_lo < alpha_tilde(z) < 1/c_lo on every tube sample.
pub fn bump_weights_solve(
    atlas: &DiscAtlas,
    tube: &[DVector<f64>],
    c_lo: f64,
    cap: usize,
    c_w: f64,
    net_size: usize,
) -> Result<(Vec<f64>, WeightReport)> {
    if tube.is_empty() {
        return Err(MfError::invalid("weight solve needs tube samples"));
    }
    if !(c_lo > 0.0 && c_lo < 1.0) {
        return Err(MfError::invalid("c_lo must lie in (0, 1)"));
    }
    let probe = ImplicitManifold::new(atlas.clone(), vec![1.0; atlas.len()], c_lo)?;
    // Bump values per sample, sparse.
    let table: Vec<Vec<(usize, f64)>> = tube
        .iter()
        .map(|z| (0..atlas.len()).map(|i| (i, probe.bump(i, z))).filter(|p| p.1 > 0.0).collect())
        .collect();
    if let Some(k) = table.iter().position(|t| t.is_empty()) {
        return Err(MfError::invalid(format!(
            "tube sample {k} at {:?} lies outside every disc support",
            tube[k].as_slice()
        )));
    }
    let mut c = vec![1.0; atlas.len()];
    let mut ops: u64 = (tube.len() * atlas.len()) as u64;
    let (lo, hi) = (c_lo, 1.0 / c_lo);
    let eval = |c: &[f64]| -> Vec<f64> { table.iter().map(|t| t.iter().map(|&(i, b)| c[i] * b).sum()).collect() };
    let mut iterations = 0;
    let mut values = eval(&c);
    loop {
        let bad = values.iter().any(|&a| !(a > lo && a < hi));
        if !bad || iterations >= cap {
            break;
        }
        iterations += 1;
        let mut log_sum = vec![0.0; c.len()];
        let mut count = vec![0usize; c.len()];
        for (t, &a) in table.iter().zip(&values) {
            if a > lo && a < hi {
                continue;
            }
            let dom = t.iter().max_by(|x, y| (c[x.0] * x.1).total_cmp(&(c[y.0] * y.1))).expect("nonempty").0;
            log_sum[dom] += -a.ln();
            count[dom] += 1;
        }
        for i in 0..c.len() {
            if count[i] > 0 {
                c[i] *= (log_sum[i] / count[i] as f64).exp();
            }
        }
        values = eval(&c);
        ops += table.iter().map(|t| t.len() as u64).sum::<u64>();
    }
    let min_alpha = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_alpha = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min_alpha > lo && max_alpha < hi) {
        let mut worst: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .map(|(k, &a)| (k, (a / lo).ln().min((hi / a).ln())))
            .filter(|p| p.1 <= 0.0)
            .collect();
        worst.sort_by(|a, b| a.1.total_cmp(&b.1));
        let listed: Vec<String> = worst.iter().take(5).map(|&(k, _)| format!("#{k} alpha={:.3e}", values[k])).collect();
        return Err(MfError::numerical(format!(
            "bump weights left {} samples outside ({lo}, {hi}) after {iterations} iterations: {}",
            worst.len(),
            listed.join(", ")
        )));
    }
    let d = atlas.intrinsic_dim() as f64;
    let budget = net_size as f64 * (c_w * d).powf(2.0 * d);
    Ok((
        c,
        WeightReport { iterations, min_alpha, max_alpha, operations: ops, operation_budget: budget, within_budget: (ops as f64) <= budget },
    ))
}

/// Pi_hi(A) by the trapezoid rule for (1/2 pi i) times the contour integral of
/// (zI - A)^-1 over the circle of radius 1/2 centered at 1.
pub fn pi_hi_contour(a: &DMatrix<f64>, nodes: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let ac = a.map(|x| Complex::new(x, 0.0));
    let mut acc = DMatrix::<Complex<f64>>::zeros(n, n);
    for k in 0..nodes {
        let th = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
        let e = Complex::new(th.cos(), th.sin());
        let z = Complex::new(1.0, 0.0) + e * 0.5;
        let mut m = -ac.clone();
        for i in 0..n {
            m[(i, i)] += z;
        }
        let inv = m.try_inverse().ok_or_else(|| MfError::numerical("resolvent is singular on the contour"))?;
        // dz / (2 pi i) = (e / 2) dtheta / (2 pi).
        acc += inv * (e * 0.5);
    }
    Ok(acc.map(|c| c.re / nodes as f64))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionMetrics {
    pub discs: usize,
    pub seeds: usize,
    pub projected: usize,
    pub projection_failures: usize,
    /// sup over M_rec samples of the distance to M.
    pub rec_to_truth: f64,
    /// sup over truth samples of the distance to M_rec (upper bound).
    pub truth_to_rec: f64,
    pub hausdorff: f64,
    pub reach_estimate: f64,
    pub tau: f64,
    /// reach_estimate / (tau / d^6).
    pub reach_ratio: f64,
    pub mean_offset: f64,
}

/// Dense-samples M_rec by projecting samples of M and compares the two sets.
pub fn evaluate_reconstruction(
    im: &ImplicitManifold,
    m: &AnalyticManifold,
    samples: usize,
    seed: u64,
) -> Result<ReconstructionMetrics> {
    let truth = crate::manifold::uniform_sample(m, samples.max(2), seed);
    let to_work = |x: &DVector<f64>| match &im.frame {
        Some(f) => f.coords(x),
        None => x.clone(),
    };
    let to_ambient = |y: &DVector<f64>| match &im.frame {
        Some(f) => f.lift(y),
        None => y.clone(),
    };
    let mut rec = Vec::with_capacity(truth.len());
    let mut failures = 0;
    let mut truth_to_rec: f64 = 0.0;
    let mut offsets = 0.0;
    for x in &truth {
        let w = to_work(x);
        match im.project(&w) {
            Ok(y) => {
                let amb = to_ambient(&y);
                let off = (&amb - x).norm();
                truth_to_rec = truth_to_rec.max(off);
                offsets += off;
                rec.push(y);
            }
            Err(_) => failures += 1,
        }
    }
    if rec.len() < 2 {
        return Err(MfError::numerical(format!("only {} of {} seeds projected onto M_rec", rec.len(), truth.len())));
    }
    let mut rec_to_truth: f64 = 0.0;
    for y in &rec {
        rec_to_truth = rec_to_truth.max(m.distance_to(&to_ambient(y))?);
    }
    let tangents: Vec<Subspace> = rec.iter().map(|y| im.tangent_at(y)).collect::<Result<_>>()?;
    let reach = federer_reach_estimate(&rec, &tangents)?;
    let tau = m.bounds().tau;
    let d = im.intrinsic_dim() as f64;
    Ok(ReconstructionMetrics {
        discs: im.atlas.len(),
        seeds: truth.len(),
        projected: rec.len(),
        projection_failures: failures,
        rec_to_truth,
        truth_to_rec: if failures > 0 { f64::INFINITY } else { truth_to_rec },
        hausdorff: if failures > 0 { f64::INFINITY } else { rec_to_truth.max(truth_to_rec) },
        reach_estimate: reach,
        tau,
        reach_ratio: reach / (tau / d.powi(6)),
        mean_offset: offsets / rec.len() as f64,
    })
}

/// Builds the full output manifold from a net in working coordinates.
pub fn reconstruct(
    net: &PointCloud,
    d: usize,
    tau: f64,
    config: &OutputConfig,
    seed: u64,
) -> Result<(ImplicitManifold, Vec<DiscReport>, WeightReport)> {
    let scale = config.c_subnet * tau / d as f64;
    let radius = config.radius_factor * scale;
    let (atlas, reports) = build_atlas(net, d, scale, radius)?;
    let tube = tube_samples(&atlas, net, config.tube_samples, seed)?;
    let (weights, wr) = bump_weights_solve(&atlas, &tube, config.c_lo, config.ipf_cap, config.c_w, net.len())?;
    Ok((ImplicitManifold::new(atlas, weights, config.c_lo)?, reports, wr))
}
