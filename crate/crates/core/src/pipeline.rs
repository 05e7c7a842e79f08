//! generate / fit / evaluate as library calls. File handling lives in the
//! `*_to_dir` wrappers.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::config::{ExperimentConfig, Mode};
use crate::error::{check_dim, MfError, Result};
use crate::geometry::GeometricBounds;
use crate::io::{read_cloud, write_cloud, PointCloudFile};
use crate::manifold::{beta_and_D, uniform_sample, AnalyticManifold};
use crate::net::{find_points_threaded, net_params, NetParams, ReconstructionNet};
use crate::noise::generate_observations;
use crate::oracles::{BatchSource, ExactSource, OracleBudget, OracleChain, SampledSource, SupportSource};
use crate::output::{
    evaluate_reconstruction, pi_hi_contour, reconstruct, DiscReport, ImplicitManifold, ManifoldDocument,
    ReconstructionMetrics, WeightReport,
};
use crate::pca::{nd_sample_size, pca_fit, AffineSubspace};
use crate::rng::stage_seed;
use crate::support::{make_params, theoretical_sample_bound, ExactSupport, SupportOracleParams};

pub const CLEAN_FILE: &str = "clean.mfpc";
pub const NOISY_FILE: &str = "noisy.mfpc";
pub const DATASET_FILE: &str = "dataset.json";
pub const NET_FILE: &str = "net.mfpc";
pub const MANIFOLD_FILE: &str = "manifold.json";
pub const LOG_FILE: &str = "fit_log.json";

#[derive(Debug, Clone, Serialize)]
pub struct DatasetMeta {
    pub format: &'static str,
    pub version: u32,
    pub master_seed: u64,
    pub generation_seed: u64,
    pub sigma: f64,
    pub count: usize,
    pub ambient_dim: usize,
}

pub struct Dataset {
    pub clean: PointCloud,
    pub noisy: PointCloud,
    pub meta: DatasetMeta,
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let m = cfg.build_manifold().map_err(|e| e.at_stage("manifold"))?;
    let seed = stage_seed(cfg.seed, "generate");
    let data = generate_observations(&m, cfg.samples, cfg.sigma, seed).map_err(|e| e.at_stage("generate"))?;
    Ok(Dataset {
        meta: DatasetMeta {
            format: "mfit-dataset",
            version: 1,
            master_seed: cfg.seed,
            generation_seed: seed,
            sigma: cfg.sigma,
            count: data.len(),
            ambient_dim: m.ambient_dim(),
        },
        clean: data.clean,
        noisy: data.observations,
    })
}

pub fn generate_to_dir(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let data = generate(cfg)?;
    fs::create_dir_all(out)?;
    let paths = vec![out.join(CLEAN_FILE), out.join(NOISY_FILE), out.join(DATASET_FILE)];
    write_cloud(&paths[0], &PointCloudFile::from_cloud(data.clean))?;
    write_cloud(&paths[1], &PointCloudFile::from_cloud(data.noisy))?;
    fs::write(&paths[2], to_json(&data.meta)?)?;
    Ok(paths)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| MfError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportSummary {
    pub mode: Mode,
    pub params: SupportOracleParams,
    /// log10 of the sample size the Find-Distance contract asks for.
    pub log10_theoretical_samples: f64,
    pub calibrated_per_call: usize,
    pub resolvable: bool,
    pub exact_nodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitLog {
    pub format: &'static str,
    pub version: u32,
    pub config: ExperimentConfig,
    pub bounds: GeometricBounds,
    pub working_dim: usize,
    pub pca_full_space: bool,
    pub pca_eigenvalues: Vec<f64>,
    /// N_D from the PCA sample-size formula (saturating).
    pub pca_theoretical_samples: u64,
    pub observations: usize,
    pub support: SupportSummary,
    pub net: NetParams,
    pub tested_directions: usize,
    pub accepted: usize,
    pub failed: usize,
    pub acceptance_rate: f64,
    pub acceptance_bound: f64,
    pub oracle_queries: usize,
    pub discs: Vec<DiscReport>,
    pub weights: WeightReport,
    pub max_overlap_frobenius: f64,
}

#[derive(Debug)]
pub struct FitResult {
    pub net: ReconstructionNet,
    pub manifold: ImplicitManifold,
    pub log: FitLog,
}

/// PCA, support oracle, Find-points, atlas and weights.
pub fn fit(cfg: &ExperimentConfig, observations: &PointCloud, threads: usize) -> Result<FitResult> {
    cfg.validate()?;
    let m = cfg.build_manifold().map_err(|e| e.at_stage("manifold"))?;
    check_dim(m.ambient_dim(), observations.dim()).map_err(|e| e.at_stage("data"))?;
    if observations.is_empty() {
        return Err(MfError::invalid("no observations").at_stage("data"));
    }
    let bounds = cfg.resolved_bounds(&m).map_err(|e| e.at_stage("bounds"))?;
    let n = bounds.n;

    let big_d = match cfg.pca.dim {
        Some(dd) => dd,
        None => beta_and_D(cfg.pca.alpha, &bounds).map_err(|e| e.at_stage("pca"))?.big_d,
    }
    .min(n)
    .max(bounds.d + 1);
    let pca = pca_fit(observations, big_d).map_err(|e| e.at_stage("pca"))?;
    let frame = pca.subspace.clone();
    let pca_theoretical_samples =
        nd_sample_size(&bounds, big_d, cfg.sigma, cfg.eps, cfg.eta, 1.0).map_err(|e| e.at_stage("pca"))?;
    let work_bounds = GeometricBounds { n: big_d, ..bounds.clone() };

    let params = make_params(&work_bounds, cfg.sigma, cfg.eps, cfg.eta).map_err(|e| e.at_stage("support-oracle"))?;
    let log10_theoretical_samples = theoretical_sample_bound(&params).map_err(|e| e.at_stage("support-oracle"))?;
    let resolvable = params.sampled_resolvable(cfg.per_call);
    let frame_ref = if pca.full_space { None } else { Some(&frame) };
    let (source, budget, exact_nodes): (Box<dyn SupportSource>, OracleBudget, Option<usize>) = match cfg.mode {
        Mode::Exact => {
            let ex = ExactSupport::from_manifold(&m, frame_ref, cfg.sigma, params.r_delta)
                .map_err(|e| e.at_stage("support-oracle"))?;
            let nodes = ex.node_count();
            (Box::new(ExactSource::new(ex, params.clone())), OracleBudget::unlimited(), Some(nodes))
        }
        Mode::Sampled => {
            if !resolvable {
                return Err(MfError::numerical(format!(
                    "Find-Distance cannot resolve the threshold with N = {} per call: expected slab count \
                     N delta Gamma_delta = e^{:.1}",
                    cfg.per_call,
                    params.ln_gamma_delta + (cfg.per_call as f64).ln() + params.delta.ln()
                ))
                .at_stage("support-oracle"));
            }
            let pool = frame.project_cloud(observations);
            let src = SampledSource::new(params.clone(), BatchSource::Pool(pool), cfg.per_call)
                .map_err(|e| e.at_stage("support-oracle"))?;
            let batches = src.pool_batches().unwrap_or(0);
            (Box::new(src), OracleBudget::new(cfg.per_call, batches, cfg.eta), None)
        }
    };

    let np = net_params(&work_bounds, cfg.eps, big_d, &cfg.net).map_err(|e| e.at_stage("net-params"))?;
    let chain = OracleChain::new(source.as_ref());
    let net = find_points_threaded(&np, &chain, &budget, stage_seed(cfg.seed, "find-points"), threads)
        .map_err(|e| e.at_stage("find-points"))?;
    let points = net.points();
    if points.is_empty() {
        return Err(MfError::numerical("no ball test accepted a point").at_stage("find-points"));
    }
    let (mut manifold, discs, weights) =
        reconstruct(&points, bounds.d, bounds.tau, &cfg.output, stage_seed(cfg.seed, "atlas"))
            .map_err(|e| e.at_stage("atlas"))?;
    if !pca.full_space {
        manifold = manifold.with_frame(frame.clone());
    }
    let log = FitLog {
        format: "mfit-fit-log",
        version: 1,
        config: cfg.clone(),
        bounds,
        working_dim: big_d,
        pca_full_space: pca.full_space,
        pca_eigenvalues: pca.eigenvalues.clone(),
        pca_theoretical_samples,
        observations: observations.len(),
        support: SupportSummary {
            mode: cfg.mode,
            params,
            log10_theoretical_samples,
            calibrated_per_call: cfg.per_call,
            resolvable,
            exact_nodes,
        },
        net: np,
        tested_directions: net.entries.len(),
        accepted: net.accepted_count(),
        failed: net.failed_count(),
        acceptance_rate: net.acceptance_rate,
        acceptance_bound: net.rate_bound,
        oracle_queries: chain.queries(),
        max_overlap_frobenius: manifold.atlas.max_overlap_frobenius(),
        discs,
        weights,
    };
    Ok(FitResult { net, manifold, log })
}

pub fn net_file(net: &ReconstructionNet) -> Result<PointCloudFile> {
    PointCloudFile::with_columns(net.params.big_d, net.columns(), net.table())
}

pub fn manifold_json(im: &ImplicitManifold) -> Result<String> {
    to_json(&im.to_document())
}

pub fn fit_to_dir(cfg: &ExperimentConfig, data: &Path, out: &Path, threads: usize) -> Result<Vec<PathBuf>> {
    let noisy = read_cloud(&data.join(NOISY_FILE)).map_err(|e| e.at_stage("data"))?.coordinates();
    let res = fit(cfg, &noisy, threads)?;
    fs::create_dir_all(out)?;
    let paths = vec![out.join(NET_FILE), out.join(MANIFOLD_FILE), out.join(LOG_FILE)];
    write_cloud(&paths[0], &net_file(&res.net)?)?;
    fs::write(&paths[1], manifold_json(&res.manifold)?)?;
    fs::write(&paths[2], to_json(&res.log)?)?;
    Ok(paths)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value >= threshold, value, threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudMetrics {
    pub points: usize,
    /// sup over artifact points of the distance to M.
    pub artifact_to_truth: f64,
    /// sup over truth samples of the distance to the nearest artifact point.
    pub truth_to_artifact: f64,
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactMetrics {
    Manifold(ReconstructionMetrics),
    PointCloud(CloudMetrics),
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub format: &'static str,
    pub version: u32,
    pub artifact: String,
    pub metrics: ArtifactMetrics,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const EVAL_SAMPLES: usize = 500;

/// Property checks of an implicit manifold at the given points.
pub fn manifold_checks(im: &ImplicitManifold, points: &[DVector<f64>]) -> Result<Vec<Check>> {
    let mut pou: f64 = 0.0;
    let mut idem: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut contour: f64 = 0.0;
    for (k, x) in points.iter().enumerate() {
        let total: f64 = im.alphas(x)?.iter().map(|p| p.1).sum();
        pou = pou.max((total - 1.0).abs());
        let (pi, _) = im.pi_x(x)?;
        idem = idem.max((&pi * &pi - &pi).abs().max());
        sym = sym.max((&pi - pi.transpose()).abs().max());
        if k < 5 {
            let a = im.a_matrix(x)?;
            contour = contour.max((pi_hi_contour(&a, 256)? - &pi).abs().max());
        }
    }
    Ok(vec![
        Check::at_most("partition_of_unity", pou, 1e-10),
        Check::at_most("pi_idempotent", idem, 1e-9),
        Check::at_most("pi_symmetric", sym, 1e-12),
        Check::at_most("spectral_vs_contour", contour, 1e-6),
    ])
}

pub fn evaluate(truth: &ExperimentConfig, artifact: &Path) -> Result<Report> {
    let m = truth.build_manifold().map_err(|e| e.at_stage("manifold"))?;
    let bytes = fs::read(artifact)?;
    let seed = stage_seed(truth.seed, "evaluate");
    let (metrics, checks) = if bytes.starts_with(crate::io::MAGIC) {
        let file = PointCloudFile::decode(&bytes)?;
        cloud_metrics(&m, &file, seed)?
    } else {
        let doc: ManifoldDocument = serde_json::from_slice(&bytes)
            .map_err(|e| MfError::Format(format!("artifact is neither MFPC1 nor a manifold document: {e}")))?;
        let im = ImplicitManifold::from_document(&doc)?;
        let n_art = im.frame.as_ref().map(|f| f.origin.len()).unwrap_or(im.ambient_dim());
        check_dim(m.ambient_dim(), n_art)?;
        let met = evaluate_reconstruction(&im, &m, EVAL_SAMPLES, seed).map_err(|e| e.at_stage("evaluate"))?;
        let resolution = net_resolution_for(&im, &m, seed)?;
        let on_rec: Vec<DVector<f64>> = uniform_sample(&m, 50, seed ^ 1)
            .iter()
            .map(|x| im.project(&to_work(&im.frame, x)))
            .collect::<Result<_>>()?;
        let mut checks = manifold_checks(&im, &on_rec)?;
        checks.push(Check::at_most("hausdorff_vs_5x_disc_spacing", met.hausdorff, 5.0 * resolution));
        checks.push(Check::at_least("reach_vs_0.2_tau", met.reach_estimate, 0.2 * met.tau));
        (ArtifactMetrics::Manifold(met), checks)
    };
    Ok(Report { format: "mfit-report", version: 1, artifact: artifact.display().to_string(), metrics, checks })
}

fn to_work(frame: &Option<AffineSubspace>, x: &DVector<f64>) -> DVector<f64> {
    match frame {
        Some(f) => f.coords(x),
        None => x.clone(),
    }
}

/// Covering radius of the disc centers over M: without the net at hand, the
/// subnet is the finest resolution recorded in the artifact.
fn net_resolution_for(im: &ImplicitManifold, m: &AnalyticManifold, seed: u64) -> Result<f64> {
    let truth = uniform_sample(m, 2000, seed ^ 2);
    Ok(truth
        .iter()
        .map(|x| {
            let w = to_work(&im.frame, x);
            im.atlas.centers.iter().map(|c| (c - &w).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

fn cloud_metrics(m: &AnalyticManifold, file: &PointCloudFile, seed: u64) -> Result<(ArtifactMetrics, Vec<Check>)> {
    let acc_col = file.columns.iter().position(|c| c == "accepted");
    let coords = file.coordinates();
    check_dim(m.ambient_dim(), coords.dim())?;
    let mut pts: Vec<DVector<f64>> = Vec::new();
    let mut accepted = 0usize;
    for (k, r) in file.rows.rows().enumerate() {
        let keep = acc_col.map_or(true, |c| r[c] == 1.0);
        if keep {
            accepted += 1;
            pts.push(coords.vector(k));
        }
    }
    if pts.is_empty() {
        return Err(MfError::invalid("artifact holds no points"));
    }
    let mut art_to_truth: f64 = 0.0;
    for p in &pts {
        art_to_truth = art_to_truth.max(m.distance_to(p)?);
    }
    let truth = uniform_sample(m, 2000, seed);
    let truth_to_art = truth
        .iter()
        .map(|x| pts.iter().map(|p| (p - x).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let rate = acc_col.map(|_| accepted as f64 / file.rows.len() as f64);
    let checks = vec![Check::at_most("points_near_truth", art_to_truth, truth_to_art.max(1e-12))];
    Ok((
        ArtifactMetrics::PointCloud(CloudMetrics {
            points: pts.len(),
            artifact_to_truth: art_to_truth,
            truth_to_artifact: truth_to_art,
            acceptance_rate: rate,
        }),
        checks,
    ))
}

pub fn evaluate_to_file(truth: &Path, artifact: &Path, report: &Path) -> Result<Report> {
    let cfg = ExperimentConfig::load(truth)?;
    let rep = evaluate(&cfg, artifact)?;
    if let Some(dir) = report.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(report, to_json(&rep)?)?;
    Ok(rep)
}
