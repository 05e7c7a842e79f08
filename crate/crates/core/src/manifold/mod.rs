//! Synthetic ground-truth manifolds with analytic derivatives.

mod local_graph;
mod params;
mod projection;

pub use local_graph::{local_graph, GraphBoundsReport, LocalGraph, WindowReport};
pub use params::{beta_and_D, dimension_for, omega_d, ReductionScale};
pub use projection::{sphere_projection_construct, ProjectionConfig};

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{check_dim, MfError, Result};
use crate::geometry::{GeometricBounds, SecondFundamentalForm, Subspace};
use crate::linalg::orthonormalize;

const TWO_PI: f64 = 2.0 * PI;

fn default_c0() -> f64 {
    0.1
}

fn default_c_proj() -> f64 {
    2.0
}

/// Shape of a ground-truth manifold before embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Sphere {
        radius: f64,
    },
    Torus {
        major: f64,
        minor: f64,
    },
    /// `base` flattened onto a hyperplane through an eps*tau net and pushed
    /// onto a sphere of radius 1/(eps*tau).
    SphereProjectedGraph {
        base: Box<Shape>,
        eps: f64,
        #[serde(default = "default_c0")]
        c0: f64,
        #[serde(default = "default_c_proj")]
        c_proj: f64,
    },
}

/// Serializable description: shape plus its placement in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub ambient_dim: usize,
    /// Translation applied after the frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Orthonormal columns carrying the model space into R^n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
}

impl ManifoldSpec {
    pub fn new(shape: Shape, ambient_dim: usize) -> Self {
        ManifoldSpec { shape, ambient_dim, center: None, frame: None }
    }

    pub fn with_center(mut self, c: Vec<f64>) -> Self {
        self.center = Some(c);
        self
    }

    pub fn with_frame(mut self, frame: Vec<Vec<f64>>) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn build(&self) -> Result<AnalyticManifold> {
        AnalyticManifold::new(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Model {
    Circle { r: f64 },
    Ellipse { a: f64, b: f64 },
    Sphere { r: f64 },
    Torus { big: f64, small: f64 },
}

impl Model {
    fn from_shape(s: &Shape) -> Result<Model> {
        let pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(MfError::invalid(format!("{what} must be positive, got {x}")))
            }
        };
        match s {
            Shape::Circle { radius } => Ok(Model::Circle { r: pos(*radius, "radius")? }),
            Shape::Ellipse { a, b } => Ok(Model::Ellipse { a: pos(*a, "a")?, b: pos(*b, "b")? }),
            Shape::Sphere { radius } => Ok(Model::Sphere { r: pos(*radius, "radius")? }),
            Shape::Torus { major, minor } => {
                let (big, small) = (pos(*major, "major")?, pos(*minor, "minor")?);
                if small >= big {
                    return Err(MfError::invalid("torus needs minor < major"));
                }
                Ok(Model::Torus { big, small })
            }
            Shape::SphereProjectedGraph { base, .. } => Model::from_shape(base),
        }
    }

    fn model_dim(&self) -> usize {
        match self {
            Model::Circle { .. } | Model::Ellipse { .. } => 2,
            _ => 3,
        }
    }

    fn d(&self) -> usize {
        match self {
            Model::Circle { .. } | Model::Ellipse { .. } => 1,
            _ => 2,
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            Model::Circle { r } | Model::Sphere { r } => r,
            Model::Ellipse { a, b } => a.max(b),
            Model::Torus { big, small } => big + small,
        }
    }

    fn scaled(&self, s: f64) -> Model {
        match *self {
            Model::Circle { r } => Model::Circle { r: r * s },
            Model::Ellipse { a, b } => Model::Ellipse { a: a * s, b: b * s },
            Model::Sphere { r } => Model::Sphere { r: r * s },
            Model::Torus { big, small } => Model::Torus { big: big * s, small: small * s },
        }
    }

    fn ranges(&self) -> Vec<(f64, f64, bool)> {
        match self {
            Model::Circle { .. } | Model::Ellipse { .. } => vec![(0.0, TWO_PI, true)],
            Model::Sphere { .. } => vec![(0.0, PI, false), (0.0, TWO_PI, true)],
            Model::Torus { .. } => vec![(0.0, TWO_PI, true), (0.0, TWO_PI, true)],
        }
    }

    fn point(&self, t: &[f64]) -> [f64; 3] {
        match *self {
            Model::Circle { r } => [r * t[0].cos(), r * t[0].sin(), 0.0],
            Model::Ellipse { a, b } => [a * t[0].cos(), b * t[0].sin(), 0.0],
            Model::Sphere { r } => {
                let (st, ct) = t[0].sin_cos();
                let (sf, cf) = t[1].sin_cos();
                [r * st * cf, r * st * sf, r * ct]
            }
            Model::Torus { big, small } => {
                let (su, cu) = t[0].sin_cos();
                let (sv, cv) = t[1].sin_cos();
                let rho = big + small * cv;
                [rho * cu, rho * su, small * sv]
            }
        }
    }

    fn d1(&self, t: &[f64]) -> Vec<[f64; 3]> {
        match *self {
            Model::Circle { r } => vec![[-r * t[0].sin(), r * t[0].cos(), 0.0]],
            Model::Ellipse { a, b } => vec![[-a * t[0].sin(), b * t[0].cos(), 0.0]],
            Model::Sphere { r } => {
                let (st, ct) = t[0].sin_cos();
                let (sf, cf) = t[1].sin_cos();
                vec![[r * ct * cf, r * ct * sf, -r * st], [-r * st * sf, r * st * cf, 0.0]]
            }
            Model::Torus { big, small } => {
                let (su, cu) = t[0].sin_cos();
                let (sv, cv) = t[1].sin_cos();
                let rho = big + small * cv;
                vec![[-rho * su, rho * cu, 0.0], [-small * sv * cu, -small * sv * su, small * cv]]
            }
        }
    }

    fn d2(&self, t: &[f64]) -> Vec<Vec<[f64; 3]>> {
        match *self {
            Model::Circle { r } => vec![vec![[-r * t[0].cos(), -r * t[0].sin(), 0.0]]],
            Model::Ellipse { a, b } => vec![vec![[-a * t[0].cos(), -b * t[0].sin(), 0.0]]],
            Model::Sphere { r } => {
                let (st, ct) = t[0].sin_cos();
                let (sf, cf) = t[1].sin_cos();
                let tt = [-r * st * cf, -r * st * sf, -r * ct];
                let tf = [-r * ct * sf, r * ct * cf, 0.0];
                let ff = [-r * st * cf, -r * st * sf, 0.0];
                vec![vec![tt, tf], vec![tf, ff]]
            }
            Model::Torus { big, small } => {
                let (su, cu) = t[0].sin_cos();
                let (sv, cv) = t[1].sin_cos();
                let rho = big + small * cv;
                let uu = [-rho * cu, -rho * su, 0.0];
                let uv = [small * sv * su, -small * sv * cu, 0.0];
                let vv = [-small * cv * cu, -small * cv * su, -small * sv];
                vec![vec![uu, uv], vec![uv, vv]]
            }
        }
    }

    /// Upper bounds on |d x / d t_i|.
    fn max_speeds(&self) -> Vec<f64> {
        match *self {
            Model::Circle { r } => vec![r],
            Model::Ellipse { a, b } => vec![a.max(b)],
            Model::Sphere { r } => vec![r, r],
            Model::Torus { big, small } => vec![big + small, small],
        }
    }

    fn max_area(&self) -> f64 {
        match *self {
            Model::Circle { r } => r,
            Model::Ellipse { a, b } => a.max(b),
            Model::Sphere { r } => r * r,
            Model::Torus { big, small } => (big + small) * small,
        }
    }

    /// (tau, R); R is infinite when the surface is not exposed.
    fn curvature_radii(&self) -> (f64, f64) {
        match *self {
            Model::Circle { r } | Model::Sphere { r } => (r, r),
            Model::Ellipse { a, b } => {
                let (lo, hi) = (a.min(b), a.max(b));
                (lo * lo / hi, hi * hi / lo)
            }
            Model::Torus { big, small } => (small.min(big - small), f64::INFINITY),
        }
    }
}

/// Push-forward onto a large sphere after flattening onto a hyperplane.
#[derive(Debug, Clone)]
pub(crate) struct SphereMap {
    pub foot: DVector<f64>,
    pub normal: DVector<f64>,
    pub center: DVector<f64>,
    pub radius: f64,
    pub scale: f64,
    pub net_size: usize,
}

impl SphereMap {
    fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let w = self.flat_offset(y);
        let nw = w.norm();
        (&self.center + w * (self.radius / nw)) * self.scale
    }

    fn flat_offset(&self, y: &DVector<f64>) -> DVector<f64> {
        let h = (y - &self.foot).dot(&self.normal);
        y - &self.normal * h - &self.center
    }

    fn push_jacobian(&self, y: &DVector<f64>, jac: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.flat_offset(y);
        let nw = w.norm();
        let wh = &w / nw;
        let mut out = jac.clone();
        for mut col in out.column_iter_mut() {
            let along = col.dot(&self.normal);
            col.axpy(-along, &self.normal, 1.0);
            let radial = col.dot(&wh);
            col.axpy(-radial, &wh, 1.0);
            col *= self.scale * self.radius / nw;
        }
        out
    }
}

/// Support value with the maximizing point.
#[derive(Debug, Clone)]
pub struct SupportValue {
    pub value: f64,
    pub point: DVector<f64>,
    pub params: Vec<f64>,
    /// Arc-length spacing of the search net; zero for closed forms.
    pub resolution: f64,
}

/// Parameter grid with area weights normalized to sum one.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    pub params: Vec<Vec<f64>>,
    pub points: PointCloud,
    pub weights: Vec<f64>,
    /// Sum of the unnormalized weights.
    pub total_area: f64,
    /// Largest arc-length step between neighbouring nodes.
    pub spacing: f64,
}

#[derive(Debug, Clone)]
pub struct AnalyticManifold {
    spec: ManifoldSpec,
    model: Model,
    n: usize,
    center: DVector<f64>,
    frame: DMatrix<f64>,
    sphere_map: Option<SphereMap>,
    bounds: GeometricBounds,
    volume: f64,
    max_area: f64,
    max_speeds: Vec<f64>,
    rescale: f64,
    search_grid: OnceLock<ParamGrid>,
}

impl AnalyticManifold {
    pub fn new(spec: ManifoldSpec) -> Result<Self> {
        let mut m = Self::embed_base(&spec)?;
        if let Shape::SphereProjectedGraph { eps, c0, c_proj, .. } = spec.shape {
            let cfg = ProjectionConfig { c0, c_proj };
            m = projection::project(&m, eps, &cfg)?;
        }
        m.spec = spec;
        Ok(m)
    }

    fn embed_base(spec: &ManifoldSpec) -> Result<Self> {
        let model = Model::from_shape(&spec.shape)?;
        let n = spec.ambient_dim;
        let md = model.model_dim();
        if n <= model.d() {
            return Err(MfError::invalid(format!(
                "ambient dimension {n} must exceed the intrinsic dimension {}",
                model.d()
            )));
        }
        let center = match &spec.center {
            Some(c) => {
                check_dim(n, c.len())?;
                DVector::from_column_slice(c)
            }
            None => DVector::zeros(n),
        };
        let frame = match &spec.frame {
            Some(cols) => {
                check_dim(md, cols.len())?;
                let mut f = DMatrix::zeros(n, md);
                for (j, c) in cols.iter().enumerate() {
                    check_dim(n, c.len())?;
                    f.set_column(j, &DVector::from_column_slice(c));
                }
                let defect = (f.transpose() * &f - DMatrix::identity(md, md)).abs().max();
                if defect > 1e-9 {
                    return Err(MfError::invalid("frame columns must be orthonormal"));
                }
                f
            }
            None => {
                if n < md {
                    return Err(MfError::invalid(format!(
                        "default frame needs ambient dimension >= {md}"
                    )));
                }
                DMatrix::identity(n, md)
            }
        };
        let reach_out = center.norm() + model.extent();
        let rescale = if reach_out > 1.0 { 1.0 / reach_out } else { 1.0 };
        let model = model.scaled(rescale);
        let center = center * rescale;
        let (tau, r_exposed) = model.curvature_radii();
        let volume = match model {
            Model::Circle { r } => TWO_PI * r,
            Model::Sphere { r } => 4.0 * PI * r * r,
            Model::Torus { big, small } => 4.0 * PI * PI * big * small,
            Model::Ellipse { .. } => 0.0,
        };
        let mut m = AnalyticManifold {
            spec: spec.clone(),
            model,
            n,
            center,
            frame,
            sphere_map: None,
            bounds: GeometricBounds {
                d: model.d(),
                n,
                tau,
                volume,
                r_exposed,
                lambda: tau.powi(-2),
            },
            volume,
            max_area: model.max_area(),
            max_speeds: model.max_speeds(),
            rescale,
            search_grid: OnceLock::new(),
        };
        if volume == 0.0 {
            m.volume = m.quadrature(8192).total_area;
            m.bounds.volume = m.volume;
        }
        m.bounds.lambda = m.estimate_lambda(0x5eed).max(tau.powi(-2));
        Ok(m)
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &GeometricBounds {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.model.d()
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Factor applied at construction to fit the image inside the unit ball.
    pub fn rescale(&self) -> f64 {
        self.rescale
    }

    pub fn is_sphere_projected(&self) -> bool {
        self.sphere_map.is_some()
    }

    /// Size of the net used by the sphere projection, if any.
    pub fn projection_net_size(&self) -> Option<usize> {
        self.sphere_map.as_ref().map(|s| s.net_size)
    }

    /// (lo, hi, periodic) for each parameter.
    pub fn param_ranges(&self) -> Vec<(f64, f64, bool)> {
        self.model.ranges()
    }

    fn base_point(&self, t: &[f64]) -> DVector<f64> {
        let p = self.model.point(t);
        let mut x = self.center.clone();
        for j in 0..self.model.model_dim() {
            x.axpy(p[j], &self.frame.column(j).into_owned(), 1.0);
        }
        x
    }

    fn lift(&self, v: &[f64; 3]) -> DVector<f64> {
        let mut x = DVector::zeros(self.n);
        for j in 0..self.model.model_dim() {
            x.axpy(v[j], &self.frame.column(j).into_owned(), 1.0);
        }
        x
    }

    fn base_jacobian(&self, t: &[f64]) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.model.d1(t).iter().map(|v| self.lift(v)).collect();
        DMatrix::from_columns(&cols)
    }

    pub fn embed(&self, t: &[f64]) -> DVector<f64> {
        let y = self.base_point(t);
        match &self.sphere_map {
            Some(s) => s.apply(&y),
            None => y,
        }
    }

    /// n x d matrix of partial derivatives.
    pub fn jacobian(&self, t: &[f64]) -> DMatrix<f64> {
        let j = self.base_jacobian(t);
        match &self.sphere_map {
            Some(s) => s.push_jacobian(&self.base_point(t), &j),
            None => j,
        }
    }

    /// `out[i][j]` = second partial derivative along t_i, t_j.
    pub fn second_derivatives(&self, t: &[f64]) -> Vec<Vec<DVector<f64>>> {
        let d = self.model.d();
        if self.sphere_map.is_none() {
            return self
                .model
                .d2(t)
                .iter()
                .map(|row| row.iter().map(|v| self.lift(v)).collect())
                .collect();
        }
        let h = 1e-5;
        let mut out = vec![vec![DVector::zeros(self.n); d]; d];
        for j in 0..d {
            let mut tp = t.to_vec();
            let mut tm = t.to_vec();
            tp[j] += h;
            tm[j] -= h;
            let diff = (self.jacobian(&tp) - self.jacobian(&tm)) / (2.0 * h);
            for i in 0..d {
                out[i][j] += diff.column(i) * 0.5;
                out[j][i] += diff.column(i) * 0.5;
            }
        }
        out
    }

    pub fn area_element(&self, t: &[f64]) -> f64 {
        let j = self.jacobian(t);
        (j.transpose() * j).determinant().max(0.0).sqrt()
    }

    pub fn tangent_at(&self, t: &[f64]) -> Result<Subspace> {
        let j = self.jacobian(t);
        let cols: Vec<DVector<f64>> = j.column_iter().map(|c| c.into_owned()).collect();
        Subspace::new(&cols)
    }

    pub fn normal_at(&self, t: &[f64]) -> Result<Subspace> {
        self.tangent_at(t)?
            .complement()
            .ok_or_else(|| MfError::numerical("tangent space fills the ambient space"))
    }

    /// II_p in an orthonormal tangent frame.
    pub fn second_fundamental_form(&self, t: &[f64]) -> Result<SecondFundamentalForm> {
        let d = self.model.d();
        let j = self.jacobian(t);
        let qr = j.clone().qr();
        let r = qr.r();
        let q = qr.q();
        let rinv = r
            .try_inverse()
            .ok_or_else(|| MfError::numerical("degenerate parametrization"))?;
        let basis: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
        let tangent = Subspace::from_orthonormal(basis)?;
        let dd = self.second_derivatives(t);
        let ii_coord: Vec<Vec<DVector<f64>>> = dd
            .iter()
            .map(|row| row.iter().map(|v| tangent.residual(v)).collect())
            .collect();
        let mut values = vec![vec![DVector::zeros(self.n); d]; d];
        for a in 0..d {
            for b in 0..d {
                for i in 0..d {
                    for k in 0..d {
                        let c = rinv[(i, a)] * rinv[(k, b)];
                        if c != 0.0 {
                            values[a][b].axpy(c, &ii_coord[i][k], 1.0);
                        }
                    }
                }
            }
        }
        Ok(SecondFundamentalForm { point: self.embed(t), tangent, values })
    }

    /// Inward unit normal nu_p with <q-p, nu_p> >= |q-p|^2/(2R), when the
    /// manifold is exposed.
    pub fn exposing_normal(&self, t: &[f64]) -> Option<DVector<f64>> {
        if let Some(s) = &self.sphere_map {
            let x = self.embed(t);
            return Some((&s.center * s.scale - x) / (s.radius * s.scale));
        }
        let v = match self.model {
            Model::Circle { .. } | Model::Sphere { .. } => {
                let p = self.model.point(t);
                [-p[0], -p[1], -p[2]]
            }
            Model::Ellipse { a, b } => [-b * t[0].cos(), -a * t[0].sin(), 0.0],
            Model::Torus { .. } => return None,
        };
        let w = self.lift(&v);
        let nw = w.norm();
        Some(w / nw)
    }

    fn wrap(&self, t: &mut [f64]) {
        for (x, (lo, hi, periodic)) in t.iter_mut().zip(self.model.ranges()) {
            if periodic {
                *x = lo + (*x - lo).rem_euclid(hi - lo);
            }
        }
    }

    /// One parameter draw distributed proportionally to surface measure.
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.sphere_map.is_none() {
            match self.model {
                Model::Circle { .. } => return vec![rng.random::<f64>() * TWO_PI],
                Model::Sphere { .. } => {
                    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                    return vec![z.clamp(-1.0, 1.0).acos(), rng.random::<f64>() * TWO_PI];
                }
                _ => {}
            }
        }
        let ranges = self.model.ranges();
        loop {
            let t: Vec<f64> =
                ranges.iter().map(|&(lo, hi, _)| lo + (hi - lo) * rng.random::<f64>()).collect();
            if rng.random::<f64>() * self.max_area <= self.area_element(&t) {
                return t;
            }
        }
    }

    /// Appends `count` uniform samples to `cloud`.
    pub fn sample_into<R: Rng + ?Sized>(&self, count: usize, rng: &mut R, cloud: &mut PointCloud) {
        for _ in 0..count {
            let t = self.sample_params(rng);
            cloud.push(self.embed(&t).as_slice());
        }
    }

    pub fn sample_with_params(&self, count: usize, seed: u64) -> Vec<(Vec<f64>, DVector<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let t = self.sample_params(&mut rng);
                let x = self.embed(&t);
                (t, x)
            })
            .collect()
    }

    /// Tensor grid with area weights; about `target` nodes in total.
    pub fn quadrature(&self, target: usize) -> ParamGrid {
        let ranges = self.model.ranges();
        let d = ranges.len();
        let lens: Vec<f64> =
            ranges.iter().zip(&self.max_speeds).map(|(&(lo, hi, _), s)| (hi - lo) * s).collect();
        let target = target.max(4) as f64;
        let counts: Vec<usize> = if d == 1 {
            vec![target as usize]
        } else {
            let k0 = (target * lens[0] / lens[1]).sqrt().round().max(4.0);
            let k1 = (target / k0).round().max(4.0);
            vec![k0 as usize, k1 as usize]
        };
        let steps: Vec<f64> =
            ranges.iter().zip(&counts).map(|(&(lo, hi, _), &k)| (hi - lo) / k as f64).collect();
        let spacing = steps
            .iter()
            .zip(&self.max_speeds)
            .map(|(h, s)| h * s)
            .fold(0.0, f64::max);
        let total: usize = counts.iter().product();
        let mut params = Vec::with_capacity(total);
        let mut points = PointCloud::with_capacity(self.n, total);
        let mut weights = Vec::with_capacity(total);
        let cell: f64 = steps.iter().product();
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let t: Vec<f64> = (0..d)
                .map(|i| {
                    let (lo, _, periodic) = ranges[i];
                    let off = if periodic { 0.0 } else { 0.5 };
                    lo + (idx[i] as f64 + off) * steps[i]
                })
                .collect();
            weights.push(self.area_element(&t) * cell);
            points.push(self.embed(&t).as_slice());
            params.push(t);
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        let total_area: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total_area;
        }
        ParamGrid { params, points, weights, total_area, spacing }
    }

    fn search_grid(&self) -> &ParamGrid {
        self.search_grid.get_or_init(|| {
            let target = if self.model.d() == 1 { 4096 } else { 25_600 };
            self.quadrature(target)
        })
    }

    /// sup over M of <b, x>, with the maximizer.
    pub fn support(&self, b: &DVector<f64>) -> Result<SupportValue> {
        check_dim(self.n, b.len())?;
        let nb = b.norm();
        if !(nb > 1e-300 && nb.is_finite()) {
            return Err(MfError::invalid("support direction must be a nonzero vector"));
        }
        let closed = if self.sphere_map.is_some() {
            None
        } else {
            let p: Vec<f64> = (0..self.model.model_dim())
                .map(|j| self.frame.column(j).dot(b))
                .collect();
            match self.model {
                Model::Circle { .. } | Model::Ellipse { .. } => {
                    let (sx, sy) = match self.model {
                        Model::Ellipse { a, b } => (a, b),
                        _ => (1.0, 1.0),
                    };
                    Some(vec![(sy * p[1]).atan2(sx * p[0])])
                }
                Model::Sphere { .. } => {
                    let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    let th = if np > 0.0 { (p[2] / np).clamp(-1.0, 1.0).acos() } else { 0.0 };
                    Some(vec![th, p[1].atan2(p[0])])
                }
                Model::Torus { .. } => {
                    let pxy = p[0].hypot(p[1]);
                    Some(vec![p[1].atan2(p[0]), p[2].atan2(pxy)])
                }
            }
        };
        let (mut t, resolution) = match closed {
            Some(t) => (t, 0.0),
            None => {
                let g = self.search_grid();
                let scores = g.points.dot_all(b);
                let best = argmax(&scores);
                let t = self.newton_extremum(g.params[best].clone(), |m, t| {
                    let j = m.jacobian(t);
                    let grad = j.transpose() * b;
                    let dd = m.second_derivatives(t);
                    let d = grad.len();
                    let hess = DMatrix::from_fn(d, d, |i, k| -dd[i][k].dot(b));
                    (-grad, hess)
                });
                (t, g.spacing)
            }
        };
        self.wrap(&mut t);
        let point = self.embed(&t);
        Ok(SupportValue { value: point.dot(b), point, params: t, resolution })
    }

    /// Newton iterations minimizing a function given its (gradient, Hessian);
    /// falls back to gradient steps when the Hessian is not positive definite.
    fn newton_extremum<F>(&self, mut t: Vec<f64>, gh: F) -> Vec<f64>
    where
        F: Fn(&Self, &[f64]) -> (DVector<f64>, DMatrix<f64>),
    {
        let step_cap = 0.5;
        for _ in 0..30 {
            let (g, h) = gh(self, &t);
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    let scale = h.abs().max().max(1e-12);
                    &g / scale
                }
            };
            let sn = step.norm();
            let step = if sn > step_cap { step * (step_cap / sn) } else { step };
            for i in 0..t.len() {
                t[i] -= step[i];
            }
            if sn < 1e-14 {
                break;
            }
        }
        t
    }

    /// Parameters of the closest point of M to `x`.
    pub fn nearest_params(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        if self.sphere_map.is_none() {
            let rel = x - &self.center;
            let p: Vec<f64> =
                (0..self.model.model_dim()).map(|j| self.frame.column(j).dot(&rel)).collect();
            match self.model {
                Model::Circle { .. } => return Ok(vec![p[1].atan2(p[0])]),
                Model::Sphere { .. } => {
                    let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    let th = if np > 0.0 { (p[2] / np).clamp(-1.0, 1.0).acos() } else { 0.0 };
                    return Ok(vec![th, p[1].atan2(p[0])]);
                }
                Model::Torus { big, .. } => {
                    let pxy = p[0].hypot(p[1]);
                    return Ok(vec![p[1].atan2(p[0]), p[2].atan2(pxy - big)]);
                }
                Model::Ellipse { .. } => {}
            }
        }
        let g = self.search_grid();
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, row) in g.points.rows().enumerate() {
            let d2: f64 = row.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < bd {
                bd = d2;
                best = i;
            }
        }
        let mut t = self.newton_extremum(g.params[best].clone(), |m, t| {
            let r = m.embed(t) - x;
            let j = m.jacobian(t);
            let dd = m.second_derivatives(t);
            let d = j.ncols();
            let grad = j.transpose() * &r;
            let hess =
                DMatrix::from_fn(d, d, |i, k| j.column(i).dot(&j.column(k)) + r.dot(&dd[i][k]));
            (grad, hess)
        });
        self.wrap(&mut t);
        Ok(t)
    }

    pub fn distance_to(&self, x: &DVector<f64>) -> Result<f64> {
        let t = self.nearest_params(x)?;
        Ok((self.embed(&t) - x).norm())
    }

    /// Lipschitz constant of p -> II_p, with II_p extended to R^n through
    /// the tangent projection. Norms use sup over unit u of |B(u, u)|,
    /// evaluated on span(T_p + T_q) where the difference lives.
    fn estimate_lambda(&self, seed: u64) -> f64 {
        struct Node {
            x: DVector<f64>,
            frame: Vec<DVector<f64>>,
            ii: Vec<Vec<DVector<f64>>>,
        }
        let d = self.model.d();
        let (target, reach) = if d == 1 { (720usize, 6usize) } else { (48 * 48, 2) };
        let grid = self.quadrature(target);
        let nodes: Vec<Node> = grid
            .params
            .iter()
            .filter_map(|t| {
                let s = self.second_fundamental_form(t).ok()?;
                Some(Node { x: s.point.clone(), frame: s.tangent.basis().to_vec(), ii: s.values })
            })
            .collect();
        let count = nodes.len();
        let offsets: Vec<usize> = if d == 1 {
            (1..=reach).collect()
        } else {
            let row = grid.params.iter().take_while(|t| t[0] == grid.params[0][0]).count();
            vec![1, reach, row - 1, row, row + 1, reach * row]
        };
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..count {
            for &k in &offsets {
                if i + k < count {
                    pairs.push((i, i + k));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4000 {
            let i = rng.random_range(0..count);
            let k = rng.random_range(0..count);
            if i != k {
                pairs.push((i, k));
            }
        }
        let dirs2: Vec<DVector<f64>> = (0..90)
            .map(|a| {
                let th = PI * a as f64 / 90.0;
                DVector::from_column_slice(&[th.cos(), th.sin()])
            })
            .collect();
        let mut worst: f64 = 0.0;
        for (i, k) in pairs {
            let (p, q) = (&nodes[i], &nodes[k]);
            let dist = (&p.x - &q.x).norm();
            if dist < 1e-9 {
                continue;
            }
            let mut span = p.frame.clone();
            span.extend(q.frame.iter().cloned());
            let w = orthonormalize(&span, 1e-9);
            let dim = w.len();
            let ap = DMatrix::from_fn(d, dim, |a, c| p.frame[a].dot(&w[c]));
            let aq = DMatrix::from_fn(d, dim, |a, c| q.frame[a].dot(&w[c]));
            let eval = |c: &DVector<f64>| -> f64 {
                let xp = &ap * c;
                let xq = &aq * c;
                let mut v = DVector::zeros(self.n);
                for a in 0..d {
                    for b in 0..d {
                        v.axpy(xp[a] * xp[b], &p.ii[a][b], 1.0);
                        v.axpy(-xq[a] * xq[b], &q.ii[a][b], 1.0);
                    }
                }
                v.norm()
            };
            let best = if dim == 1 {
                eval(&DVector::from_element(1, 1.0))
            } else if dim == 2 {
                dirs2.iter().map(eval).fold(0.0, f64::max)
            } else {
                let mut b: f64 = 0.0;
                for _ in 0..64 {
                    let c = DVector::from_fn(dim, |_, _| {
                        rng.sample::<f64, _>(rand_distr::StandardNormal)
                    });
                    let c = &c / c.norm();
                    b = b.max(eval(&c));
                }
                b
            };
            worst = worst.max(best / dist);
        }
        worst
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `count` i.i.d. points distributed by normalized surface measure.
pub fn uniform_sample(m: &AnalyticManifold, count: usize, seed: u64) -> Vec<DVector<f64>> {
    m.sample_with_params(count, seed).into_iter().map(|(_, x)| x).collect()
}

/// s(b) = sup over M of <b, x>.
pub fn support_function_exact(m: &AnalyticManifold, b: &DVector<f64>) -> Result<f64> {
    Ok(m.support(b)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize) -> AnalyticManifold {
        ManifoldSpec::new(Shape::Circle { radius: 1.0 }, n).build().unwrap()
    }

    #[test]
    fn circle_constants() {
        let m = circle(2);
        let b = m.bounds();
        assert_eq!((b.d, b.n), (1, 2));
        assert!((b.tau - 1.0).abs() < 1e-12);
        assert!((m.volume() - TWO_PI).abs() < 1e-12);
        assert!(b.lambda >= 1.0);
        b.validate().unwrap();
    }

    #[test]
    fn tangent_normal_orthogonal() {
        let t = ManifoldSpec::new(Shape::Torus { major: 0.6, minor: 0.2 }, 4).build().unwrap();
        for (par, _) in t.sample_with_params(50, 3) {
            let tan = t.tangent_at(&par).unwrap();
            let nor = t.normal_at(&par).unwrap();
            for u in tan.basis() {
                for v in nor.basis() {
                    assert!(u.dot(v).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ellipse_volume_matches_series() {
        let e = ManifoldSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 2).build().unwrap();
        // Ramanujan's second approximation is accurate to ~1e-9 here.
        let (a, b) = (1.0f64, 0.5f64);
        let h = ((a - b) / (a + b)).powi(2);
        let approx = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((e.volume() - approx).abs() < 1e-6);
        assert!((e.bounds().tau - 0.25).abs() < 1e-12);
        assert!((e.bounds().r_exposed - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rescaled_into_unit_ball() {
        let m = ManifoldSpec::new(Shape::Sphere { radius: 3.0 }, 3).build().unwrap();
        assert!((m.rescale() - 1.0 / 3.0).abs() < 1e-12);
        for x in uniform_sample(&m, 100, 1) {
            assert!(x.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn second_form_of_circle_points_inward() {
        let m = circle(3);
        let s = m.second_fundamental_form(&[0.3]).unwrap();
        let want = -&s.point;
        assert!((&s.values[0][0] - want).norm() < 1e-12);
    }

    #[test]
    fn nearest_point_on_ellipse() {
        let e = ManifoldSpec::new(Shape::Ellipse { a: 1.0, b: 0.5 }, 2).build().unwrap();
        let x = e.embed(&[1.1]);
        let nrm = e.normal_at(&[1.1]).unwrap().basis()[0].clone();
        let off = &x + nrm * 0.05;
        assert!((e.distance_to(&off).unwrap() - 0.05).abs() < 1e-9);
    }

    #[test]
    fn flatten_toml_round_trip() {
        let src = "kind = \"sphere_projected_graph\"\nambient_dim = 70\neps = 0.05\n[base]\nkind = \"circle\"\nradius = 1.0\n";
        let spec: ManifoldSpec = toml::from_str(src).unwrap();
        assert_eq!(spec.ambient_dim, 70);
        match &spec.shape {
            Shape::SphereProjectedGraph { base, c0, .. } => {
                assert_eq!(**base, Shape::Circle { radius: 1.0 });
                assert_eq!(*c0, 0.1);
            }
            other => panic!("unexpected {other:?}"),
        }
        let js = serde_json::to_string(&spec).unwrap();
        let back: ManifoldSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
    }
}
