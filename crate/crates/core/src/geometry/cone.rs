//! Finitely generated convex cones, polars, normal cones of finite hulls,
//! and the cone distance d_CH.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, MfError, Result};
use crate::linalg::{nnls, orthonormalize, unit};

const ANGLE_TOL: f64 = 1e-12;
const MEMBER_SLACK: f64 = 1e-8;

/// conv cone of a finite generator list.
#[derive(Debug, Clone)]
pub struct Cone {
    generators: Vec<DVector<f64>>,
    ambient_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Planar {
    /// Angular interval [start, start + width] with width < 2 pi.
    Sector { start: f64, width: f64 },
    Line { angle: f64 },
    Plane,
}

impl Cone {
    /// Zero generators are dropped; a cone with no nonzero generator is an error.
    pub fn new(generators: Vec<DVector<f64>>) -> Result<Self> {
        let n = generators
            .first()
            .map(|g| g.len())
            .ok_or_else(|| MfError::invalid("degenerate zero cone"))?;
        let mut kept = Vec::with_capacity(generators.len());
        for g in generators {
            check_dim(n, g.len())?;
            if let Some(u) = unit(&g) {
                kept.push(u);
            }
        }
        if kept.is_empty() {
            return Err(MfError::invalid("degenerate zero cone"));
        }
        Ok(Cone { generators: kept, ambient_dim: n })
    }

    pub fn ray(v: DVector<f64>) -> Result<Self> {
        Cone::new(vec![v])
    }

    /// Whole space R^n.
    pub fn full(n: usize) -> Self {
        let mut g = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            g.push(e.clone());
            g.push(-e);
        }
        Cone { generators: g, ambient_dim: n }
    }

    /// Unit-normalized generators.
    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn planar(&self) -> Option<Planar> {
        if self.ambient_dim != 2 {
            return None;
        }
        let mut ang: Vec<f64> = self
            .generators
            .iter()
            .map(|g| g[1].atan2(g[0]).rem_euclid(2.0 * PI))
            .collect();
        ang.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ang.dedup_by(|a, b| (*a - *b).abs() < ANGLE_TOL);
        if ang.len() > 1 && (ang[0] + 2.0 * PI - ang[ang.len() - 1]).abs() < ANGLE_TOL {
            ang.pop();
        }
        let m = ang.len();
        if m == 1 {
            return Some(Planar::Sector { start: ang[0], width: 0.0 });
        }
        let gaps: Vec<(f64, usize)> = (0..m)
            .map(|i| {
                let next = if i + 1 < m { ang[i + 1] } else { ang[0] + 2.0 * PI };
                (next - ang[i], i)
            })
            .collect();
        let (gmax, imax) = gaps
            .iter()
            .cloned()
            .fold((f64::NEG_INFINITY, 0), |acc, g| if g.0 > acc.0 { g } else { acc });
        if gmax > PI + 1e-10 {
            let start = ang[(imax + 1) % m];
            return Some(Planar::Sector { start, width: 2.0 * PI - gmax });
        }
        if gmax >= PI - 1e-10 {
            let big = gaps.iter().filter(|g| g.0 >= PI - 1e-10).count();
            if big >= 2 {
                return Some(Planar::Line { angle: ang[0] });
            }
            let start = ang[(imax + 1) % m];
            return Some(Planar::Sector { start, width: PI });
        }
        Some(Planar::Plane)
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        if let Some(pl) = self.planar() {
            return planar_project(pl, x);
        }
        let g = DMatrix::from_columns(&self.generators);
        let lam = nnls(&g, x);
        g * lam
    }

    pub fn dist(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm()
    }

    /// Nonnegative-combination feasibility with 1e-8 slack.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.dist(x) <= MEMBER_SLACK * x.norm().max(1.0)
    }

    /// True iff <g, x> <= slack for every generator, i.e. x lies in the polar.
    pub fn polar_contains(&self, x: &DVector<f64>) -> bool {
        let s = MEMBER_SLACK * x.norm().max(1.0);
        self.generators.iter().all(|g| g.dot(x) <= s)
    }

    /// The polar cone {x : <x, y> <= 0 for all y in K}.
    pub fn polar(&self) -> Result<Cone> {
        if let Some(pl) = self.planar() {
            let unit_at = |a: f64| DVector::from_vec(vec![a.cos(), a.sin()]);
            return match pl {
                Planar::Plane => Err(MfError::invalid("polar of the whole space is the zero cone")),
                Planar::Line { angle } => Cone::new(vec![
                    unit_at(angle + PI / 2.0),
                    unit_at(angle - PI / 2.0),
                ]),
                Planar::Sector { start, width } => {
                    let ps = start + width + PI / 2.0;
                    let pw = PI - width;
                    Cone::new(sector_generators(ps, pw))
                }
            };
        }
        let rays = extreme_rays(&self.generators, self.ambient_dim)?;
        if rays.is_empty() {
            return Err(MfError::invalid("polar cone is the zero cone"));
        }
        Cone::new(rays)
    }

    /// Unit vectors inside the cone. Planar cones are sampled on an even
    /// angular grid; other cones by random nonnegative combinations seeded
    /// deterministically, plus the generators themselves.
    pub fn unit_samples(&self, count: usize) -> Vec<DVector<f64>> {
        let count = count.max(2);
        if let Some(pl) = self.planar() {
            let unit_at = |a: f64| DVector::from_vec(vec![a.cos(), a.sin()]);
            return match pl {
                Planar::Plane => (0..count)
                    .map(|k| unit_at(2.0 * PI * k as f64 / count as f64))
                    .collect(),
                Planar::Line { angle } => vec![unit_at(angle), unit_at(angle + PI)],
                Planar::Sector { start, width } => {
                    if width == 0.0 {
                        return vec![unit_at(start)];
                    }
                    (0..count)
                        .map(|k| unit_at(start + width * k as f64 / (count - 1) as f64))
                        .collect()
                }
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
        let mut out: Vec<DVector<f64>> = self.generators.clone();
        let m = self.generators.len();
        while out.len() < count {
            let mut v = DVector::zeros(self.ambient_dim);
            for g in &self.generators {
                let w: f64 = -rng.random::<f64>().max(1e-300).ln();
                v.axpy(w, g, 1.0);
            }
            // sparse combinations reach the faces as well
            if m > 2 && rng.random::<f64>() < 0.5 {
                let i = rng.random_range(0..m);
                let j = rng.random_range(0..m);
                let t: f64 = rng.random();
                v = &self.generators[i] * t + &self.generators[j] * (1.0 - t);
            }
            if let Some(u) = unit(&v) {
                out.push(u);
            }
        }
        out
    }

    /// Angular sample spacing for planar cones, a rough estimate otherwise.
    fn sample_resolution(&self, count: usize) -> f64 {
        match self.planar() {
            Some(Planar::Sector { width, .. }) => width / (count.max(2) - 1) as f64,
            Some(Planar::Plane) => 2.0 * PI / count.max(1) as f64,
            Some(Planar::Line { .. }) => 0.0,
            None => {
                let k = (self.ambient_dim.max(2) - 1) as f64;
                (1.0 / count.max(1) as f64).powf(1.0 / k)
            }
        }
    }
}

fn sector_generators(start: f64, width: f64) -> Vec<DVector<f64>> {
    let unit_at = |a: f64| DVector::from_vec(vec![a.cos(), a.sin()]);
    let pieces = (width / (PI / 3.0)).ceil().max(1.0) as usize;
    (0..=pieces)
        .map(|k| unit_at(start + width * k as f64 / pieces as f64))
        .collect()
}

fn planar_project(pl: Planar, x: &DVector<f64>) -> DVector<f64> {
    let r = x.norm();
    if r == 0.0 {
        return x.clone();
    }
    let a = x[1].atan2(x[0]);
    let ray_proj = |b: f64| {
        let u = DVector::from_vec(vec![b.cos(), b.sin()]);
        let t = u.dot(x).max(0.0);
        u * t
    };
    match pl {
        Planar::Plane => x.clone(),
        Planar::Line { angle } => {
            let u = DVector::from_vec(vec![angle.cos(), angle.sin()]);
            &u * u.dot(x)
        }
        Planar::Sector { start, width } => {
            let off = (a - start).rem_euclid(2.0 * PI);
            if off <= width + ANGLE_TOL {
                return x.clone();
            }
            let p1 = ray_proj(start);
            let p2 = ray_proj(start + width);
            if (x - &p1).norm() <= (x - &p2).norm() {
                p1
            } else {
                p2
            }
        }
    }
}

/// Extreme rays (plus a lineality basis with both signs) of the cone
/// {v : <a_k, v> <= 0 for all k}.
pub(crate) fn extreme_rays(constraints: &[DVector<f64>], n: usize) -> Result<Vec<DVector<f64>>> {
    if constraints.is_empty() {
        return Ok(Cone::full(n).generators);
    }
    let a = DMatrix::from_rows(&constraints.iter().map(|c| c.transpose()).collect::<Vec<_>>());
    // Row space basis; its complement is the lineality space.
    let rows: Vec<DVector<f64>> = constraints.to_vec();
    let row_basis = orthonormalize(&rows, 1e-9);
    let lineality = crate::linalg::complement_basis(&row_basis, n);
    let mut out: Vec<DVector<f64>> = Vec::new();
    for l in &lineality {
        out.push(l.clone());
        out.push(-l);
    }
    let k = row_basis.len();
    if k == 0 {
        return Ok(out);
    }
    // Constraints in row-space coordinates.
    let w = DMatrix::from_columns(&row_basis);
    let reduced: Vec<DVector<f64>> = (0..a.nrows())
        .map(|i| w.transpose() * a.row(i).transpose())
        .filter_map(|v| unit(&v))
        .collect();
    let feasible = |z: &DVector<f64>| reduced.iter().all(|c| c.dot(z) <= 1e-10);
    let mut rays_low: Vec<DVector<f64>> = Vec::new();
    if k == 1 {
        for s in [1.0, -1.0] {
            let z = DVector::from_vec(vec![s]);
            if feasible(&z) {
                rays_low.push(z);
            }
        }
    } else {
        let m = reduced.len();
        let mut subset: Vec<usize> = (0..k - 1).collect();
        if m >= k - 1 {
            loop {
                let rows: Vec<DVector<f64>> = subset.iter().map(|&i| reduced[i].clone()).collect();
                let ortho = orthonormalize(&rows, 1e-9);
                if ortho.len() == k - 1 {
                    let z = crate::linalg::complement_basis(&ortho, k)[0].clone();
                    for s in [1.0, -1.0] {
                        let zz = &z * s;
                        if feasible(&zz)
                            && !rays_low.iter().any(|r: &DVector<f64>| (r - &zz).norm() < 1e-9)
                        {
                            rays_low.push(zz);
                        }
                    }
                }
                if !next_subset(&mut subset, m) {
                    break;
                }
            }
        }
    }
    for z in rays_low {
        out.push(&w * z);
    }
    Ok(out)
}

fn next_subset(s: &mut [usize], m: usize) -> bool {
    let k = s.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] < m - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Sampled Hausdorff distance between unit-ball slices of two cones.
#[derive(Debug, Clone)]
pub struct ConeDistanceReport {
    pub estimate: f64,
    pub sample_count: usize,
    /// Sampling resolution: the true value lies within this of the estimate.
    pub resolution: f64,
}

/// d_CH(K1, K2). The supremum of dist(., K2) over K1 ∩ B_1 is attained on
/// unit vectors, and for |x| <= 1 the nearest point of K2 ∩ B_1 is the
/// projection onto K2, so only unit samples of each cone are needed.
pub fn cone_distance(k1: &Cone, k2: &Cone, sample_count: usize) -> Result<ConeDistanceReport> {
    check_dim(k1.ambient_dim, k2.ambient_dim)?;
    let s1 = k1.unit_samples(sample_count);
    let s2 = k2.unit_samples(sample_count);
    let d12 = s1.iter().map(|u| k2.dist(u)).fold(0.0, f64::max);
    let d21 = s2.iter().map(|u| k1.dist(u)).fold(0.0, f64::max);
    let resolution = k1
        .sample_resolution(sample_count)
        .max(k2.sample_resolution(sample_count));
    Ok(ConeDistanceReport {
        estimate: d12.max(d21).clamp(0.0, 2.0),
        sample_count: s1.len() + s2.len(),
        resolution,
    })
}

/// (d_CH(K1, K2), d_CH(K1°, K2°)).
pub fn polar_cone_distance_pair(k1: &Cone, k2: &Cone, sample_count: usize) -> Result<(f64, f64)> {
    let direct = cone_distance(k1, k2, sample_count)?.estimate;
    let polar = cone_distance(&k1.polar()?, &k2.polar()?, sample_count)?.estimate;
    Ok((direct, polar))
}

/// Outer normal cone at `p` of the convex hull of `hull_points`.
pub fn normal_cone_at(hull_points: &[DVector<f64>], p: &DVector<f64>) -> Result<Cone> {
    let n = p.len();
    let mut found = false;
    let mut w: Vec<DVector<f64>> = Vec::with_capacity(hull_points.len());
    for x in hull_points {
        check_dim(n, x.len())?;
        let d = x - p;
        if d.norm() <= 1e-12 * (1.0 + p.norm()) {
            found = true;
        } else {
            w.push(d);
        }
    }
    if !found {
        return Err(MfError::invalid("p must be one of the hull points"));
    }
    if w.is_empty() {
        return Ok(Cone::full(n));
    }
    if !is_extreme(&w) {
        return Err(MfError::NotExtreme);
    }
    let tangent = Cone::new(w)?;
    if n == 2 {
        let k = tangent.polar()?;
        return Cone::new(reduce_generators(&k.generators));
    }
    let reduced = reduce_generators(&tangent.generators);
    let rays = extreme_rays(&reduced, n)?;
    Cone::new(rays)
}

/// p is extreme iff 0 is not a convex combination of the differences x - p.
fn is_extreme(w: &[DVector<f64>]) -> bool {
    let n = w[0].len();
    let m = w.len();
    let scale = 1e3;
    let a = DMatrix::from_fn(n + 1, m, |r, c| {
        if r < n {
            w[c][r] / w[c].norm()
        } else {
            scale
        }
    });
    let mut b = DVector::zeros(n + 1);
    b[n] = scale;
    let lam = nnls(&a, &b);
    let res = (&a * &lam - &b).norm();
    res > 1e-9
}

/// Drops generators that are nonnegative combinations of the others.
fn reduce_generators(gens: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut keep: Vec<DVector<f64>> = gens.to_vec();
    let mut i = 0;
    while i < keep.len() {
        let others: Vec<DVector<f64>> = keep
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, g)| g.clone())
            .collect();
        if others.is_empty() {
            break;
        }
        let a = DMatrix::from_columns(&others);
        let lam = nnls(&a, &keep[i]);
        if (&a * lam - &keep[i]).norm() < 1e-10 {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    keep
}
