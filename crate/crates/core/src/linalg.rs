//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Modified Gram-Schmidt, run twice for stability. Vectors whose residual
/// falls below `tol` are dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut w = v / scale;
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let nw = w.norm();
        if nw > tol {
            out.push(w / nw);
        }
    }
    out
}

/// Orthogonal projector onto the span of an orthonormal basis.
pub fn projector(basis: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for q in basis {
        p.ger(1.0, q, q, 1.0);
    }
    p
}

/// Orthonormal basis of the orthogonal complement of an orthonormal basis.
pub fn complement_basis(basis: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let mut candidates = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for q in basis {
            let c = q.dot(&e);
            e.axpy(-c, q, 1.0);
        }
        candidates.push(e);
    }
    // Sort candidates by residual size so the best-conditioned axes go first.
    candidates.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    let mut full: Vec<DVector<f64>> = basis.to_vec();
    let k = basis.len();
    for c in candidates {
        if full.len() == n {
            break;
        }
        let extended = orthonormalize(&[c], 1e-10);
        if extended.is_empty() {
            continue;
        }
        let mut w = extended[0].clone();
        for _ in 0..2 {
            for q in &full {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let nw = w.norm();
        if nw > 1e-8 {
            full.push(w / nw);
        }
    }
    full.split_off(k)
}

/// Largest singular value. Power iteration above 50 columns.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.ncols().max(m.nrows()) <= 50 {
        return m
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
    }
    let mtm = m.transpose() * m;
    let n = mtm.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618).sin() * 0.1);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = &mtm * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = w / nw;
        if (nw - lambda).abs() <= 1e-14 * nw {
            lambda = nw;
            break;
        }
        lambda = nw;
        v = next;
    }
    lambda.sqrt()
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
/// Columns of the returned matrix are the matching eigenvectors.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        // Fix the sign so the largest-magnitude entry is positive.
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (j, &x)| if x.abs() > acc.1 + 1e-12 { (j, x.abs()) } else { acc });
        if col[imax] < 0.0 {
            col = -col;
        }
        vecs.set_column(c, &col);
    }
    (values, vecs)
}

/// Least squares solve through the SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, smax * 1e-12)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Nonnegative least squares, Lawson-Hanson active set.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let mut x = DVector::zeros(k);
    if k == 0 {
        return x;
    }
    let tol = 1e-12 * (1.0 + a.norm() * b.norm());
    let mut passive = vec![false; k];
    let mut outer = 0;
    loop {
        outer += 1;
        if outer > 3 * k + 10 {
            break;
        }
        let w = a.transpose() * (b - a * &x);
        let mut best = None;
        for j in 0..k {
            if !passive[j] && w[j] > tol && best.map_or(true, |(_, bw)| w[j] > bw) {
                best = Some((j, w[j]));
            }
        }
        let Some((t, _)) = best else { break };
        passive[t] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let zsub = least_squares(&sub, b);
            let mut z = DVector::zeros(k);
            for (c, &j) in idx.iter().enumerate() {
                z[j] = zsub[c];
            }
            if idx.iter().all(|&j| z[j] > 0.0) || inner > 3 * k + 10 {
                x = z.map(|v| v.max(0.0));
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &idx {
                if z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x = &x + (&z - &x) * alpha;
            for &j in &idx {
                if x[j] <= 1e-14 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive[t] && idx.len() == 1 {
                break;
            }
        }
        if !passive.iter().any(|&p| p) {
            break;
        }
    }
    x
}

/// Normalized copy, or None for a zero vector.
pub fn unit(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Some(v / n)
    } else {
        None
    }
}

pub fn dvec(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_spans_rest() {
        let b = orthonormalize(&[dvec(&[1.0, 1.0, 0.0])], 1e-12);
        let c = complement_basis(&b, 3);
        assert_eq!(c.len(), 2);
        for q in &c {
            assert!(q.dot(&b[0]).abs() < 1e-12);
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
        assert!(c[0].dot(&c[1]).abs() < 1e-12);
    }

    #[test]
    fn nnls_recovers_positive_combination() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let x = nnls(&a, &dvec(&[2.0, 1.0]));
        let r = &a * &x - dvec(&[2.0, 1.0]);
        assert!(r.norm() < 1e-10);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn nnls_projects_outside_cone() {
        // cone(e1, e2) in the plane; target in the third quadrant projects to 0.
        let a = DMatrix::identity(2, 2);
        let x = nnls(&a, &dvec(&[-1.0, -2.0]));
        assert!(x.norm() < 1e-14);
        let x = nnls(&a, &dvec(&[3.0, -2.0]));
        assert!((x[0] - 3.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let m = DMatrix::from_fn(60, 60, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let exact = m.clone().singular_values().max();
        assert!((spectral_norm(&m) - exact).abs() < 1e-6 * exact);
    }
}
