//! Dense complex eigen-decomposition and linear solves.
//!
//! nalgebra supplies the Schur form and SVD; eigenvectors are recovered by
//! back-substitution for isolated eigenvalues and from the SVD null space of
//! (A − λI) for clustered ones.

use crate::error::{Error, Result};
use crate::poly::cluster;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Eigenvalue cluster with an orthonormal basis of its eigenspace.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub value: C64,
    pub vectors: Vec<DVector<C64>>,
}

/// Relative radius within which eigenvalues are treated as one cluster.
pub const EIG_CLUSTER_TOL: f64 = 1e-7;

pub fn eigenvalues(a: &DMatrix<C64>) -> Vec<C64> {
    let n = a.nrows();
    let (_, t) = nalgebra::linalg::Schur::new(a.clone()).unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Eigenvalues grouped into clusters, each with unit-norm eigenvectors.
/// A cluster of multiplicity m whose eigenspace is deficient gets fewer
/// than m vectors.
pub fn eigen_clusters(a: &DMatrix<C64>) -> Vec<EigenCluster> {
    let n = a.nrows();
    let (q, t) = nalgebra::linalg::Schur::new(a.clone()).unpack();
    let diag: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let groups = cluster(&diag, EIG_CLUSTER_TOL * scale);
    let mut out = Vec::with_capacity(groups.len());
    for (lam, mult) in groups {
        if mult == 1 {
            let k = (0..n).min_by(|&i, &j| (diag[i] - lam).norm().total_cmp(&(diag[j] - lam).norm())).unwrap();
            let v = schur_vector(&q, &t, k, scale);
            out.push(EigenCluster { value: diag[k], vectors: vec![v] });
        } else {
            out.push(EigenCluster { value: lam, vectors: null_space(a, lam, mult) });
        }
    }
    out
}

fn schur_vector(q: &DMatrix<C64>, t: &DMatrix<C64>, k: usize, scale: f64) -> DVector<C64> {
    let n = t.nrows();
    let lam = t[(k, k)];
    let small = f64::EPSILON * scale;
    let mut y = DVector::<C64>::zeros(n);
    y[k] = C64::new(1.0, 0.0);
    for i in (0..k).rev() {
        let mut s = C64::new(0.0, 0.0);
        for j in i + 1..=k {
            s += t[(i, j)] * y[j];
        }
        let mut d = t[(i, i)] - lam;
        if d.norm() < small {
            d = C64::new(small, 0.0);
        }
        y[i] = -s / d;
    }
    let v = q * y;
    let nv = v.norm();
    v / C64::new(nv, 0.0)
}

/// Orthonormal basis of the numerical null space of (A − λI), of dimension
/// at most `dim`.
pub fn null_space(a: &DMatrix<C64>, lam: C64, dim: usize) -> Vec<DVector<C64>> {
    let n = a.nrows();
    let shifted = a - DMatrix::<C64>::identity(n, n) * lam;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1.0);
    idx.into_iter()
        .take(dim)
        .filter(|&i| svd.singular_values[i] <= 1e-6 * smax)
        .map(|i| vt.row(i).adjoint())
        .collect()
}

/// Gram–Schmidt with the Hermitian inner product; vectors whose remainder
/// falls below `tol` are dropped.
pub fn orthonormalize(vs: &[DVector<C64>], tol: f64) -> Vec<DVector<C64>> {
    let mut out: Vec<DVector<C64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for u in &out {
                let c = u.dotc(&w);
                w -= u * c;
            }
        }
        let nw = w.norm();
        if nw > tol {
            out.push(w / C64::new(nw, 0.0));
        }
    }
    out
}

/// Solve A x = b by LU; errors on a numerically singular A.
pub fn solve(a: &DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or_else(|| Error::InvalidArgument("singular linear system".into()))?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidArgument("singular linear system".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = DMatrix::from_row_slice(3, 3, &[c(1.0, 0.5), c(0.2, 0.0), c(0.0, 1.0), c(0.3, -1.0), c(-2.0, 0.0), c(0.5, 0.5), c(0.0, 0.0), c(1.0, 1.0), c(0.7, -0.3)]);
        let cl = eigen_clusters(&a);
        assert_eq!(cl.len(), 3);
        for k in &cl {
            let v = &k.vectors[0];
            assert!((&a * v - v * k.value).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_cluster_gets_full_eigenspace() {
        // rank-one matrix: eigenvalue 0 with multiplicity 3
        let u = DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        let a = &u * u.transpose();
        let cl = eigen_clusters(&a);
        let zero = cl.iter().find(|k| k.value.norm() < 1e-8).unwrap();
        assert_eq!(zero.vectors.len(), 3);
        for v in &zero.vectors {
            assert!((&a * v).norm() < 1e-12);
        }
    }

    #[test]
    fn lu_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(3.0, 0.0)]);
        let b = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]);
        let x = solve(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() < 1e-14);
    }
}
