//! Dense helpers on top of nalgebra's SVD: rank, nullspace, minimum-norm
//! least squares and Gram-Schmidt.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_RTOL: f64 = 1e-9;

/// Full SVD returning `(u, sigma, v)` where `v` has all `ncols` right singular
/// vectors as columns. Rows are zero-padded when the matrix is wide.
pub fn full_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    (u, svd.singular_values, v)
}

fn cutoff(sigma: &DVector<f64>, rtol: f64) -> f64 {
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    (smax * rtol).max(f64::MIN_POSITIVE)
}

pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sigma = m.clone().singular_values();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if smax < 1e-300 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > smax * rtol).count()
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn nullspace(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let c = m.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 || m.amax() == 0.0 {
        return DMatrix::identity(c, c);
    }
    let (_, sigma, v) = full_svd(m);
    let tol = cutoff(&sigma, rtol);
    let cols: Vec<DVector<f64>> = (0..c)
        .filter(|&k| sigma[k] <= tol)
        .map(|k| v.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(c, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimum-norm solution of `min ‖m x - b‖`, discarding singular values below
/// `rtol * sigma_max`.
pub fn min_norm_lstsq(m: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> DVector<f64> {
    let c = m.ncols();
    if c == 0 || m.amax() == 0.0 {
        return DVector::zeros(c);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let tol = cutoff(&svd.singular_values, rtol);
    let mut x = DVector::zeros(c);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let coeff = u.column(k).dot(b) / s;
            x += v_t.row(k).transpose() * coeff;
        }
    }
    x
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass. Columns whose
/// residual norm falls below `tol` are dropped.
pub fn orthonormalize(cols: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        for _ in 0..2 {
            for q in &out {
                let p = q.dot(&v);
                v.axpy(-p, q, 1.0);
            }
        }
        let nrm = v.norm();
        if nrm > tol {
            out.push(v / nrm);
        }
    }
    if out.is_empty() {
        DMatrix::zeros(cols.nrows(), 0)
    } else {
        DMatrix::from_columns(&out)
    }
}

/// Largest absolute entry of `a - aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = nullspace(&m, RANK_RTOL);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).amax() < 1e-14);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn rank_and_nullspace_agree() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(rank(&m, RANK_RTOL), 2);
        assert_eq!(nullspace(&m, RANK_RTOL).ncols(), 1);
    }

    #[test]
    fn lstsq_minimum_norm() {
        // x + y = 2 has minimum-norm solution (1, 1).
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let x = min_norm_lstsq(&m, &b, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lstsq_zero_matrix_gives_zero() {
        let m = DMatrix::zeros(3, 2);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(min_norm_lstsq(&m, &b, 1e-12), DVector::zeros(2));
    }

    #[test]
    fn gram_schmidt_drops_dependent_columns() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let q = orthonormalize(&m, 1e-12);
        assert_eq!(q.ncols(), 2);
    }
}
