//! Small dense linear-algebra helpers on top of nalgebra: subspace bases,
//! symmetric square roots, nonnegative least squares and finite differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rank cutoff relative to the largest singular value.
const RANK_TOL: f64 = 1e-10;

/// Euclidean-orthonormal basis of the null space of the rows `rows` inside
/// `R^dim`. Returns a `dim × k` matrix whose columns span
/// `{x : r·x = 0 for all r}`; `k = dim` when `rows` is empty.
pub fn null_space_basis(rows: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    if rows.is_empty() {
        return DMatrix::identity(dim, dim);
    }
    let mut a = DMatrix::zeros(rows.len(), dim);
    for (i, r) in rows.iter().enumerate() {
        a.set_row(i, &r.transpose());
    }
    // Eigenvectors of AᵀA with vanishing eigenvalue span the null space
    // (nalgebra's thin SVD does not expose the trailing right vectors).
    // The iterative eigensolver resolves zero eigenvalues only to
    // O(ε·λmax), so the rank cut must sit well above that noise floor.
    let gram = a.transpose() * &a;
    let eig = gram.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..dim)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let lmax = pairs.last().map(|p| p.0).unwrap_or(0.0).max(1.0);
    let cut = 1e-12 * lmax;
    let null: Vec<&(f64, DVector<f64>)> = pairs.iter().take_while(|p| p.0.abs() <= cut).collect();
    let mut basis = DMatrix::zeros(dim, null.len());
    for (j, (_, v)) in null.iter().enumerate() {
        basis.set_column(j, v);
    }
    basis
}

/// Euclidean-orthonormal basis of span(vecs) as a `dim × rank` matrix.
pub fn span_basis(vecs: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    if vecs.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    let mut a = DMatrix::zeros(dim, vecs.len());
    for (j, v) in vecs.iter().enumerate() {
        a.set_column(j, v);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax.max(1.0))
        .count();
    let mut basis = DMatrix::zeros(dim, rank);
    for j in 0..rank {
        basis.set_column(j, &u.column(j).into_owned());
    }
    basis
}

/// Symmetric positive-definite square root via eigendecomposition.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(m, 0.5)
}

/// Symmetric positive-definite inverse square root.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_power(m, -0.5)
}

fn sym_power(m: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let ev = eig.eigenvalues[i];
        if ev <= 0.0 {
            return Err(Error::Numeric(format!(
                "matrix power {p} of non positive-definite matrix (eigenvalue {ev:.3e})"
            )));
        }
        d[(i, i)] = ev.powf(p);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, RANK_TOL).expect("svd solve")
}

/// Nonnegative least squares `min ‖a x − b‖` s.t. `x ≥ 0` (Lawson–Hanson
/// active-set). Problems here have at most a handful of columns.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + b.norm());
    for _ in 0..(8 * n.max(1)) {
        let grad = a.transpose() * (b - a * &x);
        let mut best = None;
        for j in 0..n {
            if !passive[j] && grad[j] > tol {
                match best {
                    Some((_, g)) if g >= grad[j] => {}
                    _ => best = Some((j, grad[j])),
                }
            }
        }
        let Some((enter, _)) = best else { break };
        passive[enter] = true;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let mut ap = DMatrix::zeros(a.nrows(), cols.len());
            for (k, &j) in cols.iter().enumerate() {
                ap.set_column(k, &a.column(j).into_owned());
            }
            let z = lstsq(&ap, b);
            if z.iter().all(|&v| v > tol) {
                x.fill(0.0);
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // Step toward z until a passive coordinate hits zero.
            let mut theta = 1.0f64;
            let mut drop_j = None;
            for (k, &j) in cols.iter().enumerate() {
                if z[k] <= tol {
                    let t = x[j] / (x[j] - z[k]).max(f64::MIN_POSITIVE);
                    if t < theta {
                        theta = t;
                        drop_j = Some(j);
                    }
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] += theta * (z[k] - x[j]);
            }
            if let Some(j) = drop_j {
                passive[j] = false;
                x[j] = 0.0;
            } else {
                break;
            }
        }
    }
    x
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central finite-difference Hessian of `f` at `x`.
pub fn fd_hessian<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let d = x.len();
    let mut hess = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    let f0 = f(x);
    for i in 0..d {
        for j in i..d {
            let v = if i == j {
                xp[i] = x[i] + h;
                let fpp = f(&xp);
                xp[i] = x[i] - h;
                let fmm = f(&xp);
                xp[i] = x[i];
                (fpp - 2.0 * f0 + fmm) / (h * h)
            } else {
                xp[i] = x[i] + h;
                xp[j] = x[j] + h;
                let fpp = f(&xp);
                xp[j] = x[j] - h;
                let fpm = f(&xp);
                xp[i] = x[i] - h;
                let fmm = f(&xp);
                xp[j] = x[j] + h;
                let fmp = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                (fpp - fpm - fmp + fmm) / (4.0 * h * h)
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn null_space_of_single_row() {
        let rows = vec![DVector::from_vec(vec![1.0, 0.0])];
        let b = null_space_basis(&rows, 2);
        assert_eq!(b.ncols(), 1);
        assert!(b[(0, 0)].abs() < 1e-12);
        assert_relative_eq!(b.column(0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn null_space_empty_rows_is_identity() {
        let b = null_space_basis(&[], 3);
        assert_eq!(b, DMatrix::identity(3, 3));
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sym_sqrt(&m).unwrap();
        assert!((&r * &r - &m).norm() < 1e-12);
        let ri = sym_inv_sqrt(&m).unwrap();
        assert!((&r * &ri - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn sym_sqrt_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(sym_sqrt(&m).is_err());
    }

    #[test]
    fn nnls_clamps_negative_solution() {
        // Unconstrained solution of [1 0; 0 1] x = (1, -2) is (1, -2);
        // NNLS must return (1, 0).
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let x = nnls(&a, &b);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-10);
        assert!(x[1].abs() < 1e-12);
    }

    #[test]
    fn nnls_exact_on_positive_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 0.5).abs() < 1e-10);
        assert!((x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn finite_differences_match_quadratic() {
        let f = |x: &DVector<f64>| 0.5 * (2.0 * x[0] * x[0] + x[1] * x[1]) + x[0] * x[1];
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let g = fd_gradient(f, &x, 1e-5);
        assert!((g[0] - (2.0 * x[0] + x[1])).abs() < 1e-8);
        assert!((g[1] - (x[1] + x[0])).abs() < 1e-8);
        let h = fd_hessian(f, &x, 1e-4);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-5);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-5);
        assert!((h[(1, 1)] - 1.0).abs() < 1e-5);
    }
}
