//! Dense symmetric linear algebra shared by the Gaussian solvers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. Covariances are
//! assumed symmetric; routines that need positive definiteness go through a
//! Cholesky factorization and report a domain error when it fails.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{domain, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

pub fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(domain(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Cholesky::new(m.clone()).ok_or_else(|| domain("matrix is not positive definite"))
}

pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    Ok(cholesky(m)?.inverse())
}

/// `log det m` for a symmetric positive definite `m`.
pub fn log_det_spd(m: &Matrix) -> Result<f64> {
    let chol = cholesky(m)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn eigenvalues_sym(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    eigenvalues_sym(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Conditional covariance `a − c b⁻¹ cᵀ` of a Gaussian block `u` with
/// `Var(u) = a`, `Var(w) = b`, `Cov(u, w) = c`.
///
/// An empty conditioning block (`b` is 0×0) returns `a` unchanged.
pub fn schur_complement(a: &Matrix, c: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.nrows() == 0 {
        return Ok(a.clone());
    }
    let chol = cholesky(b)?;
    let solved = chol.solve(&c.transpose());
    Ok(symmetrize(&(a - c * solved)))
}

/// Generalized symmetric-definite eigenproblem `a v = λ b v`.
///
/// Reduced to a standard symmetric problem through `b = L Lᵀ`. Eigenvalues
/// come back ascending; each eigenvector has unit Euclidean length and its
/// first nonzero coordinate positive. The vectors are `b`-orthogonal.
pub fn generalized_eigen(a: &Matrix, b: &Matrix) -> Result<(Vec<f64>, Vec<Vector>)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(domain("generalized eigenproblem needs matching square matrices"));
    }
    let chol = cholesky(b)?;
    let l = chol.l();
    // C = L⁻¹ a L⁻ᵀ
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or_else(|| domain("singular Cholesky factor"))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| domain("singular Cholesky factor"))?;
    let eig = SymmetricEigen::new(symmetrize(&c));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for i in order {
        let y = eig.eigenvectors.column(i).into_owned();
        let v = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| domain("singular Cholesky factor"))?;
        values.push(eig.eigenvalues[i]);
        vectors.push(canonical_direction(v));
    }
    Ok((values, vectors))
}

/// Unit length, first coordinate with magnitude above roundoff made positive.
fn canonical_direction(v: Vector) -> Vector {
    let norm = v.norm();
    let mut v = if norm > 0.0 { v / norm } else { v };
    let tiny = 1e-12;
    if let Some(first) = v.iter().copied().find(|x| x.abs() > tiny) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Block-diagonal matrix from the given blocks (blocks may be empty).
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_matches_scalar_ratio() {
        let a = Matrix::from_element(1, 1, 1.5);
        let b = Matrix::from_element(1, 1, 2.0);
        let (vals, vecs) = generalized_eigen(&a, &b).unwrap();
        assert!((vals[0] - 0.75).abs() < 1e-15);
        assert!((vecs[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn generalized_eigen_solves_pencil() {
        let a = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let b = Matrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 2.0, 0.4, 0.0, 0.4, 1.5]);
        let (vals, vecs) = generalized_eigen(&a, &b).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for (lam, v) in vals.iter().zip(&vecs) {
            let resid = &a * v - (&b * v) * *lam;
            assert!(resid.amax() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let cross = vecs[0].transpose() * &b * &vecs[2];
        assert!(cross[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn non_pd_is_a_domain_error() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(log_det_spd(&m).is_err());
    }

    #[test]
    fn schur_with_empty_block_is_identity_map() {
        let a = Matrix::identity(2, 2);
        let out = schur_complement(&a, &Matrix::zeros(2, 0), &Matrix::zeros(0, 0)).unwrap();
        assert_eq!(out, a);
    }
}
