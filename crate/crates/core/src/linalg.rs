// SPDX-License-Identifier: Apache-2.0
//! Dense linear-algebra helpers with mandatory residual checks.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{mismatch, Error, Result};

/// Default normalized residual accepted by the checked solves.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn require_square(context: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(mismatch(context, "square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Solve `m x = b` by partial-pivot LU and verify
/// `||m x - b|| <= tol (||m|| ||x|| + ||b||)` in the infinity norm.
pub fn solve_checked(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    context: &'static str,
    tol: f64,
) -> Result<DMatrix<f64>> {
    require_square(context, m)?;
    if b.nrows() != m.nrows() {
        return Err(mismatch(context, format!("{} rhs rows", m.nrows()), b.nrows()));
    }
    let lu = m.clone().lu();
    let x = lu.solve(b).ok_or(Error::Singular(context))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(context));
    }
    let r = m * &x - b;
    let scale = inf_norm(m) * inf_norm(&x) + inf_norm(b);
    let residual = if scale > 0.0 { inf_norm(&r) / scale } else { 0.0 };
    if residual > tol {
        return Err(Error::Residual { context, residual, tol });
    }
    Ok(x)
}

pub fn solve_vec_checked(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    context: &'static str,
    tol: f64,
) -> Result<DVector<f64>> {
    let x = solve_checked(m, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()), context, tol)?;
    Ok(x.column(0).into_owned())
}

/// Inverse through LU with the residual `||m X - I||` verified.
pub fn inverse_checked(m: &DMatrix<f64>, context: &'static str, tol: f64) -> Result<DMatrix<f64>> {
    require_square(context, m)?;
    solve_checked(m, &DMatrix::identity(m.nrows(), m.ncols()), context, tol)
}

/// Diagonal similarity `D^-1 m D` (powers of two) that equalizes row and
/// column norms. Returns the balanced matrix and the diagonal of `D`.
pub fn balance(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / RADIX {
                cc *= RADIX;
                f *= RADIX;
            }
            while cc >= r * RADIX {
                cc /= RADIX;
                f /= RADIX;
            }
            let rr = r / f;
            if (cc + rr) < 0.95 * s {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (a, d)
}

/// Eigenvalues through the real Schur form of the balanced matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    require_square("eigenvalues", m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (b, _) = balance(m);
    let schur = nalgebra::linalg::Schur::try_new(b, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::EigenSolver(format!("Schur iteration did not converge for a {n}x{n} matrix")))?;
    let ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::EigenSolver("non-finite eigenvalue".into()));
    }
    Ok(ev)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Orthonormal basis of the column span of `b`, via an SVD of the
/// column-equilibrated matrix. Singular values below `rel_tol * s_max`
/// are treated as zero.
pub fn column_span_basis(b: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = b.nrows();
    let mut eq = b.clone();
    let mut keep = Vec::new();
    for (j, mut col) in eq.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let eq = eq.select_columns(&keep);
    let svd = eq.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    u.select_columns(&cols)
}

/// Component of `z` orthogonal to the orthonormal columns of `q`.
pub fn project_out(q: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    z - q * (q.transpose() * z)
}

/// `max_ij |a - b| / max(|b|, floor)`.
pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let inv = inverse_checked(&m, "test", RESIDUAL_TOL).unwrap();
        assert!((&m * &inv - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = solve_vec_checked(&m, &b, "test", RESIDUAL_TOL).unwrap();
        assert!((&m * x - b).abs().max() < 1e-14);
    }

    #[test]
    fn singular_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(inverse_checked(&m, "test", RESIDUAL_TOL).is_err());
    }

    #[test]
    fn balancing_preserves_spectrum() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1e6, 0.0, 1e-6, 2.0, 1e6, 0.0, 1e-6, 3.0]);
        let (b, d) = balance(&m);
        let dinv = DMatrix::from_diagonal(&d.map(|v| 1.0 / v));
        let back = DMatrix::from_diagonal(&d) * &b * dinv;
        assert!(max_rel_diff(&back, &m, 1e-300) < 1e-14);
        let ev = eigenvalues(&m).unwrap();
        let tr: f64 = ev.iter().map(|z| z.re).sum();
        let det = ev.iter().fold(Complex::new(1.0, 0.0), |acc, z| acc * z);
        assert!((tr - 6.0).abs() < 1e-9);
        assert!((det.re - m.determinant()).abs() < 1e-9 * m.determinant().abs());
    }

    #[test]
    fn abscissa_of_rotation_and_decay() {
        assert_eq!(spectral_abscissa(&(-DMatrix::<f64>::identity(3, 3))).unwrap(), -1.0);
        let r = DMatrix::from_row_slice(2, 2, &[-0.5, -1.0, 1.0, -0.5]);
        assert!((spectral_abscissa(&r).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn span_basis_rank_and_projection() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1e-3]);
        let q = column_span_basis(&b, 1e-12);
        assert_eq!(q.ncols(), 2);
        let z = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!((project_out(&q, &z) - &z).abs().max() < 1e-15);
        let w = DMatrix::from_column_slice(3, 1, &[3.0, 0.0, -2.0]);
        assert!(project_out(&q, &w).abs().max() < 1e-13);
        assert_eq!(column_span_basis(&DMatrix::zeros(3, 2), 1e-12).ncols(), 0);
    }
}
