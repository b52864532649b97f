//! Thin dense helpers over `faer`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Inverse by partial-pivot LU, rejecting singular or badly conditioned input via the
/// residual of `m * inv`.
pub fn inverse(m: MatRef<'_, C64>) -> Result<CMat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let inv = m.partial_piv_lu().inverse();
    if inv.col_iter().any(|col| col.iter().any(|x| !x.re.is_finite() || !x.im.is_finite())) {
        return Err(Error::NoDimerCover);
    }
    let prod = m * &inv;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - c(target)).norm());
        }
    }
    if worst > 1e-6 {
        return Err(Error::NoDimerCover);
    }
    Ok(inv)
}

pub fn real_inverse(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let inv = m.partial_piv_lu().inverse();
    if inv.col_iter().any(|col| col.iter().any(|x| !x.is_finite())) {
        return Err(Error::Numerical("singular real matrix".into()));
    }
    Ok(inv)
}

pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn adjoint(m: MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn submatrix(m: MatRef<'_, C64>, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = CMat::from_fn(4, 4, |i, j| if i == j { c(3.0) } else { C64::new(0.3 * i as f64, -0.2 * j as f64) });
        let inv = inverse(m.as_ref()).unwrap();
        let id = &m * &inv;
        assert!(max_abs_diff(id.as_ref(), CMat::identity(4, 4).as_ref()) < 1e-13);
    }

    #[test]
    fn singular_rejected() {
        let m = CMat::from_fn(3, 3, |i, _| c(i as f64));
        assert!(inverse(m.as_ref()).is_err());
    }

    #[test]
    fn fit_line() {
        let (s, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
    }
}
