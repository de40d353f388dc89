//! Thin wrappers over nalgebra: scaled log-determinants and symmetric spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Sign and log-magnitude of a real determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogDet {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

/// Determinant via LU with partial pivoting after factoring out each row's largest
/// magnitude, so large matrices do not overflow before the logarithm is taken.
pub fn log_det(mut m: DMatrix<f64>) -> LogDet {
    let n = m.nrows();
    if n == 0 {
        return LogDet { sign: 1.0, log_abs: 0.0 };
    }
    let mut log_scale = 0.0;
    for i in 0..n {
        let s = m.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s == 0.0 {
            return LogDet { sign: 0.0, log_abs: f64::NEG_INFINITY };
        }
        log_scale += s.ln();
        m.row_mut(i).scale_mut(1.0 / s);
    }
    let lu = m.lu();
    let u = lu.u();
    let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let mut log_abs = log_scale;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return LogDet { sign: 0.0, log_abs: f64::NEG_INFINITY };
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
    }
    LogDet { sign, log_abs }
}

/// Complex log-determinant (principal branch of each pivot's logarithm summed).
pub fn log_det_complex(m: DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let lu = m.lu();
    let u = lu.u();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        acc += u[(i, i)].ln();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        acc += Complex64::new(0.0, std::f64::consts::PI);
    }
    acc
}

/// Eigenvalues of a symmetric matrix, sorted in descending order.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Solves A x = b for square A; None when singular.
pub fn solve(a: DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    a.lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_matches_direct() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, -1.0, 3.0, 0.2, 0.3, 0.1, -4.0]);
        let d = m.clone().determinant();
        let ld = log_det(m);
        assert!((ld.value() - d).abs() < 1e-12 * d.abs());
    }

    #[test]
    fn complex_log_det() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 1.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(1.0, -1.0),
            ],
        );
        let d = m.clone().determinant();
        let l = log_det_complex(m);
        assert!((l.exp() - d).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigenvalues(m);
        assert!((e[0] - 3.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
    }
}
