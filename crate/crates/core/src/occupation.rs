//! Occupation numbers: eigenvalues of the density-matrix integral operator.
//!
//! On the circle the operator is a convolution, so its eigenvalues are the Fourier
//! coefficients of rho(x; 0). The other geometries use a Nystrom discretisation.

use crate::determinant::rho_det;
use crate::error::{IbgError, Result};
use crate::geometry::{free_fermion_dm_circle, GeometryConfig, Kind};
use crate::linalg::symmetric_eigenvalues;
use crate::quadrature::GaussLegendre;
use crate::recurrence::rho_circle_recurrence_all;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Fourier,
    Nystrom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationSpectrum {
    /// Descending.
    pub lambdas: Vec<f64>,
    /// Signed momentum label of each lambda (Fourier only; empty for Nystrom).
    pub modes: Vec<f64>,
    pub trace_residual: f64,
    pub neg_tail: f64,
    pub method: SpectrumMethod,
    pub quad_order: usize,
    /// Largest imaginary part discarded by the Fourier route.
    pub imag_residual: f64,
}

impl OccupationSpectrum {
    pub fn lambda0(&self) -> f64 {
        self.lambdas.first().copied().unwrap_or(0.0)
    }
}

const IMAG_TOL: f64 = 1e-10;
const NYSTROM_TRACE_GATE: f64 = 1e-4;

/// Trapezoid Fourier transform of samples f(j L / grid), j = 0..grid, at momenta
/// k + offset. The whole discrete spectrum enters the trace and the reality check;
/// only |k + offset| <= k_max is reported. The offset is 1/2 for antiperiodic input.
fn fourier_spectrum(
    samples: &[f64],
    l: f64,
    n: usize,
    k_max: usize,
    offset: f64,
) -> Result<OccupationSpectrum> {
    let grid = samples.len();
    let h = l / grid as f64;
    let mut buf: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(j, &f)| Complex64::from_polar(f, 2.0 * PI * offset * j as f64 / grid as f64))
        .collect();
    FftPlanner::new().plan_fft_inverse(grid).process(&mut buf);
    // Momenta k + offset for k in [lo, lo + grid), centred on zero.
    let lo = -((grid as i64 - 1) / 2) - if offset > 0.0 && grid % 2 == 0 { 1 } else { 0 };
    let all: Vec<(f64, Complex64)> = (lo..lo + grid as i64)
        .map(|k| (k as f64 + offset, buf[k.rem_euclid(grid as i64) as usize] * h))
        .collect();
    let imag = all.iter().fold(0.0f64, |a, (_, v)| a.max(v.im.abs()));
    if imag > IMAG_TOL {
        return Err(IbgError::InvalidArgument(format!(
            "imaginary part {imag:e} of the Fourier coefficients exceeds {IMAG_TOL:e}; refine the grid"
        )));
    }
    let trace: f64 = all.iter().map(|(_, v)| v.re).sum();
    let neg_tail = all.iter().fold(0.0f64, |a, (_, v)| a.min(v.re));
    let mut kept: Vec<(f64, f64)> =
        all.iter().filter(|(p, _)| p.abs() <= k_max as f64 + 1e-9).map(|(p, v)| (*p, v.re)).collect();
    kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.abs().total_cmp(&b.0.abs())).then(b.0.total_cmp(&a.0)));
    Ok(OccupationSpectrum {
        lambdas: kept.iter().map(|x| x.1).collect(),
        modes: kept.iter().map(|x| x.0).collect(),
        trace_residual: (trace - n as f64).abs(),
        neg_tail,
        method: SpectrumMethod::Fourier,
        quad_order: grid,
        imag_residual: imag,
    })
}

fn check_grid(n: usize, grid: usize) -> Result<()> {
    if n == 0 {
        return Err(IbgError::InvalidArgument("particle number must be at least 1".into()));
    }
    if grid < 2 * n + 2 {
        return Err(IbgError::InvalidArgument(format!("grid {grid} is too coarse for N = {n}")));
    }
    Ok(())
}

/// Bose occupation numbers on a circle of unit length for |k| <= k_max, from the
/// recurrence values of rho(x; 0) on a uniform grid. The trace residual always
/// covers the whole discrete spectrum.
pub fn lambda_circle(n: usize, k_max: usize, grid: usize) -> Result<OccupationSpectrum> {
    check_grid(n, grid)?;
    let samples = circle_samples(n, grid)?;
    fourier_spectrum(&samples, 1.0, n, k_max, 0.0)
}

fn circle_samples(n: usize, grid: usize) -> Result<Vec<f64>> {
    (0..grid)
        .into_par_iter()
        .map(|j| {
            let q = j as f64 / grid as f64;
            Ok(rho_circle_recurrence_all(n, q)?[n - 1])
        })
        .collect()
}

/// The same transform applied to the free-fermion density matrix. For even N that
/// matrix is antiperiodic and its momenta sit at half-integers.
pub fn lambda_circle_free_fermion(n: usize, k_max: usize, grid: usize) -> Result<OccupationSpectrum> {
    check_grid(n, grid)?;
    let samples: Vec<f64> = (0..grid).map(|j| free_fermion_dm_circle(n, j as f64 / grid as f64, 1.0)).collect();
    let offset = if n % 2 == 0 { 0.5 } else { 0.0 };
    fourier_spectrum(&samples, 1.0, n, k_max, offset)
}

/// Quadrature nodes and weights for the Nystrom matrix of each geometry.
fn nystrom_rule(cfg: &GeometryConfig, q: usize) -> (Vec<f64>, Vec<f64>) {
    match cfg.kind {
        // Uniform nodes make the matrix circulant, so it shares the Fourier spectrum.
        Kind::Circle => {
            let h = cfg.l / q as f64;
            ((0..q).map(|j| j as f64 * h).collect(), vec![h; q])
        }
        Kind::Harmonic => {
            let a = (2.0 * cfg.n as f64).sqrt() + 5.0;
            GaussLegendre::new(q).mapped(-a, a)
        }
        _ => GaussLegendre::new(q).mapped(0.0, cfg.l),
    }
}

/// Node count that keeps the Nystrom trace well inside its gate at desk scale.
pub fn default_quad_order(cfg: &GeometryConfig) -> usize {
    match cfg.kind {
        Kind::Circle => 256.max(8 * cfg.n),
        _ => 8 * cfg.n + 40,
    }
}

/// Eigenvalues of the symmetrised Nystrom matrix W^{1/2} rho W^{1/2} with the
/// determinant route as kernel. Needs at least 4N nodes.
pub fn nystrom_spectrum(cfg: &GeometryConfig, quad_order: usize) -> Result<OccupationSpectrum> {
    if quad_order < 4 * cfg.n {
        return Err(IbgError::InvalidArgument(format!(
            "quadrature order {quad_order} is below 4N = {}",
            4 * cfg.n
        )));
    }
    let (xs, ws) = nystrom_rule(cfg, quad_order);
    let q = xs.len();
    let sw: Vec<f64> = ws.iter().map(|w| w.sqrt()).collect();
    let pairs: Vec<(usize, usize)> = (0..q).flat_map(|i| (i..q).map(move |j| (i, j))).collect();
    let kernel = |i: usize, j: usize| -> Result<f64> {
        if cfg.kind == Kind::Circle {
            // Translation invariance: one column determines the matrix.
            let d = (xs[j] - xs[i]).abs();
            rho_det(cfg, d.min(cfg.l - d).max(0.0), 0.0)
        } else {
            rho_det(cfg, xs[i], xs[j])
        }
    };
    let vals: Vec<f64> = if cfg.kind == Kind::Circle {
        let col: Vec<f64> = (0..q).into_par_iter().map(|j| kernel(0, j)).collect::<Result<_>>()?;
        pairs.iter().map(|&(i, j)| col[(j + q - i) % q]).collect()
    } else {
        pairs.par_iter().map(|&(i, j)| kernel(i, j)).collect::<Result<_>>()?
    };
    let mut m = DMatrix::<f64>::zeros(q, q);
    for (&(i, j), v) in pairs.iter().zip(&vals) {
        let a = sw[i] * v * sw[j];
        m[(i, j)] = a;
        m[(j, i)] = a;
    }
    let trace: f64 = (0..q).map(|i| m[(i, i)]).sum();
    let mut lambdas = symmetric_eigenvalues(m);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let trace_residual = (trace - cfg.n as f64).abs();
    if trace_residual > NYSTROM_TRACE_GATE {
        return Err(IbgError::TraceResidual { residual: trace_residual, limit: NYSTROM_TRACE_GATE });
    }
    let neg_tail = lambdas.iter().copied().fold(0.0f64, f64::min);
    Ok(OccupationSpectrum {
        lambdas,
        modes: Vec::new(),
        trace_residual,
        neg_tail,
        method: SpectrumMethod::Nystrom,
        quad_order: q,
        imag_residual: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the log-log fit.
    pub rms_residual: f64,
    pub points: Vec<(usize, f64)>,
}

/// Least-squares slope of log lambda_0 against log N.
pub fn scaling_fit(points: &[(usize, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(IbgError::InvalidArgument(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(n, v)| n == 0 || !(v > 0.0)) {
        return Err(IbgError::InvalidArgument("fit needs positive N and lambda_0".into()));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, v)| ((n as f64).ln(), v.ln())).collect();
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(IbgError::InvalidArgument("fit needs at least two distinct N".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (xy.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(ScalingFit { exponent: slope, prefactor: icpt.exp(), rms_residual: rms, points: points.to_vec() })
}

/// lambda_0(N) for each N, by Fourier on the circle and Nystrom elsewhere.
pub fn lambda0_series(cfg: &GeometryConfig, ns: &[usize], order: usize) -> Result<Vec<(usize, f64)>> {
    ns.iter()
        .map(|&n| {
            let spec = match cfg.kind {
                Kind::Circle => lambda_circle(n, 0, order)?,
                _ => {
                    let c = cfg.with_n(n);
                    nystrom_spectrum(&c, order.max(default_quad_order(&c)))?
                }
            };
            Ok((n, spec.lambda0()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_circle() {
        let s = lambda_circle(1, 5, 64).unwrap();
        assert!((s.lambdas[0] - 1.0).abs() < 1e-14);
        assert_eq!(s.modes[0], 0.0);
        assert!(s.lambdas[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn free_fermion_circle_is_a_projector() {
        for n in 1..=9 {
            let s = lambda_circle_free_fermion(n, 40, 256).unwrap();
            let half = (n as f64 - 1.0) / 2.0;
            for (lam, k) in s.lambdas.iter().zip(&s.modes) {
                let want = if k.abs() <= half + 1e-12 { 1.0 } else { 0.0 };
                assert!((lam - want).abs() < 1e-10, "n={n} k={k} {lam}");
            }
        }
    }

    #[test]
    fn circle_full_spectrum_sums_to_n() {
        for n in [2, 5, 13] {
            let s = lambda_circle(n, 1 << 20, 512).unwrap();
            assert!(s.trace_residual < 1e-8, "n={n} {}", s.trace_residual);
            assert!(s.neg_tail > -1e-8);
        }
    }

    #[test]
    fn circle_nystrom_equals_fourier() {
        let n = 4;
        let grid = 64;
        let f = lambda_circle(n, grid, grid).unwrap();
        let y = nystrom_spectrum(&GeometryConfig::circle(n, 1.0), grid).unwrap();
        let mut a = f.lambdas.clone();
        let mut b = y.lambdas.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{u} {v}");
        }
    }

    #[test]
    fn harmonic_single_particle_is_rank_one() {
        let s = nystrom_spectrum(&GeometryConfig::harmonic(1), 40).unwrap();
        assert!((s.lambdas[0] - 1.0).abs() < 1e-10);
        assert!(s.lambdas[1].abs() < 1e-10);
    }

    #[test]
    fn harmonic_trace() {
        for n in 2..=6 {
            let s = nystrom_spectrum(&GeometryConfig::harmonic(n), default_quad_order(&GeometryConfig::harmonic(n))).unwrap();
            assert!(s.trace_residual < 1e-6, "n={n} {}", s.trace_residual);
            assert!(s.neg_tail > -1e-8, "n={n} {}", s.neg_tail);
        }
    }

    #[test]
    fn dirichlet_self_convergence() {
        let cfg = GeometryConfig::new(Kind::Dirichlet, 2, 1.0).unwrap();
        let a = nystrom_spectrum(&cfg, 40).unwrap();
        let b = nystrom_spectrum(&cfg, 80).unwrap();
        assert!((a.lambda0() - b.lambda0()).abs() < 1e-6, "{} {}", a.lambda0(), b.lambda0());
    }

    #[test]
    fn order_below_four_n_is_refused() {
        assert!(nystrom_spectrum(&GeometryConfig::harmonic(5), 19).is_err());
    }

    #[test]
    fn fit_recovers_power_law() {
        let pts: Vec<(usize, f64)> = [4usize, 9, 16, 25].iter().map(|&n| (n, 3.0 * (n as f64).powf(0.5))).collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-12);
        assert!(scaling_fit(&pts[..2]).is_err());
        let flat = scaling_fit(&[(3, 1.0), (5, 1.0), (8, 1.0)]).unwrap();
        assert!(flat.exponent.abs() < 1e-15);
    }
}
