//! Toeplitz (circle) and Hankel-type (harmonic, Dirichlet, Neumann) determinant
//! evaluations of rho_N(x; y).

use crate::error::{IbgError, Result};
use crate::geometry::{hermite_functions, GeometryConfig, Kind};
use crate::linalg;
use crate::quadrature::{composite_rule, GaussLegendre};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Symbol coefficients a_l, l = -(n-1)..(n-1), of the circle Toeplitz matrix.
#[derive(Debug, Clone)]
pub struct ToeplitzData {
    pub x: f64,
    pub u: Complex64,
    /// `elements[l + n - 1]` holds a_l.
    pub elements: Vec<Complex64>,
    pub size: usize,
}

impl ToeplitzData {
    pub fn get(&self, l: i64) -> Complex64 {
        self.elements[(l + self.size as i64 - 1) as usize]
    }
}

/// Closed-form coefficient a_l at q = x / L.
pub fn toeplitz_coefficient(l: i64, q: f64) -> Complex64 {
    let t = PI * q;
    let m = l.unsigned_abs() as f64;
    let sgn = if l >= 0 { 1.0 } else { -1.0 };
    match l.unsigned_abs() {
        0 => Complex64::new(4.0 / PI * (t.sin() + 0.5 * PI * (1.0 - 2.0 * q) * t.cos()), 0.0),
        1 => Complex64::from_polar(1.0, sgn * t) * ((PI * (1.0 - 2.0 * q) + (2.0 * t).sin()) / PI),
        _ => {
            let parity = if l.unsigned_abs() % 2 == 0 { 1.0 } else { -1.0 };
            let mag = 4.0 / PI * parity / (m * (m * m - 1.0))
                * (t.cos() * (m * t).sin() - m * t.sin() * (m * t).cos());
            Complex64::from_polar(1.0, sgn * m * t) * mag
        }
    }
}

pub fn toeplitz_elements(cfg: &GeometryConfig, x: f64) -> Result<ToeplitzData> {
    cfg.check_point(x)?;
    let size = cfg.n.saturating_sub(1);
    let q = x / cfg.l;
    let span = size as i64;
    let elements = (-(span - 1).max(0)..=(span - 1).max(0)).map(|l| toeplitz_coefficient(l, q)).collect();
    Ok(ToeplitzData { x, u: Complex64::from_polar(1.0, 2.0 * PI * q), elements, size: size.max(1) })
}

/// rho^C_N(x; 0) from the (N-1) x (N-1) Toeplitz determinant.
pub fn rho_circle_det(cfg: &GeometryConfig, x: f64) -> Result<f64> {
    cfg.check_point(x)?;
    let n = cfg.n - 1;
    if n == 0 {
        return Ok(1.0 / cfg.l);
    }
    let q = x / cfg.l;
    let coeffs: Vec<Complex64> = (-(n as i64 - 1)..=(n as i64 - 1)).map(|l| toeplitz_coefficient(l, q)).collect();
    let off = n as i64 - 1;
    let m = DMatrix::from_fn(n, n, |j, k| coeffs[(j as i64 - k as i64 + off) as usize]);
    let ld = linalg::log_det_complex(m);
    if ld.re > 700.0 {
        return Err(IbgError::Overflow(format!("Toeplitz determinant exceeds the f64 range (log {})", ld.re)));
    }
    Ok(ld.exp().re / cfg.l)
}

/// Hankel-type moment matrix for rho_{n+1}(x; y), n = N - 1.
#[derive(Debug, Clone)]
pub struct HankelData {
    pub x: f64,
    pub y: f64,
    pub elements: DMatrix<f64>,
    /// Quadrature nodes used for the final (accepted) matrix.
    pub nodes: usize,
    pub error_estimate: f64,
}

fn hankel_matrix(cfg: &GeometryConfig, x: f64, y: f64, refine: usize) -> DMatrix<f64> {
    let n = cfg.n - 1;
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let gl = GaussLegendre::new(20);
    let scale = 0.5f64.powi(refine as i32);
    let mut m = DMatrix::<f64>::zeros(n, n);
    match cfg.kind {
        Kind::Harmonic => {
            let t = hi.abs().max(lo.abs()) + (2.0 * n as f64).sqrt() + 10.0;
            let (nodes, wts) = composite_rule(&[-t, lo, hi, t], 0.5 * scale, &gl);
            for (&s, &w) in nodes.iter().zip(&wts) {
                let phi = hermite_functions(n, s);
                let wt = w * (x - s).abs() * (y - s).abs();
                accumulate(&mut m, &phi, wt);
            }
        }
        Kind::Dirichlet | Kind::Neumann => {
            let (a, b) = (lo / cfg.l, hi / cfg.l);
            let cx = (PI * x / cfg.l).cos();
            let cy = (PI * y / cfg.l).cos();
            let (nodes, wts) = composite_rule(&[0.0, a, b, 1.0], 0.1 * scale, &gl);
            for (&t, &w) in nodes.iter().zip(&wts) {
                let ct = (PI * t).cos();
                let wt = 8.0 * w * (cx - ct).abs() * (cy - ct).abs();
                let f: Vec<f64> = if cfg.kind == Kind::Dirichlet {
                    (1..=n).map(|j| (PI * j as f64 * t).sin()).collect()
                } else {
                    (0..n).map(|j| (PI * j as f64 * t).cos()).collect()
                };
                accumulate(&mut m, &f, wt);
            }
        }
        Kind::Circle => unreachable!("circle uses the Toeplitz route"),
    }
    for j in 0..n {
        for k in 0..j {
            m[(k, j)] = m[(j, k)];
        }
    }
    m
}

fn accumulate(m: &mut DMatrix<f64>, f: &[f64], wt: f64) {
    let n = f.len();
    for j in 0..n {
        let fj = wt * f[j];
        for k in 0..=j {
            m[(j, k)] += fj * f[k];
        }
    }
}

/// Matrix elements with the integration range split at x and y; refined until two
/// successive composite rules agree to 1e-12 (relative to the largest entry).
pub fn hankel_elements(cfg: &GeometryConfig, x: f64, y: f64) -> Result<HankelData> {
    if cfg.kind == Kind::Circle {
        return Err(IbgError::InvalidArgument("the circle uses Toeplitz elements".into()));
    }
    cfg.check_point(x)?;
    cfg.check_point(y)?;
    // Canonical order keeps the construction exactly symmetric under x <-> y.
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    let mut prev = hankel_matrix(cfg, x, y, 0);
    for refine in 1..6 {
        let cur = hankel_matrix(cfg, x, y, refine);
        let scale = cur.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
        let mut worst = (0.0, 0, 0);
        for j in 0..cur.nrows() {
            for k in 0..cur.ncols() {
                let d = (cur[(j, k)] - prev[(j, k)]).abs();
                if d > worst.0 {
                    worst = (d, j, k);
                }
            }
        }
        if worst.0 <= 1e-12 * scale {
            return Ok(HankelData { x, y, elements: cur, nodes: refine, error_estimate: worst.0 });
        }
        if refine == 5 {
            return Err(IbgError::QuadratureFailure { j: worst.1 + 1, k: worst.2 + 1, estimate: worst.0 });
        }
        prev = cur;
    }
    unreachable!()
}

/// log of (c^H_n)^2 = sqrt(pi) 2^{-n} n!.
fn ln_c_h_squared(n: usize) -> f64 {
    0.5 * PI.ln() - n as f64 * 2f64.ln() + statrs::function::factorial::ln_factorial(n as u64)
}

/// rho_N(x; y) for the harmonic, Dirichlet and Neumann geometries.
pub fn rho_hankel_det(cfg: &GeometryConfig, x: f64, y: f64) -> Result<f64> {
    cfg.check_point(x)?;
    cfg.check_point(y)?;
    // Canonical order makes the result bitwise symmetric.
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    let n = cfg.n - 1;
    let l = cfg.l;
    let pref = match cfg.kind {
        Kind::Harmonic => (-(x * x + y * y) / 2.0 - ln_c_h_squared(n)).exp(),
        Kind::Dirichlet => 2.0 / l * (PI * x / l).sin() * (PI * y / l).sin(),
        Kind::Neumann => {
            if n == 0 {
                1.0 / l
            } else {
                1.0 / (4.0 * l)
            }
        }
        Kind::Circle => return Err(IbgError::InvalidArgument("use rho_circle_det".into())),
    };
    if n == 0 {
        return Ok(pref);
    }
    let data = hankel_elements(cfg, x, y)?;
    let ld = linalg::log_det(data.elements);
    Ok(pref * ld.value())
}

/// Determinant route for any geometry. The circle uses translation invariance,
/// rho(x; y) = rho(|x - y|; 0).
pub fn rho_det(cfg: &GeometryConfig, x: f64, y: f64) -> Result<f64> {
    match cfg.kind {
        Kind::Circle => {
            cfg.check_point(x)?;
            cfg.check_point(y)?;
            rho_circle_det(cfg, (x - y).abs())
        }
        _ => rho_hankel_det(cfg, x, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ff_kernel;
    use crate::quadrature::integrate_adaptive;

    fn rho2(q: f64) -> f64 {
        4.0 / PI * (PI * (0.5 - q) * (PI * q).cos() + (PI * q).sin())
    }

    #[test]
    fn toeplitz_examples() {
        assert!((toeplitz_coefficient(0, 0.0).re - 2.0).abs() < 1e-15);
        for q in [0.1, 0.37, 0.8] {
            assert!((toeplitz_coefficient(-1, q) - toeplitz_coefficient(1, q).conj()).norm() < 1e-15);
            assert!((toeplitz_coefficient(-3, q) - toeplitz_coefficient(3, q).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn toeplitz_closed_form_matches_quadrature() {
        for q in [0.13, 0.5, 0.71] {
            for l in [-3i64, -2, 0, 1, 2, 4] {
                let kink = q - 0.5;
                let f = |t: f64, part: usize| {
                    let a = Complex64::from_polar(1.0, 2.0 * PI * q) + Complex64::from_polar(1.0, 2.0 * PI * t);
                    let b = Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * PI * t);
                    let v = Complex64::from_polar(a.norm() * b.norm(), 2.0 * PI * l as f64 * t);
                    if part == 0 {
                        v.re
                    } else {
                        v.im
                    }
                };
                let mut re = 0.0;
                let mut im = 0.0;
                for (a, b) in [(-0.5, kink), (kink, 0.5)] {
                    re += integrate_adaptive(&|t| f(t, 0), a, b, 1e-14).0;
                    im += integrate_adaptive(&|t| f(t, 1), a, b, 1e-14).0;
                }
                let c = toeplitz_coefficient(l, q);
                assert!((c - Complex64::new(re, im)).norm() < 1e-10, "l={l} q={q} {c} vs {re} {im}");
            }
        }
    }

    #[test]
    fn circle_small_n() {
        let c1 = GeometryConfig::circle(1, 2.0);
        assert_eq!(rho_circle_det(&c1, 0.3).unwrap(), 0.5);
        let c2 = GeometryConfig::circle(2, 1.0);
        assert!((rho_circle_det(&c2, 0.5).unwrap() - 4.0 / PI).abs() < 1e-14);
        for q in [0.05, 0.3, 0.77] {
            assert!((rho_circle_det(&c2, q).unwrap() - rho2(q)).abs() < 1e-13);
        }
    }

    #[test]
    fn hankel_small_cases() {
        let h1 = GeometryConfig::harmonic(1);
        let v = rho_hankel_det(&h1, 0.3, -0.4).unwrap();
        assert!((v - (-(0.09 + 0.16) / 2.0f64).exp() / PI.sqrt()).abs() < 1e-15);
        let n1 = GeometryConfig::new(Kind::Neumann, 1, 2.0).unwrap();
        assert_eq!(rho_hankel_det(&n1, 0.3, 1.2).unwrap(), 0.5);
        let d3 = GeometryConfig::new(Kind::Dirichlet, 3, 1.0).unwrap();
        assert_eq!(rho_hankel_det(&d3, 0.0, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_equals_free_fermion_density() {
        for kind in [Kind::Harmonic, Kind::Dirichlet, Kind::Neumann] {
            for n in 1..=6 {
                let cfg = GeometryConfig::new(kind, n, 1.0).unwrap();
                for x in [0.17, 0.45, 0.9] {
                    let v = rho_hankel_det(&cfg, x, x).unwrap();
                    let k = ff_kernel(&cfg, x, x);
                    assert!((v - k).abs() < 1e-8 * k.max(1e-3), "{kind:?} n={n} x={x} {v} {k}");
                }
            }
        }
    }

    /// rho_2 in the harmonic well from the defining one-dimensional integral of psi_0.
    #[test]
    fn harmonic_two_particles_against_defining_integral() {
        let cfg = GeometryConfig::harmonic(2);
        let (x, y) = (0.4, -0.9);
        // psi_0(a, b) = |a - b| exp(-(a^2+b^2)/2) / sqrt(pi) for two particles.
        let psi = |a: f64, b: f64| (a - b).abs() * (-(a * a + b * b) / 2.0).exp() / PI.sqrt();
        let f = |t: f64| psi(x, t) * psi(y, t);
        let mut v = 0.0;
        for (a, b) in [(-15.0, y), (y, x), (x, 15.0)] {
            v += integrate_adaptive(&f, a, b, 1e-15).0;
        }
        let v = 2.0 * v;
        let d = rho_hankel_det(&cfg, x, y).unwrap();
        assert!((v - d).abs() < 1e-8, "{v} {d}");
    }

    #[test]
    fn swap_symmetry_exact() {
        let cfg = GeometryConfig::new(Kind::Dirichlet, 4, 1.0).unwrap();
        assert_eq!(rho_hankel_det(&cfg, 0.2, 0.7).unwrap(), rho_hankel_det(&cfg, 0.7, 0.2).unwrap());
    }
}
