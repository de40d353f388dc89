//! The four confining geometries, their orbitals, weights, orthogonal polynomials
//! and Christoffel–Darboux kernels.

use crate::error::{IbgError, Result};
use crate::linalg;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Circle,
    Harmonic,
    Dirichlet,
    Neumann,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Circle => "circle",
            Kind::Harmonic => "harmonic",
            Kind::Dirichlet => "dirichlet",
            Kind::Neumann => "neumann",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        match s.to_ascii_lowercase().as_str() {
            "circle" | "c" => Some(Kind::Circle),
            "harmonic" | "h" => Some(Kind::Harmonic),
            "dirichlet" | "d" => Some(Kind::Dirichlet),
            "neumann" | "n" => Some(Kind::Neumann),
            _ => None,
        }
    }

    /// Jacobi exponent of the interval geometries after the map s = cos(pi x / L).
    pub fn alpha(&self) -> f64 {
        match self {
            Kind::Dirichlet => 0.5,
            Kind::Neumann => -0.5,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub kind: Kind,
    /// Particle number.
    pub n: usize,
    /// System length (unused for the harmonic well).
    pub l: f64,
    pub alpha: f64,
    /// Bulk density N / L (1 for the harmonic well, where it has no meaning).
    pub rho0: f64,
}

impl GeometryConfig {
    pub fn new(kind: Kind, n: usize, l: f64) -> Result<Self> {
        if n == 0 {
            return Err(IbgError::InvalidArgument("particle number must be at least 1".into()));
        }
        if kind != Kind::Harmonic && !(l > 0.0 && l.is_finite()) {
            return Err(IbgError::InvalidArgument(format!("length must be positive, got {l}")));
        }
        let rho0 = if kind == Kind::Harmonic { 1.0 } else { n as f64 / l };
        Ok(GeometryConfig { kind, n, l, alpha: kind.alpha(), rho0 })
    }

    pub fn circle(n: usize, l: f64) -> Self {
        Self::new(Kind::Circle, n, l).expect("valid circle config")
    }

    pub fn harmonic(n: usize) -> Self {
        Self::new(Kind::Harmonic, n, 1.0).expect("valid harmonic config")
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self::new(self.kind, n, self.l).expect("valid config")
    }

    pub fn check_point(&self, x: f64) -> Result<()> {
        let ok = match self.kind {
            Kind::Harmonic => x.is_finite(),
            Kind::Circle => x.is_finite() && (0.0..self.l).contains(&x),
            _ => x.is_finite() && (0.0..=self.l).contains(&x),
        };
        if ok {
            Ok(())
        } else {
            let domain = match self.kind {
                Kind::Harmonic => "(-inf, inf)".to_string(),
                Kind::Circle => format!("[0, {})", self.l),
                _ => format!("[0, {}]", self.l),
            };
            Err(IbgError::OutOfDomain { value: x, domain })
        }
    }
}

/// Normalised Hermite functions phi_0..phi_{n-1} at x (three-term recurrence).
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let p0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(p0);
    if n == 1 {
        return out;
    }
    out.push(2f64.sqrt() * x * p0);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Derivatives of the normalised Hermite functions.
pub fn hermite_function_derivs(n: usize, x: f64) -> Vec<f64> {
    let phi = hermite_functions(n + 1, x);
    (0..n)
        .map(|k| {
            let kf = k as f64;
            let lower = if k > 0 { (kf / 2.0).sqrt() * phi[k - 1] } else { 0.0 };
            lower - ((kf + 1.0) / 2.0).sqrt() * phi[k + 1]
        })
        .collect()
}

/// Real orthonormal single-particle orbitals of the interval and harmonic geometries.
pub fn orbitals(cfg: &GeometryConfig, count: usize, x: f64) -> Vec<f64> {
    let l = cfg.l;
    match cfg.kind {
        Kind::Harmonic => hermite_functions(count, x),
        Kind::Dirichlet => {
            let c = (2.0 / l).sqrt();
            (0..count).map(|k| c * (PI * (k as f64 + 1.0) * x / l).sin()).collect()
        }
        Kind::Neumann => (0..count)
            .map(|k| {
                if k == 0 {
                    1.0 / l.sqrt()
                } else {
                    (2.0 / l).sqrt() * (PI * k as f64 * x / l).cos()
                }
            })
            .collect(),
        Kind::Circle => panic!("circle orbitals are complex; use circle_orbital"),
    }
}

/// Plane wave e^{2 pi i m x / L}/sqrt(L) with m centred on zero.
pub fn circle_orbital(n: usize, k: usize, x: f64, l: f64) -> Complex64 {
    let m = k as f64 - (n as f64 - 1.0) / 2.0;
    Complex64::from_polar(1.0 / l.sqrt(), 2.0 * PI * m * x / l)
}

/// Normalised ground state |psi_0| at the given N points.
pub fn ground_state(cfg: &GeometryConfig, points: &[f64]) -> Result<f64> {
    let n = cfg.n;
    if points.len() != n {
        return Err(IbgError::InvalidArgument(format!("expected {n} points, got {}", points.len())));
    }
    for &p in points {
        cfg.check_point(p)?;
    }
    let ln_fact = statrs::function::factorial::ln_factorial(n as u64);
    let log_abs = match cfg.kind {
        Kind::Circle => {
            let m = DMatrix::from_fn(n, n, |j, k| circle_orbital(n, j, points[k], cfg.l));
            let ld = linalg::log_det_complex(m);
            ld.re
        }
        _ => {
            let rows: Vec<Vec<f64>> = points.iter().map(|&p| orbitals(cfg, n, p)).collect();
            let m = DMatrix::from_fn(n, n, |j, k| rows[k][j]);
            let ld = linalg::log_det(m);
            if ld.sign == 0.0 {
                return Ok(0.0);
            }
            ld.log_abs
        }
    };
    Ok((log_abs - 0.5 * ln_fact).exp())
}

/// Free-fermion density matrix of M particles on the circle, sin(pi M x/L)/(L sin(pi x/L)).
pub fn free_fermion_dm_circle(m: usize, x: f64, l: f64) -> f64 {
    let t = PI * x / l;
    let s = t.sin();
    if s.abs() < 1e-8 {
        // Removable singularity: expand about the nearest multiple of pi.
        let k = (t / PI).round();
        let d = t - k * PI;
        let mf = m as f64;
        let sign = if ((mf - 1.0) * k) as i64 % 2 == 0 { 1.0 } else { -1.0 };
        return sign * mf / l * (1.0 - (mf * mf - 1.0) * d * d / 6.0);
    }
    (m as f64 * t).sin() / (l * s)
}

/// Free-fermion (Christoffel–Darboux) kernel of the N-particle system in the natural
/// coordinate of each geometry.
pub fn ff_kernel(cfg: &GeometryConfig, x: f64, y: f64) -> f64 {
    match cfg.kind {
        Kind::Circle => free_fermion_dm_circle(cfg.n, x - y, cfg.l),
        _ => {
            let a = orbitals(cfg, cfg.n, x);
            let b = orbitals(cfg, cfg.n, y);
            a.iter().zip(&b).map(|(p, q)| p * q).sum()
        }
    }
}

/// Weight family of the orthogonal polynomial description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// g^2 = exp(-x^2) on the real line.
    Hermite,
    /// g^2 = (1 - x^2)^a on [-1, 1].
    Jacobi(f64),
}

/// Monic orthogonal polynomials via their three-term recurrence, with norms.
#[derive(Debug, Clone)]
pub struct KernelContext {
    pub weight: Weight,
    /// Recurrence coefficients: p_{j+1} = x p_j - beta[j] p_{j-1}.
    pub beta: Vec<f64>,
    /// Norms N_j = integral of g^2 p_j^2.
    pub norms: Vec<f64>,
    pub degree: usize,
}

impl KernelContext {
    pub fn new(weight: Weight, degree: usize) -> Self {
        let m = degree + 2;
        let mut beta = vec![0.0; m];
        let n0 = match weight {
            Weight::Hermite => PI.sqrt(),
            Weight::Jacobi(a) => {
                use statrs::function::gamma::ln_gamma;
                (0.5 * PI.ln() + ln_gamma(a + 1.0) - ln_gamma(a + 1.5)).exp()
            }
        };
        for (j, b) in beta.iter_mut().enumerate().skip(1) {
            let jf = j as f64;
            *b = match weight {
                Weight::Hermite => jf / 2.0,
                Weight::Jacobi(a) => {
                    if j == 1 {
                        1.0 / (2.0 * a + 3.0)
                    } else {
                        jf * (jf + 2.0 * a) / ((2.0 * jf + 2.0 * a + 1.0) * (2.0 * jf + 2.0 * a - 1.0))
                    }
                }
            };
        }
        let mut norms = vec![n0; m];
        for j in 1..m {
            norms[j] = norms[j - 1] * beta[j];
        }
        KernelContext { weight, beta, norms, degree }
    }

    /// Context of the geometry in its polynomial variable (x for harmonic, s = cos(pi x/L) otherwise).
    pub fn for_geometry(cfg: &GeometryConfig) -> Result<Self> {
        match cfg.kind {
            Kind::Harmonic => Ok(Self::new(Weight::Hermite, cfg.n)),
            Kind::Dirichlet | Kind::Neumann => Ok(Self::new(Weight::Jacobi(cfg.alpha), cfg.n)),
            Kind::Circle => Err(IbgError::InvalidArgument("the circle has no real polynomial kernel".into())),
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match self.weight {
            Weight::Hermite => (-0.5 * x * x).exp(),
            Weight::Jacobi(a) => (1.0 - x * x).max(0.0).powf(0.5 * a),
        }
    }

    /// p_0..p_{count-1} at x.
    pub fn polys(&self, count: usize, x: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(count);
        if count == 0 {
            return p;
        }
        p.push(1.0);
        if count > 1 {
            p.push(x);
        }
        for j in 1..count.saturating_sub(1) {
            let next = x * p[j] - self.beta[j] * p[j - 1];
            p.push(next);
        }
        p
    }

    /// Monomial coefficients (constant term first) of p_j.
    pub fn monic_coefficients(&self, j: usize) -> Vec<f64> {
        let mut prev = vec![1.0];
        if j == 0 {
            return prev;
        }
        let mut cur = vec![0.0, 1.0];
        for i in 1..j {
            let mut next = vec![0.0; i + 2];
            for (k, c) in cur.iter().enumerate() {
                next[k + 1] += c;
            }
            for (k, c) in prev.iter().enumerate() {
                next[k] -= self.beta[i] * c;
            }
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Christoffel–Darboux kernel by direct summation.
    pub fn kernel_sum(&self, a: f64, b: f64) -> f64 {
        let n = self.degree;
        let pa = self.polys(n, a);
        let pb = self.polys(n, b);
        let s: f64 = (0..n).map(|j| pa[j] * pb[j] / self.norms[j]).sum();
        self.g(a) * self.g(b) * s
    }

    /// Christoffel–Darboux kernel; two-term form away from the diagonal.
    pub fn kernel(&self, a: f64, b: f64) -> f64 {
        let n = self.degree;
        if n == 0 {
            return 0.0;
        }
        if (a - b).abs() < 1e-8 {
            return self.kernel_sum(a, b);
        }
        let pa = self.polys(n + 1, a);
        let pb = self.polys(n + 1, b);
        self.g(a) * self.g(b) / self.norms[n - 1] * (pa[n] * pb[n - 1] - pa[n - 1] * pb[n]) / (a - b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{composite_rule, GaussLegendre};

    #[test]
    fn ground_state_examples() {
        let c = GeometryConfig::circle(2, 1.0);
        assert!((ground_state(&c, &[0.0, 0.5]).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let h = GeometryConfig::harmonic(1);
        assert!((ground_state(&h, &[0.0]).unwrap() - PI.powf(-0.25)).abs() < 1e-15);
        let d = GeometryConfig::new(Kind::Dirichlet, 3, 2.0).unwrap();
        assert_eq!(ground_state(&d, &[0.0, 0.4, 1.1]).unwrap(), 0.0);
        assert!(ground_state(&c, &[0.1]).is_err());
        assert!(ground_state(&c, &[0.1, 1.5]).is_err());
    }

    /// Product forms of the ground state serve as an independent check of the Slater route.
    #[test]
    fn ground_state_matches_product_forms() {
        let pts = [0.13, 0.42, 0.77];
        let l = 1.0;
        let n = 3;
        let mut prod = 1.0;
        for j in 0..n {
            for k in j + 1..n {
                prod *= (2.0 * (PI * (pts[k] - pts[j]) / l).sin()).abs();
            }
        }
        let c = (1.0 / l).powf(n as f64 / 2.0) / 6f64.sqrt();
        let v = ground_state(&GeometryConfig::circle(n, l), &pts).unwrap();
        assert!((v - c * prod).abs() < 1e-13);

        // Dirichlet: prod sin * prod |cos - cos| with constant fixed by normalisation of N=1.
        let d = GeometryConfig::new(Kind::Dirichlet, 1, l).unwrap();
        let v1 = ground_state(&d, &[0.3]).unwrap();
        assert!((v1 - (2.0f64).sqrt() * (PI * 0.3).sin()).abs() < 1e-14);
    }

    #[test]
    fn cd_kernel_examples() {
        let ctx = KernelContext::new(Weight::Hermite, 1);
        let (a, b) = (0.3, -0.8);
        assert!((ctx.kernel(a, b) - (-(a * a + b * b) / 2.0).exp() / PI.sqrt()).abs() < 1e-15);
        let ctx3 = KernelContext::new(Weight::Hermite, 3);
        assert!((ctx3.kernel_sum(0.3, 0.7) - ctx3.kernel(0.3, 0.7)).abs() < 1e-12);
        assert!((ctx3.kernel(0.3, 0.7) - ctx3.kernel(-0.3, -0.7)).abs() < 1e-15);
        // Hermite kernel equals the orbital sum.
        let h = GeometryConfig::harmonic(3);
        assert!((ff_kernel(&h, 0.3, 0.7) - ctx3.kernel(0.3, 0.7)).abs() < 1e-14);
    }

    #[test]
    fn orthogonality_of_recurrence_polynomials() {
        let gl = GaussLegendre::new(40);
        for weight in [Weight::Hermite, Weight::Jacobi(0.5), Weight::Jacobi(-0.5)] {
            let deg = 60;
            let ctx = KernelContext::new(weight, deg);
            // Integrate in a variable that removes endpoint singularities.
            let (nodes, wts): (Vec<f64>, Vec<f64>) = match weight {
                Weight::Hermite => composite_rule(&[-16.0, 16.0], 0.5, &gl),
                Weight::Jacobi(_) => composite_rule(&[0.0, PI], 0.1, &gl),
            };
            let mut gram = vec![vec![0.0; deg]; deg];
            for (t, w) in nodes.iter().zip(&wts) {
                let (x, jac) = match weight {
                    Weight::Hermite => (*t, 1.0),
                    Weight::Jacobi(_) => (t.cos(), t.sin()),
                };
                let g2w = ctx.g(x).powi(2) * jac * w;
                let p = ctx.polys(deg, x);
                for j in 0..deg {
                    for k in 0..=j {
                        gram[j][k] += g2w * p[j] * p[k];
                    }
                }
            }
            for j in 0..deg {
                for k in 0..=j {
                    let r = gram[j][k] / (ctx.norms[j] * ctx.norms[k]).sqrt();
                    let expect = if j == k { 1.0 } else { 0.0 };
                    assert!((r - expect).abs() < 1e-10, "{weight:?} j={j} k={k} r={r}");
                }
            }
        }
    }

    #[test]
    fn kernel_trace_equals_n() {
        let gl = GaussLegendre::new(30);
        for kind in [Kind::Harmonic, Kind::Dirichlet, Kind::Neumann] {
            let cfg = GeometryConfig::new(kind, 5, 1.0).unwrap();
            let (a, b) = if kind == Kind::Harmonic { (-12.0, 12.0) } else { (0.0, 1.0) };
            let (x, w) = composite_rule(&[a, b], 0.5, &gl);
            let tr: f64 = x.iter().zip(&w).map(|(x, w)| w * ff_kernel(&cfg, *x, *x)).sum();
            assert!((tr - 5.0).abs() < 1e-8, "{kind:?} {tr}");
        }
    }

    #[test]
    fn ff_circle_examples() {
        assert!((free_fermion_dm_circle(3, 0.0, 1.0) - 3.0).abs() < 1e-15);
        assert!(free_fermion_dm_circle(2, 0.5, 1.0).abs() < 1e-15);
        assert!((free_fermion_dm_circle(1, 0.37, 2.0) - 0.5).abs() < 1e-15);
        assert!((free_fermion_dm_circle(4, 1e-10, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn interval_kernel_in_s_matches_orbital_kernel() {
        for kind in [Kind::Dirichlet, Kind::Neumann] {
            let cfg = GeometryConfig::new(kind, 4, 1.0).unwrap();
            let ctx = KernelContext::for_geometry(&cfg).unwrap();
            let (x, y) = (0.23, 0.61);
            let (sx, sy) = ((PI * x).cos(), (PI * y).cos());
            let jac = (PI * (PI * x).sin() * PI * (PI * y).sin()).sqrt();
            assert!((ctx.kernel(sx, sy) * jac - ff_kernel(&cfg, x, y)).abs() < 1e-13, "{kind:?}");
        }
    }
}
