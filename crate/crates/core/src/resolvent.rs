//! Anti-diagonal density matrices from the resolvent-kernel ODE systems, and the
//! small-|x - y| Fredholm expansion.
//!
//! Harmonic trap, variable s on J = (-inf, -s] u [s, inf):
//!   R' = -2 s Rt - 2 Rt^2,  Rt' = (Q - Rt)/s,
//!   Q' = -2 (s + 2 Rt) A + 4 s R - 8 N s Rt,  A = R - 2 s^2 Rt - 2 s Rt^2,
//!   D' = 2 R D,  rho(-s; s) = Rt D / 2.
//! Q = s Rt' + Rt obeys Q^2 = A^2 + 8 s^2 R Rt - 8 N s^2 Rt^2, used as a residual.
//!
//! Interval (s = cos(pi x / L), J = [-1, -s] u [s, 1], a = N + alpha):
//!   sigma' = -2 a s R0 - 2 (1 - s^2) R0^2,  R0' = (-V/(1 - s^2) - R0)/s,
//!   V^2 = P^2 - 4 s^2 R0^2 M, differentiated once to propagate V,
//!   D' = 2 sigma D / (1 - s^2),  rho(L - x; x) = (pi/L) sin(pi x/L) R0 D / 2.

use crate::error::{IbgError, Result};
use crate::geometry::{ff_kernel, hermite_function_derivs, hermite_functions, GeometryConfig, Kind, KernelContext, Weight};
use crate::quadrature::{integrate_adaptive, GaussLegendre};
use crate::series::{integrate_line_with, OdeSystem, Series, StepOptions};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

/// Coupling constant of the impenetrable gas.
pub const XI: f64 = 2.0;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ResolventKind {
    Harmonic,
    Jacobi { alpha: f64 },
}

/// State of the system at one target point.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventSample {
    pub s: f64,
    /// Diagonal resolvent R (harmonic) or sigma = (1 - s^2) R (interval).
    pub diag: f64,
    /// Rt (harmonic) or R0 (interval).
    pub anti: f64,
    /// Q (harmonic) or V (interval).
    pub aux: f64,
    pub fredholm_det: f64,
    /// Sign of h = s + 2 Rt or of F = -(a s + 2 (1 - s^2) R0); 0 when evaluated by contour average.
    pub branch_sign: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ResidualReport {
    pub first_integral: f64,
    pub ode_diag: f64,
    pub ode_anti: f64,
}

impl ResidualReport {
    fn absorb(&mut self, r: [f64; 3]) {
        self.first_integral = self.first_integral.max(r[0]);
        self.ode_diag = self.ode_diag.max(r[1]);
        self.ode_anti = self.ode_anti.max(r[2]);
    }
    fn max(&self) -> f64 {
        self.first_integral.max(self.ode_diag).max(self.ode_anti)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSolution {
    pub kind: ResolventKind,
    pub n: usize,
    pub xi: f64,
    pub s_start: f64,
    pub samples: Vec<ResolventSample>,
    pub residuals: ResidualReport,
}

#[derive(Debug, Clone, Copy)]
pub struct ResolventOptions {
    pub step: StepOptions,
    /// Height of the complex detour above the real s axis.
    pub eta: f64,
    /// Residual gate on every accepted step.
    pub residual_tol: f64,
    /// Points of the contour average used at the singular point s = 0.
    pub circle_points: usize,
}

impl ResolventOptions {
    fn harmonic() -> Self {
        ResolventOptions { step: StepOptions::default(), eta: 0.3, residual_tol: 1e-7, circle_points: 32 }
    }
    fn jacobi() -> Self {
        ResolventOptions { step: StepOptions::default(), eta: 0.15, residual_tol: 1e-7, circle_points: 32 }
    }
}

/// Residual of sum(terms) = 0 scaled by the term magnitudes, so that a side
/// which cancels internally does not inflate it.
fn balance(terms: &[C64]) -> f64 {
    let s: C64 = terms.iter().sum();
    s.norm() / (terms.iter().map(|t| t.norm()).sum::<f64>() + 1e-300)
}

/// Residual of (sum of `terms`)^2 = `rhs_sq`, measured before squaring against the
/// nearer root and scaled by the term magnitudes, so cancellation is not mistaken
/// for a violation.
fn root_residual(terms: &[C64], rhs_sq: C64, rhs_scale: f64) -> f64 {
    let lhs: C64 = terms.iter().sum();
    let root = rhs_sq.sqrt();
    let d = (lhs - root).norm().min((lhs + root).norm());
    let scale: f64 = terms.iter().map(|t| t.norm()).sum::<f64>() + rhs_scale.sqrt();
    d / (scale + 1e-300)
}

// ------------------------------------------------------------------- harmonic

struct HarmonicSystem {
    n: f64,
}

impl OdeSystem for HarmonicSystem {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, s: &Series, y: &[Series]) -> Vec<Series> {
        let (r, rt, q, d) = (&y[0], &y[1], &y[2], &y[3]);
        let rt2 = rt * rt;
        let dr = -(&(s * rt) + &rt2).scale_re(2.0);
        let drt = (q - rt).div(s);
        let a = &(r - &(&(s * s) * rt).scale_re(2.0)) - &(s * &rt2).scale_re(2.0);
        let h = s + &rt.scale_re(2.0);
        let dq = &(&(&h * &a).scale_re(-2.0) + &(s * r).scale_re(4.0)) - &(s * rt).scale_re(8.0 * self.n);
        let dd = (r * d).scale_re(2.0);
        vec![dr, drt, dq, dd]
    }
}

/// Relative residuals: first integral, squared R equation, Rt equation.
fn harmonic_residuals(n: f64, s: C64, y: &[C64], cf: &[Series]) -> [f64; 3] {
    let (r, rt, q) = (y[0], y[1], y[2]);
    let r1 = cf[0].0[1];
    let r2 = 2.0 * cf[0].0[2];
    let t1 = cf[1].0[1];
    let t2 = 2.0 * cf[1].0[2];
    let a = r - 2.0 * s * s * rt - 2.0 * s * rt * rt;
    let fi = balance(&[q * q, -(a * a), -8.0 * s * s * r * rt, 8.0 * n * s * s * rt * rt]);
    let h = s + 2.0 * rt;
    let sh = -2.0 * rt;
    let bracket = [(r + s * r1).powi(2), -4.0 * s * s * sh * r, -2.0 * n * s * s * sh * sh];
    let ode_r = root_residual(
        &[s * r2, 2.0 * r1, -2.0 * s * sh],
        4.0 * h * h * bracket.iter().sum::<C64>(),
        4.0 * (h * h).norm() * bracket.iter().map(|b| b.norm()).sum::<f64>(),
    );
    let bt = [(rt + s * t1).powi(2), 8.0 * n * s * s * rt * rt, -16.0 * s.powi(3) * rt.powi(3)];
    let pre = 4.0 * (s - 2.0 * rt).powi(2);
    let ode_t = root_residual(
        &[s * t2, 2.0 * t1, 8.0 * n * s * rt, -24.0 * s * s * rt * rt],
        pre * bt.iter().sum::<C64>(),
        pre.norm() * bt.iter().map(|b| b.norm()).sum::<f64>(),
    );
    [fi, ode_r, ode_t]
}

/// Leading-order large-s data: R, Rt, Q from xi K, D from the tail integral.
pub fn harmonic_asymptotic_state(n: usize, s: f64) -> [f64; 4] {
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let phi = hermite_functions(n, s);
    let dphi = hermite_function_derivs(n, s);
    let mut k_diag = 0.0;
    let mut k_anti = 0.0;
    let mut dk_anti = 0.0;
    for j in 0..n {
        let pj = if j % 2 == 0 { 1.0 } else { -1.0 };
        k_diag += phi[j] * phi[j];
        k_anti += pj * phi[j] * phi[j];
        dk_anti += 2.0 * pj * phi[j] * dphi[j];
    }
    let r = XI * k_diag;
    let rt = sign * XI * k_anti;
    let q = sign * XI * (s * dk_anti + k_anti);
    let dens = |t: f64| hermite_functions(n, t).iter().map(|p| p * p).sum::<f64>();
    let (tail, _) = integrate_adaptive(&dens, s, s + 12.0, 1e-16);
    let d = (-2.0 * XI * tail).exp();
    [r, rt, q, d]
}

/// (R, Rt, D) on J = (-inf, -s] u [s, inf) by Nyström on [s, s + 12] and its mirror.
fn harmonic_direct(n: usize, s: f64, per_piece: usize) -> [f64; 3] {
    let ctx = KernelContext::new(Weight::Hermite, n);
    let gl = GaussLegendre::new(per_piece);
    let mut nodes = Vec::new();
    let mut sqrt_w = Vec::new();
    for k in 0..4 {
        let (t, w) = gl.mapped(s + 3.0 * k as f64, s + 3.0 * (k + 1) as f64);
        for (ti, wi) in t.iter().zip(&w) {
            nodes.push(*ti);
            sqrt_w.push(wi.sqrt());
            nodes.push(-*ti);
            sqrt_w.push(wi.sqrt());
        }
    }
    let m = nodes.len();
    let a = DMatrix::from_fn(m, m, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - XI * sqrt_w[i] * ctx.kernel(nodes[i], nodes[j]) * sqrt_w[j]
    });
    let ld = crate::linalg::log_det(a.clone());
    let lu = a.lu();
    let res = |x: f64, y: f64| {
        let rhs = DVector::from_fn(m, |i, _| XI * sqrt_w[i] * ctx.kernel(nodes[i], y));
        let f = lu.solve(&rhs).expect("nonsingular Nyström matrix");
        let mut r = XI * ctx.kernel(x, y);
        for j in 0..m {
            r += XI * sqrt_w[j] * ctx.kernel(x, nodes[j]) * f[j];
        }
        r
    };
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    [res(s, s), sign * res(-s, s), ld.sign * ld.log_abs.exp()]
}

/// A target value together with the state it was read from.
struct Reached {
    state: Option<Vec<C64>>,
    value: C64,
}

/// Mean of `value` over the circle |z - centre| = r, entered at centre + i r.
#[allow(clippy::too_many_arguments)]
fn circle_mean<S, V, F>(
    sys: &S,
    z: C64,
    y: &[C64],
    centre: C64,
    r: f64,
    opts: &ResolventOptions,
    value: &V,
    check: &mut F,
) -> Result<C64>
where
    S: OdeSystem,
    V: Fn(C64, &[C64]) -> C64,
    F: FnMut(C64, &[C64], &[Series]) -> Result<()>,
{
    let m = opts.circle_points;
    let mut acc = value(z, y);
    let mut zc = z;
    let mut yc = y.to_vec();
    for k in 1..m {
        let zn = centre + C64::from_polar(r, PI / 2.0 + 2.0 * PI * k as f64 / m as f64);
        yc = integrate_line_with(sys, zc, &yc, zn, &opts.step, &mut *check)?;
        zc = zn;
        acc += value(zc, &yc);
    }
    Ok(acc / m as f64)
}

/// Walks from the real start point up to Im = eta, along that line, and down a
/// vertical spur to every real target. A target at the singular point s = 0 is
/// evaluated by the mean value of `value` over the circle |s| = eta.
fn comb<S, V, F>(
    sys: &S,
    max_radius: impl Fn(f64) -> f64,
    start: f64,
    y0: &[C64],
    targets: &[f64],
    opts: &ResolventOptions,
    value: V,
    check: &mut F,
) -> Result<Vec<Reached>>
where
    S: OdeSystem,
    V: Fn(C64, &[C64]) -> C64,
    F: FnMut(C64, &[C64], &[Series]) -> Result<()>,
{
    let eta = opts.eta;
    let mut idx: Vec<usize> = (0..targets.len()).collect();
    idx.sort_by(|&a, &b| targets[b].partial_cmp(&targets[a]).unwrap());
    let mut z = c(start);
    let mut y = y0.to_vec();
    let top = C64::new(start, eta);
    y = integrate_line_with(sys, z, &y, top, &opts.step, &mut *check)?;
    z = top;
    let mut out: Vec<Option<Reached>> = (0..targets.len()).map(|_| None).collect();
    for &i in &idx {
        let t = targets[i];
        let anchor = C64::new(t, eta);
        y = integrate_line_with(sys, z, &y, anchor, &opts.step, &mut *check)?;
        z = anchor;
        if t.abs() < 1e-12 {
            // A small radius keeps the trapezoid average converged.
            let r = eta.min(0.1);
            let entry = C64::new(0.0, r);
            let ye = integrate_line_with(sys, z, &y, entry, &opts.step, &mut *check)?;
            let v = circle_mean(sys, entry, &ye, c(0.0), r, opts, &value, &mut *check)?;
            out[i] = Some(Reached { state: None, value: v });
            continue;
        }
        match integrate_line_with(sys, z, &y, c(t), &opts.step, &mut *check) {
            Ok(yt) => {
                let v = value(c(t), &yt);
                out[i] = Some(Reached { state: Some(yt), value: v });
            }
            Err(_) => {
                // The target sits on an apparent singularity of the propagated form;
                // the density is analytic there, so average it over a small circle.
                let r = 0.5 * eta.min(t.abs()).min(max_radius(t));
                let entry = C64::new(t, r);
                let ye = integrate_line_with(sys, z, &y, entry, &opts.step, &mut *check)?;
                let v = circle_mean(sys, entry, &ye, c(t), r, opts, &value, &mut *check)?;
                out[i] = Some(Reached { state: None, value: v });
            }
        }
    }
    Ok(out.into_iter().map(|r| r.unwrap()).collect())
}

/// Starting state at s0 from the Nyström values; Q is fixed up to sign by the first
/// integral and the sign is read off a finite-difference estimate of s Rt' + Rt.
fn harmonic_start(n: usize, s0: f64) -> Result<Vec<C64>> {
    let nf = n as f64;
    let d = harmonic_direct(n, s0, 40);
    let h = 1e-4;
    let f = |t: f64| harmonic_direct(n, t, 40)[1];
    let rtp = (f(s0 - 2.0 * h) - 8.0 * f(s0 - h) + 8.0 * f(s0 + h) - f(s0 + 2.0 * h)) / (12.0 * h);
    let (r, rt) = (d[0], d[1]);
    let a = r - 2.0 * s0 * s0 * rt - 2.0 * s0 * rt * rt;
    let q2 = a * a + 8.0 * s0 * s0 * r * rt - 8.0 * nf * s0 * s0 * rt * rt;
    if q2 < -1e-12 * a * a {
        return Err(IbgError::Branch { location: format!("s = {s0}"), argument: q2 });
    }
    let q = q2.max(0.0).sqrt() * (s0 * rtp + rt).signum();
    Ok(vec![c(r), c(rt), c(q), c(d[2])])
}

/// Integrates the harmonic system inward from s0 = sqrt(2N) + 2 to the points |x|.
/// Points beyond s0 are evaluated from the Nyström resolvent directly.
pub fn solve_harmonic_resolvent(n: usize, xs: &[f64]) -> Result<ResolventSolution> {
    if n == 0 {
        return Err(IbgError::InvalidArgument("N must be at least 1".into()));
    }
    let opts = ResolventOptions::harmonic();
    let nf = n as f64;
    let s0 = (2.0 * nf).sqrt() + 2.0;
    let y0 = harmonic_start(n, s0)?;
    let mut residuals = ResidualReport::default();
    let tol = opts.residual_tol;
    let mut check = |z: C64, y: &[C64], cf: &[Series]| -> Result<()> {
        let r = harmonic_residuals(nf, z, y, cf);
        if r[0] > tol {
            return Err(IbgError::Branch { location: format!("s = {z}"), argument: r[0] });
        }
        if r[1].max(r[2]) > tol {
            return Err(IbgError::Integration { location: format!("s = {z}"), reason: format!("ODE residual {r:?}") });
        }
        residuals.absorb(r);
        Ok(())
    };
    let inner: Vec<f64> = xs.iter().map(|x| x.abs()).filter(|s| *s < s0).collect();
    let sys = HarmonicSystem { n: nf };
    let reached = comb(&sys, |_| f64::INFINITY, s0, &y0, &inner, &opts, |_, y| 0.5 * y[1] * y[3], &mut check)?;
    let mut it = reached.into_iter();
    let mut samples = Vec::with_capacity(xs.len());
    for &x in xs {
        let s = x.abs();
        if s >= s0 {
            let d = harmonic_direct(n, s, 40);
            samples.push(ResolventSample {
                s,
                diag: d[0],
                anti: d[1],
                aux: f64::NAN,
                fredholm_det: d[2],
                branch_sign: (s + 2.0 * d[1]).signum(),
                rho: 0.5 * d[1] * d[2],
            });
            continue;
        }
        let r = it.next().unwrap();
        samples.push(match r.state {
            Some(y) => ResolventSample {
                s,
                diag: y[0].re,
                anti: y[1].re,
                aux: y[2].re,
                fredholm_det: y[3].re,
                branch_sign: (s + 2.0 * y[1].re).signum(),
                rho: r.value.re,
            },
            None => ResolventSample {
                s,
                diag: f64::NAN,
                anti: f64::NAN,
                aux: f64::NAN,
                fredholm_det: f64::NAN,
                branch_sign: 0.0,
                rho: r.value.re,
            },
        });
    }
    Ok(ResolventSolution { kind: ResolventKind::Harmonic, n, xi: XI, s_start: s0, samples, residuals })
}

/// rho_N(-x; x) in the harmonic trap.
pub fn rho_harmonic_antidiag(n: usize, xs: &[f64]) -> Result<Vec<f64>> {
    Ok(solve_harmonic_resolvent(n, xs)?.samples.iter().map(|s| s.rho).collect())
}

// ------------------------------------------------------------------- interval

struct JacobiSystem {
    n: f64,
    alpha: f64,
}

impl JacobiSystem {
    fn a(&self) -> f64 {
        self.n + self.alpha
    }
}

impl OdeSystem for JacobiSystem {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, s: &Series, y: &[Series]) -> Vec<Series> {
        let a = self.a();
        let nn = self.n * (self.n + 2.0 * self.alpha);
        let (sg, r0, v, d) = (&y[0], &y[1], &y[2], &y[3]);
        let s2 = s * s;
        let w = s2.scale_re(-1.0).add_re(1.0);
        let r02 = r0 * r0;
        let dsg = -(&(s * r0).scale_re(2.0 * a) + &(&w * &r02).scale_re(2.0));
        let dr0 = (-(&v.div(&w) + r0)).div(s);
        let p = &(sg + &(&s2 * r0).scale_re(2.0 * a)) - &(&(s * &w) * &r02).scale_re(2.0);
        let m = &(&sg.scale_re(2.0) * s).add_re(nn) - &(&(s * &w) * r0).scale_re(4.0 * a);
        let one_m3 = s2.scale_re(-3.0).add_re(1.0);
        let dp = &(&(&dsg + &(s * r0).scale_re(4.0 * a)) + &(&s2 * &dr0).scale_re(2.0 * a))
            - &(&(&one_m3 * &r02).scale_re(2.0) + &(&(s * &w) * &(r0 * &dr0)).scale_re(4.0));
        let dm = &(&(sg.scale_re(2.0) + (s * &dsg).scale_re(2.0)) - &(&one_m3 * r0).scale_re(4.0 * a))
            - &(&(s * &w) * &dr0).scale_re(4.0 * a);
        let d_s2r02m = &(&(&(s * &r02) * &m).scale_re(2.0) + &(&(&s2 * &(r0 * &dr0)) * &m).scale_re(2.0))
            + &(&(&s2 * &r02) * &dm);
        let dv = (&(&p * &dp) - &d_s2r02m.scale_re(2.0)).div(v);
        let dd = (&sg.div(&w) * d).scale_re(2.0);
        vec![dsg, dr0, dv, dd]
    }
}

fn jacobi_pm(n: f64, alpha: f64, s: C64, sg: C64, r0: C64) -> (C64, C64) {
    let a = n + alpha;
    let w = 1.0 - s * s;
    let p = sg + 2.0 * a * s * s * r0 - 2.0 * s * w * r0 * r0;
    let m = n * (n + 2.0 * alpha) + 2.0 * s * sg - 4.0 * a * s * w * r0;
    (p, m)
}

/// Relative residuals: V^2 identity, sigma equation, R0 equation.
fn jacobi_residuals(n: f64, alpha: f64, s: C64, y: &[C64], cf: &[Series]) -> [f64; 3] {
    let a = n + alpha;
    let (sg, r0, v) = (y[0], y[1], y[2]);
    let w = 1.0 - s * s;
    let (p, m) = jacobi_pm(n, alpha, s, sg, r0);
    let fi = balance(&[v * v, -(p * p), 4.0 * s * s * r0 * r0 * m]);
    let sg1 = cf[0].0[1];
    let sg2 = 2.0 * cf[0].0[2];
    let f = -(a * s + 2.0 * w * r0);
    let x = s * w / f * (a * a * s + 2.0 * s * sg1 - w * sg2) + (1.0 + s * s) * f + 2.0 * a * s;
    let asf = a * s + f;
    let yy = 2.0 * w * sg - 2.0 * a * s * s * asf - s * asf * asf;
    let z = -4.0 * s * s * asf * asf * (n * (n + 2.0 * alpha) + 2.0 * s * sg + 2.0 * a * s * asf);
    let ode_sg = (x * x - yy * yy - z).norm() / ((x * x).norm() + (yy * yy).norm() + z.norm() + 1e-300);
    let r1 = cf[1].0[1];
    let r2 = 2.0 * cf[1].0[2];
    let bj = [w * w * (r0 + s * r1).powi(2), 4.0 * s * s * r0 * r0 * ((2.0 * s * r0 - a).powi(2) - alpha * alpha)];
    let pre = 4.0 * (-a * s + 2.0 * (1.0 + s * s) * r0).powi(2);
    let ode_r0 = root_residual(
        &[
            s * w * w * r2,
            2.0 * w * (1.0 - 2.0 * s * s) * r1,
            8.0 * s * r0 * (2.0 * s * r0 - a / 2.0) * (2.0 * s * r0 - a),
            -2.0 * (w + 2.0 * alpha * alpha) * s * r0,
        ],
        pre * bj.iter().sum::<C64>(),
        pre.norm() * bj.iter().map(|b| b.norm()).sum::<f64>(),
    );
    [fi, ode_sg, ode_r0]
}

/// Fredholm determinant and resolvent entries on J = [-1, -s] u [s, 1] by Nyström
/// in theta = arccos(t), which removes the endpoint singularity of the weight.
struct JacobiNystrom {
    ctx: KernelContext,
    nodes: Vec<f64>,
    sqrt_w: Vec<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    log_det: f64,
    det_sign: f64,
}

impl JacobiNystrom {
    fn new(n: usize, alpha: f64, s: f64, per_piece: usize) -> Self {
        let ctx = KernelContext::new(Weight::Jacobi(alpha), n);
        let th = s.acos();
        let gl = GaussLegendre::new(per_piece);
        let mut nodes = Vec::new();
        let mut sqrt_w = Vec::new();
        for (a, b) in [(0.0, th), (PI - th, PI)] {
            let (t, w) = gl.mapped(a, b);
            for (ti, wi) in t.iter().zip(&w) {
                nodes.push(ti.cos());
                sqrt_w.push((wi * ti.sin()).sqrt());
            }
        }
        let m = nodes.len();
        let a = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d - XI * sqrt_w[i] * ctx.kernel(nodes[i], nodes[j]) * sqrt_w[j]
        });
        let ld = crate::linalg::log_det(a.clone());
        JacobiNystrom { ctx, nodes, sqrt_w, lu: a.lu(), log_det: ld.log_abs, det_sign: ld.sign }
    }

    fn resolvent(&self, a: f64, b: f64) -> f64 {
        let m = self.nodes.len();
        let rhs = DVector::from_fn(m, |i, _| XI * self.sqrt_w[i] * self.ctx.kernel(self.nodes[i], b));
        let f = self.lu.solve(&rhs).expect("nonsingular Nyström matrix");
        let mut r = XI * self.ctx.kernel(a, b);
        for j in 0..m {
            r += XI * self.sqrt_w[j] * self.ctx.kernel(a, self.nodes[j]) * f[j];
        }
        r
    }

    fn det(&self) -> f64 {
        self.det_sign * self.log_det.exp()
    }
}

/// (sigma, R0, D) at s from the Nyström discretisation.
fn jacobi_direct(n: usize, alpha: f64, s: f64) -> [f64; 3] {
    let ny = JacobiNystrom::new(n, alpha, s, 40);
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let r = ny.resolvent(s, s);
    let r0 = sign * ny.resolvent(-s, s);
    [(1.0 - s * s) * r, r0, ny.det()]
}

fn fold_interval(x: f64, l: f64) -> f64 {
    let q = x / l;
    if q > 0.5 { 1.0 - q } else { q }
}

/// Integrates the interval system inward from s_0 = cos(theta_0) to s = cos(pi x / L).
pub fn solve_jacobi_resolvent(cfg: &GeometryConfig, xs: &[f64]) -> Result<ResolventSolution> {
    if !matches!(cfg.kind, Kind::Dirichlet | Kind::Neumann) {
        return Err(IbgError::InvalidArgument("interval geometry required".into()));
    }
    let n = cfg.n;
    let nf = n as f64;
    let alpha = cfg.alpha;
    let l = cfg.l;
    let mut qs = Vec::with_capacity(xs.len());
    for &x in xs {
        cfg.check_point(x)?;
        let q = fold_interval(x, l);
        if q == 0.0 && cfg.kind == Kind::Neumann {
            return Err(IbgError::OutOfDomain { value: x, domain: "(0, L) for the Neumann antidiagonal".into() });
        }
        qs.push(q);
    }
    let theta_min = qs.iter().copied().filter(|q| *q > 0.0).fold(0.5, f64::min) * PI;
    let theta0 = (0.05 * PI).min(0.5 * theta_min);
    let s0 = theta0.cos();
    let opts = ResolventOptions::jacobi();
    // Start: direct values; V fixed up to sign by the quadratic identity and the sign
    // taken from a finite-difference estimate of -(1 - s^2)(R0 + s R0').
    let st = jacobi_direct(n, alpha, s0);
    let h = 1e-5 * (1.0 - s0);
    let rp = jacobi_direct(n, alpha, s0 + h)[1];
    let rm = jacobi_direct(n, alpha, s0 - h)[1];
    let v_fd = -(1.0 - s0 * s0) * (st[1] + s0 * (rp - rm) / (2.0 * h));
    let (p, m) = jacobi_pm(nf, alpha, c(s0), c(st[0]), c(st[1]));
    let g = (p * p - 4.0 * s0 * s0 * st[1] * st[1] * m).re;
    if g < -1e-12 * (p * p).norm() {
        return Err(IbgError::Branch { location: format!("s = {s0}"), argument: g });
    }
    let v0 = g.max(0.0).sqrt() * v_fd.signum();
    let y0 = vec![c(st[0]), c(st[1]), c(v0), c(st[2])];
    let mut residuals = ResidualReport::default();
    let tol = opts.residual_tol;
    let mut check = |z: C64, y: &[C64], cf: &[Series]| -> Result<()> {
        let r = jacobi_residuals(nf, alpha, z, y, cf);
        if r[0] > tol {
            return Err(IbgError::Branch { location: format!("s = {z}"), argument: r[0] });
        }
        if r[1].max(r[2]) > tol {
            return Err(IbgError::Integration { location: format!("s = {z}"), reason: format!("ODE residual {r:?}") });
        }
        residuals.absorb(r);
        Ok(())
    };
    let inner: Vec<f64> = qs.iter().filter(|q| **q > 0.0).map(|q| (PI * q).cos()).collect();
    let sys = JacobiSystem { n: nf, alpha };
    let pref = PI / l;
    let value = |z: C64, y: &[C64]| pref * (1.0 - z * z).sqrt() * 0.5 * y[1] * y[3];
    let reached = comb(&sys, |t| 1.0 - t.abs(), s0, &y0, &inner, &opts, value, &mut check)?;
    let mut it = reached.into_iter();
    let a = nf + alpha;
    let mut samples = Vec::with_capacity(xs.len());
    for &q in &qs {
        if q == 0.0 {
            samples.push(ResolventSample {
                s: 1.0,
                diag: 0.0,
                anti: f64::NAN,
                aux: f64::NAN,
                fredholm_det: 1.0,
                branch_sign: 0.0,
                rho: 0.0,
            });
            continue;
        }
        let s = (PI * q).cos();
        let r = it.next().unwrap();
        samples.push(match r.state {
            Some(y) => ResolventSample {
                s,
                diag: y[0].re,
                anti: y[1].re,
                aux: y[2].re,
                fredholm_det: y[3].re,
                branch_sign: (-(a * s + 2.0 * (1.0 - s * s) * y[1].re)).signum(),
                rho: r.value.re,
            },
            None => ResolventSample {
                s,
                diag: f64::NAN,
                anti: f64::NAN,
                aux: f64::NAN,
                fredholm_det: f64::NAN,
                branch_sign: 0.0,
                rho: r.value.re,
            },
        });
    }
    Ok(ResolventSolution { kind: ResolventKind::Jacobi { alpha }, n, xi: XI, s_start: s0, samples, residuals })
}

pub fn rho_dn_antidiag(cfg: &GeometryConfig, xs: &[f64]) -> Result<Vec<f64>> {
    Ok(solve_jacobi_resolvent(cfg, xs)?.samples.iter().map(|s| s.rho).collect())
}

/// Largest residual of a solution, for gates.
pub fn max_residual(sol: &ResolventSolution) -> f64 {
    sol.residuals.max()
}

// ------------------------------------------------------------------- Fredholm

#[derive(Debug, Clone, Serialize)]
pub struct FredholmExpansion {
    pub order: usize,
    pub xi: f64,
    /// Term n of the expansion, n = 0..=order.
    pub terms: Vec<f64>,
    pub sum: f64,
    pub warning: Option<String>,
}

/// rho_N(x; y) = sum_n (-xi)^n / n! int_{[x,y]^n} det [[K(x,y), K(x,t_j)], [K(t_i,y), K(t_i,t_j)]].
pub fn fredholm_expansion(cfg: &GeometryConfig, x: f64, y: f64, order: usize) -> Result<FredholmExpansion> {
    cfg.check_point(x)?;
    cfg.check_point(y)?;
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let q = 14usize;
    let (nodes, weights) = GaussLegendre::new(q).mapped(lo, hi);
    let k = |a: f64, b: f64| ff_kernel(cfg, a, b);
    let kn: Vec<Vec<f64>> = nodes.iter().map(|&a| nodes.iter().map(|&b| k(a, b)).collect()).collect();
    let kx: Vec<f64> = nodes.iter().map(|&t| k(x, t)).collect();
    let ky: Vec<f64> = nodes.iter().map(|&t| k(t, y)).collect();
    let kxy = k(x, y);
    let max_order = order.min(cfg.n.saturating_sub(1));
    let mut terms = vec![0.0; order + 1];
    terms[0] = kxy;
    let mut fact = 1.0;
    for n in 1..=max_order {
        fact *= n as f64;
        let total = q.pow(n as u32);
        let mut acc = 0.0;
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
            m[(0, 0)] = kxy;
            let mut w = 1.0;
            for (i, &a) in idx.iter().enumerate() {
                w *= weights[a];
                m[(0, i + 1)] = kx[a];
                m[(i + 1, 0)] = ky[a];
                for (j, &b) in idx.iter().enumerate() {
                    m[(i + 1, j + 1)] = kn[a][b];
                }
            }
            acc += w * m.determinant();
            for d in idx.iter_mut() {
                *d += 1;
                if *d < q {
                    break;
                }
                *d = 0;
            }
        }
        terms[n] = (-XI).powi(n as i32) / fact * acc;
    }
    let mut warning = None;
    for n in 2..=max_order {
        if terms[n].abs() >= terms[n - 1].abs() && terms[n - 1] != 0.0 {
            warning = Some(format!("term {n} does not decrease; |x - y| may be too large"));
            break;
        }
    }
    Ok(FredholmExpansion { order, xi: XI, sum: terms.iter().sum(), terms, warning })
}
