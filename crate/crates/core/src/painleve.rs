//! Painlevé characterisations: the circle sigma-form in u = e^{2 pi i x / L}, its
//! thermodynamic limit sigma_V(t), and the companion transcendent built from the
//! sine-kernel resolvent.
//!
//! The sigma-forms are quadratic in the second derivative. Each is differentiated
//! once; the common factor sigma'' cancels and leaves a third-order equation that is
//! linear in sigma''', so no square-root branch has to be followed. The original
//! form is evaluated at every accepted step as a residual check.

use crate::error::{IbgError, Result};
use crate::series::{
    integrate_line_with, solve_series_by_residual, OdeSystem, Series, StepOptions,
};
use crate::special::asymptotic_constant;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    Bose,
    FreeFermi,
}

impl Variant {
    pub fn xi(&self) -> f64 {
        match self {
            Variant::Bose => 2.0,
            Variant::FreeFermi => 0.0,
        }
    }
}

/// One point of an integrated path.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaSample {
    /// x / L for the circle, t for thermodynamic quantities.
    pub x: f64,
    pub u: (f64, f64),
    pub sigma: (f64, f64),
    /// log(rho / rho_0), complex before the reality check.
    pub log_rho: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaSolution {
    pub n: usize,
    pub variant: Variant,
    pub series_at_u1: Vec<(f64, f64)>,
    pub path: Vec<SigmaSample>,
    /// Largest relative residual of the second-order form over accepted steps.
    pub max_residual: f64,
}

// ---------------------------------------------------------------- circle sigma-form

/// Residual of the circle sigma-form and a magnitude scale for it.
fn circle_residual(n: usize, u: C64, s: C64, s1: C64, s2: C64) -> (C64, f64) {
    let k = c((n * n) as f64 - 1.0);
    let w = u - 1.0;
    let a = u * u * w * w * s2 * s2;
    let b = s - w * s1 + 1.0;
    let cc = 4.0 * s1 * (s - u * s1) - k * (s - w * s1);
    let r = a + b * cc;
    (r, a.norm() + (b * cc).norm() + (b.norm() * (4.0 * s1 * (s - u * s1)).norm()))
}

/// Residual in the scaled variable v = (u - 1) / h, multiplied by h^2 so that all
/// terms stay O(1) when h ~ 1/N.
fn circle_residual_series(n: usize, h: f64, v: &Series, s: &Series) -> Series {
    let len = s.len();
    let k = c((n * n) as f64 - 1.0) * (h * h);
    let u = v.scale_re(h).add_re(1.0);
    let s1 = s.deriv();
    let s2 = s1.deriv();
    let a = &(&(&u * &u) * &(v * v)) * &(&s2 * &s2);
    let b = (s - &(v * &s1)).add_re(1.0);
    let cc = &(&(&s1 * s).scale_re(4.0 * h) - &(&u * &(&s1 * &s1)).scale_re(4.0)) - &(s - &(v * &s1)).scale(k);
    (a + &b * &cc).truncated(len)
}

/// Coefficients c_0..c_order of sigma_N in powers of (u - 1).
pub fn sigma_series(n: usize, variant: Variant, order: usize) -> Result<Vec<C64>> {
    if order < 3 {
        return Err(IbgError::InvalidArgument("series order must be at least 3".into()));
    }
    if n == 1 {
        return Ok(vec![ZERO; order + 1]);
    }
    let nf = n as f64;
    let k = nf * nf - 1.0;
    let h = 1.0 / nf;
    let c2 = c(k / 12.0);
    let c3 = match variant {
        Variant::Bose => C64::new(-PI, nf) * (k / (24.0 * PI)),
        Variant::FreeFermi => c(-k / 24.0),
    };
    let len = order + 3;
    let res = |cf: &[C64]| {
        let mut v = cf.to_vec();
        v.resize(len, ZERO);
        circle_residual_series(n, h, &Series::variable(ZERO, len), &Series(v))
    };
    let fixed = [(0, ZERO), (1, ZERO), (2, c2 * h * h), (3, c3 * h.powi(3))];
    let d = solve_series_by_residual(res, &fixed, 4, order)?;
    // The fixed lower coefficients must annihilate the residual through order 3.
    let r = res(&d);
    for j in 0..=3 {
        if r.0[j].norm() > 1e-12 {
            return Err(IbgError::Integration {
                location: format!("series order {j}"),
                reason: "boundary coefficients inconsistent with the equation".into(),
            });
        }
    }
    Ok(d.iter().enumerate().map(|(j, z)| z * nf.powi(j as i32)).collect())
}

/// Circle system in u: y = (sigma, sigma', sigma'', log(rho/rho0)).
struct CircleSystem {
    n: usize,
}

impl OdeSystem for CircleSystem {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, u: &Series, y: &[Series]) -> Vec<Series> {
        let k = c((self.n * self.n) as f64 - 1.0);
        let (s, s1, s2) = (&y[0], &y[1], &y[2]);
        let w = u.add_re(-1.0);
        let b = (s - &(&w * s1)).add_re(1.0);
        let cc = &(s1 * &(s - &(u * s1))).scale_re(4.0) - &(s - &(&w * s1)).scale(k);
        let t1 = &(&(u * &w) * &u.scale_re(2.0).add_re(-1.0)) * s2;
        let t2 = &w * &cc;
        let t3 = &b * &(&(&s.scale_re(4.0) - &(u * s1).scale_re(8.0)) + &w.scale(k));
        let num = &(&t1.scale_re(2.0) - &t2) + &t3;
        let den = &(u * u) * &(&w * &w).scale_re(2.0);
        let s3 = -num.div(&den);
        let dlog = s.div(&(u * &w));
        vec![s1.clone(), s2.clone(), s3, dlog]
    }
}

/// Options of the circle path.
#[derive(Debug, Clone, Copy)]
pub struct CirclePathOptions {
    pub series_order: usize,
    pub step: StepOptions,
    /// Residual gate for the second-order form.
    pub residual_tol: f64,
}

impl Default for CirclePathOptions {
    fn default() -> Self {
        CirclePathOptions { series_order: 48, step: StepOptions::default(), residual_tol: 1e-9 }
    }
}

/// State at a starting point u_s near 1 obtained from the series.
fn circle_start(coeffs: &[C64], ws: C64) -> Vec<C64> {
    let s = Series(coeffs.to_vec());
    let sig = s.eval(ws);
    let s1 = s.eval_deriv(ws, 1);
    let s2 = s.eval_deriv(ws, 2);
    // log rho = integral_0^w sigma / (w (1 + w)) dw, sigma starting at w^2.
    let len = coeffs.len();
    let over_w = Series(coeffs[1..].to_vec());
    let inv1pw = Series((0..len - 1).map(|j| c(if j % 2 == 0 { 1.0 } else { -1.0 })).collect());
    let integrand = &over_w * &inv1pw;
    let lr = integrand.integral(ZERO).eval(ws);
    vec![sig, s1, s2, lr]
}

/// Continues sigma_N from u = 1 to the points x/L in `qs` (each in (0, 1)).
///
/// The main path runs on the circle |u| = e^{-1/N} (one unit inside the real axis of
/// the scaled variable N x pi / L) and a radial spur reaches each target on |u| = 1;
/// this bypasses poles of sigma that sit on the unit circle for the free-Fermi data.
pub fn sigma_continue(n: usize, variant: Variant, qs: &[f64], opts: &CirclePathOptions) -> Result<SigmaSolution> {
    let coeffs = sigma_series(n, variant, opts.series_order)?;
    let series_at_u1 = coeffs.iter().map(|z| (z.re, z.im)).collect();
    let mut order: Vec<usize> = (0..qs.len()).collect();
    order.sort_by(|&a, &b| qs[a].partial_cmp(&qs[b]).unwrap());
    for &q in qs {
        if !(q > 0.0 && q < 1.0) {
            return Err(IbgError::OutOfDomain { value: q, domain: "(0, 1) in units of L".into() });
        }
    }
    let mut samples: Vec<Option<SigmaSample>> = vec![None; qs.len()];
    if n == 1 {
        for &i in &order {
            let u = C64::from_polar(1.0, 2.0 * PI * qs[i]);
            samples[i] = Some(SigmaSample { x: qs[i], u: (u.re, u.im), sigma: (0.0, 0.0), log_rho: (0.0, 0.0) });
        }
        return Ok(SigmaSolution {
            n,
            variant,
            series_at_u1,
            path: samples.into_iter().map(|s| s.unwrap()).collect(),
            max_residual: 0.0,
        });
    }
    let sys = CircleSystem { n };
    let r_in = (-1.0 / n as f64).exp();
    let ws = c(r_in - 1.0);
    // Truncation check of the starting series.
    let tail = coeffs[coeffs.len() - 1].norm() * ws.norm().powi(coeffs.len() as i32 - 1);
    if tail > 1e-14 {
        return Err(IbgError::Integration { location: "u = 1".into(), reason: format!("series tail {tail:e}") });
    }
    let mut y = circle_start(&coeffs, ws);
    let mut z = c(r_in);
    let mut theta = 0.0;
    let mut max_res = 0.0f64;
    let tol = opts.residual_tol;
    let mut check = |zz: C64, yy: &[C64], _: &[Series]| -> Result<()> {
        let (r, scale) = circle_residual(n, zz, yy[0], yy[1], yy[2]);
        let rel = r.norm() / (scale + 1e-300);
        max_res = max_res.max(rel);
        if rel > tol {
            return Err(IbgError::Integration {
                location: format!("u = {zz}"),
                reason: format!("sigma-form residual {rel:e}"),
            });
        }
        Ok(())
    };
    let dtheta_max = (PI / 8.0).min(1.0 / n as f64);
    for &i in &order {
        let target_theta = 2.0 * PI * qs[i];
        while theta < target_theta {
            let next = (theta + dtheta_max).min(target_theta);
            let zn = C64::from_polar(r_in, next);
            y = integrate_line_with(&sys, z, &y, zn, &opts.step, &mut check)?;
            z = zn;
            theta = next;
        }
        let target = C64::from_polar(1.0, target_theta);
        let yt = integrate_line_with(&sys, z, &y, target, &opts.step, &mut check)?;
        samples[i] = Some(SigmaSample {
            x: qs[i],
            u: (target.re, target.im),
            sigma: (yt[0].re, yt[0].im),
            log_rho: (yt[3].re, yt[3].im),
        });
    }
    Ok(SigmaSolution {
        n,
        variant,
        series_at_u1,
        path: samples.into_iter().map(|s| s.unwrap()).collect(),
        max_residual: max_res,
    })
}

/// Converts a path sample to L rho(x; 0), checking that the exponent is real up to
/// a multiple of i pi (sign changes of the free-Fermi density).
pub fn rho_from_sample(n: usize, s: &SigmaSample, tol: f64) -> Result<f64> {
    let (lr, li) = s.log_rho;
    let k = (li / PI).round();
    let resid = (li - k * PI).abs();
    if resid > tol {
        return Err(IbgError::Integration {
            location: format!("x/L = {}", s.x),
            reason: format!("imaginary part of the exponent off by {resid:e}"),
        });
    }
    let sign = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(sign * n as f64 * lr.exp())
}

/// rho^C_N(x; 0) by the Painlevé route at each x in `xs`.
pub fn rho_from_sigma(n: usize, xs: &[f64], l: f64, variant: Variant) -> Result<Vec<f64>> {
    let mut out = vec![0.0; xs.len()];
    let mut idx = Vec::new();
    let mut qs = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let q = x / l;
        if q == 0.0 {
            out[i] = n as f64 / l;
        } else {
            idx.push(i);
            qs.push(q);
        }
    }
    if qs.is_empty() {
        return Ok(out);
    }
    let sol = sigma_continue(n, variant, &qs, &CirclePathOptions::default())?;
    for (j, s) in sol.path.iter().enumerate() {
        out[idx[j]] = rho_from_sample(n, s, 1e-9)? / l;
    }
    Ok(out)
}

// ---------------------------------------------------------------- thermodynamic limit

/// Residual of (t s'')^2 + 4 (t s' - s - 1)(t s' - s + s'^2) with a scale.
fn sigma_v_residual(t: C64, s: C64, s1: C64, s2: C64) -> (C64, f64) {
    let a = (t * s2) * (t * s2);
    let b = t * s1 - s - 1.0;
    let cc = t * s1 - s + s1 * s1;
    let r = a + 4.0 * b * cc;
    (r, a.norm() + 4.0 * (b * cc).norm() + 4.0 * (b.norm() * (s1 * s1).norm()))
}

fn sigma_v_residual_series(t: &Series, s: &Series) -> Series {
    let s1 = s.deriv();
    let s2 = s1.deriv();
    let ts2 = t * &s2;
    let b = (&(t * &s1) - s).add_re(-1.0);
    let cc = &(&(t * &s1) - s) + &(&s1 * &s1);
    (&ts2 * &ts2) + (&b * &cc).scale_re(4.0)
}

/// Coefficients of sigma_V(t) about t = 0: -t^2/3 + xi t^3/(6 pi) + ...
pub fn sigma_v_series(xi: f64, order: usize) -> Result<Vec<C64>> {
    let len = order + 3;
    let res = |cf: &[C64]| {
        let mut v = cf.to_vec();
        v.resize(len, ZERO);
        sigma_v_residual_series(&Series::variable(ZERO, len), &Series(v))
    };
    solve_series_by_residual(res, &[(0, ZERO), (1, ZERO), (2, c(-1.0 / 3.0)), (3, c(xi / (6.0 * PI)))], 4, order)
}

/// y = (sigma_V, sigma_V', sigma_V'', log(rho/rho0)) in t.
struct SigmaVSystem;

impl OdeSystem for SigmaVSystem {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, t: &Series, y: &[Series]) -> Vec<Series> {
        let (s, s1, s2) = (&y[0], &y[1], &y[2]);
        let b = (&(t * s1) - s).add_re(-1.0);
        let cc = &(&(t * s1) - s) + &(s1 * s1);
        let num = &(&(t * s2) + &(t * &cc).scale_re(2.0)) + &(&b * &(t + &s1.scale_re(2.0))).scale_re(2.0);
        let s3 = -num.div(&(t * t));
        vec![s1.clone(), s2.clone(), s3, s.div(t)]
    }
}

/// H(t) = -(t/2) R(t/4, t/4) for the sine kernel on (-t/4, t/4): (t H'')^2 + P^2 + 4 P H'^2 = 0, P = t H' - H.
fn h0_residual(t: C64, h: C64, h1: C64, h2: C64) -> (C64, f64) {
    let a = (t * h2) * (t * h2);
    let p = t * h1 - h;
    let r = a + p * p + 4.0 * p * h1 * h1;
    (r, a.norm() + (p * p).norm() + 4.0 * (p * h1 * h1).norm())
}

fn h0_residual_series(t: &Series, h: &Series) -> Series {
    let h1 = h.deriv();
    let h2 = h1.deriv();
    let th2 = t * &h2;
    let p = &(t * &h1) - h;
    &(&th2 * &th2) + &(&(&p * &p) + &(&p * &(&h1 * &h1)).scale_re(4.0))
}

/// Coefficients of H(t): -xi t/(2 pi) - xi^2 t^2/(4 pi^2) + ...
pub fn h0_series(xi: f64, order: usize) -> Result<Vec<C64>> {
    let g1 = -xi / (2.0 * PI);
    let len = order + 3;
    let res = |cf: &[C64]| {
        let mut v = cf.to_vec();
        v.resize(len, ZERO);
        h0_residual_series(&Series::variable(ZERO, len), &Series(v))
    };
    solve_series_by_residual(res, &[(0, ZERO), (1, c(g1)), (2, c(-g1 * g1))], 3, order)
}

/// y = (H, H', H'', integral of H/t).
struct H0System;

impl OdeSystem for H0System {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, t: &Series, y: &[Series]) -> Vec<Series> {
        let (h, h1, h2) = (&y[0], &y[1], &y[2]);
        let p = &(t * h1) - h;
        let num = &(&(t * h2) + &(t * &p)) + &(&(t * &(h1 * h1)).scale_re(2.0) + &(&p * h1).scale_re(4.0));
        let h3 = -num.div(&(t * t));
        vec![h1.clone(), h2.clone(), h3, h.div(t)]
    }
}

/// Samples of a real-line transcendent: value and two derivatives plus the integral column.
#[derive(Debug, Clone, Serialize)]
pub struct RealSample {
    pub t: f64,
    pub y: [(f64, f64); 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Thermo {
    SigmaV,
    H0,
}

fn thermo_start(kind: Thermo, coeffs: &[C64], t0: C64) -> Vec<C64> {
    let s = Series(coeffs.to_vec());
    let v = s.eval(t0);
    let d1 = s.eval_deriv(t0, 1);
    let d2 = s.eval_deriv(t0, 2);
    // Integral of f(t)/t from 0; f has no constant term.
    let over_t = Series(coeffs[1..].to_vec());
    let integ = over_t.integral(ZERO).eval(t0);
    let _ = kind;
    vec![v, d1, d2, integ]
}

/// Integrates a thermodynamic transcendent to the real points `ts` (all > 0).
///
/// Main path: from a series start at i*eta up and along Im t = eta; a vertical spur
/// descends to every target. Poles on the real axis are never crossed.
fn thermo_path(kind: Thermo, xi: f64, ts: &[f64], eta: f64, residual_tol: f64) -> Result<(Vec<RealSample>, f64)> {
    let order = 40;
    let coeffs = match kind {
        Thermo::SigmaV => sigma_v_series(xi, order)?,
        Thermo::H0 => h0_series(xi, order)?,
    };
    let mut idx: Vec<usize> = (0..ts.len()).collect();
    idx.sort_by(|&a, &b| ts[a].partial_cmp(&ts[b]).unwrap());
    let t0 = C64::new(0.0, eta);
    let tail = coeffs[order].norm() * eta.powi(order as i32);
    if tail > 1e-15 {
        return Err(IbgError::Integration { location: "t = 0".into(), reason: format!("series tail {tail:e}") });
    }
    let mut y = thermo_start(kind, &coeffs, t0);
    let mut z = t0;
    let opts = StepOptions::default();
    let mut max_res = 0.0f64;
    let mut check = |zz: C64, yy: &[C64], _: &[Series]| -> Result<()> {
        let (r, scale) = match kind {
            Thermo::SigmaV => sigma_v_residual(zz, yy[0], yy[1], yy[2]),
            Thermo::H0 => h0_residual(zz, yy[0], yy[1], yy[2]),
        };
        let rel = r.norm() / (scale + 1e-300);
        max_res = max_res.max(rel);
        if rel > residual_tol {
            return Err(IbgError::Integration { location: format!("t = {zz}"), reason: format!("residual {rel:e}") });
        }
        Ok(())
    };
    let sys: Box<dyn OdeSystem> = match kind {
        Thermo::SigmaV => Box::new(SigmaVSystem),
        Thermo::H0 => Box::new(H0System),
    };
    let mut out: Vec<Option<RealSample>> = vec![None; ts.len()];
    for &i in &idx {
        let t = ts[i];
        if t <= 0.0 {
            return Err(IbgError::InvalidArgument(format!("thermodynamic points must be positive, got {t}")));
        }
        let anchor = C64::new(t, eta);
        y = integrate_line_with(sys.as_ref(), z, &y, anchor, &opts, &mut check)?;
        z = anchor;
        let yt = integrate_line_with(sys.as_ref(), z, &y, c(t), &opts, &mut check)?;
        out[i] = Some(RealSample {
            t,
            y: [(yt[0].re, yt[0].im), (yt[1].re, yt[1].im), (yt[2].re, yt[2].im), (yt[3].re, yt[3].im)],
        });
    }
    Ok((out.into_iter().map(|s| s.unwrap()).collect(), max_res))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermoSolution {
    pub xi: f64,
    pub sigma_v: Vec<RealSample>,
    pub max_residual: f64,
    pub asymptotic_a: f64,
}

/// sigma_V and log(rho_inf/rho_0) at the points `ts`.
pub fn sigma_v(xi: f64, ts: &[f64]) -> Result<ThermoSolution> {
    let (s, r) = thermo_path(Thermo::SigmaV, xi, ts, 0.3, 1e-9)?;
    Ok(ThermoSolution { xi, sigma_v: s, max_residual: r, asymptotic_a: asymptotic_constant() })
}

/// H(t) = h_V(-i t; 0,0,0,0) = -(t/2) R(t/4, t/4) and its derivatives at `ts`.
pub fn h0(xi: f64, ts: &[f64]) -> Result<(Vec<RealSample>, f64)> {
    thermo_path(Thermo::H0, xi, ts, 0.3, 1e-9)
}

/// rho_inf(x; 0) / rho_0 at tau = pi rho_0 x.
pub fn rho_inf_scaled(taus: &[f64]) -> Result<Vec<f64>> {
    let sol = sigma_v(2.0, taus)?;
    Ok(sol.sigma_v.iter().map(|s| s.y[3].0.exp()).collect())
}

/// Large-distance asymptotics of rho_inf(x;0)/rho_0 at tau = pi rho_0 x.
pub fn large_distance_asymptote(tau: f64) -> f64 {
    let a = asymptotic_constant();
    a * PI.sqrt() / tau.sqrt() * (1.0 + ((2.0 * tau).cos() - 0.25) / (8.0 * tau * tau))
}

/// Fourier-coefficient recovery of the sigma_V Taylor coefficients: integrates the
/// equation around |t| = radius (starting from the real axis) and returns the
/// coefficients 0..m-1 from an m-point discrete Cauchy integral.
pub fn sigma_v_coefficients_by_contour(xi: f64, radius: f64, m: usize) -> Result<Vec<C64>> {
    let (start, _) = thermo_path(Thermo::SigmaV, xi, &[radius], 0.3 * radius, 1e-9)?;
    let s0 = &start[0];
    let mut y: Vec<C64> = s0.y.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let mut z = c(radius);
    let opts = StepOptions::default();
    let mut vals = vec![ZERO; m];
    vals[0] = y[0];
    for j in 1..m {
        let zn = C64::from_polar(radius, 2.0 * PI * j as f64 / m as f64);
        // Walk the arc in small chords.
        let sub = 4;
        for k in 1..=sub {
            let th = 2.0 * PI * ((j - 1) as f64 + k as f64 / sub as f64) / m as f64;
            let zk = if k == sub { zn } else { C64::from_polar(radius, th) };
            y = crate::series::integrate_line(&SigmaVSystem, z, &y, zk, &opts)?;
            z = zk;
        }
        vals[j] = y[0];
    }
    Ok((0..m)
        .map(|k| {
            let mut acc = ZERO;
            for (j, v) in vals.iter().enumerate() {
                acc += v * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / m as f64);
            }
            acc / (m as f64 * radius.powi(k as i32))
        })
        .collect())
}

/// Pointwise residual of sigma_V(t/2) = H + (t/2) d/dt log(-(H/t)') on `ts`.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub t: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
}

pub fn hv_identity_check(xi: f64, ts: &[f64]) -> Result<IdentityCheck> {
    let halves: Vec<f64> = ts.iter().map(|t| t / 2.0).collect();
    let sv = sigma_v(xi, &halves)?;
    let (h, _) = h0(xi, ts)?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut residual = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let l = sv.sigma_v[i].y[0].0;
        let (hv, h1, h2) = (h[i].y[0].0, h[i].y[1].0, h[i].y[2].0);
        let p = t * h1 - hv;
        let r = hv + t * t * h2 / (2.0 * p) - 1.0;
        lhs.push(l);
        rhs.push(r);
        residual.push((l - r).abs());
    }
    Ok(IdentityCheck { t: ts.to_vec(), lhs, rhs, residual })
}

/// max over the t grid of |sigma_N(e^{2 i t / N}) - sigma_V(t)|.
pub fn thermo_consistency(n: usize, ts: &[f64]) -> Result<f64> {
    let pos: Vec<f64> = ts.iter().copied().filter(|t| *t > 0.0).collect();
    let qs: Vec<f64> = pos.iter().map(|t| t / (PI * n as f64)).collect();
    let sn = sigma_continue(n, Variant::Bose, &qs, &CirclePathOptions::default())?;
    let sv = sigma_v(2.0, &pos)?;
    let mut worst = 0.0f64;
    for (a, b) in sn.path.iter().zip(&sv.sigma_v) {
        let d = C64::new(a.sigma.0, a.sigma.1) - C64::new(b.y[0].0, b.y[0].1);
        worst = worst.max(d.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::free_fermion_dm_circle;
    use crate::recurrence::rho_circle_recurrence;

    #[test]
    fn series_low_orders() {
        let s = sigma_series(3, Variant::Bose, 10).unwrap();
        assert!((s[2].re - 2.0 / 3.0).abs() < 1e-15);
        let s1 = sigma_series(1, Variant::Bose, 10).unwrap();
        assert!(s1.iter().all(|z| z.norm() == 0.0));
    }

    /// The small-x density expansion through x^5 follows from the series.
    #[test]
    fn series_reproduces_density_expansion() {
        for n in [2usize, 3, 5] {
            let nf = n as f64;
            let q = 0.004;
            let e = PI * q;
            let poly = 1.0 - (nf * nf - 1.0) / 6.0 * e * e + (nf - 1.0) * nf * (nf + 1.0) / (9.0 * PI) * e.powi(3)
                + (nf - 1.0) * (nf + 1.0) * (3.0 * nf * nf - 7.0) / 360.0 * e.powi(4)
                - (nf - 1.0) * nf * (nf + 1.0) * (11.0 * nf * nf - 29.0) / (1350.0 * PI) * e.powi(5);
            let r = rho_circle_recurrence(n, q, 1.0).unwrap() / nf;
            assert!((r - poly).abs() < 50.0 * e.powi(6) * nf.powi(6), "n={n} {r} {poly}");
            let coeffs = sigma_series(n, Variant::Bose, 30).unwrap();
            let y = circle_start(&coeffs, C64::from_polar(1.0, 2.0 * PI * q) - 1.0);
            assert!((y[3].exp().re - r).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn n2_sigma_matches_log_derivative() {
        // sigma = (L/pi) sin(pi x/L) e^{i pi x/L} rho'/rho with rho from the closed form.
        let qs = [0.1, 0.25, 0.4, 0.5, 0.73];
        let sol = sigma_continue(2, Variant::Bose, &qs, &CirclePathOptions::default()).unwrap();
        for s in &sol.path {
            let q = s.x;
            let rho = |q: f64| 4.0 / PI * (PI * (0.5 - q) * (PI * q).cos() + (PI * q).sin());
            let h = 1e-5;
            let d = (rho(q + h) - rho(q - h)) / (2.0 * h);
            let expect = C64::from_polar((PI * q).sin() / PI, PI * q) * (d / rho(q));
            let got = C64::new(s.sigma.0, s.sigma.1);
            assert!((got - expect).norm() < 1e-9, "q={q} {got} {expect}");
        }
    }

    #[test]
    fn rho_from_sigma_matches_recurrence() {
        for n in [2usize, 5, 10] {
            let xs: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
            let v = rho_from_sigma(n, &xs, 1.0, Variant::Bose).unwrap();
            for (x, r) in xs.iter().zip(&v) {
                let e = rho_circle_recurrence(n, *x, 1.0).unwrap();
                assert!((r - e).abs() < 1e-8 * e, "n={n} x={x} {r} {e}");
            }
        }
    }

    #[test]
    fn free_fermi_data_reproduce_closed_form() {
        for n in [3usize, 6] {
            let xs = [0.07, 0.23, 0.41, 0.66];
            let v = rho_from_sigma(n, &xs, 1.0, Variant::FreeFermi).unwrap();
            for (x, r) in xs.iter().zip(&v) {
                let e = free_fermion_dm_circle(n, *x, 1.0);
                assert!((r - e).abs() < 1e-8, "n={n} x={x} {r} {e}");
            }
        }
    }

    #[test]
    fn sigma_v_small_t_and_free_fermi() {
        let s = sigma_v_series(2.0, 12).unwrap();
        assert!((s[2].re + 1.0 / 3.0).abs() < 1e-15 && (s[3].re - 1.0 / (3.0 * PI)).abs() < 1e-15);
        // xi = 0: sigma_V = t cot t - 1 and rho = sin t / t.
        let ts = [0.5, 2.0, 4.0];
        let sol = sigma_v(0.0, &ts).unwrap();
        for (t, smp) in ts.iter().zip(&sol.sigma_v) {
            assert!((smp.y[0].0 - (t / t.tan() - 1.0)).abs() < 1e-10, "t={t}");
            assert!((smp.y[3].0.exp() * smp.y[3].1.cos() - t.sin() / t).abs() < 1e-10);
        }
    }

    #[test]
    fn h0_series_matches_boundary() {
        let h = h0_series(2.0, 8).unwrap();
        assert!((h[1].re + 1.0 / PI).abs() < 1e-15);
        assert!((h[2].re + 1.0 / (PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn n10_sigma_matches_determinant_log_derivative() {
        use crate::determinant::rho_circle_det;
        use crate::geometry::GeometryConfig;
        let cfg = GeometryConfig::circle(10, 1.0);
        let q = 0.25;
        let sol = sigma_continue(10, Variant::Bose, &[q], &CirclePathOptions::default()).unwrap();
        let h = 1e-4;
        let f = |x: f64| rho_circle_det(&cfg, x).unwrap().ln();
        let d = (f(q - 2.0 * h) - 8.0 * f(q - h) + 8.0 * f(q + h) - f(q + 2.0 * h)) / (12.0 * h);
        let expect = C64::from_polar((PI * q).sin() / PI, PI * q) * d;
        let got = C64::new(sol.path[0].sigma.0, sol.path[0].sigma.1);
        assert!((got - expect).norm() < 1e-7, "{got} {expect}");
        assert!(sol.max_residual < 1e-9);
    }

    #[test]
    fn thermo_limit_improves_with_n() {
        let ts: Vec<f64> = (1..=40).map(|k| 0.1 * k as f64).collect();
        let e100 = thermo_consistency(100, &ts).unwrap();
        let e200 = thermo_consistency(200, &ts).unwrap();
        assert!(e200 < e100, "{e100} {e200}");
    }

    #[test]
    fn contour_coefficients_match_series() {
        let cf = sigma_v_coefficients_by_contour(2.0, 0.5, 64).unwrap();
        let ser = sigma_v_series(2.0, 12).unwrap();
        for k in 0..10 {
            assert!((cf[k] - ser[k]).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn rho_inf_tends_to_rho0_and_to_asymptote() {
        let r = rho_inf_scaled(&[1e-3]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-6);
        let taus: Vec<f64> = (0..=12).map(|k| 8.0 + k as f64).collect();
        for (t, v) in taus.iter().zip(rho_inf_scaled(&taus).unwrap()) {
            let ratio = v / large_distance_asymptote(*t);
            assert!((ratio - 1.0).abs() < 0.01, "tau={t} ratio={ratio}");
        }
    }

    #[test]
    fn shifted_parameter_series_at_small_t() {
        // 1/2 + sigma_V(t/2) = 1/2 - t^2/12 + xi t^3 / (48 pi) + O(t^4).
        let s = sigma_v_series(2.0, 6).unwrap();
        assert!((s[2].re / 4.0 + 1.0 / 12.0).abs() < 1e-15);
        assert!((s[3].re / 8.0 - 2.0 / (48.0 * PI)).abs() < 1e-15);
    }

    /// H from the ODE against a direct Nyström resolvent of the sine kernel.
    #[test]
    fn h0_matches_sine_kernel_resolvent() {
        use crate::quadrature::GaussLegendre;
        use nalgebra::{DMatrix, DVector};
        let xi = 2.0;
        let ts = [0.8, 2.0, 3.0, 4.5];
        let (h, _) = h0(xi, &ts).unwrap();
        let gl = GaussLegendre::new(60);
        let k = |a: f64, b: f64| if (a - b).abs() < 1e-14 { 1.0 / PI } else { (a - b).sin() / (PI * (a - b)) };
        for (t, smp) in ts.iter().zip(&h) {
            let s = t / 4.0;
            let (xs, ws) = gl.mapped(-s, s);
            let m = xs.len();
            let a = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - xi * k(xs[i], xs[j]) * ws[j]);
            let rhs = DVector::from_fn(m, |i, _| xi * k(xs[i], s));
            let sol = a.lu().solve(&rhs).unwrap();
            let mut r = xi * k(s, s);
            for j in 0..m {
                r += xi * k(s, xs[j]) * ws[j] * sol[j];
            }
            let expect = -(t / 2.0) * r;
            assert!((smp.y[0].0 - expect).abs() < 1e-10, "t={t} {} {expect}", smp.y[0].0);
        }
    }

    #[test]
    fn parameter_identity_holds() {
        let ts = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
        for xi in [2.0, 1.0, 0.01] {
            let chk = hv_identity_check(xi, &ts).unwrap();
            assert!(chk.residual.iter().all(|r| *r < 1e-8), "xi={xi} {:?}", chk.residual);
        }
    }
}
