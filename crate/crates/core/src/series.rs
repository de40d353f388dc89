//! Truncated complex power series and a Taylor-series ODE integrator.
//!
//! A system y' = f(z, y) is advanced by building the local Taylor expansion of y
//! about the current point (coefficient k+1 follows from coefficient k of f) and
//! stepping as far as the tail coefficients allow. Paths run through the complex
//! plane so that movable poles on the real axis can be bypassed.

use crate::error::{IbgError, Result};
use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<C64>);

impl Series {
    pub fn zeros(n: usize) -> Self {
        Series(vec![C64::new(0.0, 0.0); n])
    }

    pub fn constant(v: C64, n: usize) -> Self {
        let mut s = Self::zeros(n);
        if n > 0 {
            s.0[0] = v;
        }
        s
    }

    /// The independent variable z0 + h.
    pub fn variable(z0: C64, n: usize) -> Self {
        let mut s = Self::constant(z0, n);
        if n > 1 {
            s.0[1] = C64::new(1.0, 0.0);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn truncated(&self, n: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(n, C64::new(0.0, 0.0));
        Series(v)
    }

    pub fn scale(&self, a: C64) -> Self {
        Series(self.0.iter().map(|c| c * a).collect())
    }

    pub fn scale_re(&self, a: f64) -> Self {
        Series(self.0.iter().map(|c| c * a).collect())
    }

    pub fn add_const(&self, a: C64) -> Self {
        let mut s = self.clone();
        if !s.0.is_empty() {
            s.0[0] += a;
        }
        s
    }

    pub fn add_re(&self, a: f64) -> Self {
        self.add_const(C64::new(a, 0.0))
    }

    /// Quotient self / d, truncated to the common length.
    pub fn div(&self, d: &Series) -> Self {
        let n = self.len().min(d.len());
        let mut q = vec![C64::new(0.0, 0.0); n];
        let inv = 1.0 / d.0[0];
        for k in 0..n {
            let mut acc = self.0[k];
            for j in 0..k {
                acc -= q[j] * d.0[k - j];
            }
            q[k] = acc * inv;
        }
        Series(q)
    }

    /// Derivative with respect to h; the top coefficient is lost and padded with zero.
    pub fn deriv(&self) -> Self {
        let n = self.len();
        let mut v = vec![C64::new(0.0, 0.0); n];
        for k in 1..n {
            v[k - 1] = self.0[k] * k as f64;
        }
        Series(v)
    }

    /// Antiderivative with given constant term, keeping the length + 1.
    pub fn integral(&self, c0: C64) -> Self {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(c0);
        for (k, c) in self.0.iter().enumerate() {
            v.push(c / (k as f64 + 1.0));
        }
        Series(v)
    }

    pub fn eval(&self, h: C64) -> C64 {
        self.0.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * h + c)
    }

    /// d^m/dh^m evaluated at h.
    pub fn eval_deriv(&self, h: C64, m: usize) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in (m..self.len()).rev() {
            let mut f = 1.0;
            for j in 0..m {
                f *= (k - j) as f64;
            }
            acc = acc * h + self.0[k] * f;
        }
        acc
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut r = Series::constant(C64::new(1.0, 0.0), self.len());
        for _ in 0..p {
            r = &r * self;
        }
        r
    }
}

impl<'a> Add<&'a Series> for &'a Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        let n = self.len().min(o.len());
        Series((0..n).map(|k| self.0[k] + o.0[k]).collect())
    }
}

impl<'a> Sub<&'a Series> for &'a Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        let n = self.len().min(o.len());
        Series((0..n).map(|k| self.0[k] - o.0[k]).collect())
    }
}

impl<'a> Mul<&'a Series> for &'a Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        let n = self.len().min(o.len());
        let mut v = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let a = self.0[i];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n - i {
                v[i + j] += a * o.0[j];
            }
        }
        Series(v)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series(self.0.iter().map(|c| -c).collect())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Series> for Series {
            type Output = Series;
            fn $m(self, o: Series) -> Series {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a Series> for Series {
            type Output = Series;
            fn $m(self, o: &Series) -> Series {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<Series> for &'a Series {
            type Output = Series;
            fn $m(self, o: Series) -> Series {
                self.$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Series {
    type Output = Series;
    fn neg(self) -> Series {
        -&self
    }
}

/// A first-order system y' = f(z, y) evaluated on truncated series.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    /// `z` is the series z0 + h; every returned series must have the input length.
    fn rhs(&self, z: &Series, y: &[Series]) -> Vec<Series>;
}

/// Taylor coefficients (orders 0..=order) of the solution through (z0, y0).
pub fn taylor_expand<S: OdeSystem + ?Sized>(sys: &S, z0: C64, y0: &[C64], order: usize) -> Vec<Series> {
    let d = sys.dim();
    let mut y: Vec<Series> = y0.iter().map(|&v| Series::constant(v, order + 1)).collect();
    for k in 0..order {
        let n = k + 1;
        let z = Series::variable(z0, n);
        let yt: Vec<Series> = y.iter().map(|s| s.truncated(n)).collect();
        let f = sys.rhs(&z, &yt);
        for i in 0..d {
            y[i].0[k + 1] = f[i].0[k] / (k as f64 + 1.0);
        }
    }
    y
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub order: usize,
    /// Per-step relative truncation target.
    pub tol: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { order: 30, tol: 1e-15, max_steps: 200_000, min_step: 1e-10 }
    }
}

/// Largest step length whose tail-term estimate stays below `tol` (relative to 1 + |y|).
pub fn admissible_step(coeffs: &[Series], tol: f64) -> f64 {
    let mut h = f64::INFINITY;
    for s in coeffs {
        let m = s.len() - 1;
        let scale = 1.0 + s.0[0].norm();
        for k in [m - 1, m] {
            let c = s.0[k].norm();
            if c > 0.0 && c.is_finite() {
                h = h.min((tol * scale / c).powf(1.0 / k as f64));
            } else if !c.is_finite() {
                h = 0.0;
            }
        }
    }
    0.9 * h
}

/// Integrates along the straight segment z0 -> z1. Returns the state at z1.
pub fn integrate_line<S: OdeSystem + ?Sized>(
    sys: &S,
    z0: C64,
    y0: &[C64],
    z1: C64,
    opts: &StepOptions,
) -> Result<Vec<C64>> {
    integrate_line_with(sys, z0, y0, z1, opts, |_, _, _| Ok(()))
}

/// As [`integrate_line`], calling `inspect(z, y, coeffs)` after each accepted expansion.
pub fn integrate_line_with<S, F>(
    sys: &S,
    z0: C64,
    y0: &[C64],
    z1: C64,
    opts: &StepOptions,
    mut inspect: F,
) -> Result<Vec<C64>>
where
    S: OdeSystem + ?Sized,
    F: FnMut(C64, &[C64], &[Series]) -> Result<()>,
{
    let mut z = z0;
    let mut y = y0.to_vec();
    let total = (z1 - z0).norm();
    if total == 0.0 {
        return Ok(y);
    }
    let dir = (z1 - z0) / total;
    for _ in 0..opts.max_steps {
        let remaining = (z1 - z).norm();
        if remaining <= 1e-15 * (1.0 + total) {
            return Ok(y);
        }
        let coeffs = taylor_expand(sys, z, &y, opts.order);
        if coeffs.iter().any(|s| s.0.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())) {
            return Err(IbgError::Integration {
                location: format!("{z}"),
                reason: "non-finite Taylor coefficient".into(),
            });
        }
        inspect(z, &y, &coeffs)?;
        let mut h = admissible_step(&coeffs, opts.tol);
        if h < opts.min_step {
            return Err(IbgError::Integration {
                location: format!("{z}"),
                reason: format!("step size {h:e} below minimum"),
            });
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let dz = dir * h;
        y = coeffs.iter().map(|s| s.eval(dz)).collect();
        z = if last { z1 } else { z + dz };
        if last {
            return Ok(y);
        }
    }
    Err(IbgError::Integration { location: format!("{z}"), reason: "step budget exhausted".into() })
}

/// Integrates through a polyline of waypoints, returning the final state.
pub fn integrate_polyline<S: OdeSystem + ?Sized>(
    sys: &S,
    z0: C64,
    y0: &[C64],
    waypoints: &[C64],
    opts: &StepOptions,
) -> Result<Vec<C64>> {
    let mut z = z0;
    let mut y = y0.to_vec();
    for &w in waypoints {
        y = integrate_line(sys, z, &y, w, opts)?;
        z = w;
    }
    Ok(y)
}

/// Solves a singular-point series order by order.
///
/// `residual(c)` returns the residual series obtained by substituting the trial
/// coefficients `c`. Coefficients listed in `fixed` are kept; every other
/// coefficient k is found from the lowest residual order at which it appears,
/// where the residual must be affine in it.
pub fn solve_series_by_residual<F>(
    residual: F,
    fixed: &[(usize, C64)],
    first_free: usize,
    order: usize,
) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Series,
{
    let mut c = vec![C64::new(0.0, 0.0); order + 1];
    for &(k, v) in fixed {
        c[k] = v;
    }
    let zero = C64::new(0.0, 0.0);
    for k in first_free..=order {
        if fixed.iter().any(|&(j, _)| j == k) {
            continue;
        }
        c[k] = zero;
        let r0 = residual(&c);
        c[k] = C64::new(1.0, 0.0);
        let r1 = residual(&c);
        let mut found = false;
        let m = r0.len().min(r1.len());
        // Lower orders are bitwise unaffected by c_k; a slope that is small against the
        // largest one is treated as rounding noise of a vanishing coefficient.
        let top = (0..m).map(|j| (r1.0[j] - r0.0[j]).norm()).fold(0.0, f64::max);
        for j in 0..m {
            let slope = r1.0[j] - r0.0[j];
            if top > 0.0 && slope.norm() > 1e-10 * top {
                c[k] = -r0.0[j] / slope;
                found = true;
                break;
            }
        }
        if !found {
            return Err(IbgError::Integration {
                location: format!("series order {k}"),
                reason: "coefficient does not enter the truncated residual".into(),
            });
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp;
    impl OdeSystem for Exp {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _z: &Series, y: &[Series]) -> Vec<Series> {
            vec![y[0].clone()]
        }
    }

    /// y' = y^2, y(0)=1 has a pole at z=1; a detour through the upper half plane reaches z=2.
    struct Riccati;
    impl OdeSystem for Riccati {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _z: &Series, y: &[Series]) -> Vec<Series> {
            vec![&y[0] * &y[0]]
        }
    }

    #[test]
    fn exponential_along_line() {
        let y = integrate_line(&Exp, C64::new(0.0, 0.0), &[C64::new(1.0, 0.0)], C64::new(3.0, 0.0), &StepOptions::default())
            .unwrap();
        assert!((y[0].re - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
    }

    #[test]
    fn detour_around_pole() {
        let wp = [C64::new(0.5, 0.5), C64::new(1.5, 0.5), C64::new(2.0, 0.0)];
        let y = integrate_polyline(&Riccati, C64::new(0.0, 0.0), &[C64::new(1.0, 0.0)], &wp, &StepOptions::default())
            .unwrap();
        assert!((y[0] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn division_and_products() {
        let a = Series(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0)]);
        let b = Series(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.0)]);
        let q = a.div(&b);
        let back = &q * &b;
        for k in 0..3 {
            assert!((back.0[k] - a.0[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn series_solver_recovers_exp_like_coefficients() {
        // y' - y = 0 with y(0)=1 gives 1/k!
        let res = |c: &[C64]| {
            let s = Series(c.to_vec());
            &s.deriv() - &s
        };
        let c = solve_series_by_residual(res, &[(0, C64::new(1.0, 0.0))], 1, 8).unwrap();
        let mut f = 1.0;
        for (k, ck) in c.iter().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            assert!((ck.re - 1.0 / f).abs() < 1e-14);
        }
    }
}
