//! Circle density matrix from the reflection-coefficient recurrence of the
//! orthogonal polynomials on the unit circle, plus special closed forms.

use crate::error::{IbgError, Result};
use crate::special::ln_barnes_g;
use serde::Serialize;
use std::f64::consts::PI;

/// Distance from x/L = 1/2 inside which the exact midpoint sequence is used.
const MIDPOINT_WINDOW: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ReflectionState {
    /// x / L.
    pub q: f64,
    /// rtilde_n for n = 0..=n_max.
    pub rtilde: Vec<f64>,
    /// log(L rho_n(x; 0)) for n = 1..=n_max+2 (index 0 holds n = 1).
    pub log_rho_seq: Vec<f64>,
}

impl ReflectionState {
    /// rho_n(x; 0) * L.
    pub fn rho_scaled(&self, n: usize) -> f64 {
        self.log_rho_seq[n - 1].exp()
    }
}

/// Starting values (rtilde_0, rtilde_1) at q = x / L.
pub fn reflection_init(q: f64) -> (f64, f64) {
    let num = PI - 2.0 * PI * q + (2.0 * PI * q).sin();
    let den = 0.5 * (PI - 2.0 * PI * q) * (PI * q).cos() + (PI * q).sin();
    (1.0, 0.25 * num / den)
}

/// One step of the third-order difference equation: rtilde_{N+2} from N-1, N, N+1.
pub fn reflection_step(n: usize, c: f64, r_prev: f64, r_n: f64, r_next: f64) -> Result<f64> {
    let nf = n as f64;
    let lower = if n == 0 {
        // (1 - r_0^2) vanishes at N = 0, removing the r_{-1} term.
        0.0
    } else {
        if r_n == 0.0 {
            return Err(IbgError::VanishingCoefficient { n });
        }
        (1.0 - r_n * r_n) / r_n * ((nf + 2.0) * r_next + nf * r_prev)
    };
    let denom = 1.0 - r_next * r_next;
    if denom == 0.0 {
        return Err(IbgError::VanishingCoefficient { n: n + 1 });
    }
    Ok(((2.0 * c + 2.0 * r_next * r_n + lower) * r_next / denom - (nf + 1.0) * r_n) / (nf + 3.0))
}

/// Residual of the difference equation at index N for a given sequence.
pub fn reflection_residual(rt: &[f64], n: usize, c: f64) -> f64 {
    let nf = n as f64;
    let prev = if n == 0 { 0.0 } else { rt[n - 1] };
    let lhs = 2.0 * c + 2.0 * rt[n + 1] * rt[n];
    let rhs = (1.0 - rt[n + 1].powi(2)) / rt[n + 1] * ((nf + 3.0) * rt[n + 2] + (nf + 1.0) * rt[n])
        - if n == 0 { 0.0 } else { (1.0 - rt[n].powi(2)) / rt[n] * ((nf + 2.0) * rt[n + 1] + nf * prev) };
    lhs - rhs
}

/// Exact sequence at x = L/2: rtilde_{2p} = (-1)^p/(2p+1), odd terms zero.
fn midpoint_rtilde(n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| {
            if n % 2 == 1 {
                0.0
            } else {
                let p = n / 2;
                let s = if p % 2 == 0 { 1.0 } else { -1.0 };
                s / (n as f64 + 1.0)
            }
        })
        .collect()
}

/// rtilde_n for n = 0..=n_max at q = x / L.
pub fn reflection_sequence(q: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&q) {
        return Err(IbgError::OutOfDomain { value: q, domain: "[0, 1) in units of L".into() });
    }
    if q == 0.0 {
        return Ok((0..=n_max).map(|n| 1.0 / (n as f64 + 1.0)).collect());
    }
    if (q - 0.5).abs() < MIDPOINT_WINDOW {
        return Ok(midpoint_rtilde(n_max));
    }
    let c = (PI * q).cos();
    let (r0, r1) = reflection_init(q);
    let mut rt = vec![r0, r1];
    rt.truncate(n_max + 1);
    while rt.len() < n_max + 1 {
        let n = rt.len() - 2;
        let prev = if n == 0 { 0.0 } else { rt[n - 1] };
        let next = reflection_step(n, c, prev, rt[n], rt[n + 1])?;
        rt.push(next);
    }
    Ok(rt)
}

/// Free-fermion solution rtilde_n = sin(pi q)/sin(pi (n+1) q).
pub fn reflection_free_fermion(q: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| (PI * q).sin() / (PI * (n as f64 + 1.0) * q).sin()).collect()
}

/// L rho_2(x; 0).
pub fn rho2_scaled(q: f64) -> f64 {
    4.0 / PI * (PI * (0.5 - q) * (PI * q).cos() + (PI * q).sin())
}

/// L rho_3(x; 0).
pub fn rho3_scaled(q: f64) -> f64 {
    let h = 0.5 - q;
    let c = (PI * q).cos();
    let s = (PI * q).sin();
    8.0 / (PI * PI)
        * (2.0 - 0.5 * PI * PI * h * h + 3.0 * PI * h * s * c + (-2.5 + 2.0 * PI * PI * h * h) * c * c + 0.5 * c.powi(4))
}

/// Builds L rho_n, n = 1..=rt.len()+1, from rho_1, rho_2 and 1 - rtilde_N^2 = rho_{N+2} rho_N / rho_{N+1}^2,
/// in log space.
pub fn log_rho_sequence(rt: &[f64], rho1: f64, rho2: f64) -> Vec<f64> {
    let mut lr = vec![rho1.ln(), rho2.ln()];
    for n in 1..rt.len() {
        let next = (1.0 - rt[n] * rt[n]).ln() + 2.0 * lr[n] - lr[n - 1];
        lr.push(next);
    }
    lr
}

/// Signed version of the same telescoping, for sequences whose rho_n change sign.
pub fn signed_rho_sequence(rt: &[f64], rho1: f64, rho2: f64) -> Vec<f64> {
    let mut r = vec![rho1, rho2];
    for n in 1..rt.len() {
        let next = (1.0 - rt[n] * rt[n]) * r[n] * r[n] / r[n - 1];
        r.push(next);
    }
    r
}

pub fn reflection_state(q: f64, n_max: usize) -> Result<ReflectionState> {
    let rtilde = reflection_sequence(q, n_max)?;
    let log_rho_seq = log_rho_sequence(&rtilde, 1.0, rho2_scaled(q));
    Ok(ReflectionState { q, rtilde, log_rho_seq })
}

/// rho^C_N(x; 0) by the recurrence.
pub fn rho_circle_recurrence(n: usize, x: f64, l: f64) -> Result<f64> {
    if n == 0 {
        return Err(IbgError::InvalidArgument("particle number must be at least 1".into()));
    }
    let q = x / l;
    if !(0.0..1.0).contains(&q) {
        return Err(IbgError::OutOfDomain { value: x, domain: format!("[0, {l})") });
    }
    // The diagonal is the uniform density.
    if n == 1 || q == 0.0 {
        return Ok(n as f64 / l);
    }
    let rt = reflection_sequence(q, n.saturating_sub(2))?;
    let lr = log_rho_sequence(&rt, 1.0, rho2_scaled(q));
    let v = lr[n - 1];
    if v > 700.0 {
        return Err(IbgError::Overflow(format!("log rho = {v}")));
    }
    Ok(v.exp() / l)
}

/// Recurrence over several N at once: returns L rho_n(x;0) for n = 1..=n_max.
pub fn rho_circle_recurrence_all(n_max: usize, q: f64) -> Result<Vec<f64>> {
    if n_max == 1 {
        return Ok(vec![1.0]);
    }
    let rt = reflection_sequence(q, n_max.saturating_sub(2))?;
    Ok(log_rho_sequence(&rt, 1.0, rho2_scaled(q)).iter().take(n_max).map(|v| v.exp()).collect())
}

/// Free-fermion density matrix rebuilt from the closed-form reflection coefficients.
pub fn rho_free_fermion_recurrence(n: usize, q: f64) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let rt = reflection_free_fermion(q, n.saturating_sub(2));
    let rho2 = 2.0 * (PI * q).cos();
    signed_rho_sequence(&rt, 1.0, rho2)[n - 1]
}

/// L rho^C_N(L/2; 0) from the Barnes G-function closed forms.
pub fn midpoint_closed_form(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(IbgError::InvalidArgument("particle number must be at least 1".into()));
    }
    let nf = n as f64;
    let g = |z: f64| ln_barnes_g(z);
    let base = (nf - 1.0) * (4.0 / PI).ln();
    let ln4 = 4f64.ln();
    let v = if n % 2 == 0 {
        let p = (n / 2) as f64;
        base + (p - 1.0) * (2.0 * p - 1.0) * ln4 + g(p + 2.0)? + 6.0 * g(p + 1.0)? + g(p)? - 2.0 * g(2.0 * p + 1.0)?
    } else {
        let p = ((n - 1) / 2) as f64;
        base + p * (2.0 * p - 1.0) * ln4 + 4.0 * g(p + 1.0)? + 4.0 * g(p + 2.0)? - 2.0 * g(2.0 * p + 2.0)?
    };
    Ok(v.exp())
}

/// L rho^C_N(0; 0) = N.
pub fn origin_closed_form(n: usize) -> f64 {
    n as f64
}

/// Residuals |A_{N+1} + A_{N-1} - 2 t A_N| / max|A| with A_N = (N+1) rtilde_N, for N = 1..len-2.
pub fn chebyshev_limit_check(rt: &[f64], q: f64) -> Vec<f64> {
    let a: Vec<f64> = rt.iter().enumerate().map(|(n, r)| (n as f64 + 1.0) * r).collect();
    chebyshev_residuals(&a, (PI * q).cos())
}

/// Relative residuals of a_{N+1} + a_{N-1} = 2 t a_N.
pub fn chebyshev_residuals(a: &[f64], t: f64) -> Vec<f64> {
    (1..a.len().saturating_sub(1))
        .map(|n| {
            let scale = a[n - 1].abs().max(a[n].abs()).max(a[n + 1].abs()).max(1e-300);
            (a[n + 1] + a[n - 1] - 2.0 * t * a[n]).abs() / scale
        })
        .collect()
}

/// Small-x expansion of rtilde_n through third order in pi x / L.
pub fn reflection_small_x(n: usize, q: f64) -> f64 {
    let e = PI * q;
    let nf = n as f64;
    1.0 / (nf + 1.0) + nf * (nf + 2.0) / (6.0 * (nf + 1.0)) * e * e - nf * (nf + 2.0) / (3.0 * PI) * e * e * e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinant::rho_circle_det;
    use crate::geometry::{free_fermion_dm_circle, GeometryConfig};

    #[test]
    fn init_examples() {
        let (r0, r1) = reflection_init(1e-9);
        assert_eq!(r0, 1.0);
        assert!((r1 - 0.5).abs() < 1e-8);
        assert!(reflection_init(0.5).1.abs() < 1e-15);
        let q: f64 = 0.25;
        let expect = 0.25 * (PI / 2.0 + 1.0) / (0.25 * PI * (PI / 4.0).cos() + (PI / 4.0).sin());
        assert!((reflection_init(q).1 - expect).abs() < 1e-15);
    }

    #[test]
    fn rho3_from_recurrence() {
        for i in 1..50 {
            let q = i as f64 / 50.0;
            let r = rho_circle_recurrence(3, q, 1.0).unwrap();
            assert!((r - rho3_scaled(q)).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn near_zero_sequence() {
        let rt = reflection_sequence(1e-7, 20).unwrap();
        for (n, r) in rt.iter().enumerate() {
            assert!((r - 1.0 / (n as f64 + 1.0)).abs() < 1e-6, "n={n} r={r}");
        }
    }

    #[test]
    fn free_fermion_solves_recurrence() {
        for q in [0.05, 0.13, 0.31, 0.47] {
            let rt = reflection_free_fermion(q, 12);
            let c = (PI * q).cos();
            for n in 0..10 {
                let res = reflection_residual(&rt, n, c);
                let scale = rt.iter().map(|v| v.abs()).fold(1.0, f64::max);
                assert!(res.abs() < 1e-10 * scale * scale, "q={q} n={n} res={res}");
            }
            for m in 1..10 {
                let a = rho_free_fermion_recurrence(m, q);
                let b = free_fermion_dm_circle(m, q, 1.0);
                assert!((a - b).abs() < 1e-10, "q={q} m={m}");
            }
        }
    }

    #[test]
    fn matches_determinant() {
        for n in 2..=12 {
            let cfg = GeometryConfig::circle(n, 1.0);
            for q in [0.02, 0.2, 0.41, 0.49, 0.5] {
                let d = rho_circle_det(&cfg, q).unwrap();
                let r = rho_circle_recurrence(n, q, 1.0).unwrap();
                assert!((d - r).abs() < 1e-10 * d, "n={n} q={q} {d} {r}");
            }
        }
    }

    #[test]
    fn midpoint_forms() {
        assert!((midpoint_closed_form(2).unwrap() - 4.0 / PI).abs() < 1e-14);
        assert!((midpoint_closed_form(3).unwrap() - 16.0 / (PI * PI)).abs() < 1e-14);
        for n in 1..=20 {
            let r = rho_circle_recurrence(n, 0.5, 1.0).unwrap();
            let c = midpoint_closed_form(n).unwrap();
            assert!((r - c).abs() < 1e-10 * c, "n={n} {r} {c}");
        }
    }

    #[test]
    fn small_x_series_third_order() {
        for n in 1..6 {
            let e1 = (reflection_sequence(0.01, n).unwrap()[n] - reflection_small_x(n, 0.01)).abs();
            let e2 = (reflection_sequence(0.005, n).unwrap()[n] - reflection_small_x(n, 0.005)).abs();
            // Error is fourth order: halving x shrinks it by about 16.
            assert!(e1 / e2 > 12.0, "n={n} ratio {}", e1 / e2);
        }
    }

    #[test]
    fn chebyshev_residual_checks() {
        let q = 0.3;
        // The free-fermion coefficients obey the Chebyshev recurrence through their
        // reciprocals, 1/rtilde_N = U_N(t); (N+1) rtilde_N does not.
        let ff = reflection_free_fermion(q, 40);
        let inv: Vec<f64> = ff.iter().map(|r| 1.0 / r).collect();
        assert!(chebyshev_residuals(&inv, (PI * q).cos()).iter().all(|r| *r < 1e-10));
        assert!(chebyshev_limit_check(&ff, q).iter().any(|r| *r > 1e-2));
        let rt = reflection_sequence(q, 220).unwrap();
        let res = chebyshev_limit_check(&rt, q);
        assert!(res[199] < res[19]);
    }

    #[test]
    fn large_n_stable() {
        for q in [0.1, 0.33, 0.5] {
            let v = rho_circle_recurrence_all(10_000, q).unwrap();
            assert!(v.iter().all(|r| r.is_finite() && *r > 0.0), "q={q}");
            let rt = reflection_sequence(q, 500).unwrap();
            assert!(rt[1..].iter().all(|r| r.abs() < 1.0));
        }
    }
}
