//! Cross-method validation suites. Every check records what was measured, the
//! bounds it had to meet and whether it met them; a route that errors fails its
//! check with the error text instead of aborting the suite.

use crate::determinant::{rho_circle_det, rho_det};
use crate::error::Result;
use crate::geometry::{free_fermion_dm_circle, GeometryConfig, Kind};
use crate::montecarlo::{mc_density_matrix, McOptions};
use crate::occupation::{
    default_quad_order, lambda0_series, lambda_circle, lambda_circle_free_fermion, nystrom_spectrum, scaling_fit,
};
use crate::painleve::{
    hv_identity_check, rho_from_sigma, rho_inf_scaled, sigma_continue, sigma_v, sigma_v_coefficients_by_contour,
    sigma_v_series, thermo_consistency, large_distance_asymptote, CirclePathOptions, Variant,
};
use crate::recurrence::{
    midpoint_closed_form, rho2_scaled, rho3_scaled, rho_circle_recurrence, rho_circle_recurrence_all,
    rho_free_fermion_recurrence,
};
use crate::resolvent::{max_residual, solve_harmonic_resolvent, solve_jacobi_resolvent};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// None when the route under test returned an error.
    pub measured: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn bounded(name: &str, measured: f64, lower: Option<f64>, upper: Option<f64>, detail: String) -> Check {
        let ok = measured.is_finite() && lower.is_none_or(|l| measured >= l) && upper.is_none_or(|u| measured <= u);
        Check { name: name.to_string(), measured: Some(measured), lower, upper, passed: ok, detail }
    }

    pub fn at_most(name: &str, measured: f64, tol: f64, detail: impl Into<String>) -> Check {
        Self::bounded(name, measured, None, Some(tol), detail.into())
    }

    pub fn at_least(name: &str, measured: f64, floor: f64, detail: impl Into<String>) -> Check {
        Self::bounded(name, measured, Some(floor), None, detail.into())
    }

    pub fn within(name: &str, measured: f64, lo: f64, hi: f64, detail: impl Into<String>) -> Check {
        Self::bounded(name, measured, Some(lo), Some(hi), detail.into())
    }

    pub fn failed(name: &str, err: impl std::fmt::Display) -> Check {
        Check {
            name: name.to_string(),
            measured: None,
            lower: None,
            upper: None,
            passed: false,
            detail: format!("error: {err}"),
        }
    }

    fn from_result(name: &str, r: Result<Check>) -> Check {
        r.unwrap_or_else(|e| Check::failed(name, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    CircleCross,
    HarmonicCross,
    DnCross,
    Thermo,
    Mc,
    Occupations,
    Properties,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::CircleCross,
        Suite::HarmonicCross,
        Suite::DnCross,
        Suite::Thermo,
        Suite::Mc,
        Suite::Occupations,
        Suite::Properties,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::CircleCross => "circle-cross",
            Suite::HarmonicCross => "harmonic-cross",
            Suite::DnCross => "dn-cross",
            Suite::Thermo => "thermo",
            Suite::Mc => "mc",
            Suite::Occupations => "occupations",
            Suite::Properties => "properties",
        }
    }

    /// Parses a comma-separated list of suite names; "all" expands to every suite.
    pub fn parse_list(s: &str) -> Option<Vec<Suite>> {
        if s == "all" {
            return Some(Suite::ALL.to_vec());
        }
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim) {
            let suite = *Suite::ALL.iter().find(|x| x.name() == name)?;
            if !out.contains(&suite) {
                out.push(suite);
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub seed: u64,
    pub mc_sweeps: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { seed: crate::montecarlo::DEFAULT_SEED, mc_sweeps: 100_000 }
    }
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> SuiteReport {
    let t = Instant::now();
    let checks = match suite {
        Suite::CircleCross => {
            let mut v = closed_forms();
            v.extend(circle_cross());
            v.extend(midpoint_forms());
            v.extend(free_fermion_consistency());
            v
        }
        Suite::HarmonicCross => harmonic_cross(),
        Suite::DnCross => dn_cross(),
        Suite::Thermo => thermodynamics(),
        Suite::Mc => monte_carlo(opts),
        Suite::Occupations => occupations(),
        Suite::Properties => properties(opts),
    };
    let passed = checks.iter().all(|c| c.passed);
    SuiteReport { suite, checks, passed, seconds: t.elapsed().as_secs_f64() }
}

fn grid_q(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

/// Two- and three-particle circle density matrices from the determinant against
/// their closed forms on a 50-point grid.
pub fn closed_forms() -> Vec<Check> {
    let qs = grid_q(50);
    [(2usize, rho2_scaled as fn(f64) -> f64), (3, rho3_scaled)]
        .iter()
        .map(|&(n, f)| {
            let name = format!("circle N={n} determinant vs closed form");
            Check::from_result(&name, (|| {
                let cfg = GeometryConfig::circle(n, 1.0);
                let mut worst = 0.0f64;
                for &q in &qs {
                    worst = worst.max((rho_circle_det(&cfg, q)? - f(q)).abs());
                }
                Ok(Check::at_most(&name, worst, 1e-12, "max abs difference, L = 1, 50 points"))
            })())
        })
        .collect()
}

pub const CIRCLE_X: [f64; 7] = [0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Determinant, recurrence and Painleve routes on the circle for N = 2..=30.
pub fn circle_cross() -> Vec<Check> {
    let ns: Vec<usize> = (2..=30).collect();
    let det = Check::from_result("circle determinant vs recurrence", (|| {
        let mut worst = (0.0f64, 0, 0.0);
        for &n in &ns {
            let cfg = GeometryConfig::circle(n, 1.0);
            for &q in &CIRCLE_X {
                let a = rho_circle_det(&cfg, q)?;
                let b = rho_circle_recurrence(n, q, 1.0)?;
                let d = (a - b).abs() / b.abs();
                if d > worst.0 {
                    worst = (d, n, q);
                }
            }
        }
        Ok(Check::at_most(
            "circle determinant vs recurrence",
            worst.0,
            1e-8,
            format!("max relative difference over N=2..30, x/L in {CIRCLE_X:?}; worst at N={} x/L={}", worst.1, worst.2),
        ))
    })());
    let pain = Check::from_result("circle Painleve vs recurrence", (|| {
        let mut worst = (0.0f64, 0, 0.0);
        for &n in &ns {
            let v = rho_from_sigma(n, &CIRCLE_X, 1.0, Variant::Bose)?;
            for (&q, a) in CIRCLE_X.iter().zip(&v) {
                let b = rho_circle_recurrence(n, q, 1.0)?;
                let d = (a - b).abs() / b.abs();
                if d > worst.0 {
                    worst = (d, n, q);
                }
            }
        }
        Ok(Check::at_most(
            "circle Painleve vs recurrence",
            worst.0,
            1e-6,
            format!("max relative difference over N=2..30; worst at N={} x/L={}", worst.1, worst.2),
        ))
    })());
    vec![det, pain]
}

/// Barnes-G midpoint values and the origin value N / L.
pub fn midpoint_forms() -> Vec<Check> {
    let mid = Check::from_result("midpoint closed form vs recurrence", (|| {
        let mut worst = 0.0f64;
        for n in 1..=20 {
            let a = midpoint_closed_form(n)?;
            let b = rho_circle_recurrence(n, 0.5, 1.0)?;
            worst = worst.max((a - b).abs() / b);
        }
        Ok(Check::at_most("midpoint closed form vs recurrence", worst, 1e-10, "max relative difference, N <= 20"))
    })());
    let l = 2.5;
    let origin = Check::from_result("origin value equals N/L (recurrence)", (|| {
        let mut worst = 0.0f64;
        for n in 1..=20 {
            worst = worst.max((rho_circle_recurrence(n, 0.0, l)? - n as f64 / l).abs());
        }
        Ok(Check::at_most("origin value equals N/L (recurrence)", worst, 0.0, "exact equality, N <= 20, L = 2.5"))
    })());
    let origin_det = Check::from_result("origin value equals N/L (determinant)", (|| {
        let mut worst = 0.0f64;
        for n in 1..=20 {
            let v = rho_circle_det(&GeometryConfig::circle(n, l), 0.0)?;
            worst = worst.max((v - n as f64 / l).abs() / (n as f64 / l));
        }
        Ok(Check::at_most("origin value equals N/L (determinant)", worst, 1e-12, "relative, N <= 20, L = 2.5"))
    })());
    vec![mid, origin, origin_det]
}

/// Recurrence and Painleve routes fed with free-fermion data against the closed form.
pub fn free_fermion_consistency() -> Vec<Check> {
    let qs = grid_q(40);
    let mut worst = 0.0f64;
    for n in 1..=30 {
        for &q in &qs {
            worst = worst.max((rho_free_fermion_recurrence(n, q) - free_fermion_dm_circle(n, q, 1.0)).abs());
        }
    }
    let rec = Check::at_most("free-fermion recurrence vs closed form", worst, 1e-10, "max abs difference, N <= 30, L = 1");
    // The route works with log rho, so exact zeros x/L = k/N are left out.
    let xs = [0.07, 0.19, 0.33, 0.41, 0.47, 0.66, 0.83];
    let sig = Check::from_result("free-fermion sigma route vs closed form", (|| {
        let mut worst = 0.0f64;
        for n in 2..=10 {
            let v = rho_from_sigma(n, &xs, 1.0, Variant::FreeFermi)?;
            for (&q, a) in xs.iter().zip(&v) {
                worst = worst.max((a - free_fermion_dm_circle(n, q, 1.0)).abs());
            }
        }
        Ok(Check::at_most("free-fermion sigma route vs closed form", worst, 1e-8, "max abs difference, N = 2..10, L = 1"))
    })());
    vec![rec, sig]
}

/// |a - b| / (1 + |b|): absolute for small densities, relative for large ones.
fn mixed(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

pub const HARMONIC_X: [f64; 8] = [0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0];
pub const INTERVAL_X: [f64; 8] = [0.02, 0.1, 0.2, 0.3, 0.45, 0.5, 0.7, 0.9];

pub fn harmonic_cross() -> Vec<Check> {
    let name = "harmonic resolvent vs determinant";
    vec![Check::from_result(name, (|| {
        let mut worst = (0.0f64, 0, 0.0);
        let mut resid = 0.0f64;
        for n in 1..=8 {
            let cfg = GeometryConfig::harmonic(n);
            let sol = solve_harmonic_resolvent(n, &HARMONIC_X)?;
            resid = resid.max(max_residual(&sol));
            for (&x, smp) in HARMONIC_X.iter().zip(&sol.samples) {
                let d = mixed(smp.rho, rho_det(&cfg, -x, x)?);
                if d > worst.0 {
                    worst = (d, n, x);
                }
            }
        }
        Ok(Check::at_most(
            name,
            worst.0,
            1e-6,
            format!(
                "rho(-x; x), N <= 8, |a-b|/(1+|b|); worst at N={} x={}; largest ODE residual {resid:.2e}",
                worst.1, worst.2
            ),
        ))
    })())]
}

pub fn dn_cross() -> Vec<Check> {
    [Kind::Dirichlet, Kind::Neumann]
        .iter()
        .map(|&kind| {
            let name = format!("{} resolvent vs determinant", kind.name());
            Check::from_result(&name, (|| {
                let mut worst = (0.0f64, 0, 0.0);
                let mut resid = 0.0f64;
                for n in 1..=6 {
                    let cfg = GeometryConfig::new(kind, n, 1.0)?;
                    let sol = solve_jacobi_resolvent(&cfg, &INTERVAL_X)?;
                    resid = resid.max(max_residual(&sol));
                    for (&x, smp) in INTERVAL_X.iter().zip(&sol.samples) {
                        let d = mixed(smp.rho, rho_det(&cfg, 1.0 - x, x)?);
                        if d > worst.0 {
                            worst = (d, n, x);
                        }
                    }
                }
                Ok(Check::at_most(
                    &name,
                    worst.0,
                    1e-6,
                    format!(
                        "rho(L-x; x), N <= 6, L = 1, |a-b|/(1+|b|); worst at N={} x={}; largest ODE residual {resid:.2e}",
                        worst.1, worst.2
                    ),
                ))
            })())
        })
        .collect()
}

/// Estimates for N = 2..=5 at three points per geometry against the determinant.
pub fn monte_carlo(opts: &ValidateOptions) -> Vec<Check> {
    let mc = McOptions { sweeps: opts.mc_sweeps, seed: opts.seed, ..McOptions::default() };
    let mut out = Vec::new();
    for kind in [Kind::Circle, Kind::Harmonic, Kind::Dirichlet, Kind::Neumann] {
        let pts: Vec<(f64, f64)> = match kind {
            Kind::Harmonic => vec![(0.5, -0.2), (0.0, 0.0), (1.0, 0.3)],
            _ => vec![(0.3, 0.6), (0.5, 0.5), (0.2, 0.25)],
        };
        for n in 2..=5 {
            let name = format!("{} N={n} Monte Carlo z-scores", kind.name());
            out.push(Check::from_result(&name, (|| {
                let cfg = GeometryConfig::new(kind, n, 1.0)?;
                let est = mc_density_matrix(&cfg, &pts, &mc)?;
                let mut zs = Vec::new();
                for (&(x, y), e) in pts.iter().zip(&est) {
                    let exact = rho_det(&cfg, x, y)?;
                    zs.push((e.mean - exact) / e.stderr);
                }
                let worst = zs.iter().fold(0.0f64, |a, z| a.max(z.abs()));
                let warn = est.iter().find_map(|e| e.warning.clone()).map(|w| format!("; {w}")).unwrap_or_default();
                Ok(Check::at_most(
                    &name,
                    worst,
                    3.0,
                    format!(
                        "|mean - det| / stderr at {pts:?}: {:?}; {} sweeps, seed {}{warn}",
                        zs.iter().map(|z| (z * 100.0).round() / 100.0).collect::<Vec<_>>(),
                        est[0].sweeps,
                        mc.seed
                    ),
                ))
            })()));
        }
    }
    out
}

pub const CIRCLE_FIT_N: [usize; 7] = [16, 24, 32, 48, 64, 96, 128];
pub const HARMONIC_FIT_N: [usize; 7] = [4, 5, 6, 7, 8, 9, 10];

pub fn occupations() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::from_result("circle Fourier trace", (|| {
        let mut worst = 0.0f64;
        for n in [1usize, 2, 5, 16, 64, 128] {
            worst = worst.max(lambda_circle(n, usize::MAX, 1024)?.trace_residual);
        }
        Ok(Check::at_most("circle Fourier trace", worst, 1e-6, "|sum lambda - N|, full 1024-point spectrum"))
    })()));
    out.push(Check::from_result("interval Nystrom trace", (|| {
        let mut worst = 0.0f64;
        for kind in [Kind::Dirichlet, Kind::Neumann] {
            for n in 1..=6 {
                let cfg = GeometryConfig::new(kind, n, 1.0)?;
                worst = worst.max(nystrom_spectrum(&cfg, default_quad_order(&cfg))?.trace_residual);
            }
        }
        Ok(Check::at_most("interval Nystrom trace", worst, 1e-6, "|sum lambda - N|, Dirichlet and Neumann, N <= 6"))
    })()));
    out.push(Check::from_result("free-fermion circle projector", (|| {
        let mut worst = 0.0f64;
        for n in 1..=12 {
            let s = lambda_circle_free_fermion(n, 64, 256)?;
            let half = (n as f64 - 1.0) / 2.0;
            for (l, k) in s.lambdas.iter().zip(&s.modes) {
                let want = if k.abs() <= half + 1e-9 { 1.0 } else { 0.0 };
                worst = worst.max((l - want).abs());
            }
        }
        Ok(Check::at_most("free-fermion circle projector", worst, 1e-10, "max |lambda_k - {0,1}|, N <= 12"))
    })()));
    out.push(Check::from_result("circle lambda_0 exponent", (|| {
        let pts = lambda0_series(&GeometryConfig::circle(16, 1.0), &CIRCLE_FIT_N, 4096)?;
        let fit = scaling_fit(&pts)?;
        let (n0, n1) = (pts[0], pts[pts.len() - 1]);
        let a = (n1.1 - n0.1) / ((n1.0 as f64).sqrt() - (n0.0 as f64).sqrt());
        let b = n0.1 - a * (n0.0 as f64).sqrt();
        Ok(Check::within(
            "circle lambda_0 exponent",
            fit.exponent,
            0.48,
            0.52,
            format!(
                "log-log slope over N = {CIRCLE_FIT_N:?} (rms {:.1e}); a sqrt(N) + b through the end points gives a = {a:.5}, b = {b:.4}",
                fit.rms_residual
            ),
        ))
    })()));
    out.push(Check::from_result("harmonic lambda_0 exponent", (|| {
        let pts = lambda0_series(&GeometryConfig::harmonic(4), &HARMONIC_FIT_N, 0)?;
        let mut trace = 0.0f64;
        for &n in &HARMONIC_FIT_N {
            let cfg = GeometryConfig::harmonic(n);
            // The fit points are recomputed only for the small N to keep the trace check cheap.
            if n <= 6 {
                trace = trace.max(nystrom_spectrum(&cfg, default_quad_order(&cfg))?.trace_residual);
            }
        }
        let fit = scaling_fit(&pts)?;
        Ok(Check::within(
            "harmonic lambda_0 exponent",
            fit.exponent,
            0.50,
            0.65,
            format!("log-log slope over N = {HARMONIC_FIT_N:?} (rms {:.1e}); trace residual N <= 6: {trace:.1e}", fit.rms_residual),
        ))
    })()));
    out
}

pub fn thermodynamics() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::from_result("sigma_V contour coefficients vs series", (|| {
        let cf = sigma_v_coefficients_by_contour(2.0, 0.5, 64)?;
        let ser = sigma_v_series(2.0, 12)?;
        let worst = (0..10).fold(0.0f64, |a, k| a.max((cf[k] - ser[k]).norm()));
        Ok(Check::at_most(
            "sigma_V contour coefficients vs series",
            worst,
            1e-8,
            "Taylor coefficients 0..9 from the integrated solution on |t| = 0.5",
        ))
    })()));
    out.push(Check::from_result("large-distance asymptote ratio", (|| {
        let taus: Vec<f64> = (0..=24).map(|k| 8.0 + 0.5 * k as f64).collect();
        let r = rho_inf_scaled(&taus)?;
        let ratios: Vec<f64> = taus.iter().zip(&r).map(|(t, v)| v / large_distance_asymptote(*t)).collect();
        let worst = ratios.iter().fold(0.0f64, |a, x| a.max((x - 1.0).abs()));
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Check::at_most(
            "large-distance asymptote ratio",
            worst,
            0.01,
            format!("max |ratio - 1| for pi rho_0 x in [8, 20]; ratios span [{lo:.5}, {hi:.5}]"),
        ))
    })()));
    out.push(Check::from_result("sigma_N at N=200 vs sigma_V", (|| {
        let ts: Vec<f64> = (1..=40).map(|k| 0.1 * k as f64).collect();
        let d = thermo_consistency(200, &ts)?;
        Ok(Check::at_most("sigma_N at N=200 vs sigma_V", d, 1e-2, "max |difference| for 0 < t <= 4"))
    })()));
    for xi in [2.0, 1.0, 0.5] {
        let name = format!("parameter identity xi={xi}");
        out.push(Check::from_result(&name, (|| {
            let ts: Vec<f64> = (0..=18).map(|k| 0.5 + 0.25 * k as f64).collect();
            let c = hv_identity_check(xi, &ts)?;
            let worst = c.residual.iter().fold(0.0f64, |a, r| a.max(*r));
            Ok(Check::at_most(&name, worst, 1e-6, "max pointwise residual for t in [0.5, 5]"))
        })()));
    }
    out
}

/// Symmetry, positivity, residual gates and seed reproducibility.
pub fn properties(opts: &ValidateOptions) -> Vec<Check> {
    let mut out = Vec::new();
    let pairs = [(0.1, 0.7), (0.25, 0.4), (0.6, 0.95), (0.33, 0.34)];
    out.push(Check::from_result("symmetry rho(x;y) = rho(y;x)", (|| {
        let mut worst = 0.0f64;
        for kind in [Kind::Circle, Kind::Harmonic, Kind::Dirichlet, Kind::Neumann] {
            for n in [2usize, 4] {
                let cfg = GeometryConfig::new(kind, n, 1.0)?;
                for &(x, y) in &pairs {
                    let (x, y) = if kind == Kind::Harmonic { (2.0 * x - 1.0, 1.5 - 3.0 * y) } else { (x, y) };
                    worst = worst.max((rho_det(&cfg, x, y)? - rho_det(&cfg, y, x)?).abs());
                }
            }
        }
        Ok(Check::at_most("symmetry rho(x;y) = rho(y;x)", worst, 1e-14, "determinant route, all geometries, N = 2, 4"))
    })()));
    out.push(Check::from_result("positivity of rho", (|| {
        let mut lowest = f64::INFINITY;
        for q in grid_q(99) {
            for v in rho_circle_recurrence_all(40, q)? {
                lowest = lowest.min(v);
            }
        }
        for kind in [Kind::Harmonic, Kind::Dirichlet, Kind::Neumann] {
            let cfg = GeometryConfig::new(kind, 4, 1.0)?;
            for &(x, y) in &pairs {
                let (x, y) = if kind == Kind::Harmonic { (3.0 * x - 1.5, 1.0 - 2.0 * y) } else { (x, y) };
                lowest = lowest.min(rho_det(&cfg, x, y)?);
            }
        }
        Ok(Check::at_least("positivity of rho", lowest, 0.0, "circle recurrence N <= 40 on 99 points; determinant elsewhere"))
    })()));
    out.push(Check::from_result("positivity of Nystrom spectra", (|| {
        let mut lowest = 0.0f64;
        for kind in [Kind::Harmonic, Kind::Dirichlet, Kind::Neumann] {
            let cfg = GeometryConfig::new(kind, 3, 1.0)?;
            lowest = lowest.min(nystrom_spectrum(&cfg, default_quad_order(&cfg))?.neg_tail);
        }
        Ok(Check::at_least("positivity of Nystrom spectra", lowest, -1e-8, "most negative eigenvalue, N = 3"))
    })()));
    out.push(Check::from_result("resolvent residual gate", (|| {
        let mut worst = max_residual(&solve_harmonic_resolvent(5, &HARMONIC_X)?);
        for kind in [Kind::Dirichlet, Kind::Neumann] {
            let cfg = GeometryConfig::new(kind, 4, 1.0)?;
            worst = worst.max(max_residual(&solve_jacobi_resolvent(&cfg, &INTERVAL_X)?));
        }
        Ok(Check::at_most("resolvent residual gate", worst, 1e-7, "first-integral and ODE residuals on accepted steps"))
    })()));
    out.push(Check::from_result("Painleve residual gate", (|| {
        let opts = CirclePathOptions::default();
        let s = sigma_continue(12, Variant::Bose, &CIRCLE_X, &opts)?;
        let t = sigma_v(2.0, &[0.5, 2.0, 6.0])?;
        Ok(Check::at_most(
            "Painleve residual gate",
            s.max_residual.max(t.max_residual),
            opts.residual_tol,
            "relative residual of the second-order forms, sigma_12 and sigma_V",
        ))
    })()));
    out.push(Check::from_result("fixed-seed reproducibility", (|| {
        let cfg = GeometryConfig::new(Kind::Dirichlet, 3, 1.0)?;
        let mc = McOptions { sweeps: 5_000, seed: opts.seed, ..McOptions::default() };
        let a = mc_density_matrix(&cfg, &[(0.3, 0.6)], &mc)?;
        let b = mc_density_matrix(&cfg, &[(0.3, 0.6)], &mc)?;
        let same = a[0].mean.to_bits() == b[0].mean.to_bits() && a[0].stderr.to_bits() == b[0].stderr.to_bits();
        Ok(Check::at_most(
            "fixed-seed reproducibility",
            if same { 0.0 } else { 1.0 },
            0.0,
            format!("two runs with seed {} compared bitwise", opts.seed),
        ))
    })()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse_list(s.name()).unwrap(), vec![s]);
        }
        assert_eq!(Suite::parse_list("all").unwrap().len(), Suite::ALL.len());
        assert!(Suite::parse_list("nope").is_none());
        assert_eq!(Suite::parse_list("thermo, mc,thermo").unwrap(), vec![Suite::Thermo, Suite::Mc]);
        assert!(Suite::parse_list("thermo,").is_none());
    }

    #[test]
    fn bounds_and_failures() {
        assert!(Check::at_most("a", 1e-9, 1e-8, "").passed);
        assert!(!Check::at_most("a", f64::NAN, 1e-8, "").passed);
        assert!(!Check::within("b", 0.53, 0.48, 0.52, "").passed);
        assert!(Check::at_least("c", 0.0, 0.0, "").passed);
        assert!(!Check::failed("d", "boom").passed);
    }

    #[test]
    fn closed_form_suite_passes() {
        assert!(closed_forms().iter().all(|c| c.passed));
    }

    #[test]
    fn report_round_trips_through_json() {
        let r = run_suite(Suite::CircleCross, &ValidateOptions::default());
        let s = serde_json::to_string(&r).unwrap();
        let back: SuiteReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
