//! Metropolis sampling of the classical-group eigenvalue densities whose averages
//! give the density matrix of the next larger system.

use crate::error::{IbgError, Result};
use crate::geometry::{GeometryConfig, Kind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Seed used when neither a flag nor `IBG_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_021_001;

/// Seed from the `IBG_SEED` environment variable, falling back to [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var("IBG_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ensemble {
    /// Eigenphases of U(N) on [0, 2 pi), weight prod |e^{i a} - e^{i b}|^2.
    UnitaryGroup,
    /// Weight exp(-sum x^2) prod |x_j - x_k|^2 on the real line.
    Gue,
    /// Angles on [0, pi], weight prod sin^2 prod (cos - cos)^2.
    Symplectic,
    /// Angles on [0, pi], weight prod (cos - cos)^2.
    OrthogonalPlus,
}

impl Ensemble {
    pub fn for_kind(kind: Kind) -> Self {
        match kind {
            Kind::Circle => Ensemble::UnitaryGroup,
            Kind::Harmonic => Ensemble::Gue,
            Kind::Dirichlet => Ensemble::Symplectic,
            Kind::Neumann => Ensemble::OrthogonalPlus,
        }
    }

    fn pair(&self, a: f64, b: f64) -> f64 {
        match self {
            Ensemble::UnitaryGroup => 2.0 * (2.0 * (0.5 * (a - b)).sin()).abs().ln(),
            Ensemble::Gue => 2.0 * (a - b).abs().ln(),
            Ensemble::Symplectic | Ensemble::OrthogonalPlus => 2.0 * (a.cos() - b.cos()).abs().ln(),
        }
    }

    fn single(&self, a: f64) -> f64 {
        match self {
            Ensemble::Gue => -a * a,
            Ensemble::Symplectic => 2.0 * a.sin().abs().ln(),
            _ => 0.0,
        }
    }

    /// Maps a proposal back into the domain (symmetric reflections keep detailed balance).
    fn fold(&self, a: f64) -> f64 {
        match self {
            Ensemble::UnitaryGroup => a.rem_euclid(2.0 * PI),
            Ensemble::Gue => a,
            Ensemble::Symplectic | Ensemble::OrthogonalPlus => {
                let t = a.rem_euclid(2.0 * PI);
                if t > PI { 2.0 * PI - t } else { t }
            }
        }
    }

    fn initial(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|k| {
                let kf = k as f64;
                match self {
                    Ensemble::UnitaryGroup => 2.0 * PI * (kf + 0.5) / nf,
                    Ensemble::Gue => (2.0 * nf).sqrt() * (2.0 * (kf + 0.5) / nf - 1.0),
                    _ => PI * (kf + 0.5) / nf,
                }
            })
            .collect()
    }

    fn initial_width(&self, n: usize) -> f64 {
        match self {
            Ensemble::Gue => 1.0 / (n as f64).sqrt(),
            _ => 1.0 / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub sweeps: usize,
    /// Burn-in sweeps per chain; `None` means 100 N.
    pub burn_in: Option<usize>,
    pub batches: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { sweeps: 100_000, burn_in: None, batches: 50, chains: 5, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub sweeps: usize,
    /// Integrated autocorrelation time estimated from batch variance.
    pub autocorrelation: f64,
    pub seed: u64,
    pub acceptance: f64,
    pub warning: Option<String>,
}

/// One Metropolis chain over the eigenvalue density.
pub struct Chain {
    ensemble: Ensemble,
    pub values: Vec<f64>,
    width: f64,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

impl Chain {
    pub fn new(ensemble: Ensemble, n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Chain { ensemble, values: ensemble.initial(n), width: ensemble.initial_width(n), rng, accepted: 0, proposed: 0 }
    }

    /// One sweep of single-coordinate updates.
    pub fn sweep(&mut self) {
        let e = self.ensemble;
        let n = self.values.len();
        for i in 0..n {
            let old = self.values[i];
            let new = e.fold(old + self.width * (2.0 * self.rng.gen::<f64>() - 1.0));
            let mut delta = e.single(new) - e.single(old);
            for (k, &v) in self.values.iter().enumerate() {
                if k != i {
                    delta += e.pair(new, v) - e.pair(old, v);
                }
            }
            self.proposed += 1;
            let u: f64 = self.rng.gen();
            if delta >= 0.0 || u < delta.exp() {
                self.values[i] = new;
                self.accepted += 1;
            }
        }
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 { 0.0 } else { self.accepted as f64 / self.proposed as f64 }
    }

    /// Burn-in with proposal width tuned toward 40% acceptance, then counters reset.
    pub fn burn_in(&mut self, sweeps: usize) {
        let block = 50;
        let mut done = 0;
        while done < sweeps {
            let (a0, p0) = (self.accepted, self.proposed);
            let m = block.min(sweeps - done);
            for _ in 0..m {
                self.sweep();
            }
            done += m;
            let rate = (self.accepted - a0) as f64 / ((self.proposed - p0).max(1)) as f64;
            self.width *= (2.0 * (rate - 0.4)).exp();
            self.width = self.width.clamp(1e-6, 10.0);
        }
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Stream of post-burn-in samples of one chain.
pub fn sample_ensemble(ensemble: Ensemble, n: usize, sweeps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut ch = Chain::new(ensemble, n, seed, 0);
    ch.burn_in(100 * n.max(1));
    (0..sweeps)
        .map(|_| {
            ch.sweep();
            ch.values.clone()
        })
        .collect()
}

/// Observable whose average is rho_{N+1}(x; y); `signed` keeps the sign (free fermions, circle only).
fn observable(cfg: &GeometryConfig, vals: &[f64], x: f64, y: f64, signed: bool) -> f64 {
    let l = cfg.l;
    match cfg.kind {
        Kind::Circle => {
            let (a, b) = (PI * x / l, PI * y / l);
            let mut p = 1.0 / l;
            for &t in vals {
                let f = 4.0 * (a - 0.5 * t).sin() * (b - 0.5 * t).sin();
                p *= if signed { f } else { f.abs() };
            }
            p
        }
        Kind::Harmonic => {
            let m = vals.len();
            let ln_c2 = 0.5 * PI.ln() - m as f64 * 2f64.ln() + statrs::function::gamma::ln_gamma(m as f64 + 1.0);
            let mut p = (-(x * x + y * y) / 2.0 - ln_c2).exp();
            for &t in vals {
                p *= ((x - t) * (y - t)).abs();
            }
            p
        }
        Kind::Dirichlet | Kind::Neumann => {
            let (cx, cy) = ((PI * x / l).cos(), (PI * y / l).cos());
            let mut p = if cfg.kind == Kind::Dirichlet {
                2.0 / l * (PI * x / l).sin() * (PI * y / l).sin()
            } else if vals.is_empty() {
                1.0 / l
            } else {
                1.0 / (2.0 * l)
            };
            for &t in vals {
                p *= 4.0 * ((cx - t.cos()) * (cy - t.cos())).abs();
            }
            p
        }
    }
}

fn estimate(cfg: &GeometryConfig, points: &[(f64, f64)], opts: &McOptions, signed: bool) -> Result<Vec<McEstimate>> {
    if cfg.n == 0 {
        return Err(IbgError::InvalidArgument("N must be at least 1".into()));
    }
    if signed && cfg.kind != Kind::Circle {
        return Err(IbgError::InvalidArgument("the signed estimator is defined for the circle only".into()));
    }
    for &(x, y) in points {
        cfg.check_point(x)?;
        cfg.check_point(y)?;
    }
    let chains = opts.chains.max(1);
    let per_chain_batches = (opts.batches / chains).max(2);
    let batch_len = (opts.sweeps / (chains * per_chain_batches)).max(1);
    let m = cfg.n - 1;
    let ens = Ensemble::for_kind(cfg.kind);
    let burn = opts.burn_in.unwrap_or(100 * cfg.n);
    // Per chain: batch means [point][batch], raw second moments, acceptance.
    let runs: Vec<(Vec<Vec<f64>>, Vec<(f64, f64)>, f64)> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut ch = Chain::new(ens, m, opts.seed, c as u64);
            if m > 0 {
                ch.burn_in(burn);
            }
            let mut bm = vec![Vec::with_capacity(per_chain_batches); points.len()];
            let mut mom = vec![(0.0, 0.0); points.len()];
            for _ in 0..per_chain_batches {
                let mut acc = vec![0.0; points.len()];
                for _ in 0..batch_len {
                    if m > 0 {
                        ch.sweep();
                    }
                    for (j, &(x, y)) in points.iter().enumerate() {
                        let v = observable(cfg, &ch.values, x, y, signed);
                        acc[j] += v;
                        mom[j].0 += v;
                        mom[j].1 += v * v;
                    }
                }
                for j in 0..points.len() {
                    bm[j].push(acc[j] / batch_len as f64);
                }
            }
            (bm, mom, ch.acceptance())
        })
        .collect();
    let total = chains * per_chain_batches * batch_len;
    let acceptance = if m == 0 { 1.0 } else { runs.iter().map(|r| r.2).sum::<f64>() / chains as f64 };
    // A single phase of U(1) or O+(2) has a flat density and is always accepted.
    let flat = m == 1 && matches!(ens, Ensemble::UnitaryGroup | Ensemble::OrthogonalPlus);
    let warning = if m > 0 && !flat && !(0.1..=0.9).contains(&acceptance) {
        Some(format!("acceptance rate {acceptance:.3} outside [0.1, 0.9]"))
    } else {
        None
    };
    Ok((0..points.len())
        .map(|j| {
            let means: Vec<f64> = runs.iter().flat_map(|r| r.0[j].iter().copied()).collect();
            let b = means.len() as f64;
            let mean = means.iter().sum::<f64>() / b;
            let var_b = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
            let (s1, s2) = runs.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.1[j].0, acc.1 + r.1[j].1));
            let var = (s2 / total as f64 - (s1 / total as f64).powi(2)).max(0.0);
            let tau = if var > 0.0 { batch_len as f64 * var_b / var } else { 0.0 };
            McEstimate {
                mean,
                stderr: (var_b / b).sqrt(),
                sweeps: total,
                autocorrelation: tau,
                seed: opts.seed,
                acceptance,
                warning: warning.clone(),
            }
        })
        .collect())
}

/// Estimates rho_N(x; y) of `cfg` (N = cfg.n particles) from the (N-1)-eigenvalue ensemble.
pub fn mc_density_matrix(cfg: &GeometryConfig, points: &[(f64, f64)], opts: &McOptions) -> Result<Vec<McEstimate>> {
    estimate(cfg, points, opts, false)
}

/// Signed circle average, which reproduces the free-fermion density matrix rho_N(x; 0).
pub fn mc_free_fermion_check(n: usize, l: f64, xs: &[f64], opts: &McOptions) -> Result<Vec<McEstimate>> {
    let cfg = GeometryConfig::circle(n, l);
    let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
    estimate(&cfg, &pts, opts, true)
}
