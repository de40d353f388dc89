use clap::{Args, Parser, Subcommand, ValueEnum};
use ibg::determinant::rho_det;
use ibg::geometry::{GeometryConfig, Kind};
use ibg::montecarlo::{default_seed, mc_density_matrix, McOptions};
use ibg::occupation::{default_quad_order, lambda_circle, nystrom_spectrum, OccupationSpectrum};
use ibg::painleve::{rho_from_sigma, Variant};
use ibg::recurrence::rho_circle_recurrence;
use ibg::resolvent::{max_residual, solve_harmonic_resolvent, solve_jacobi_resolvent};
use ibg::validate::{run_suite, Suite, SuiteReport, ValidateOptions};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ibg", version, about = "One-particle density matrices and occupation numbers of the finite impenetrable Bose gas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate rho_N(x; y) on a grid by one route.
    Rho(RhoArgs),
    /// Occupation numbers lambda_k.
    Occupations(OccArgs),
    /// Run validation suites; exits 1 if any check fails.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Geometry {
    Circle,
    Harmonic,
    Dirichlet,
    Neumann,
}

impl Geometry {
    fn kind(self) -> Kind {
        match self {
            Geometry::Circle => Kind::Circle,
            Geometry::Harmonic => Kind::Harmonic,
            Geometry::Dirichlet => Kind::Dirichlet,
            Geometry::Neumann => Kind::Neumann,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Det,
    Rec,
    Painleve,
    Resolvent,
    Mc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum YMode {
    Zero,
    Antidiag,
    Grid,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
struct RhoArgs {
    #[arg(long, value_enum)]
    geometry: Geometry,
    /// Particle number.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum)]
    method: Method,
    /// Number of x points.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, value_enum, default_value = "zero")]
    y_mode: YMode,
    /// System length (ignored by the harmonic well).
    #[arg(long = "L", alias = "length", default_value_t = 1.0)]
    length: f64,
    /// Monte Carlo seed; defaults to IBG_SEED or the built-in seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 5)]
    chains: usize,
    #[arg(long, default_value_t = 50)]
    batches: usize,
    /// Burn-in sweeps per chain (default 100 N).
    #[arg(long)]
    burn_in: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    #[serde(skip)]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct OccArgs {
    #[arg(long, value_enum)]
    geometry: Geometry,
    #[arg(long)]
    n: usize,
    /// Quadrature order (Nystrom) or grid size (circle); a geometry default when omitted.
    #[arg(long)]
    quad: Option<usize>,
    /// Largest |k| reported on the circle.
    #[arg(long, default_value_t = 32)]
    kmax: usize,
    #[arg(long = "L", alias = "length", default_value_t = 1.0)]
    length: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    #[serde(skip)]
    format: Format,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: SuiteList,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    sweeps: usize,
    /// JSON report path; the summary always goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct SuiteList(Vec<Suite>);

fn parse_suite(s: &str) -> Result<SuiteList, String> {
    Suite::parse_list(s).map(SuiteList).ok_or_else(|| {
        let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
        format!("unknown suite '{s}'; expected one of {} or all", names.join(", "))
    })
}

#[derive(Debug, Serialize)]
struct Record {
    x: f64,
    y: f64,
    value: f64,
    method: Method,
    /// Standard error (Monte Carlo) or largest equation residual (ODE routes).
    error: Option<f64>,
}

#[derive(Serialize)]
struct RunReport<'a, C: Serialize> {
    command: Vec<String>,
    config: &'a C,
    seed: Option<u64>,
    records: Vec<Record>,
}

/// Failure classes mapped onto exit codes 1 and 2.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<ibg::IbgError> for Failure {
    fn from(e: ibg::IbgError) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn sink(out: &Option<PathBuf>) -> std::io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn x_grid(cfg: &GeometryConfig, grid: usize) -> Vec<f64> {
    let g = grid as f64;
    match cfg.kind {
        Kind::Circle => (0..grid).map(|j| cfg.l * j as f64 / g).collect(),
        Kind::Harmonic => {
            let a = (2.0 * cfg.n as f64).sqrt() + 3.0;
            if grid == 1 {
                vec![0.0]
            } else {
                (0..grid).map(|j| -a + 2.0 * a * j as f64 / (g - 1.0)).collect()
            }
        }
        _ => (0..grid).map(|j| cfg.l * (j as f64 + 0.5) / g).collect(),
    }
}

/// Reflection about the centre of the system.
fn antipode(cfg: &GeometryConfig, x: f64) -> f64 {
    match cfg.kind {
        Kind::Harmonic => -x,
        Kind::Circle => {
            let y = cfg.l - x;
            if y >= cfg.l {
                0.0
            } else {
                y
            }
        }
        _ => cfg.l - x,
    }
}

fn points(cfg: &GeometryConfig, args: &RhoArgs) -> Vec<(f64, f64)> {
    let xs = x_grid(cfg, args.grid);
    match args.y_mode {
        YMode::Zero => xs.iter().map(|&x| (x, 0.0)).collect(),
        YMode::Antidiag => xs.iter().map(|&x| (x, antipode(cfg, x))).collect(),
        YMode::Grid => xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect(),
    }
}

/// Circle separation reduced to [0, L).
fn separation(l: f64, x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    if d >= l {
        d - l
    } else {
        d
    }
}

fn compute(cfg: &GeometryConfig, args: &RhoArgs, seed: u64) -> Result<Vec<Record>, Failure> {
    let pts = points(cfg, args);
    let m = args.method;
    let rec = |(x, y): (f64, f64), value: f64, error: Option<f64>| Record { x, y, value, method: m, error };
    match m {
        Method::Det => {
            let vals: Vec<f64> =
                pts.par_iter().map(|&(x, y)| rho_det(cfg, x, y)).collect::<ibg::Result<_>>()?;
            Ok(pts.into_iter().zip(vals).map(|(p, v)| rec(p, v, None)).collect())
        }
        Method::Rec => {
            let vals: Vec<f64> = pts
                .par_iter()
                .map(|&(x, y)| rho_circle_recurrence(cfg.n, separation(cfg.l, x, y), cfg.l))
                .collect::<ibg::Result<_>>()?;
            Ok(pts.into_iter().zip(vals).map(|(p, v)| rec(p, v, None)).collect())
        }
        Method::Painleve => {
            let ds: Vec<f64> = pts.iter().map(|&(x, y)| separation(cfg.l, x, y)).collect();
            let vals = rho_from_sigma(cfg.n, &ds, cfg.l, Variant::Bose)?;
            Ok(pts.into_iter().zip(vals).map(|(p, v)| rec(p, v, None)).collect())
        }
        Method::Resolvent => {
            let (vals, resid): (Vec<f64>, f64) = if cfg.kind == Kind::Harmonic {
                let xs: Vec<f64> = pts.iter().map(|p| p.0.abs()).collect();
                let sol = solve_harmonic_resolvent(cfg.n, &xs)?;
                (sol.samples.iter().map(|s| s.rho).collect(), max_residual(&sol))
            } else {
                let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let sol = solve_jacobi_resolvent(cfg, &xs)?;
                (sol.samples.iter().map(|s| s.rho).collect(), max_residual(&sol))
            };
            Ok(pts.into_iter().zip(vals).map(|(p, v)| rec(p, v, Some(resid))).collect())
        }
        Method::Mc => {
            let opts = McOptions {
                sweeps: args.sweeps,
                burn_in: args.burn_in,
                batches: args.batches,
                chains: args.chains,
                seed,
            };
            let est = mc_density_matrix(cfg, &pts, &opts)?;
            if let Some(w) = est.first().and_then(|e| e.warning.clone()) {
                eprintln!("warning: {w}");
            }
            Ok(pts.into_iter().zip(est).map(|(p, e)| rec(p, e.mean, Some(e.stderr))).collect())
        }
    }
}

fn check_combination(g: Geometry, m: Method, y: YMode) -> Result<(), Failure> {
    let circle = g == Geometry::Circle;
    match m {
        Method::Rec | Method::Painleve if !circle => {
            Err(Failure::Usage(format!("method {m:?} is defined for the circle only").to_lowercase()))
        }
        Method::Resolvent if circle => Err(Failure::Usage("method resolvent is not defined for the circle".into())),
        Method::Resolvent if y != YMode::Antidiag => {
            Err(Failure::Usage("method resolvent evaluates the antidiagonal only; use --y-mode antidiag".into()))
        }
        _ => Ok(()),
    }
}

fn cmd_rho(args: &RhoArgs) -> Result<(), Failure> {
    check_combination(args.geometry, args.method, args.y_mode)?;
    if args.grid == 0 {
        return Err(Failure::Usage("--grid must be positive".into()));
    }
    let cfg = GeometryConfig::new(args.geometry.kind(), args.n, args.length).map_err(|e| Failure::Usage(e.to_string()))?;
    let seed = args.seed.unwrap_or_else(default_seed);
    let records = compute(&cfg, args, seed)?;
    let mut w = sink(&args.out)?;
    match args.format {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(["x", "y", "value", "method", "error"]).map_err(|e| Failure::Run(e.to_string()))?;
            for r in &records {
                let method = format!("{:?}", r.method).to_lowercase();
                c.write_record([num(r.x), num(r.y), num(r.value), method, opt_num(r.error)])
                    .map_err(|e| Failure::Run(e.to_string()))?;
            }
            c.flush()?;
        }
        Format::Json => {
            let seed = (args.method == Method::Mc).then_some(seed);
            let report = RunReport { command: std::env::args().collect(), config: args, seed, records };
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Failure::Run(e.to_string()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_occupations(args: &OccArgs) -> Result<(), Failure> {
    let cfg = GeometryConfig::new(args.geometry.kind(), args.n, args.length).map_err(|e| Failure::Usage(e.to_string()))?;
    let spec: OccupationSpectrum = match cfg.kind {
        Kind::Circle => {
            let grid = args.quad.unwrap_or_else(|| default_quad_order(&cfg));
            // Occupation numbers do not depend on L on the circle.
            lambda_circle(cfg.n, args.kmax, grid)?
        }
        _ => nystrom_spectrum(&cfg, args.quad.unwrap_or_else(|| default_quad_order(&cfg)))?,
    };
    let mut w = sink(&args.out)?;
    match args.format {
        Format::Csv => {
            {
                let mut c = csv::Writer::from_writer(&mut w);
                c.write_record(["index", "mode", "lambda"]).map_err(|e| Failure::Run(e.to_string()))?;
                for (i, l) in spec.lambdas.iter().enumerate() {
                    let mode = spec.modes.get(i).map(|m| format!("{m}")).unwrap_or_default();
                    c.write_record([i.to_string(), mode, num(*l)]).map_err(|e| Failure::Run(e.to_string()))?;
                }
                c.flush()?;
            }
            writeln!(
                w,
                "# trace_residual={} neg_tail={} method={:?} quad_order={}",
                num(spec.trace_residual),
                num(spec.neg_tail),
                spec.method,
                spec.quad_order
            )?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct OccReport<'a> {
                command: Vec<String>,
                config: &'a OccArgs,
                spectrum: &'a OccupationSpectrum,
            }
            let r = OccReport { command: std::env::args().collect(), config: args, spectrum: &spec };
            serde_json::to_writer_pretty(&mut w, &r).map_err(|e| Failure::Run(e.to_string()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool, Failure> {
    let opts = ValidateOptions { seed: args.seed.unwrap_or_else(default_seed), mc_sweeps: args.sweeps };
    let reports: Vec<SuiteReport> = args.suite.0.iter().map(|s| run_suite(*s, &opts)).collect();
    let mut all = true;
    for r in &reports {
        println!("{} {} ({:.1} s)", if r.passed { "PASS" } else { "FAIL" }, r.suite.name(), r.seconds);
        for c in &r.checks {
            let m = c.measured.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "n/a".into());
            println!("  [{}] {}: {m} -- {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        all &= r.passed;
    }
    if let Some(p) = &args.out {
        #[derive(Serialize)]
        struct ValidateReport<'a> {
            command: Vec<String>,
            seed: u64,
            mc_sweeps: usize,
            passed: bool,
            suites: &'a [SuiteReport],
        }
        let r = ValidateReport {
            command: std::env::args().collect(),
            seed: opts.seed,
            mc_sweeps: opts.mc_sweeps,
            passed: all,
            suites: &reports,
        };
        let mut w = sink(&Some(p.clone()))?;
        serde_json::to_writer_pretty(&mut w, &r).map_err(|e| Failure::Run(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Rho(a) => cmd_rho(a).map(|_| true),
        Command::Occupations(a) => cmd_occupations(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
