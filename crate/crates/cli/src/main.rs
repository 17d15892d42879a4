//! `safm`: command-line front end. Tabular numeric output goes to stdout
//! as CSV (or to `--out`), structured reports as JSON, diagnostics and the
//! run manifest to stderr. Reruns with the same manifest produce
//! byte-identical numeric output at any `--threads` setting.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use selfaffine::decay::{decay_scan, orbit_trace, shell_supremum};
use selfaffine::ek::{
    compute_trace, enumerate_cover, BadSetQuery, EkError,
};
use selfaffine::fourier::{
    mu_hat, verify_factorization, verify_renormalization, TransformQuery,
};
use selfaffine::ifs::{HomogeneousIfs, ParameterBox};
use selfaffine::pisot::{is_pisot_family, is_pisot_number, IntegerPolynomial};
use selfaffine::sampler::{auto_depth, sample_points, SampleConfig};

/// 17 significant digits: enough to make determinism byte-checkable.
fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

fn parse_i64_list(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

#[derive(Parser, Serialize)]
#[command(name = "safm", version, about = "Fourier analysis of homogeneous self-affine measures")]
struct Cli {
    /// Cap on worker threads (default: hardware concurrency). Output does
    /// not depend on this setting.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Evaluate the transform at one frequency.
    Transform(TransformArgs),
    /// Shell suprema of the transform modulus and the fitted decay exponent.
    DecayScan(DecayScanArgs),
    /// Transform modulus along a geometric frequency orbit.
    OrbitTrace(OrbitTraceArgs),
    /// Draw attractor points by sampling the digit series.
    Sample(SampleArgs),
    /// Pisot number / Pisot family decision for a monic integer polynomial.
    PisotCheck(PisotCheckArgs),
    /// Nearest-integer trace of the power sums for given theta, eta.
    EkTrace(EkTraceArgs),
    /// Interval cover of the finite-horizon bad parameter set.
    EkCover(EkCoverArgs),
    /// Run the factorization and renormalization identity checks.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct TransformArgs {
    /// Path to the JSON system descriptor {theta, digits, probs}.
    #[arg(long)]
    ifs: PathBuf,
    /// Frequency, comma-separated coordinates. Repeat for several rows.
    #[arg(long, value_parser = parse_f64_list, required = true)]
    xi: Vec<Vec<f64>>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DecayScanArgs {
    #[arg(long)]
    ifs: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    rmin: f64,
    #[arg(long, default_value_t = 256.0)]
    rmax: f64,
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct OrbitTraceArgs {
    #[arg(long)]
    ifs: PathBuf,
    /// Orbit base: frequencies are base^n * direction.
    #[arg(long)]
    base: f64,
    #[arg(long, default_value_t = 25)]
    n: u32,
    /// Direction vector (default: all ones).
    #[arg(long, value_parser = parse_f64_list)]
    direction: Option<std::vec::Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    ifs: PathBuf,
    /// Number of points.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Series depth (default: automatic, tail below 1e-12).
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PisotCheckArgs {
    /// Monic integer coefficients, leading first, e.g. "1,-1,-1".
    #[arg(long, value_parser = parse_i64_list)]
    poly: std::vec::Vec<i64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Optional tuple for the family decision instead of the number
    /// decision (comma-separated real parts).
    #[arg(long, value_parser = parse_f64_list)]
    thetas: Option<std::vec::Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EkTraceArgs {
    #[arg(long, value_parser = parse_f64_list)]
    theta: std::vec::Vec<f64>,
    #[arg(long, value_parser = parse_f64_list)]
    eta: std::vec::Vec<f64>,
    #[arg(long, default_value_t = 25)]
    n: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EkCoverArgs {
    #[arg(long)]
    b1: f64,
    #[arg(long)]
    b2: f64,
    #[arg(long, default_value_t = 0.3)]
    c1: f64,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    rho: f64,
    /// Fixed theta prefix for d = 2 covers.
    #[arg(long, value_parser = parse_f64_list)]
    theta_prefix: Option<std::vec::Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    ifs: PathBuf,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    params: serde_json::Value,
    seed: Option<u64>,
    version: &'a str,
    duration_ms: u128,
}

struct Emitted {
    text: String,
    out: Option<PathBuf>,
}

impl Emitted {
    fn deliver(self, manifest: &Manifest) -> Result<(), String> {
        match &self.out {
            None => print!("{}", self.text),
            Some(path) => {
                fs::write(path, &self.text).map_err(|e| format!("{}: {e}", path.display()))?;
                let side = path.with_extension(format!(
                    "{}manifest.json",
                    path.extension()
                        .map(|e| format!("{}.", e.to_string_lossy()))
                        .unwrap_or_default()
                ));
                fs::write(&side, serde_json::to_string_pretty(manifest).unwrap())
                    .map_err(|e| format!("{}: {e}", side.display()))?;
            }
        }
        Ok(())
    }
}

fn load_ifs(path: &PathBuf) -> Result<HomogeneousIfs, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    HomogeneousIfs::from_json(&text).map_err(|e| e.to_string())
}

fn run_transform(a: &TransformArgs) -> Result<Emitted, String> {
    let sys = load_ifs(&a.ifs)?;
    let mut text = String::new();
    let d = sys.dim();
    let header: Vec<String> = (1..=d).map(|k| format!("xi_{k}")).collect();
    text.push_str(&format!(
        "{},re,im,modulus,terms,error_bound\n",
        header.join(",")
    ));
    for xi in &a.xi {
        if xi.len() != d {
            return Err(format!("xi has {} coordinates, system has {d}", xi.len()));
        }
        let t = mu_hat(
            &sys,
            &TransformQuery::new(xi.clone()).with_tolerance(a.tol),
        );
        if !t.converged {
            eprintln!(
                "warning: truncation stopped at {} terms with bound {}",
                t.terms,
                fmt(t.error_bound)
            );
        }
        let coords: Vec<String> = xi.iter().map(|x| fmt(*x)).collect();
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            coords.join(","),
            fmt(t.value.re),
            fmt(t.value.im),
            fmt(t.value.norm()),
            t.terms,
            fmt(t.error_bound)
        ));
    }
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_decay_scan(a: &DecayScanArgs) -> Result<Emitted, String> {
    let sys = load_ifs(&a.ifs)?;
    if a.rmin < 1.0 {
        return Err("rmin must be at least 1".into());
    }
    let mut text = String::from("r,shell_sup,samples\n");
    let mut r = a.rmin;
    while r <= a.rmax * (1.0 + 1e-12) {
        let sup = shell_supremum(&sys, r, a.samples, a.seed);
        text.push_str(&format!("{},{},{}\n", fmt(r), fmt(sup), a.samples));
        r *= 2.0;
    }
    let profile = decay_scan(&sys, a.rmin, a.rmax, a.samples, a.seed);
    text.push_str(&format!(
        "# alpha_fit={} residual={}\n",
        fmt(profile.alpha_fit),
        fmt(profile.fit_residual)
    ));
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_orbit_trace(a: &OrbitTraceArgs) -> Result<Emitted, String> {
    let sys = load_ifs(&a.ifs)?;
    let direction = a
        .direction
        .clone()
        .unwrap_or_else(|| vec![1.0; sys.dim()]);
    if a.base <= 1.0 {
        return Err("base must exceed 1".into());
    }
    let trace = orbit_trace(&sys, &direction, a.base, a.n);
    let mut text = String::from("n,modulus\n");
    for (n, m) in trace {
        text.push_str(&format!("{n},{}\n", fmt(m)));
    }
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_sample(a: &SampleArgs) -> Result<Emitted, String> {
    let sys = load_ifs(&a.ifs)?;
    let cfg = SampleConfig {
        num_points: a.n,
        depth: a.depth.unwrap_or_else(|| auto_depth(&sys)),
        seed: a.seed,
    };
    if a.n == 0 {
        return Err("need at least one point".into());
    }
    let points = sample_points(&sys, &cfg);
    let header: Vec<String> = (1..=sys.dim()).map(|k| format!("x_{k}")).collect();
    let mut text = format!("{}\n", header.join(","));
    for p in points.iter() {
        let row: Vec<String> = p.iter().map(|x| fmt(*x)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_pisot_check(a: &PisotCheckArgs) -> Result<Emitted, String> {
    let p = IntegerPolynomial::new(a.poly.clone()).map_err(|e| e.to_string())?;
    let mut text = String::new();
    let emit = |text: &mut String, roots: &selfaffine::pisot::RootSet| {
        for z in &roots.roots {
            text.push_str(&format!(
                "root,{},{},{}\n",
                fmt(z.re),
                fmt(z.im),
                fmt(z.norm())
            ));
        }
        text.push_str(&format!("residual,{}\n", fmt(roots.residual)));
    };
    match &a.thetas {
        None => {
            let report = is_pisot_number(&p, a.tol).map_err(|e| e.to_string())?;
            emit(&mut text, &report.roots);
            text.push_str(&format!("decision,{}\n", report.decision));
            if let Some(clause) = &report.failed_clause {
                text.push_str(&format!("failed_clause,{clause}\n"));
            }
            text.push_str(&format!("screen,{}\n", report.screen.note));
        }
        Some(thetas) => {
            let tuple: Vec<Complex64> =
                thetas.iter().map(|t| Complex64::new(*t, 0.0)).collect();
            let report = is_pisot_family(&p, &tuple, a.tol).map_err(|e| e.to_string())?;
            emit(&mut text, &report.roots);
            text.push_str(&format!("decision,{}\n", report.decision));
            if let Some(clause) = &report.failed_clause {
                text.push_str(&format!("failed_clause,{clause}\n"));
            }
            text.push_str(&format!("screen,{}\n", report.screen.note));
        }
    }
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_ek_trace(a: &EkTraceArgs) -> Result<Emitted, String> {
    if a.theta.len() != a.eta.len() {
        return Err("theta and eta must have the same length".into());
    }
    let trace = compute_trace(&a.theta, &a.eta, a.n).map_err(|e| e.to_string())?;
    let mut text = String::from("n,k,eps\n");
    for n in 0..trace.len() {
        text.push_str(&format!("{n},{},{}\n", trace.k[n], fmt(trace.eps[n])));
    }
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_ek_cover(a: &EkCoverArgs) -> Result<Emitted, String> {
    let prefix = a.theta_prefix.clone().unwrap_or_default();
    let boxx = ParameterBox::new(a.b1, a.b2, a.c1, prefix.len() + 1)
        .map_err(|e| e.to_string())?;
    let q = BadSetQuery::new(boxx, prefix, a.n, a.delta, a.rho).map_err(|e| e.to_string())?;
    let report = match enumerate_cover(&q) {
        Ok(r) => r,
        Err(EkError::BudgetExceeded {
            visited,
            partial_count,
        }) => {
            return Err(format!(
                "combinatorial budget exceeded: {visited} nodes, {partial_count} sequences found"
            ))
        }
        Err(e) => return Err(e.to_string()),
    };
    let text = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
    Ok(Emitted {
        text,
        out: a.out.clone(),
    })
}

fn run_verify(a: &VerifyArgs) -> Result<(Emitted, bool), String> {
    let sys = load_ifs(&a.ifs)?;
    let d = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut text = String::from("check,cases,max_residual,threshold,pass\n");
    let mut all_pass = true;

    // renormalization identity over log-uniform frequencies up to 1e6,
    // the lead coordinate pinned to the magnitude so ||xi||_inf >= 1
    let mut worst_rel: f64 = 0.0;
    for _ in 0..a.count {
        let mag = 10f64.powf(rng.random::<f64>() * 6.0);
        let lead = rng.random_range(0..d);
        let xi: Vec<f64> = (0..d)
            .map(|k| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                if k == lead {
                    sign * mag
                } else {
                    sign * mag * rng.random::<f64>()
                }
            })
            .collect();
        let check = verify_renormalization(&sys, &xi, 1e-13).map_err(|e| e.to_string())?;
        worst_rel = worst_rel.max(check.relative_residual);
    }
    let pass = worst_rel <= a.tol;
    all_pass &= pass;
    text.push_str(&format!(
        "renormalization,{},{},{},{}\n",
        a.count,
        fmt(worst_rel),
        fmt(a.tol),
        pass
    ));

    // convolution factorization for n = 2, 3
    for parts in [2u32, 3] {
        let mut worst: f64 = 0.0;
        for _ in 0..a.count {
            let xi: Vec<f64> = (0..d)
                .map(|_| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * (1.0 + 9.0 * rng.random::<f64>())
                })
                .collect();
            let check = verify_factorization(&sys, parts, &xi, a.tol);
            worst = worst.max(check.residual);
        }
        let pass = worst <= a.tol;
        all_pass &= pass;
        text.push_str(&format!(
            "factorization_n{parts},{},{},{},{}\n",
            a.count,
            fmt(worst),
            fmt(a.tol),
            pass
        ));
    }

    Ok((
        Emitted {
            text,
            out: a.out.clone(),
        },
        all_pass,
    ))
}

fn dispatch(cli: &Cli) -> Result<(Emitted, bool), String> {
    match &cli.command {
        Command::Transform(a) => run_transform(a).map(|e| (e, true)),
        Command::DecayScan(a) => run_decay_scan(a).map(|e| (e, true)),
        Command::OrbitTrace(a) => run_orbit_trace(a).map(|e| (e, true)),
        Command::Sample(a) => run_sample(a).map(|e| (e, true)),
        Command::PisotCheck(a) => run_pisot_check(a).map(|e| (e, true)),
        Command::EkTrace(a) => run_ek_trace(a).map(|e| (e, true)),
        Command::EkCover(a) => run_ek_cover(a).map(|e| (e, true)),
        Command::Verify(a) => run_verify(a),
    }
}

fn seed_of(cli: &Cli) -> Option<u64> {
    match &cli.command {
        Command::DecayScan(a) => Some(a.seed),
        Command::Sample(a) => Some(a.seed),
        Command::Verify(a) => Some(a.seed),
        _ => None,
    }
}

fn subcommand_name(cli: &Cli) -> &'static str {
    match &cli.command {
        Command::Transform(_) => "transform",
        Command::DecayScan(_) => "decay-scan",
        Command::OrbitTrace(_) => "orbit-trace",
        Command::Sample(_) => "sample",
        Command::PisotCheck(_) => "pisot-check",
        Command::EkTrace(_) => "ek-trace",
        Command::EkCover(_) => "ek-cover",
        Command::Verify(_) => "verify",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let started = Instant::now();
    let result = dispatch(&cli);
    let manifest = Manifest {
        subcommand: subcommand_name(&cli),
        params: serde_json::to_value(&cli.command).unwrap_or_default(),
        seed: seed_of(&cli),
        version: env!("CARGO_PKG_VERSION"),
        duration_ms: started.elapsed().as_millis(),
    };
    match result {
        Ok((emitted, pass)) => {
            if let Err(e) = emitted.deliver(&manifest) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            eprintln!("{}", serde_json::to_string(&manifest).unwrap());
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
