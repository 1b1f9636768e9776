use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use wext_core::config::{parse_levels, parse_list, LambdaGrid, RunConfig, TLevels};
use wext_core::extension::{
    apply_trace_operator, default_test_bank, energy_identity_check, extend_with_weight, lattice_lambdas, lattice_xi_grid,
    verify_poisson_symbol_with, weak_residual, PoissonSymbolOptions,
};
use wext_core::io::{read_field, read_trace, write_csv, write_field, write_trace};
use wext_core::rigidity::{rigidity_report, Tolerances};
use wext_core::symbol::{compute_symbol_with, ProfileOptions, ProfileSolver, SymbolOptions, SymbolTable};
use wext_core::{Error, GridMeta, TraceField, Weight};

#[derive(Parser)]
#[command(name = "wext", version, about = "Weighted half-space extensions, trace symbols and rigidity diagnostics")]
struct Cli {
    /// JSON run configuration; explicit flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate m(λ) as CSV (lambda,m,est_error)
    Symbol(SymbolArgs),
    /// Solve one profile g(λ, ·) and write its mesh values as CSV
    Profile(ProfileArgs),
    /// Extend a trace into the half-space
    Extend(ExtendArgs),
    /// Apply the trace operator u ↦ F⁻¹(m(|ξ|²) û)
    TraceOp(TraceOpArgs),
    /// Numerical consistency checks with a JSON verdict
    #[command(subcommand)]
    Verify(Verify),
    /// Angle, growth and direction diagnostics of a 2D half-space field
    Rigidity(RigidityArgs),
}

#[derive(Args)]
struct SymbolArgs {
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    lmin: Option<f64>,
    #[arg(long)]
    lmax: Option<f64>,
    #[arg(long)]
    num: Option<usize>,
    /// log-spaced instead of linear
    #[arg(long)]
    log: bool,
    #[arg(long)]
    tol: Option<f64>,
    /// write the converged rows even if some λ failed
    #[arg(long)]
    partial: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendArgs {
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    trace: PathBuf,
    /// comma-separated list starting at 0, or "auto"
    #[arg(long, default_value = "auto")]
    tlevels: String,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceOpArgs {
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TraceSource {
    /// trace file; a random multi-mode trace is generated when absent
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    modes: usize,
    #[arg(long, default_value_t = 4)]
    max_wavenumber: i64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "auto")]
    tlevels: String,
}

#[derive(Subcommand)]
enum Verify {
    /// Fourier transform of the Poisson kernel against the profiles
    Poisson {
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 32)]
        modes: usize,
        #[arg(long, default_value = "0.1,0.5,1,2")]
        tlevels: String,
        #[arg(long, default_value_t = 8.0 * std::f64::consts::PI)]
        period: f64,
        #[arg(long, default_value_t = 2048)]
        points: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol_closed_form: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy identity for an extended trace
    Energy {
        #[arg(long)]
        weight: Option<String>,
        #[command(flatten)]
        source: TraceSource,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Homogeneity m(λ) = λˢ m(1) for power weights
    Scaling {
        #[arg(long)]
        weight: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        lmin: f64,
        #[arg(long, default_value_t = 10.0)]
        lmax: f64,
        #[arg(long, default_value_t = 20)]
        num: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-form residual of the extension against the trace operator
    Weak {
        #[arg(long)]
        weight: Option<String>,
        #[command(flatten)]
        source: TraceSource,
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RigidityArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    weight: Option<String>,
    /// radii for the growth statistic
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    eps_rho: Option<f64>,
    #[arg(long)]
    tol_theta: Option<f64>,
    #[arg(long)]
    tol_omega: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = format!("error[{}]: {e}", e.code());
        if e.is_usage() {
            Failure::Usage(msg)
        } else {
            Failure::Numerical(msg)
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(format!("error[usage]: {}", msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = setup_threads().and_then(|_| {
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        run(cli.cmd, &cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
    }
}

fn setup_threads() -> CmdResult {
    if let Ok(v) = std::env::var("WEXT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| usage(format!("WEXT_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(usage("WEXT_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cmd: Command, cfg: &RunConfig) -> CmdResult {
    match cmd {
        Command::Symbol(a) => cmd_symbol(a, cfg),
        Command::Profile(a) => cmd_profile(a, cfg),
        Command::Extend(a) => cmd_extend(a, cfg),
        Command::TraceOp(a) => cmd_trace_op(a, cfg),
        Command::Verify(v) => cmd_verify(v, cfg),
        Command::Rigidity(a) => cmd_rigidity(a, cfg),
    }
}

fn weight_of(flag: &Option<String>, cfg: &RunConfig) -> Result<Weight, Failure> {
    let spec = flag.as_ref().or(cfg.weight.as_ref()).ok_or_else(|| usage("--weight is required"))?;
    Ok(Weight::parse(spec)?)
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

fn sink(out: &Option<PathBuf>, cfg: &RunConfig) -> Result<Box<dyn Write>, Failure> {
    match out.as_ref().or(cfg.out.as_ref()) {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(Error::from)?))),
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn out_path(out: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    out.as_ref().or(cfg.out.as_ref()).cloned().ok_or_else(|| usage("--out is required"))
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, cfg: &RunConfig, value: &T) -> CmdResult {
    let mut w = sink(out, cfg)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(Error::from)?;
    Ok(())
}

fn verdict<T: Serialize>(out: &Option<PathBuf>, cfg: &RunConfig, pass: bool, body: T) -> CmdResult {
    emit_json(out, cfg, &json!({ "pass": pass, "result": body }))?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Numerical("error[check_failed]: verification did not meet its tolerance".into()))
    }
}

fn cmd_symbol(a: SymbolArgs, cfg: &RunConfig) -> CmdResult {
    let w = weight_of(&a.weight, cfg)?;
    let base = cfg.lambda_grid.clone();
    let grid = LambdaGrid {
        min: a.lmin.or(base.as_ref().map(|g| g.min)).ok_or_else(|| usage("--lmin is required"))?,
        max: a.lmax.or(base.as_ref().map(|g| g.max)).ok_or_else(|| usage("--lmax is required"))?,
        count: a.num.or(base.as_ref().map(|g| g.count)).ok_or_else(|| usage("--num is required"))?,
        log: a.log || base.as_ref().is_some_and(|g| g.log),
    };
    let lambdas = grid.values()?;
    let tol = positive("--tol", a.tol.unwrap_or(cfg.tolerances.tol_symbol))?;
    let opts = SymbolOptions { profile: ProfileOptions::with_tol(tol), keep_profiles: false };
    let tab = compute_symbol_with(&w, &lambdas, &opts)?;
    for g in &tab.gaps {
        eprintln!("lambda {}: {}", g.lambda, g.error);
    }
    if !tab.gaps.is_empty() && !a.partial {
        return Err(Failure::Numerical(format!(
            "error[no_convergence]: {} of {} lambda values failed (use --partial to keep the rest)",
            tab.gaps.len(),
            lambdas.len()
        )));
    }
    for v in tab.check_invariants(tol) {
        eprintln!("warning: table invariant {:?} violated at row {} by {:e}", v.kind, v.index, v.excess);
    }
    let rows: Vec<Vec<f64>> =
        (0..tab.len()).map(|i| vec![tab.lambdas[i], tab.m_values[i], tab.est_errors[i]]).collect();
    write_csv(sink(&a.out, cfg)?, &["lambda", "m", "est_error"], &rows)?;
    Ok(())
}

fn cmd_profile(a: ProfileArgs, cfg: &RunConfig) -> CmdResult {
    let w = weight_of(&a.weight, cfg)?;
    let lambda = positive("--lambda", a.lambda)?;
    let tol = positive("--tol", a.tol.unwrap_or(cfg.tolerances.tol_profile))?;
    let p = ProfileSolver::new(&w, ProfileOptions::with_tol(tol))?.solve(lambda)?;
    eprintln!(
        "lambda {} m {:.16e} energy {:.16e} est_error {:e} truncation {} cells {}",
        p.lambda,
        p.m_value,
        p.energy_value,
        p.est_error,
        p.truncation_t,
        p.cells()
    );
    let rows: Vec<Vec<f64>> =
        (0..p.t_mesh.len()).map(|i| vec![p.t_mesh[i], p.g_values[i], p.flux_values[i]]).collect();
    write_csv(sink(&a.out, cfg)?, &["t", "g", "flux"], &rows)?;
    Ok(())
}

fn default_levels(grid: &GridMeta, cfg: &RunConfig) -> Result<TLevels, Failure> {
    if let Some(t) = cfg.grid.as_ref().and_then(|g| g.t_levels.clone()) {
        return Ok(t);
    }
    let lmin = lattice_lambdas(grid).first().copied().unwrap_or(1.0);
    Ok(TLevels::Auto { t_max: 12.0 / lmin.sqrt(), count: 64, grading: 2.0 })
}

fn levels_for(text: &str, grid: &GridMeta, cfg: &RunConfig) -> Result<Vec<f64>, Failure> {
    Ok(parse_levels(text, &default_levels(grid, cfg)?)?)
}

fn cmd_extend(a: ExtendArgs, cfg: &RunConfig) -> CmdResult {
    let w = weight_of(&a.weight, cfg)?;
    let u = read_trace(&a.trace)?;
    let t = levels_for(&a.tlevels, &u.grid, cfg)?;
    let tol = positive("--tol", a.tol.unwrap_or(cfg.tolerances.tol_profile))?;
    let out = out_path(&a.out, cfg)?;
    let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(tol))?;
    write_field(&out, &big_u)?;
    Ok(())
}

/// Symbol values at every lattice |ξ|² of the grid, plus λ = 1.
fn lattice_table(w: &Weight, grid: &GridMeta, tol: f64) -> Result<SymbolTable, Failure> {
    let mut l = lattice_lambdas(grid);
    l.push(1.0);
    l.sort_by(|a, b| a.partial_cmp(b).unwrap());
    l.dedup();
    let opts = SymbolOptions { profile: ProfileOptions::with_tol(tol), keep_profiles: false };
    let tab = compute_symbol_with(w, &l, &opts)?;
    if let Some(g) = tab.gaps.first() {
        return Err(Failure::Numerical(format!("error[no_convergence]: lambda {}: {}", g.lambda, g.error)));
    }
    Ok(tab)
}

fn cmd_trace_op(a: TraceOpArgs, cfg: &RunConfig) -> CmdResult {
    let w = weight_of(&a.weight, cfg)?;
    let u = read_trace(&a.trace)?;
    let out = out_path(&a.out, cfg)?;
    let tol = positive("--tol", a.tol.unwrap_or(cfg.tolerances.tol_symbol))?;
    let tab = lattice_table(&w, &u.grid, tol)?;
    let r = apply_trace_operator(&u, &tab)?;
    write_trace(&out, &r.f)?;
    let summary = json!({ "m_one": r.m_one, "extrapolated": r.extrapolated, "weight_id": w.id() });
    println!("{}", serde_json::to_string(&summary).unwrap());
    Ok(())
}

fn random_trace(src: &TraceSource, cfg: &RunConfig) -> Result<TraceField, Failure> {
    let n = src.n.clone().or(cfg.grid.as_ref().map(|g| g.n.clone())).unwrap_or_else(|| vec![128]);
    let periods = src
        .periods
        .clone()
        .or(cfg.grid.as_ref().map(|g| g.periods.clone()))
        .unwrap_or_else(|| vec![2.0 * std::f64::consts::PI; n.len()]);
    let grid = GridMeta::periodic(&n, &periods).map_err(|e| usage(e.to_string()))?;
    let seed = src.seed.or(cfg.seed).unwrap_or(0);
    let kmax = src.max_wavenumber.max(1);
    if kmax as usize >= n.iter().min().copied().unwrap_or(0) / 2 {
        return Err(usage("--max-wavenumber must stay below half the grid size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(src.modes);
    for _ in 0..src.modes {
        let k: Vec<f64> = (0..grid.ndim())
            .map(|axis| rng.gen_range(-kmax..=kmax) as f64 * 2.0 * std::f64::consts::PI / periods[axis])
            .collect();
        terms.push((k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)));
    }
    Ok(TraceField::from_fn(grid, |p| {
        terms.iter().map(|(k, amp, ph)| amp * (k.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + ph).cos()).sum()
    })?)
}

fn trace_from(src: &TraceSource, cfg: &RunConfig) -> Result<TraceField, Failure> {
    match &src.trace {
        Some(p) => Ok(read_trace(p)?),
        None => random_trace(src, cfg),
    }
}

fn cmd_verify(v: Verify, cfg: &RunConfig) -> CmdResult {
    match v {
        Verify::Poisson { s, modes, tlevels, period, points, tol, tol_closed_form, out } => {
            let t = parse_list(&tlevels)?;
            let opts = PoissonSymbolOptions { period, points, profile_tol: cfg.tolerances.tol_profile.min(1e-9), ..Default::default() };
            let r = verify_poisson_symbol_with(s, &lattice_xi_grid(modes, period), &t, &opts)?;
            let pass = r.max_deviation <= tol && r.max_deviation_closed_form.map_or(true, |d| d <= tol_closed_form);
            verdict(&out, cfg, pass, r)
        }
        Verify::Energy { weight, source, tol, out } => {
            let w = weight_of(&weight, cfg)?;
            let u = trace_from(&source, cfg)?;
            let t = levels_for(&source.tlevels, &u.grid, cfg)?;
            let ptol = cfg.tolerances.tol_profile;
            let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(ptol))?;
            let tab = lattice_table(&w, &u.grid, ptol)?;
            let e = energy_identity_check(&u, &big_u, &w, &tab)?;
            verdict(&out, cfg, e.rel_gap <= tol, e)
        }
        Verify::Scaling { weight, lmin, lmax, num, tol, out } => {
            let w = weight_of(&weight, cfg)?;
            let s = w
                .fractional_order()
                .ok_or_else(|| usage("the scaling check applies to power weights only"))?;
            let l = LambdaGrid { min: lmin, max: lmax, count: num, log: true }.values()?;
            let opts = SymbolOptions { profile: ProfileOptions::with_tol(cfg.tolerances.tol_profile.min(1e-8)), keep_profiles: false };
            let tab = compute_symbol_with(&w, &l, &opts)?;
            if let Some(g) = tab.gaps.first() {
                return Err(Failure::Numerical(format!("error[no_convergence]: lambda {}: {}", g.lambda, g.error)));
            }
            let ratios: Vec<f64> = tab.lambdas.iter().zip(&tab.m_values).map(|(l, m)| m / l.powf(s)).collect();
            let spread = scaling_spread(&ratios);
            let body = json!({ "s": s, "spread": spread, "m_one_estimate": ratios.iter().sum::<f64>() / ratios.len() as f64 });
            verdict(&out, cfg, spread <= tol, body)
        }
        Verify::Weak { weight, source, tol, out } => {
            let w = weight_of(&weight, cfg)?;
            let u = trace_from(&source, cfg)?;
            let t = levels_for(&source.tlevels, &u.grid, cfg)?;
            let ptol = cfg.tolerances.tol_profile;
            let big_u = extend_with_weight(&u, &w, &t, &ProfileOptions::with_tol(ptol))?;
            let tab = lattice_table(&w, &u.grid, ptol)?;
            let f = apply_trace_operator(&u, &tab)?.f;
            let bank = default_test_bank(&u.grid, *t.last().unwrap());
            let r = weak_residual(&big_u, &w, &f, &bank)?;
            verdict(&out, cfg, r.max_residual <= tol, r)
        }
    }
}

/// (max − min) / mean.
fn scaling_spread(r: &[f64]) -> f64 {
    let max = r.iter().cloned().fold(f64::MIN, f64::max);
    let min = r.iter().cloned().fold(f64::MAX, f64::min);
    (max - min) / (r.iter().sum::<f64>() / r.len() as f64)
}

fn cmd_rigidity(a: RigidityArgs, cfg: &RunConfig) -> CmdResult {
    let w = weight_of(&a.weight, cfg)?;
    let big_u = read_field(Path::new(&a.field))?;
    let radii = match &a.radii {
        Some(r) => parse_list(r)?,
        None => Vec::new(),
    };
    let tol = Tolerances {
        eps_rho: positive("--eps-rho", a.eps_rho.unwrap_or(cfg.tolerances.eps_rho))?,
        tol_theta: positive("--tol-theta", a.tol_theta.unwrap_or(cfg.tolerances.tol_theta))?,
        tol_omega: positive("--tol-omega", a.tol_omega.unwrap_or(cfg.tolerances.tol_omega))?,
    };
    let r = rigidity_report(&big_u, &w, &radii, &tol)?;
    emit_json(&a.out, cfg, &r)
}

