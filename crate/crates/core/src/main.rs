use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use viciouskit::combinatorics::{count_paths, survival_probability_pfaffian, scaled_survival, LatticeConfig};
use viciouskit::densities::{
    g_density, survival, survival_asymptotics, ChamberPoint, Horizon, ModelSpec, Start,
};
use viciouskit::harness::marginal::marginal_tables;
use viciouskit::harness::stats::{bonferroni, ks_test, sorted, StatReport, DEFAULT_ALPHA};
use viciouskit::harness::suites::{verify_suite, Budget, Suite};
use viciouskit::montecarlo::{
    endpoint_values, simulate_sde, simulate_walkers, Functional, PathEnsemble, SimConfig, SimModel, SimStart,
};
use viciouskit::rmt::{eigen_density, sample_ensemble, Ensemble};
use viciouskit::{Error, Result};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "viciouskit", version, about = "Vicious walkers, Pfaffian survival, densities and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact number of nonintersecting path tuples from --start to --end
    Count(CountArgs),
    /// Exact survival probability of walkers from --start after --steps
    /// steps, or the scaled version with --scale and --time
    Survive(SurviveArgs),
    /// Transition density of the conditioned process
    Density(DensityArgs),
    /// Brownian non-collision probability and its asymptote
    Survival(SurvivalArgs),
    /// Walker or SDE path simulation
    Simulate(SimulateArgs),
    /// Random-matrix spectra
    Rmt(RmtArgs),
    /// Residual checks of all analytic identities
    VerifyIdentities(VerifyArgs),
    /// Verification suite: identities, combinatorics, montecarlo, rmt or all
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long)]
    wall: bool,
    /// Horizon T; omit for the infinite-horizon family
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    time: Option<f64>,
    #[arg(long, default_value_t = 16)]
    scale: u32,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    streams: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    common: Common,
    /// Even start positions, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Vec<i64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    end: Vec<i64>,
    #[arg(long)]
    steps: i64,
}

#[derive(Args)]
struct SurviveArgs {
    #[command(flatten)]
    common: Common,
    /// Even start positions; omit for 0,2,4,.. (--n walkers)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Vec<i64>,
    /// Step count; if omitted, phi(L^2 t) from --scale and --time
    #[arg(long)]
    steps: Option<i64>,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    common: Common,
    /// Start time s (0 for the origin)
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    /// Start point; omit for the origin
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Vec<f64>,
    /// Evaluation point y
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Vec<f64>,
}

#[derive(Args)]
struct SurvivalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ModelArg {
    Walker,
    SdeG,
    SdeP,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = ModelArg::SdeP)]
    model: ModelArg,
    /// Start: lattice positions for walkers, a chamber point for SDEs;
    /// omit for the origin (SDE) or 0,2,4,.. (walkers)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Vec<f64>,
    /// Recorded intervals on the time grid
    #[arg(long, default_value_t = 10)]
    grid: usize,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum EnsembleArg {
    Goe,
    Gue,
    Pm,
}

#[derive(Args)]
struct RmtArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = EnsembleArg::Gue)]
    ensemble: EnsembleArg,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(default_value = "all")]
    suite: String,
    /// Skip checks not started within this many seconds
    #[arg(long)]
    max_seconds: Option<f64>,
}

/// Rendered output and whether every verdict in it passed.
struct Output {
    body: String,
    passed: bool,
}

fn json_doc(kind: &str, payload: Value) -> String {
    let mut doc = json!({ "schema_version": SCHEMA_VERSION, "kind": kind });
    if let (Value::Object(d), Value::Object(p)) = (&mut doc, payload) {
        d.extend(p);
    }
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn horizon(c: &Common) -> Horizon {
    c.horizon.map_or(Horizon::Infinite, Horizon::Finite)
}

fn csv_row(values: impl IntoIterator<Item = String>) -> String {
    let mut s = values.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn cmd_count(a: &CountArgs) -> Result<Output> {
    let u = LatticeConfig::new(a.start.clone(), a.common.wall)?;
    let c = count_paths(a.steps, &u, &a.end)?;
    let p = viciouskit::combinatorics::walk_probability(a.steps, &u, &a.end)?;
    let body = match a.common.format {
        Format::Json => json_doc(
            "count",
            json!({ "steps": a.steps, "start": a.start, "end": a.end, "wall": a.common.wall,
                    "count": c.value.to_string(), "probability": to_value(&p) }),
        ),
        Format::Csv => {
            let pv = to_value(&p);
            format!(
                "count,num,den,float\n{}",
                csv_row([c.value.to_string(), pv["num"].as_str().unwrap_or("").into(), pv["den"].as_str().unwrap_or("").into(), p.value.to_string()])
            )
        }
    };
    Ok(Output { body, passed: true })
}

fn cmd_survive(a: &SurviveArgs) -> Result<Output> {
    let start: Vec<i64> = if a.start.is_empty() { (0..a.common.n as i64).map(|i| 2 * i).collect() } else { a.start.clone() };
    let u = LatticeConfig::new(start.clone(), a.common.wall)?;
    let body = match a.steps {
        Some(m) => {
            let p = survival_probability_pfaffian(m, &u)?;
            match a.common.format {
                Format::Json => json_doc(
                    "survive",
                    json!({ "steps": m, "start": start, "wall": a.common.wall, "probability": to_value(&p) }),
                ),
                Format::Csv => {
                    let pv = to_value(&p);
                    format!(
                        "steps,num,den,float\n{}",
                        csv_row([m.to_string(), pv["num"].as_str().unwrap_or("").into(), pv["den"].as_str().unwrap_or("").into(), p.value.to_string()])
                    )
                }
            }
        }
        None => {
            let t = a.common.time.ok_or_else(|| Error::InvalidConfig("give --steps or --time".into()))?;
            let s = scaled_survival(a.common.scale, t, &u)?;
            match a.common.format {
                Format::Json => json_doc("survive_scaled", json!({ "start": start, "wall": a.common.wall, "result": to_value(&s) })),
                Format::Csv => format!(
                    "scale,time,steps,value,predicted,ratio\n{}",
                    csv_row([s.scale.to_string(), s.time.to_string(), s.steps.to_string(), s.value.to_string(), s.predicted.to_string(), s.ratio.to_string()])
                ),
            }
        }
    };
    Ok(Output { body, passed: true })
}

fn cmd_density(a: &DensityArgs) -> Result<Output> {
    let c = &a.common;
    let y = ChamberPoint::new(a.at.clone(), c.wall)?;
    let spec = ModelSpec::new(y.len(), horizon(c), c.wall)?;
    let start = if a.start.is_empty() { Start::Origin } else { Start::At(ChamberPoint::new(a.start.clone(), c.wall)?) };
    let t = c.time.ok_or_else(|| Error::InvalidConfig("--time is required".into()))?;
    let d = g_density(&spec, a.from, &start, t, &y)?;
    let family = match spec.horizon {
        Horizon::Finite(_) => "finite_horizon",
        Horizon::Infinite => "infinite_horizon",
    };
    let body = match c.format {
        Format::Json => json_doc(
            "density",
            json!({ "family": family, "spec": to_value(spec), "from": a.from, "start": a.start,
                    "time": t, "at": a.at, "density": d }),
        ),
        Format::Csv => format!("family,time,density\n{}", csv_row([family.to_string(), t.to_string(), d.to_string()])),
    };
    Ok(Output { body, passed: true })
}

fn cmd_survival(a: &SurvivalArgs) -> Result<Output> {
    let c = &a.common;
    let x = ChamberPoint::new(a.at.clone(), c.wall)?;
    let t = c.time.ok_or_else(|| Error::InvalidConfig("--time is required".into()))?;
    let v = survival(t, &x)?;
    let asym = survival_asymptotics(t, &x)?;
    let body = match c.format {
        Format::Json => json_doc(
            "survival",
            json!({ "time": t, "at": a.at, "wall": c.wall, "survival": v, "asymptotic": to_value(asym) }),
        ),
        Format::Csv => format!(
            "time,survival,predicted,ratio\n{}",
            csv_row([t.to_string(), v.to_string(), asym.predicted.to_string(), asym.ratio.to_string()])
        ),
    };
    Ok(Output { body, passed: true })
}

/// KS tests of endpoint marginals against the closed-form law at the final
/// grid time, from the origin (the scaling limit for walkers).
fn endpoint_reports(ens: &PathEnsemble, spec: &ModelSpec, model: SimModel, origin: bool) -> Result<Vec<StatReport>> {
    let n = spec.n;
    if !origin || n > 3 || ens.paths.len() < 10 {
        return Ok(Vec::new());
    }
    let t_end = ens.time_grid[ens.time_grid.len() - 1];
    let (eval_spec, t) = match (model, spec.horizon) {
        (SimModel::Walker, Horizon::Finite(big_t)) => (*spec, big_t),
        (SimModel::SdeG, _) => (*spec, t_end),
        _ => (ModelSpec { horizon: Horizon::Infinite, ..*spec }, t_end),
    };
    let wall = spec.wall;
    let f = |y: &[f64]| {
        if y.windows(2).any(|w| w[1] <= w[0]) || (wall && y[0] <= 0.0) {
            return 0.0;
        }
        ChamberPoint::new(y.to_vec(), wall)
            .and_then(|p| g_density(&eval_spec, 0.0, &Start::Origin, t, &p))
            .unwrap_or(0.0)
    };
    let s = t.sqrt();
    let r = 8.0 * s;
    let lo = if wall { 0.0 } else { -r };
    let tables = marginal_tables(&f, n, lo, r, s)?;
    let level = bonferroni(DEFAULT_ALPHA, n);
    let mut out = Vec::new();
    for (k, m) in tables.iter().enumerate() {
        let v = sorted(endpoint_values(ens, Functional::Coordinate(k))?);
        out.push(ks_test(&format!("endpoint/coord{}", k + 1), &v, |x| m.cdf(x), level)?);
    }
    Ok(out)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Output> {
    let c = &a.common;
    let model = match a.model {
        ModelArg::Walker => SimModel::Walker,
        ModelArg::SdeG => SimModel::SdeG,
        ModelArg::SdeP => SimModel::SdeP,
    };
    let n = if a.start.is_empty() { c.n } else { a.start.len() };
    let spec = ModelSpec::new(n, horizon(c), c.wall)?;
    let (start, origin) = match model {
        SimModel::Walker => {
            let pos: Vec<i64> = if a.start.is_empty() {
                (0..n as i64).map(|k| 2 * k).collect()
            } else {
                a.start.iter().map(|&v| v as i64).collect()
            };
            (SimStart::Lattice(LatticeConfig::new(pos, c.wall)?), true)
        }
        _ if a.start.is_empty() => (SimStart::Origin, true),
        _ => (SimStart::Point(ChamberPoint::new(a.start.clone(), c.wall)?), false),
    };
    let mut cfg = SimConfig::new(model, spec, start);
    cfg.scale = c.scale;
    cfg.samples = c.samples;
    cfg.step = c.step;
    cfg.seed = c.seed;
    cfg.stream_count = c.streams;
    cfg.t_end = c.time;
    cfg.grid = a.grid;
    if model == SimModel::Walker {
        if let (SimStart::Lattice(u), Horizon::Finite(big_t)) = (&cfg.start, spec.horizon) {
            let x: Vec<f64> = u.positions().iter().map(|&p| (p + if c.wall { 1 } else { 0 }) as f64 / c.scale as f64).collect();
            if let Ok(p) = ChamberPoint::new(x, c.wall).and_then(|x| survival(big_t, &x)) {
                let expected = c.samples as f64 / p.max(f64::MIN_POSITIVE);
                if expected > 1e8 {
                    eprintln!("warning: about {expected:.2e} proposals expected (acceptance {p:.2e})");
                }
            }
        }
    }
    let ens = match model {
        SimModel::Walker => simulate_walkers(&cfg)?,
        _ => simulate_sde(&cfg)?,
    };
    let reports = endpoint_reports(&ens, &spec, model, origin)?;
    let passed = reports.iter().all(|r| r.passed());
    let body = match c.format {
        Format::Json => json_doc(
            "simulate",
            json!({
                "config": to_value(&cfg),
                "config_digest": ens.config_digest,
                "accepted": ens.accepted,
                "proposed": ens.proposed,
                "acceptance": ens.acceptance(),
                "time_grid": ens.time_grid,
                "reports": to_value(&reports),
            }),
        ),
        Format::Csv => {
            let mut s = String::from("sample_id,t");
            for k in 1..=n {
                let _ = write!(s, ",x_{k}");
            }
            s.push('\n');
            for (i, path) in ens.paths.iter().enumerate() {
                for (t, x) in ens.time_grid.iter().zip(path) {
                    let _ = write!(s, "{i},{t}");
                    for v in x {
                        let _ = write!(s, ",{v}");
                    }
                    s.push('\n');
                }
            }
            s
        }
    };
    Ok(Output { body, passed })
}

fn cmd_rmt(a: &RmtArgs) -> Result<Output> {
    let c = &a.common;
    let ensemble = match a.ensemble {
        EnsembleArg::Goe => Ensemble::Goe,
        EnsembleArg::Gue => Ensemble::Gue,
        EnsembleArg::Pm => Ensemble::PandeyMehta { alpha: a.alpha },
    };
    let s = sample_ensemble(ensemble, c.n, a.variance, c.samples, c.seed)?;
    let mut reports = Vec::new();
    if ensemble != (Ensemble::PandeyMehta { alpha: a.alpha }) && c.n <= 3 && c.samples >= 10 {
        let n = c.n;
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let var = a.variance;
        let f = move |y: &[f64]| {
            if y.windows(2).any(|w| w[1] <= w[0]) {
                return 0.0;
            }
            ChamberPoint::new(y.to_vec(), false).and_then(|p| eigen_density(ensemble, &p, var)).map(|v| fact * v).unwrap_or(0.0)
        };
        let tables = marginal_tables(&f, n, -8.0 * var.sqrt(), 8.0 * var.sqrt(), var.sqrt())?;
        let level = bonferroni(DEFAULT_ALPHA, n);
        for (k, m) in tables.iter().enumerate() {
            reports.push(ks_test(&format!("spectrum/coord{}", k + 1), &sorted(s.coordinate(k)), |x| m.cdf(x), level)?);
        }
    }
    let passed = reports.iter().all(|r| r.passed());
    let body = match c.format {
        Format::Json => json_doc(
            "rmt",
            json!({ "ensemble": to_value(ensemble), "n": c.n, "variance": a.variance, "samples": c.samples,
                    "seed": c.seed, "reports": to_value(&reports) }),
        ),
        Format::Csv => {
            let mut out = String::from("draw_id");
            for k in 1..=c.n {
                let _ = write!(out, ",lambda_{k}");
            }
            out.push('\n');
            for (i, row) in s.eigenvalues.iter().enumerate() {
                let _ = write!(out, "{i}");
                for v in row {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
            out
        }
    };
    Ok(Output { body, passed })
}

fn cmd_verify(a: &VerifyArgs, forced: Option<Suite>) -> Result<Output> {
    let suite = match forced {
        Some(s) => s,
        None => a.suite.parse::<Suite>()?,
    };
    let budget = Budget { samples: a.common.samples, seed: a.common.seed, max_seconds: a.max_seconds };
    let r = verify_suite(suite, &budget)?;
    let passed = r.passed();
    let body = match a.common.format {
        Format::Json => json_doc("verify", json!({ "budget": to_value(budget), "passed": passed, "report": to_value(&r) })),
        Format::Csv => {
            let mut s = String::from("test_name,statistic,critical_value,n_samples,verdict\n");
            for rep in &r.reports {
                s += &csv_row([
                    rep.test_name.clone(),
                    rep.statistic.to_string(),
                    rep.critical_value.to_string(),
                    rep.n_samples.to_string(),
                    if rep.passed() { "pass" } else { "fail" }.to_string(),
                ]);
            }
            for name in &r.skipped {
                s += &csv_row([name.clone(), String::new(), String::new(), "0".into(), "skipped".into()]);
            }
            s
        }
    };
    Ok(Output { body, passed })
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Count(a) => &a.common,
        Command::Survive(a) => &a.common,
        Command::Density(a) => &a.common,
        Command::Survival(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Rmt(a) => &a.common,
        Command::VerifyIdentities(a) | Command::Verify(a) => &a.common,
    }
}

fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Count(a) => cmd_count(a),
        Command::Survive(a) => cmd_survive(a),
        Command::Density(a) => cmd_density(a),
        Command::Survival(a) => cmd_survival(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Rmt(a) => cmd_rmt(a),
        Command::VerifyIdentities(a) => cmd_verify(a, Some(Suite::Identities)),
        Command::Verify(a) => cmd_verify(a, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = common(&cli.command).clone();
    let threads = c.streams.max(1);
    // Results never depend on the thread count.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    match run(&cli) {
        Ok(out) => {
            let written = match &c.out {
                Some(path) => std::fs::write(path, &out.body).map_err(Error::from),
                None => std::io::stdout().write_all(out.body.as_bytes()).map_err(Error::from),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Error::UnknownSuite(s)) => {
            eprintln!("error: unknown suite '{s}' (expected identities, combinatorics, montecarlo, rmt or all)");
            ExitCode::from(64)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
