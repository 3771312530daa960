//! `lapflow`: run, certify, generate and reproduce Laplacian-flow scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lapflow::graph::{
    certify_cut_balance_signal, certify_isc_proxy, certify_type_symmetry_signal, certify_windows,
    ConnectivityCertificate, GraphSignal, Verdict, WindowCheck,
};
use lapflow::par::{self, Execution};
use lapflow::scenario::{
    builtin, builtin_names, generate, resolve_graph, run, CertificateRequest, ConsensusRequest,
    ExitStatus, GeneratorKind, GeneratorSpec, GraphSource, InitialSpec, Observable, ProtocolSpec,
    RateRequest, Scenario, SCENARIO_VERSION,
};
use lapflow::{Error, Result};

#[derive(Parser)]
#[command(name = "lapflow", version, about = "Simulate and certify Laplacian-flow differential inequalities")]
struct Cli {
    /// Output root for artifacts.
    #[arg(long, global = true, env = "LAPFLOW_OUT", default_value = "lapflow-out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run { scenario: PathBuf },
    /// Certify connectivity of a graph signal (or of a scenario's graph).
    Certify(CertifyArgs),
    /// Emit a scenario with a random graph signal.
    Generate(GenerateArgs),
    /// Run a built-in scenario and check its expected verdicts.
    Reproduce {
        /// Built-in name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
    /// Run several scenarios concurrently, optionally over consecutive seeds.
    Sweep {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Runs per scenario, seeds `seed..seed + seeds`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
}

#[derive(Args)]
struct CertifyArgs {
    /// Graph signal JSON or scenario JSON.
    signal: PathBuf,
    /// Uniform strong connectivity with window T and threshold DELTA.
    #[arg(long, num_args = 2, value_names = ["T", "DELTA"])]
    usc: Option<Vec<f64>>,
    /// Uniform quasi-strong connectivity with window T and threshold DELTA.
    #[arg(long, num_args = 2, value_names = ["T", "DELTA"])]
    uqsc: Option<Vec<f64>>,
    /// Integrated-mass proxy for infinite strong connectivity.
    #[arg(long, num_args = 2, value_names = ["HORIZON", "MASS"])]
    isc: Option<Vec<f64>>,
    /// Exhaustive cut balance with ratio K.
    #[arg(long, value_name = "K")]
    cut_balance: Option<f64>,
    /// Pairwise type symmetry with ratio K.
    #[arg(long, value_name = "K")]
    type_symmetry: Option<f64>,
    /// Every property advertised by the generator of a scenario file.
    #[arg(long)]
    advertised: bool,
    /// Last window end for --usc/--uqsc; defaults to the last breakpoint.
    #[arg(long)]
    horizon: Option<f64>,
    /// Extra grid of window starts; defaults to T / 10.
    #[arg(long)]
    stride: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    StaticRandom,
    PeriodicSwitching,
    UscByConstruction,
    CutBalancedRandom,
    LeaderRooted,
}

impl From<Kind> for GeneratorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::StaticRandom => GeneratorKind::StaticRandom,
            Kind::PeriodicSwitching => GeneratorKind::PeriodicSwitching,
            Kind::UscByConstruction => GeneratorKind::UscByConstruction,
            Kind::CutBalancedRandom => GeneratorKind::CutBalancedRandom,
            Kind::LeaderRooted => GeneratorKind::LeaderRooted,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    period: f64,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0.5)]
    weight_min: f64,
    #[arg(long, default_value_t = 1.5)]
    weight_max: f64,
    #[arg(long, default_value_t = 10)]
    periods: usize,
    #[arg(long, default_value_t = 4)]
    subsegments: usize,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    #[arg(long, default_value_t = 0.0)]
    decay: f64,
    #[arg(long, default_value_t = 0)]
    leader: usize,
    /// Scenario name; defaults to the generator kind.
    #[arg(long)]
    name: Option<String>,
    /// Integration horizon; defaults to the emitted signal length.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Destination file; defaults to `<out>/<name>-<seed>.json`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "warn"
    }))
    .init();
    let ctx = Ctx {
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match cli.command {
        Command::Run { scenario } => cmd_run(&ctx, &scenario),
        Command::Certify(a) => cmd_certify(&ctx, &a),
        Command::Generate(a) => cmd_generate(&ctx, &a),
        Command::Reproduce { name, list } => cmd_reproduce(&ctx, name.as_deref(), list),
        Command::Sweep { scenarios, seeds } => cmd_sweep(&ctx, &scenarios, seeds),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::from_error(&e).code() as u8)
        }
    }
}

fn run_one(ctx: &Ctx, mut sc: Scenario, base: &Path) -> Result<i32> {
    if let Some(seed) = ctx.seed {
        sc.seed = seed;
    }
    let outcome = run(&sc, base, &ctx.out)?;
    ctx.say(format!(
        "{}: {:?} (exit {}) -> {}",
        sc.slug(),
        outcome.status,
        outcome.status.code(),
        outcome.dir.display()
    ));
    for (name, holds) in &outcome.report.verdicts {
        ctx.say(format!("  {name}: {}", if *holds { "holds" } else { "fails" }));
    }
    for note in &outcome.report.notes {
        ctx.say(format!("  note: {note}"));
    }
    Ok(outcome.status.code())
}

fn cmd_run(ctx: &Ctx, path: &Path) -> Result<i32> {
    let (sc, base) = Scenario::load(path)?;
    run_one(ctx, sc, &base)
}

fn cmd_reproduce(ctx: &Ctx, name: Option<&str>, list: bool) -> Result<i32> {
    if list {
        for n in builtin_names() {
            println!("{n}");
        }
        return Ok(0);
    }
    let name = name.ok_or_else(|| Error::Schema("missing scenario name (see --list)".into()))?;
    run_one(ctx, builtin(name)?, Path::new("."))
}

fn load_signal(path: &Path) -> Result<(GraphSignal, Option<lapflow::scenario::Advertised>)> {
    let text = fs::read_to_string(path)?;
    if let Ok(s) = serde_json::from_str::<GraphSignal>(&text) {
        return Ok((s, None));
    }
    let sc = Scenario::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    resolve_graph(&sc, &base)
}

fn cmd_certify(ctx: &Ctx, a: &CertifyArgs) -> Result<i32> {
    let (s, advertised) = load_signal(&a.signal)?;
    let mut requests: Vec<CertificateRequest> = Vec::new();
    let window = |v: &Vec<f64>| (v[0], v[1]);
    if let Some((period, delta)) = a.usc.as_ref().map(window) {
        requests.push(CertificateRequest::Usc {
            period,
            delta,
            horizon: a.horizon,
            extended: false,
        });
    }
    if let Some((period, delta)) = a.uqsc.as_ref().map(window) {
        requests.push(CertificateRequest::Uqsc {
            period,
            delta,
            horizon: a.horizon,
            extended: false,
        });
    }
    if let Some(v) = &a.isc {
        requests.push(CertificateRequest::Isc {
            horizon: Some(v[0]),
            mass: v[1],
        });
    }
    if let Some(k) = a.cut_balance {
        requests.push(CertificateRequest::CutBalance { k });
    }
    if let Some(k) = a.type_symmetry {
        requests.push(CertificateRequest::TypeSymmetry { k });
    }
    if a.advertised {
        let adv = advertised.ok_or_else(|| Error::Schema("the input advertises no properties".into()))?;
        if let Some(w) = adv.usc {
            requests.push(CertificateRequest::Usc {
                period: w.period,
                delta: w.delta,
                horizon: a.horizon,
                extended: false,
            });
        }
        if let Some(w) = adv.uqsc {
            requests.push(CertificateRequest::Uqsc {
                period: w.period,
                delta: w.delta,
                horizon: a.horizon,
                extended: false,
            });
        }
        if let Some(k) = adv.cut_balance {
            requests.push(CertificateRequest::CutBalance { k });
        }
    }
    if requests.is_empty() {
        return Err(Error::Schema(
            "no certificate requested; pass --usc, --uqsc, --isc, --cut-balance, --type-symmetry or --advertised".into(),
        ));
    }

    let certs = requests
        .iter()
        .map(|r| certify(&s, r, a.stride))
        .collect::<Result<Vec<_>>>()?;
    let json = serde_json::to_string_pretty(&certs)? + "\n";
    let stem = a
        .signal
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "signal".into());
    fs::create_dir_all(&ctx.out)?;
    let dest = ctx.out.join(format!("{stem}-certificates.json"));
    fs::write(&dest, &json)?;
    if !ctx.quiet {
        print!("{json}");
    }
    log::info!("certificates written to {}", dest.display());
    let code = if certs.iter().any(|c| c.verdict == Verdict::Fails) {
        Verdict::Fails.exit_code()
    } else if certs.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive.exit_code()
    } else {
        0
    };
    Ok(code)
}

fn certify(s: &GraphSignal, r: &CertificateRequest, stride: Option<f64>) -> Result<ConnectivityCertificate> {
    // windows stay inside the listed segments unless a horizon is given
    let horizon = |h: Option<f64>, period: f64| h.unwrap_or(s.last_breakpoint().max(period));
    match *r {
        CertificateRequest::Usc {
            period,
            delta,
            horizon: h,
            ..
        } => {
            let mut check = WindowCheck::usc(period, delta, horizon(h, period));
            check.stride = stride;
            certify_windows(s, &check)
        }
        CertificateRequest::Uqsc {
            period,
            delta,
            horizon: h,
            ..
        } => {
            let mut check = WindowCheck::uqsc(period, delta, horizon(h, period));
            check.stride = stride;
            certify_windows(s, &check)
        }
        CertificateRequest::Isc { horizon: h, mass } => {
            certify_isc_proxy(s, h.unwrap_or(s.last_breakpoint().max(1.0)), mass)
        }
        CertificateRequest::CutBalance { k } => certify_cut_balance_signal(s, k),
        CertificateRequest::TypeSymmetry { k } => certify_type_symmetry_signal(s, k),
        CertificateRequest::Strong { .. } => unreachable!("not exposed on the command line"),
    }
}

fn cmd_generate(ctx: &Ctx, a: &GenerateArgs) -> Result<i32> {
    let kind: GeneratorKind = a.kind.into();
    let spec = GeneratorSpec {
        weight_range: [a.weight_min, a.weight_max],
        period: a.period,
        density: a.density,
        periods: a.periods,
        subsegments: a.subsegments,
        k: a.k,
        decay: a.decay,
        leader: a.leader,
        ..GeneratorSpec::new(kind, a.n)
    };
    let seed = ctx.seed.unwrap_or(0);
    let generated = generate(&spec, seed)?;
    let adv = generated.advertised;
    let kind_name = serde_json::to_value(kind)?
        .as_str()
        .map(str::to_string)
        .unwrap_or_default();
    let name = a.name.clone().unwrap_or(kind_name);
    let horizon = a
        .horizon
        .unwrap_or(if kind == GeneratorKind::StaticRandom { 50.0 } else { a.periods as f64 * a.period });

    let leader = kind == GeneratorKind::LeaderRooted;
    let mut sc = Scenario {
        version: SCENARIO_VERSION,
        name,
        seed,
        graph: GraphSource::Signal(generated.signal),
        protocol: if leader {
            ProtocolSpec::Leader {
                leader: a.leader,
                dim: 1,
            }
        } else {
            ProtocolSpec::Consensus { dim: 1 }
        },
        initial: if leader {
            InitialSpec::AboveLeader {
                leader_value: 0.0,
                low: 0.0,
                high: 1.0,
            }
        } else {
            InitialSpec::Uniform { low: -1.0, high: 1.0 }
        },
        horizon,
        step: a.step,
        record_every: 10,
        crafted: None,
        advertised: Some(adv.clone()),
        diagnostics: Default::default(),
    };
    let d = &mut sc.diagnostics;
    d.residual = true;
    d.monotone_max = true;
    if let Some(w) = adv.usc {
        d.certificates.push(CertificateRequest::Usc {
            period: w.period,
            delta: w.delta,
            horizon: None,
            extended: false,
        });
    }
    if let Some(w) = adv.uqsc {
        d.certificates.push(CertificateRequest::Uqsc {
            period: w.period,
            delta: w.delta,
            horizon: None,
            extended: false,
        });
        d.rate = Some(RateRequest {
            on: Observable::State,
            reference: None,
            floor: 1e-9,
            min_quality: 0.99,
        });
        d.leader_ordering = true;
    }
    if let Some(k) = adv.cut_balance {
        d.certificates.push(CertificateRequest::TypeSymmetry { k });
    }
    if adv.usc.is_some() || adv.cut_balance.is_some() {
        d.consensus = Some(ConsensusRequest {
            tol: 1e-4,
            tail_fraction: lapflow::analysis::DEFAULT_TAIL_FRACTION,
            expect: lapflow::analysis::TrajectoryClass::Consensus,
            on: Observable::State,
        });
    }

    let dest = match &a.output {
        Some(p) => p.clone(),
        None => {
            fs::create_dir_all(&ctx.out)?;
            ctx.out.join(format!("{}.json", sc.slug()))
        }
    };
    fs::write(&dest, sc.to_json()?)?;
    ctx.say(dest.display().to_string());
    Ok(0)
}

fn cmd_sweep(ctx: &Ctx, paths: &[PathBuf], seeds: u64) -> Result<i32> {
    if seeds == 0 {
        return Err(Error::Schema("--seeds must be at least 1".into()));
    }
    let mut jobs = Vec::new();
    for p in paths {
        let (sc, base) = Scenario::load(p)?;
        let first = ctx.seed.unwrap_or(sc.seed);
        for k in 0..seeds {
            let mut sc = sc.clone();
            sc.seed = first + k;
            jobs.push((sc, base.clone()));
        }
    }
    // each pipeline is sequential; runs write to distinct directories
    let results = par::map(Execution::default(), &jobs, |(sc, base)| {
        run(sc, base, &ctx.out).map_err(|e| (ExitStatus::from_error(&e), e.to_string()))
    });
    let mut worst = ExitStatus::Ok;
    let mut summary = Vec::with_capacity(jobs.len());
    for ((sc, _), r) in jobs.iter().zip(results) {
        let (status, detail) = match r {
            Ok(o) => (o.status, o.dir.display().to_string()),
            Err((s, msg)) => (s, msg),
        };
        worst = worst.max(status);
        ctx.say(format!("{}: {:?} (exit {}) {}", sc.slug(), status, status.code(), detail));
        summary.push(serde_json::json!({
            "scenario": sc.name,
            "seed": sc.seed,
            "status": status,
            "exit_code": status.code(),
            "detail": detail,
        }));
    }
    fs::create_dir_all(&ctx.out)?;
    fs::write(
        ctx.out.join("sweep-summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(worst.code())
}
