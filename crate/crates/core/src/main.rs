use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use adiabat_core::axioms::stubs::{ComponentwiseOrder, TransitivityHole};
use adiabat_core::axioms::{run_suite, SamplerConfig, Suite};
use adiabat_core::calibration::{calibrate, ProcessGraph};
use adiabat_core::eos::{validate_spec, SimpleState, SpaceRegistry, Units};
use adiabat_core::oracle::{integral_lambda, reconstruct_entropy, AccessOracle, OperationalOracle};
use adiabat_core::thermo::{adiabat_simple, DerivedRegistry, EntropyFn, Tolerances};
use adiabat_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "adiabat", version, about = "Entropy, temperature and adiabats from equations of state")]
struct Cli {
    /// Registry JSON; the bundled registry for `--units` when omitted.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "reduced")]
    units: UnitsArg,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Tolerance on entropy brackets (reconstruct, verify) and energy equality (oracle).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum UnitsArg {
    Si,
    Reduced,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate absolute temperature and entropy of one space.
    Derive {
        space: String,
        /// Grid points per axis.
        #[arg(long, default_value_t = 33)]
        grid: usize,
    },
    /// Recover entropy from the order relation alone, relative to two reference states.
    Reconstruct {
        space: String,
        /// Reference state `U,V` with entropy 0.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// Reference state `U,V` with entropy 1.
        #[arg(long, allow_hyphen_values = true)]
        x1: String,
        /// File with one `U,V` target per line.
        #[arg(long)]
        targets: PathBuf,
    },
    /// Run the axiom suites.
    Verify(VerifyArgs),
    /// Entropy scales and additive constants over a process graph.
    Calibrate {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Export an adiabat or isotherm through a state.
    Trace {
        space: String,
        kind: TraceKind,
        /// Start state `U,V` per unit matter.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// Final volume.
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated suites: general, convexity, simple, thermal, ch, temperature.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Replace the oracle by a deliberately broken relation.
    #[arg(long, value_enum)]
    inject: Option<Stub>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Stub {
    TransitivityHole,
    Componentwise,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TraceKind {
    Adiabat,
    Isotherm,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ReferenceNotStrict => EXIT_PRECONDITION,
            Error::Infeasible { .. } | Error::InconsistentQuads { .. } => EXIT_FAILURE,
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = std::env::var("ADIABAT_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("adiabat: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::new(EXIT_USAGE, format!("--tol must be positive, got {t}")));
        }
    }
    let registry = load_registry(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Derive { space, grid } => cmd_derive(cli, &registry, space, *grid),
        Command::Reconstruct { space, x0, x1, targets } => cmd_reconstruct(cli, &registry, space, x0, x1, targets),
        Command::Verify(args) => cmd_verify(cli, &registry, args),
        Command::Calibrate { graph } => cmd_calibrate(cli, &registry, graph),
        Command::Trace {
            space,
            kind,
            start,
            to,
            points,
        } => cmd_trace(cli, &registry, space, *kind, start, *to, *points),
    }
}

fn load_registry(cli: &Cli) -> std::result::Result<SpaceRegistry, Failure> {
    match &cli.registry {
        Some(path) => Ok(SpaceRegistry::load(path)?),
        None => Ok(SpaceRegistry::bundled(match cli.units {
            UnitsArg::Si => Units::Si,
            UnitsArg::Reduced => Units::Reduced,
        })),
    }
}

fn derive_all(cli: &Cli, registry: &SpaceRegistry) -> std::result::Result<DerivedRegistry, Failure> {
    let mut tolerances = Tolerances::default();
    if let Some(t) = cli.tol {
        tolerances.equality = t;
    }
    Ok(DerivedRegistry::derive_with(registry, tolerances)?)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_pair(text: &str) -> std::result::Result<(f64, f64), Failure> {
    let bad = || Failure::new(EXIT_USAGE, format!("expected `U,V`, got `{text}`"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            if lo > 0.0 {
                (lo.ln() + f * (hi.ln() - lo.ln())).exp()
            } else {
                lo + f * (hi - lo)
            }
        })
        .map(|x| x.clamp(lo, hi))
        .collect()
}

fn cmd_derive(cli: &Cli, registry: &SpaceRegistry, space: &str, n: usize) -> CliResult {
    let spec = registry.get(space)?;
    let report = validate_spec(spec, 16)?;
    if !report.is_ok() {
        return Err(Failure::new(EXIT_INPUT, format!("validation failed\n{report}")));
    }
    for w in &report.warnings {
        eprintln!("{space}: warning: {w}");
    }
    let entropy = EntropyFn::derive(spec, Tolerances::default().quad)?;
    let thetas = grid(spec.domain.theta.0, spec.domain.theta.1, n);
    let vs = grid(spec.domain.v.0, spec.domain.v.1, n);
    let mut temperature = String::from("Theta,T\n");
    for &t in &thetas {
        writeln!(temperature, "{},{}", num(t), num(entropy.temperature(t)?)).unwrap();
    }
    let rows = thetas
        .par_iter()
        .map(|&t| {
            let mut out = String::new();
            for &v in &vs {
                let u = spec.energy(t, v)?;
                writeln!(out, "{},{},{},{}", num(t), num(v), num(u), num(entropy.per_unit(t, v)?)).unwrap();
            }
            Ok(out)
        })
        .collect::<adiabat_core::Result<Vec<String>>>()?;
    write_file(&cli.out.join(format!("{space}_temperature.csv")), &temperature)?;
    write_file(
        &cli.out.join(format!("{space}_entropy.csv")),
        &(String::from("Theta,V,U,S\n") + &rows.concat()),
    )
}

fn read_targets(path: &Path) -> std::result::Result<Vec<(f64, f64)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.eq_ignore_ascii_case("u,v")) {
            continue;
        }
        out.push(
            parse_pair(line).map_err(|f| Failure::new(EXIT_INPUT, format!("{}:{}: {}", path.display(), i + 1, f.message)))?,
        );
    }
    Ok(out)
}

fn cmd_reconstruct(cli: &Cli, registry: &SpaceRegistry, space: &str, x0: &str, x1: &str, targets: &Path) -> CliResult {
    let (u0, v0) = parse_pair(x0)?;
    let (u1, v1) = parse_pair(x1)?;
    let targets = read_targets(targets)?;
    registry.get(space)?;
    let derived = derive_all(cli, registry)?;
    let oracle = OperationalOracle::new(&derived);
    let tol = cli.tol.unwrap_or(1e-4);
    let x0 = SimpleState::new(space, 1.0, u0, v0);
    let x1 = SimpleState::new(space, 1.0, u1, v1);
    let rows = targets
        .par_iter()
        .map(|&(u, v)| {
            let x = SimpleState::new(space, 1.0, u, v);
            let r = reconstruct_entropy(&oracle, &x0, &x1, &x, tol)?;
            let integral = integral_lambda(&derived, &x0, &x1, &x)?;
            Ok(format!(
                "{},{},{},{},{},{}\n",
                num(u),
                num(v),
                num(r.lambda_minus),
                num(r.lambda_plus),
                num(r.gap()),
                num(integral)
            ))
        })
        .collect::<adiabat_core::Result<Vec<String>>>()?;
    write_file(
        &cli.out.join(format!("{space}_reconstruct.csv")),
        &(String::from("U,V,lambda_minus,lambda_plus,gap,lambda_integral\n") + &rows.concat()),
    )
}

fn parse_suites(text: &str) -> std::result::Result<Vec<Suite>, Failure> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(Suite::ALL.to_vec());
    }
    text.split(',')
        .map(|s| s.trim().parse::<Suite>().map_err(|e| Failure::new(EXIT_USAGE, e.to_string())))
        .collect()
}

fn cmd_verify(cli: &Cli, registry: &SpaceRegistry, args: &VerifyArgs) -> CliResult {
    let suites = parse_suites(&args.suite)?;
    let derived = derive_all(cli, registry)?;
    let mut cfg = SamplerConfig {
        seed: cli.seed,
        samples: args.samples,
        ..Default::default()
    };
    if let Some(t) = cli.tol {
        cfg.reconstruction_tol = t;
    }
    let operational = OperationalOracle::new(&derived);
    let hole = TransitivityHole {
        registry: &derived,
        slack: 1.0,
    };
    let oracle: &dyn AccessOracle = match args.inject {
        None => &operational,
        Some(Stub::TransitivityHole) => &hole,
        Some(Stub::Componentwise) => &ComponentwiseOrder,
    };
    let report = run_suite(oracle, &derived, &suites, &cfg)?;
    write_file(&cli.out.join("verify_report.json"), &report.to_json())?;
    write_file(&cli.out.join("verify_report.txt"), &report.to_string())?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report.failures().map(|l| format!("{} [{}]", l.law, l.space)).collect();
        Err(Failure::new(EXIT_FAILURE, format!("failed: {}", failed.join(", "))))
    }
}

fn cmd_calibrate(cli: &Cli, registry: &SpaceRegistry, graph: &Path) -> CliResult {
    let mut graph = ProcessGraph::load(graph)?;
    if graph.nodes.is_empty() && graph.processes.is_empty() {
        graph.nodes = registry.ids().map(|id| format!("{id}:1")).collect();
    }
    let derived = derive_all(cli, registry)?;
    let oracle = OperationalOracle::new(&derived);
    let report = calibrate(&oracle, &graph, cli.seed)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&cli.out.join("calibration.json"), &text)?;
    for (from, to) in &report.sinks {
        println!("sink: {to} is reachable from {from} but cannot be left");
    }
    for p in &report.monotonicity.processes {
        println!(
            "{}: {} -> {} ({:+.9})",
            p.id, p.source_entropy, p.target_entropy, p.increase
        );
    }
    if report.monotonicity.passed {
        println!("monotonicity: PASS");
        Ok(())
    } else {
        Err(Failure::new(EXIT_FAILURE, "monotonicity: FAIL"))
    }
}

fn cmd_trace(
    cli: &Cli,
    registry: &SpaceRegistry,
    space: &str,
    kind: TraceKind,
    start: &str,
    to: f64,
    points: usize,
) -> CliResult {
    let (u0, v0) = parse_pair(start)?;
    let spec = registry.get(space)?;
    let entropy = EntropyFn::derive(spec, Tolerances::default().quad)?;
    let theta0 = spec.theta_from_energy(u0, v0)?;
    let n = if to == v0 { 1 } else { points.max(2) };
    let vs: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n && n > 1 { to } else { v0 + (to - v0) * i as f64 / (n - 1).max(1) as f64 })
        .collect();
    let ode = Tolerances::default().ode;
    if !(to >= spec.domain.v.0 && to <= spec.domain.v.1) {
        // report where the curve crosses the volume bound
        let edge = to.clamp(spec.domain.v.0, spec.domain.v.1);
        let theta = match kind {
            TraceKind::Adiabat => adiabat_simple(spec, 1.0, u0, v0, edge, ode)?.end().theta,
            TraceKind::Isotherm => theta0,
        };
        return Err(Error::LeftDomain { coords: vec![edge, theta] }.into());
    }
    let rows = vs
        .par_iter()
        .map(|&v| {
            let (theta, u) = match kind {
                TraceKind::Adiabat => {
                    let end = adiabat_simple(spec, 1.0, u0, v0, v, ode)?;
                    (end.end().theta, end.end_energy())
                }
                TraceKind::Isotherm => (theta0, spec.energy(theta0, v)?),
            };
            Ok(format!(
                "{},{},{},{},{}\n",
                num(v),
                num(u),
                num(spec.pressure(theta, v)?),
                num(entropy.per_unit(theta, v)?),
                num(entropy.temperature(theta)?)
            ))
        })
        .collect::<adiabat_core::Result<Vec<String>>>()?;
    let name = match kind {
        TraceKind::Adiabat => "adiabat",
        TraceKind::Isotherm => "isotherm",
    };
    write_file(
        &cli.out.join(format!("{space}_{name}.csv")),
        &(String::from("V,U,P,S,T\n") + &rows.concat()),
    )
}
