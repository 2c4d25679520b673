use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sparseloc::harness::{
    monte_carlo_sweep, prepare_trial, resolve_network, Network, NetworkSource, Preset, ScenarioConfig, SweepAxis,
};
use sparseloc::model::{random_geometric_network, NetworkDocument};
use sparseloc::oracle::{brute_force_block_spark, brute_force_l0_recover, brute_force_nsp};
use sparseloc::recoverability::{
    certified_errors_with_certificates, l0_recovery_limit, max_colinear_count_default, nsp_check, robust_constants,
    NspSearch,
};
use sparseloc::rigidity::{analytic_null_basis, rigidity_matrix, rigidity_report};
use sparseloc::solver::scp_recover;
use sparseloc::measurement::inject_faults;
use sparseloc::{Error, MeasurementKind, Result};

#[derive(Parser)]
#[command(name = "sparseloc", version, about = "Localization error certification and recovery for sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random geometric network and write it as JSON.
    Generate(GenerateArgs),
    /// Rigidity and recoverability report for a network (JSON on stdout).
    Analyze(AnalyzeArgs),
    /// Run one trial of a scenario on a network file.
    Recover(RecoverArgs),
    /// Monte Carlo sweep; writes per-trial and aggregate CSV files.
    Montecarlo(MonteCarloArgs),
    /// Brute-force cross-checks for small networks.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 13)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    #[arg(long = "box", default_value_t = 10.0)]
    box_side: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use a named preset (`paperlike13`) instead of the size arguments.
    #[arg(long)]
    preset: Option<String>,
    /// Redraw until the network is infinitesimally rigid for this kind.
    #[arg(long)]
    rigid_for: Option<MeasurementKind>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    network: PathBuf,
    #[arg(long, default_value = "distance")]
    kind: MeasurementKind,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Find the largest certified error count.
    #[arg(long)]
    max_s: bool,
    /// Check the null space property at this error count.
    #[arg(long)]
    s: Option<usize>,
    /// Lower bound on `tau` for the robust constants.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Smaller search budget.
    #[arg(long)]
    coarse: bool,
}

#[derive(Args)]
struct RecoverArgs {
    network: PathBuf,
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Directory for `trace.csv`.
    #[arg(long, env = "SPARSELOC_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct MonteCarloArgs {
    scenario: PathBuf,
    /// `fault-count`, `noise-kappa`, `iterations`, `correlation`, or a JSON
    /// file describing the axis.
    #[arg(long)]
    sweep: String,
    /// Overrides the scenario's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, env = "SPARSELOC_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Plant errors at the listed agents and recover them by exhaustive search.
    L0 {
        network: PathBuf,
        #[arg(long, default_value = "distance")]
        kind: MeasurementKind,
        /// Comma-separated agent indices.
        #[arg(long, value_delimiter = ',')]
        faults: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        s_max: usize,
    },
    /// Block spark of the rigidity matrix.
    Spark {
        network: PathBuf,
        #[arg(long, default_value = "distance")]
        kind: MeasurementKind,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Sampled worst null-space ratio.
    Nsp {
        network: PathBuf,
        #[arg(long, default_value = "distance")]
        kind: MeasurementKind,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_network(path: &Path) -> Result<Network> {
    let (configuration, graph) = NetworkDocument::from_json(&fs::read_to_string(path)?)?.into_network()?;
    Ok(Network { configuration, graph })
}

fn print_json(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let net = match (&args.preset, args.rigid_for) {
        (Some(name), kind) => {
            if name != "paperlike13" {
                return Err(Error::InvalidArgument(format!("unknown preset {name:?}")));
            }
            let source = NetworkSource::Preset { name: Preset::Paperlike13, seed: args.seed };
            resolve_network(&source, kind.unwrap_or(MeasurementKind::Distance), None)?
        }
        (None, Some(kind)) => {
            let source = NetworkSource::Generated {
                n: args.n,
                dim: args.dim,
                radius: args.radius,
                box_side: args.box_side,
                seed: args.seed,
            };
            resolve_network(&source, kind, None)?
        }
        (None, None) => {
            let (configuration, graph) =
                random_geometric_network(args.n, args.dim, args.radius, args.box_side, args.seed)?;
            Network { configuration, graph }
        }
    };
    let doc = NetworkDocument::from_network(&net.configuration, &net.graph);
    fs::write(&args.out, doc.to_json()?)?;
    print_json(&json!({
        "out": args.out,
        "agents": net.configuration.num_agents(),
        "dim": net.configuration.dim(),
        "edges": net.graph.num_edges(),
    }))
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let net = read_network(&args.network)?;
    let cfg = &net.configuration;
    let search = if args.coarse { NspSearch::coarse() } else { NspSearch::default() };
    let r = rigidity_matrix(args.kind, cfg, &net.graph)?;
    let report = rigidity_report(&r);
    let colinear = max_colinear_count_default(cfg);
    let mut out = json!({
        "agents": cfg.num_agents(),
        "dim": cfg.dim(),
        "edges": net.graph.num_edges(),
        "kind": args.kind,
        "rigidity": report,
        "max_colinear": colinear,
        "l0_recovery_limit": l0_recovery_limit(cfg.num_agents(), args.kind, cfg.dim(), colinear),
    });
    let mut robust_s = None;
    if let Some(s) = args.s {
        out["nsp"] = serde_json::to_value(nsp_check(cfg, args.kind, s, args.q, search)?)?;
        robust_s = Some(s);
    }
    if args.max_s {
        match certified_errors_with_certificates(cfg, &net.graph, args.kind, args.q, search) {
            Ok((s, certs)) => {
                out["certified_errors"] = json!(s);
                out["certificates"] = serde_json::to_value(certs)?;
                if robust_s.is_none() && s > 0 {
                    robust_s = Some(s);
                }
            }
            Err(e) => out["certified_errors_error"] = json!(e.to_string()),
        }
    }
    if let Some(s) = robust_s {
        out["robust"] = match robust_constants(cfg, &net.graph, args.kind, s, args.tau, search) {
            Ok(c) => serde_json::to_value(c)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
    }
    print_json(&out)
}

fn recover(args: RecoverArgs) -> Result<()> {
    let net = read_network(&args.network)?;
    let mut sc = ScenarioConfig::from_json(&fs::read_to_string(&args.scenario)?)?;
    sc.network = NetworkSource::File { path: args.network.clone() };
    let data = prepare_trial(&sc, &net, args.trial)?;
    let result = scp_recover(&data.state.estimates, &data.measurements, &net.graph, &sc.solver)?;
    fs::create_dir_all(&args.out)?;
    let trace_path = args.out.join("trace.csv");
    fs::write(&trace_path, result.trace_csv())?;
    let relative_error = {
        let x = data.state.true_error.norm2();
        if x > 0.0 {
            json!((&data.state.true_error - &result.x_star).norm2() / x)
        } else {
            Value::Null
        }
    };
    print_json(&json!({
        "trial": args.trial,
        "seed": data.seed,
        "fault_set": data.state.fault_set,
        "true_error": data.state.true_error,
        "relative_error": relative_error,
        "trace_csv": trace_path,
        "result": result,
    }))
}

fn montecarlo(args: MonteCarloArgs) -> Result<()> {
    let mut sc = ScenarioConfig::from_json(&fs::read_to_string(&args.scenario)?)?;
    if let Some(t) = args.trials {
        sc.trials = t;
    }
    let axis = if args.sweep.ends_with(".json") {
        serde_json::from_str::<SweepAxis>(&fs::read_to_string(&args.sweep)?)?
    } else {
        SweepAxis::by_name(&args.sweep)?
    };
    let results = monte_carlo_sweep(&sc, &axis, args.jobs)?;
    fs::create_dir_all(&args.out)?;
    let trials_path = args.out.join("trials.csv");
    let aggregate_path = args.out.join("aggregate.csv");
    fs::write(&trials_path, results.trials_csv())?;
    fs::write(&aggregate_path, results.aggregate_csv())?;
    print_json(&json!({
        "points": results.points.len(),
        "trials": sc.trials,
        "trials_csv": trials_path,
        "aggregate_csv": aggregate_path,
    }))
}

fn oracle(cmd: OracleCommand) -> Result<()> {
    match cmd {
        OracleCommand::L0 { network, kind, faults, seed, s_max } => {
            let net = read_network(&network)?;
            let cfg = &net.configuration;
            let planted = inject_faults(cfg, &faults, Default::default(), seed)?;
            let r = rigidity_matrix(kind, cfg, &net.graph)?;
            let z = &r.matrix * planted.true_error.to_dvector();
            let res = brute_force_l0_recover(&r.matrix, &z, cfg.dim(), s_max)?;
            print_json(&json!({ "planted": planted.true_error, "planted_support": planted.fault_set, "oracle": res }))
        }
        OracleCommand::Spark { network, kind, cap } => {
            let net = read_network(&network)?;
            let r = rigidity_matrix(kind, &net.configuration, &net.graph)?;
            let cap = cap.unwrap_or(net.configuration.num_agents());
            print_json(&serde_json::to_value(brute_force_block_spark(&r.matrix, net.configuration.dim(), cap)?)?)
        }
        OracleCommand::Nsp { network, kind, s, q, samples, seed } => {
            let net = read_network(&network)?;
            let basis = analytic_null_basis(&net.configuration, kind);
            print_json(&serde_json::to_value(brute_force_nsp(&basis, s, q, samples, seed)?)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
        Command::Recover(a) => recover(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Oracle(c) => oracle(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
