//! `walkalloc`: generate graphs, run experiments, analyse traces, build and
//! verify witness trees, and print the parameter schedule.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags, missing or
//! malformed config), and 2 when the work itself fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use walkalloc_core::harness::{read_results_csv, run_experiment, ExperimentConfig};
use walkalloc_core::metrics::{check_n_delta, lower_bound_stat, potential_series, write_metrics_csv, MetricRow};
use walkalloc_core::params::{derive_with, ParamOptions};
use walkalloc_core::trace::read_trace;
use walkalloc_core::witness::{
    build_witness, verify_witness_tree, LoadTime, WitnessOptions, WitnessParams, WitnessTree,
};
use walkalloc_core::{bounds, graph, load_fixture, max_load, AllocationTrace, GraphSpec, Mode, RegularGraph};

#[derive(Parser)]
#[command(
    name = "walkalloc",
    version,
    about = "Balanced allocation via non-backtracking random walks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random regular graph (or export a fixture) as an edge list.
    Generate(GenerateArgs),
    /// Run an experiment described by a TOML config.
    Run(RunArgs),
    /// Compute metrics over saved traces, or summarise a results.csv.
    Analyze(AnalyzeArgs),
    /// Build or verify witness trees.
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Print the derived parameter schedule and bound guides.
    Params(ParamsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, required_unless_present = "fixture")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "fixture")]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    min_girth: Option<usize>,
    /// Export a built-in fixture instead of generating.
    #[arg(long, conflicts_with_all = ["n", "d", "min_girth"])]
    fixture: Option<String>,
    /// Output edge list; printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's worker count, which in turn overrides WALKALLOC_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file of the graph the traces were run on.
    #[arg(long, conflicts_with = "fixture")]
    graph: Option<PathBuf>,
    /// Built-in fixture the traces were run on.
    #[arg(long)]
    fixture: Option<String>,
}

impl GraphArgs {
    fn load(&self) -> anyhow::Result<Option<RegularGraph>> {
        Ok(match (&self.graph, &self.fixture) {
            (Some(p), _) => Some(graph::read_edge_list(p)?),
            (None, Some(name)) => Some(load_fixture(name)?),
            (None, None) => None,
        })
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace files (JSON-lines, optionally .gz).
    #[arg(long = "trace", num_args = 1.., required_unless_present = "results")]
    traces: Vec<PathBuf>,
    /// Summarise a results.csv instead: mean and spread of max load per cell.
    #[arg(long, conflicts_with = "traces")]
    results: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    /// Subpath length for the multiplicity check (defaults to the trace's delta).
    #[arg(long)]
    delta: Option<usize>,
    /// Sampling interval of the potential series (needs the graph).
    #[arg(long, default_value_t = 1024)]
    potential_every: usize,
    /// Metrics CSV to write; printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum WitnessCommand {
    /// Build a witness tree from a trace.
    Build(WitnessBuildArgs),
    /// Verify a witness tree against a trace.
    Verify(WitnessVerifyArgs),
}

#[derive(Args)]
struct WitnessBuildArgs {
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// Root node; defaults to the most loaded node with the lowest id.
    #[arg(long)]
    start_node: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rho: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    /// Evaluate loads after the first T balls instead of at the end.
    #[arg(long, value_name = "T")]
    prefix: Option<usize>,
    /// Only branch on the middle segment of each subpath.
    #[arg(long)]
    middle_segment: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessVerifyArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 0)]
    c: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dense,
    Sparse,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    l: usize,
    #[arg(long, value_enum, default_value = "dense")]
    mode: ModeArg,
    /// Load offset in the threshold h*rho + c + 1.
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// Constant in rho = ceil(C log_d n / delta^2): 6 or 8.
    #[arg(long, default_value_t = 6)]
    rho_constant: u32,
    #[arg(long)]
    r_g: Option<usize>,
    #[arg(long)]
    json: bool,
}

/// A failure and the exit status it maps to.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> CliResult {
    let g = match &a.fixture {
        Some(name) => load_fixture(name)?,
        None => {
            let mut spec = GraphSpec::random(a.n.unwrap_or(0), a.d.unwrap_or(0), a.seed);
            spec.min_girth = a.min_girth;
            spec.build()?
        }
    };
    match &a.out {
        Some(p) => {
            graph::write_edge_list(&g, p)?;
            eprintln!("n={} d={} girth={} -> {}", g.n(), g.d(), g.girth(), p.display());
        }
        None => print!("{}", graph::edge_list_string(&g)),
    }
    Ok(())
}

fn run(a: RunArgs) -> CliResult {
    if !a.config.exists() {
        return Err(usage(format!("config file {} not found", a.config.display())));
    }
    let mut cfg = ExperimentConfig::load(&a.config).map_err(|e| Failure::Usage(e.into()))?;
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    if a.output_dir.is_some() {
        cfg.output_dir = a.output_dir;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    let res = run_experiment(&cfg)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    print_summary(&res.rows);
    if let Some(p) = &res.results_path {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(rows: &[walkalloc_core::harness::ResultRow]) {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.strategy.clone(), r.l))
            .or_default()
            .push(r.max_load as f64);
    }
    println!("strategy,l,runs,mean_max_load,sd_max_load");
    for ((s, l), v) in groups {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        } else {
            0.0
        };
        println!("{s},{l},{},{m:.4},{:.4}", v.len(), var.sqrt());
    }
}

fn trace_params_delta(trace: &AllocationTrace) -> Option<usize> {
    trace.params.as_ref().map(|p| p.delta).filter(|&d| d >= 1)
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    if let Some(p) = &a.results {
        let rows = read_results_csv(p)?;
        print_summary(&rows);
        return Ok(());
    }
    let g = a.graph.load()?;
    let mut rows = Vec::new();
    for path in &a.traces {
        let trace = read_trace(path)?;
        let run = path
            .file_name()
            .map(|f| f.to_string_lossy().split('.').next().unwrap_or("").to_string())
            .unwrap_or_default();
        let t = trace.balls.len();
        let violations = trace.replay_violations(g.as_ref());
        rows.push(MetricRow::new(&run, "max_load", t, max_load(&trace) as f64));
        rows.push(MetricRow::new(&run, "replay_violations", t, violations.len() as f64));
        if trace.strategy.l().is_some() && !trace.light {
            let s = lower_bound_stat(&trace)?;
            rows.push(MetricRow::new(&run, "tau_hat", t, s.tau_hat as f64));
            rows.push(MetricRow::new(&run, "implied_lower_bound", t, s.implied_load as f64));
            if let Some(delta) = a.delta.or_else(|| trace_params_delta(&trace)) {
                let c = check_n_delta(&trace, delta)?;
                rows.push(MetricRow::new(
                    &run,
                    "n_delta_max_multiplicity",
                    t,
                    c.max_multiplicity as f64,
                ));
                rows.push(MetricRow::new(
                    &run,
                    "n_delta_holds",
                    t,
                    if c.holds { 1.0 } else { 0.0 },
                ));
            }
        }
        if let Some(g) = &g {
            if g.n() != trace.n || g.d() != trace.d {
                return Err(usage(format!("graph does not match trace {}", path.display())));
            }
            let ps = potential_series(&trace, g, a.potential_every);
            for (i, &ts) in ps.timestamps.iter().enumerate() {
                rows.push(MetricRow::new(&run, "ln_phi", ts, ps.ln_phi[i]));
                rows.push(MetricRow::new(&run, "empty_min", ts, ps.empty_min[i] as f64));
            }
        }
    }
    match &a.out {
        Some(p) => write_metrics_csv(&rows, p)?,
        None => {
            println!("run,metric,t,value");
            for r in &rows {
                println!("{},{},{},{}", r.run, r.metric, r.t, r.value);
            }
        }
    }
    Ok(())
}

fn witness_build(a: WitnessBuildArgs) -> CliResult {
    let trace = read_trace(&a.trace)?;
    let g = a.graph.load()?;
    let derived = match &trace.params {
        Some(p) => Some(p.clone()),
        None => trace.strategy.l().map(|l| {
            let mode = if trace.strategy.spacing() > 1 {
                Mode::Sparse
            } else {
                Mode::Dense
            };
            derive_with(trace.n, trace.d, l, mode, ParamOptions::default())
        }),
    };
    let base = derived.as_ref().and_then(|p| WitnessParams::from_params(p).ok());
    let params = match (base, a.k, a.rho, a.h) {
        (_, Some(k), Some(rho), Some(h)) => WitnessParams {
            k,
            rho,
            h,
            delta: a.delta.or(base.map(|b| b.delta)).unwrap_or(1),
        },
        (Some(mut b), k, rho, h) => {
            b.k = k.unwrap_or(b.k);
            b.rho = rho.unwrap_or(b.rho);
            b.h = h.unwrap_or(b.h);
            b.delta = a.delta.unwrap_or(b.delta);
            b
        }
        (None, ..) => {
            return Err(Failure::Runtime(anyhow!(
                "derived parameters are degenerate; pass --k, --rho and --h explicitly"
            )))
        }
    };
    let opts = WitnessOptions {
        load_time: a.prefix.map_or(LoadTime::Final, LoadTime::Prefix),
        middle_segment_only: a.middle_segment,
        start_node: a.start_node,
    };
    match build_witness(&trace, g.as_ref(), params, a.c, opts) {
        Ok(tree) => {
            write_or_print(a.out.as_deref(), &(tree.to_json()? + "\n"))?;
            eprintln!("witness tree: lambda={} mu={}", tree.lambda, tree.mu);
            Ok(())
        }
        Err(f) => {
            println!("{}", serde_json::to_string_pretty(&f)?);
            Err(Failure::Runtime(anyhow!("{f}")))
        }
    }
}

fn witness_verify(a: WitnessVerifyArgs) -> CliResult {
    let text = fs::read_to_string(&a.tree).with_context(|| format!("reading {}", a.tree.display()))?;
    let tree = WitnessTree::from_json(&text)?;
    let trace = read_trace(&a.trace)?;
    let g = a.graph.load()?;
    let report = verify_witness_tree(&tree, &trace, g.as_ref(), a.c);
    if report.ok() {
        println!("ok: lambda={} mu={} c={}", tree.lambda, tree.mu, tree.c.max(a.c));
        Ok(())
    } else {
        for v in &report.violations {
            println!(
                "{}: {}",
                serde_json::to_value(v.class)?.as_str().unwrap_or("?"),
                v.detail
            );
        }
        Err(Failure::Runtime(anyhow!("{} violations", report.violations.len())))
    }
}

fn params(a: ParamsArgs) -> CliResult {
    let mode = match a.mode {
        ModeArg::Dense => Mode::Dense,
        ModeArg::Sparse => Mode::Sparse,
    };
    if a.rho_constant != 6 && a.rho_constant != 8 {
        return Err(usage("--rho-constant must be 6 or 8"));
    }
    let opts = ParamOptions {
        rho_constant: a.rho_constant,
        r_g_override: a.r_g,
    };
    let p = derive_with(a.n, a.d, a.l, mode, opts);
    let b = bounds(&p, a.c);
    if a.json {
        let v = serde_json::json!({ "params": p, "bounds": b });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    let opt = |v: Option<usize>| v.map_or("n/a".to_string(), |x| x.to_string());
    println!("n={} d={} l={} mode={}", p.n, p.d, p.l, p.mode);
    println!("log_d_n={:.6}", p.log_d_n);
    println!("gamma={:.6}", p.gamma);
    println!("r_G={}", p.r_g);
    println!("k={}", p.k);
    println!("delta={}", p.delta);
    println!("rho={}", opt(p.rho));
    println!("h={}", p.h);
    println!("tau={:.6}", p.tau);
    println!("n1_fraction={:.6e}", p.n1_fraction);
    println!(
        "ndelta_threshold={}",
        p.ndelta_threshold.map_or("n/a".to_string(), |t| format!("{t:.6}"))
    );
    if p.degenerate {
        println!("degenerate: delta = 0, rho-dependent analyses unavailable");
    }
    println!("regime={:?}", b.regime);
    println!("upper_bound={:.6}", b.upper_bound);
    println!("lower_bound={:.6}", b.lower_bound);
    println!("threshold_load={}", opt(b.threshold_load));
    for note in &b.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze(a),
        Command::Witness(WitnessCommand::Build(a)) => witness_build(a),
        Command::Witness(WitnessCommand::Verify(a)) => witness_verify(a),
        Command::Params(a) => params(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
