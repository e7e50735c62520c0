use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use capkc::generators::{gen_gap, gen_random, RandomModel, RandomParams};
use capkc::oracle::{feasible_at, DEFAULT_BUDGET};
use capkc::relaxation::OracleStrategy;
use capkc::variants::{center_to_supplier, pull_back_center, supplier_to_center};
use capkc::{
    exact_opt, instance_to_json, parse_instance, parse_solution, solution_to_json, solve_metric,
    validate_metric, verify_solution, CapacityMode, Error, MetricInstance, Mode, OracleOptions,
    SolveOptions, SolveResult, Variant,
};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NO: u8 = 2;

#[derive(Parser)]
#[command(
    name = "capkc",
    version,
    about = "Capacitated k-supplier / k-center with outliers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance; exits 2 when no solution exists.
    Solve(SolveArgs),
    /// Check a solution against an instance.
    Verify(VerifyArgs),
    /// Exact optimum by exhaustive search.
    Oracle(OracleArgs),
    /// Write a generated instance.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Compare solver radii with the exact optimum over a directory of instances.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Supplier,
    Center,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Supplier => Mode::Supplier,
            ModeArg::Center => Mode::Center,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    /// hard, soft, uniform or uniform-soft; defaults to the instance's capacity mode.
    #[arg(long)]
    variant: Option<Variant>,
    /// Solve a supplier instance as its center image, or a center instance as a supplier one.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Full run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print every transfer-chain step to stderr as JSON lines.
    #[arg(long)]
    trace: bool,
    /// Solve relaxations in exact rational arithmetic.
    #[arg(long)]
    exact_lp: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Distance bound to check; defaults to the solution's radius.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    /// Maximum number of max-flow computations.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Only decide whether a solution of this radius exists.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Integrality-gap instance with parameter r.
    Gap {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Seeded random instance(s).
    Random(RandomArgs),
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    clients: usize,
    #[arg(long, default_value_t = 5)]
    facilities: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 6)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    cap_min: u64,
    #[arg(long, default_value_t = 5)]
    cap_max: u64,
    /// Lattice side for L1 point metrics.
    #[arg(long, default_value_t = 10)]
    grid: u32,
    /// Use a random bipartite graph with this edge probability instead of points.
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long, value_enum, default_value = "supplier")]
    mode: ModeArg,
    #[arg(long)]
    soft: bool,
    /// Number of instances, with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Directory for `count` files named random-<seed>.json; stdout when omitted and count is 1.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    variant: Option<Variant>,
    /// Rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gen(g) => cmd_gen(g),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load_instance(path: &Path) -> anyhow::Result<MetricInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn default_variant(inst: &MetricInstance) -> Variant {
    match inst.capacity_mode {
        CapacityMode::Hard => Variant::Hard,
        CapacityMode::Soft => Variant::Soft,
    }
}

fn solve_options(variant: Variant, exact_lp: bool) -> SolveOptions {
    SolveOptions {
        variant,
        exact_lp,
        strategy: OracleStrategy::ServiceBound,
    }
}

/// Solves `inst`, routing through the mode reduction when `mode` differs
/// from the instance's own. The solution is in terms of `inst`.
fn solve_in_mode(
    inst: &MetricInstance,
    mode: Mode,
    opts: &SolveOptions,
) -> capkc::Result<SolveResult> {
    match (inst.mode, mode) {
        (Mode::Supplier, Mode::Center) => {
            let (image, witness) = supplier_to_center(inst)?;
            let mut res = solve_metric(&image, opts)?;
            if let Some(sol) = res.solution.take() {
                res.solution = Some(pull_back_center(inst, &witness, &sol)?);
            }
            Ok(res)
        }
        (Mode::Center, Mode::Supplier) => solve_metric(&center_to_supplier(inst)?, opts),
        _ => solve_metric(inst, opts),
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    tau: f64,
    skeleton: &'a [String],
    component: usize,
    step: &'a str,
    host: &'a str,
    distance: u32,
    verified: bool,
    verified_in_graph: bool,
    moved: i64,
}

fn emit_trace(res: &SolveResult) {
    for t in &res.report.thresholds {
        for cand in &t.candidates {
            for (component, chain) in cand.chains.iter().enumerate() {
                for s in &chain.steps {
                    let line = TraceLine {
                        tau: t.tau,
                        skeleton: &cand.skeleton,
                        component,
                        step: s.name,
                        host: s.host,
                        distance: s.distance,
                        verified: s.verified,
                        verified_in_graph: s.verified_in_graph,
                        moved: s.moved,
                    };
                    eprintln!(
                        "{}",
                        serde_json::to_string(&line).expect("trace line serializes")
                    );
                }
            }
        }
    }
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<u8> {
    let inst = load_instance(&a.input)?;
    let metric = validate_metric(&inst);
    if !metric.is_valid() {
        bail!(
            "input is not a metric: {}",
            serde_json::to_string(&metric.violations)?
        );
    }
    let variant = a.variant.unwrap_or_else(|| default_variant(&inst));
    let mode = a.mode.map(Mode::from).unwrap_or(inst.mode);
    let res = solve_in_mode(&inst, mode, &solve_options(variant, a.exact_lp))?;
    if a.trace {
        emit_trace(&res);
    }
    if let Some(p) = &a.report {
        fs::write(p, serde_json::to_string_pretty(&res.report)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let Some(sol) = res.solution else {
        println!("NO: no solution exists at any radius");
        return Ok(EXIT_NO);
    };
    let check = verify_solution(&inst, &sol, sol.radius);
    if !check.is_valid() {
        bail!("solver output failed verification: {:?}", check.violations);
    }
    let summary = format!(
        "variant {variant}: radius {} (threshold {}, factor {}), {} open, {} served",
        sol.radius,
        res.report.tau.unwrap_or(0.0),
        variant.factor(),
        sol.open_count(),
        sol.assign.len()
    );
    match &a.output {
        Some(p) => {
            write_or_print(Some(p), &solution_to_json(&sol))?;
            println!("{summary}");
        }
        None => {
            println!("{}", solution_to_json(&sol));
            eprintln!("{summary}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<u8> {
    let inst = load_instance(&a.input)?;
    let text = fs::read_to_string(&a.solution)
        .with_context(|| format!("reading {}", a.solution.display()))?;
    let sol = parse_solution(&text).with_context(|| format!("parsing {}", a.solution.display()))?;
    let report = verify_solution(&inst, &sol, a.radius.unwrap_or(sol.radius));
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.is_valid() {
        EXIT_OK
    } else {
        EXIT_ERROR
    })
}

fn cmd_oracle(a: OracleArgs) -> anyhow::Result<u8> {
    let inst = load_instance(&a.input)?;
    let opts = OracleOptions { budget: a.budget };
    if let Some(r) = a.radius {
        let (witness, checked) = feasible_at(&inst, r, &opts)?;
        return Ok(match witness {
            Some(sol) => {
                println!("feasible at radius {r} ({checked} subsets checked)");
                println!("{}", solution_to_json(&sol));
                EXIT_OK
            }
            None => {
                println!("infeasible at radius {r} ({checked} subsets checked)");
                EXIT_NO
            }
        });
    }
    let res = exact_opt(&inst, &opts)?;
    println!("{}", serde_json::to_string_pretty(&res)?);
    Ok(if res.opt.is_some() { EXIT_OK } else { EXIT_NO })
}

fn cmd_gen(g: GenCommand) -> anyhow::Result<u8> {
    match g {
        GenCommand::Gap { r, output } => {
            let gap = gen_gap(r)?;
            write_or_print(output.as_deref(), &instance_to_json(&gap.instance))?;
        }
        GenCommand::Random(a) => {
            if a.count > 1 && a.out_dir.is_none() {
                bail!("--count above 1 needs --out-dir");
            }
            if let Some(dir) = &a.out_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            for seed in a.seed..a.seed + a.count {
                let params = RandomParams {
                    clients: a.clients,
                    facilities: a.facilities,
                    k: a.k,
                    p: a.p,
                    cap_range: (a.cap_min, a.cap_max),
                    model: match a.edge_prob {
                        Some(edge_prob) => RandomModel::Graph {
                            edge_prob,
                            connected: true,
                        },
                        None => RandomModel::Metric { grid: a.grid },
                    },
                    mode: a.mode.into(),
                    capacity_mode: if a.soft {
                        CapacityMode::Soft
                    } else {
                        CapacityMode::Hard
                    },
                    seed,
                };
                let json = instance_to_json(&gen_random(&params)?);
                let path = a
                    .out_dir
                    .as_ref()
                    .map(|d| d.join(format!("random-{seed}.json")));
                write_or_print(path.as_deref(), &json)?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct BenchRow {
    instance: String,
    variant: Variant,
    opt: Option<f64>,
    radius: Option<f64>,
    ratio: Option<f64>,
    millis: u128,
    status: String,
}

fn bench_row(path: &Path, budget: u64, variant: Option<Variant>) -> anyhow::Result<BenchRow> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let inst = load_instance(path)?;
    let variant = variant.unwrap_or_else(|| default_variant(&inst));
    let start = Instant::now();
    let res = solve_metric(&inst, &solve_options(variant, false))?;
    let millis = start.elapsed().as_millis();
    let radius = res.solution.as_ref().map(|s| s.radius);
    if let Some(sol) = &res.solution {
        if !verify_solution(&inst, sol, sol.radius).is_valid() {
            return Ok(BenchRow {
                instance: name,
                variant,
                opt: None,
                radius,
                ratio: None,
                millis,
                status: "INVALID".into(),
            });
        }
    }
    let (opt, status) = match exact_opt(&inst, &OracleOptions { budget }) {
        Err(Error::Budget { needed, .. }) => (None, format!("unchecked (needs {needed} flows)")),
        Err(e) => return Err(e.into()),
        Ok(o) => {
            let status = match (o.opt, radius) {
                (None, None) => "ok".to_string(),
                (Some(_), None) => "MISSED".to_string(),
                (None, Some(_)) => "SPURIOUS".to_string(),
                (Some(opt), Some(r)) if r <= variant.factor() as f64 * opt => "ok".to_string(),
                (Some(_), Some(_)) => "OVER".to_string(),
            };
            (o.opt, status)
        }
    };
    let ratio = match (opt, radius) {
        (Some(o), Some(r)) if o > 0.0 => Some(r / o),
        (Some(_), Some(_)) => Some(1.0),
        _ => None,
    };
    Ok(BenchRow {
        instance: name,
        variant,
        opt,
        radius,
        ratio,
        millis,
        status,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<u8> {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.dir)
        .with_context(|| format!("reading {}", a.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut rows = Vec::with_capacity(files.len());
    for f in &files {
        rows.push(bench_row(f, a.budget, a.variant)?);
    }
    println!(
        "{:<28} {:<13} {:>8} {:>8} {:>8} {:>8}  status",
        "instance", "variant", "opt", "radius", "ratio", "ms"
    );
    for r in &rows {
        println!(
            "{:<28} {:<13} {:>8} {:>8} {:>8} {:>8}  {}",
            r.instance,
            r.variant.name(),
            fmt_opt(r.opt),
            fmt_opt(r.radius),
            r.ratio
                .map_or_else(|| "-".to_string(), |x| format!("{x:.3}")),
            r.millis,
            r.status
        );
    }
    if let Some(p) = &a.json {
        fs::write(p, serde_json::to_string_pretty(&rows)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let bad = rows
        .iter()
        .any(|r| r.status != "ok" && !r.status.starts_with("unchecked"));
    Ok(if bad { EXIT_ERROR } else { EXIT_OK })
}
