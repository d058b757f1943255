//! Command-line front end. Results go to standard output (JSON or CSV), logs
//! and errors to standard error.
//!
//! Exit codes: 0 on success, 1 on domain errors (invalid plan, infeasible
//! verification, I/O), 2 on usage errors.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{run_sweep, write_report, ScenarioConfig, SweepResult};
use crate::forwarding::Policy;
use crate::lp::{
    build_lp_with_mode, demands_to_commodities, lp_metrics, solution_from_csv, solution_to_csv,
    solve_lp, verify_solution, LpMode, LpStatus, WeightFn,
};
use crate::plan::{
    generate_random_topology, node_set, parse_contact_plan, parse_unchecked,
    serialize_contact_plan, validate, ContactPlan, NodeId, StateGrid, TopologyConfig,
};
use crate::routing::build_route_table;
use crate::sim::{compute_metrics, parse_demands, run_simulation, Demand};

#[derive(Parser, Debug)]
#[command(name = "cgrlab", version, about = "Contact graph routing and LP bounds for DTNs")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random density-based contact plan.
    Gen(GenArgs),
    /// Check a contact plan and print its diagnostics.
    Validate {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Dump the route table of one node as CSV.
    Routes(RoutesArgs),
    /// Run one simulation and print its metrics.
    Sim(SimArgs),
    /// Build, solve and certify the flow model; print its metrics.
    Lp(LpArgs),
    /// Run a scenario sweep into a directory.
    Sweep(SweepArgs),
    /// Re-check a stored LP solution against the model.
    Verify(VerifyArgs),
    /// Rebuild summary tables from a sweep directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub nodes: u32,
    #[arg(long)]
    pub states: usize,
    /// State duration in seconds.
    #[arg(long)]
    pub dur: f64,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 10)]
    pub capacity: u32,
    #[arg(long)]
    pub seed: u64,
    /// Write the plan here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RoutesArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub node: u32,
    #[arg(long, default_value_t = 0.0)]
    pub t_now: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Destinations; all other nodes when omitted.
    #[arg(long = "dest")]
    pub dests: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub demands: PathBuf,
    /// deltime or hops.
    #[arg(long)]
    pub policy: Policy,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Also write the per-packet log as CSV.
    #[arg(long)]
    pub packets: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub demands: PathBuf,
    /// Drop undeliverable traffic at a penalty instead of failing.
    #[arg(long)]
    pub soft: bool,
    /// "linear" or a comma-separated list of per-state weights.
    #[arg(long, default_value = "linear")]
    pub weights: String,
}

#[derive(Args, Debug)]
pub struct LpArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Write the model in CPLEX LP format.
    #[arg(long)]
    pub lp_out: Option<PathBuf>,
    /// Write the solution as CSV.
    #[arg(long)]
    pub solution_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the worker count of the config.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding runs.csv.
    #[arg(long)]
    pub dir: PathBuf,
    /// Where to write the tables; defaults to --dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

fn ok(stdout: String) -> Output {
    Output { stdout, code: 0 }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn load_plan(path: &Path) -> Result<ContactPlan> {
    parse_contact_plan(&read(path)?)
}

fn load_demands(path: &Path) -> Result<Vec<Demand>> {
    parse_demands(&read(path)?)
}

fn parse_weights(s: &str) -> Result<WeightFn> {
    if s.eq_ignore_ascii_case("linear") {
        return Ok(WeightFn::Linear);
    }
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad weight '{w}'")))
        })
        .collect::<Result<Vec<_>>>()
        .map(WeightFn::Custom)
}

fn build_model(m: &ModelArgs) -> Result<crate::lp::LpProblem> {
    let plan = load_plan(&m.plan)?;
    let demands = load_demands(&m.demands)?;
    for d in &demands {
        d.check(&plan)?;
    }
    let commodities = demands_to_commodities(&demands);
    let mode = if m.soft { LpMode::Soft } else { LpMode::Hard };
    build_lp_with_mode(&plan, &commodities, &parse_weights(&m.weights)?, mode)
}

/// Executes a parsed command.
pub fn execute(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Gen(a) => {
            let plan = generate_random_topology(&TopologyConfig {
                node_count: a.nodes,
                density: a.density,
                capacity: a.capacity,
                grid: StateGrid::new(a.states, a.dur)?,
                seed: a.seed,
            })?;
            let text = serialize_contact_plan(&plan);
            let Some(path) = &a.out else {
                return Ok(ok(text));
            };
            fs::write(path, &text)?;
            Ok(ok(to_json(&json!({
                "plan": path.display().to_string(),
                "nodes": plan.nodes.len(),
                "contacts": plan.contacts.len(),
            }))?))
        }
        Command::Validate { plan } => {
            let parsed = parse_unchecked(&read(plan)?)?;
            let diags = validate(&parsed);
            let body = to_json(&json!({
                "valid": diags.is_empty(),
                "nodes": parsed.nodes.len(),
                "contacts": parsed.contacts.len(),
                "diagnostics": diags.iter().map(|d| json!({
                    "kind": d.kind,
                    "message": d.to_string(),
                })).collect::<Vec<_>>(),
            }))?;
            Ok(Output {
                stdout: body,
                code: if diags.is_empty() { 0 } else { 1 },
            })
        }
        Command::Routes(a) => {
            let plan = load_plan(&a.plan)?;
            let owner = NodeId(a.node);
            let dests: BTreeSet<NodeId> = if a.dests.is_empty() {
                node_set(&plan).into_iter().filter(|&n| n != owner).collect()
            } else {
                a.dests.iter().map(|&d| NodeId(d)).collect()
            };
            let table = build_route_table(&plan, owner, a.t_now, a.k, &dests)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "destination",
                "rank",
                "delivery_time",
                "hops",
                "departure_time",
                "expiration",
                "max_volume",
                "contacts",
            ])?;
            for (dest, routes) in &table.routes {
                for (rank, r) in routes.iter().enumerate() {
                    let contacts: Vec<String> = r.contacts.iter().map(|c| c.to_string()).collect();
                    w.write_record([
                        dest.to_string(),
                        (rank + 1).to_string(),
                        r.delivery_time.to_string(),
                        r.hops.to_string(),
                        r.departure_time.to_string(),
                        r.expiration.to_string(),
                        r.max_volume.to_string(),
                        contacts.join(";"),
                    ])?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(ok(String::from_utf8(bytes).expect("csv output is utf-8")))
        }
        Command::Sim(a) => {
            let plan = load_plan(&a.plan)?;
            let demands = load_demands(&a.demands)?;
            let result = run_simulation(&plan, &demands, a.policy, a.k)?;
            if let Some(path) = &a.packets {
                fs::write(path, result.to_csv()?)?;
            }
            let metrics = compute_metrics(&result, &demands);
            Ok(ok(to_json(&json!({
                "policy": a.policy,
                "k": a.k,
                "outcomes": {
                    "delivered_on_time": result.count(crate::sim::Outcome::DeliveredOnTime),
                    "delivered_late": result.count(crate::sim::Outcome::DeliveredLate),
                    "dropped": result.count(crate::sim::Outcome::Dropped),
                    "stranded": result.count(crate::sim::Outcome::Stranded),
                },
                "metrics": metrics,
            }))?))
        }
        Command::Lp(a) => {
            let problem = build_model(&a.model)?;
            if let Some(path) = &a.lp_out {
                fs::write(path, problem.to_lp_format())?;
            }
            let solution = solve_lp(&problem);
            if let (Some(path), LpStatus::Optimal) = (&a.solution_out, solution.status) {
                fs::write(path, solution_to_csv(&problem, &solution)?)?;
            }
            let metrics = lp_metrics(&problem, &solution).ok();
            let body = to_json(&json!({
                "status": solution.status,
                "objective": (solution.status == LpStatus::Optimal).then_some(solution.objective),
                "variables": problem.num_vars(),
                "constraints": problem.rows.len(),
                "message": solution.message,
                "metrics": metrics,
            }))?;
            Ok(Output {
                stdout: body,
                code: if solution.status == LpStatus::NumericalFailure { 1 } else { 0 },
            })
        }
        Command::Sweep(a) => {
            let mut cfg = ScenarioConfig::from_json(&read(&a.config)?)?;
            if let Some(w) = a.workers {
                cfg.workers = w;
            }
            let result = run_sweep(&cfg)?;
            // the worker count does not affect results; keep the manifest stable
            cfg.workers = 1;
            let manifest = write_report(&a.out, Some(&cfg), &result)?;
            Ok(ok(to_json(&manifest)?))
        }
        Command::Verify(a) => {
            let problem = build_model(&a.model)?;
            let solution = solution_from_csv(&problem, &read(&a.solution)?)?;
            let violations = verify_solution(&problem, &solution, a.tol)?;
            let body = to_json(&json!({
                "feasible": violations.is_empty(),
                "objective": solution.objective,
                "violations": violations,
            }))?;
            Ok(Output {
                stdout: body,
                code: if violations.is_empty() { 0 } else { 1 },
            })
        }
        Command::Report(a) => {
            let result = SweepResult::from_runs_csv(&read(&a.dir.join("runs.csv"))?)?;
            let cfg = match read(&a.dir.join("config.json")) {
                Ok(text) => Some(ScenarioConfig::from_json(&text)?),
                Err(_) => None,
            };
            let out = a.out.as_deref().unwrap_or(&a.dir);
            let manifest = write_report(out, cfg.as_ref(), &result)?;
            Ok(ok(to_json(&manifest)?))
        }
    }
}

/// Parses `args` (including the program name), runs the command, writes its
/// output and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // --help and --version exit 0 and belong on standard output
            if e.exit_code() == 0 {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = write!(stderr, "{}", e.render());
            return 2;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.stdout.as_bytes());
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::InvalidArgument(_) => 2,
                _ => 1,
            }
        }
    }
}
