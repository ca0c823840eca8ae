//! Command-line front end. Every subcommand prints a JSON summary on
//! stdout; failures print `{"error": {"kind", "message"}}` on stderr and
//! exit nonzero.

mod bench;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::adapt::{simulate, AdaptOptions, Scenario};
use crate::baseline::{analyse, build_full_mdp, pareto_policies};
use crate::error::{Error, Result};
use crate::planner::{
    export_pddl_domain, export_pddl_problem, plan_metrics, plan_mission, validate_plan, Heuristic, Plan, PlannerConfig,
    Strategy,
};
use crate::pmc::SolverOptions;
use crate::spec::{parse_problem_spec, ProblemSpec, Severity};
use crate::synthesis::{exhaustive_synthesize, plan_hash, synthesize, GaConfig, ParetoArchive};
use crate::uncertainty::{
    build_parametric_model, evaluate_with, export_model_source, export_properties, ParametricPlanModel,
};

pub use bench::{bench_instance, planner_time_monotone, run_bench, BenchConfig, BenchReport, BenchRow, BenchSummary};

#[derive(Parser, Debug)]
#[command(name = "hytask", version, about = "Hybrid task planning for human-robot missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a mission file.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Allocate and schedule the tasks.
    Plan {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Also write the PDDL domain and problem.
        #[arg(long)]
        pddl: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search retry budgets for a plan.
    Synthesize {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        source: PlanSource,
        #[command(flatten)]
        ga: GaArgs,
        /// Enumerate every assignment instead, if there are at most this many.
        #[arg(long)]
        exhaustive: Option<u128>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one retry dictionary.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        source: PlanSource,
        /// JSON object task id -> attempt budget; missing tasks get their
        /// smallest budget unless --strict.
        #[arg(long)]
        retries: String,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a mission with injected changes.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        source: PlanSource,
        #[command(flatten)]
        ga: GaArgs,
        /// Archive to deploy from; synthesized when absent.
        #[arg(long)]
        archive: Option<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and query the monolithic MDP.
    Baseline {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        max_states: usize,
        /// Step bound of the cumulative-cost query.
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        /// Also compute the policy Pareto front.
        #[arg(long)]
        pareto: bool,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the PDDL domain and problem.
    ExportPddl {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the guarded-command model and its properties.
    ExportPrism {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        source: PlanSource,
        /// Fix the budgets instead of leaving them as parameters.
        #[arg(long)]
        retries: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time every stage over random missions.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10,11,12,13")]
        tasks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        agents: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        pop: usize,
        #[arg(long, default_value_t = 150)]
        evals: usize,
        #[arg(long, value_enum, default_value = "gbfs")]
        strategy: StrategyArg,
        /// Planning runs per instance (the fastest is reported).
        #[arg(long, default_value_t = 5)]
        plan_repeats: usize,
        #[arg(long, default_value_t = 600.0)]
        timeout: f64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Astar,
    Gbfs,
}

#[derive(Args, Debug)]
struct PlannerArgs {
    #[arg(long, value_enum, default_value = "astar")]
    strategy: StrategyArg,
    /// Search time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

impl PlannerArgs {
    fn config(&self) -> Result<PlannerConfig> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::Usage("--timeout must be a positive number of seconds".into()));
        }
        let base = match self.strategy {
            StrategyArg::Astar => PlannerConfig { strategy: Strategy::Astar, heuristic: Heuristic::Max, ..Default::default() },
            StrategyArg::Gbfs => PlannerConfig::gbfs(),
        };
        Ok(PlannerConfig { timeout: Duration::from_secs_f64(self.timeout), ..base })
    }
}

#[derive(Args, Debug)]
struct PlanSource {
    /// Plan file written by `plan`; planned afresh when absent.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args, Debug)]
struct GaArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    pop: usize,
    #[arg(long, default_value_t = 150)]
    evals: usize,
    #[arg(long)]
    jobs: Option<usize>,
}

impl GaArgs {
    fn config(&self) -> GaConfig {
        GaConfig { population: self.pop, evaluations: self.evals, seed: self.seed, jobs: self.jobs, ..Default::default() }
    }
}

/// What a run did and wrote.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub spec: Option<String>,
    pub seed: Option<u64>,
    pub config: Value,
    pub outputs: Vec<String>,
    /// Wall-clock seconds per stage (S1 planning, S2 timing, S3 model
    /// construction, S4 synthesis, ...).
    pub stage_seconds: BTreeMap<String, f64>,
    pub version: String,
}

struct Run {
    manifest: RunManifest,
    out: Option<PathBuf>,
}

impl Run {
    fn new(subcommand: &str, spec: Option<&Path>, out: Option<&Path>) -> Result<Self> {
        if let Some(dir) = out {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        Ok(Run {
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                spec: spec.map(|p| p.display().to_string()),
                seed: None,
                config: Value::Null,
                outputs: Vec::new(),
                stage_seconds: BTreeMap::new(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            out: out.map(Path::to_path_buf),
        })
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        *self.manifest.stage_seconds.entry(stage.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        v
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.out {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
            self.manifest.outputs.push(path.display().to_string());
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if self.out.is_some() {
            let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
            self.write("manifest.json", &text)?;
        }
        Ok(())
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load_spec(path: &Path) -> Result<ProblemSpec> {
    Ok(parse_problem_spec(&read(path)?)?)
}

fn load_plan(run: &mut Run, spec: &ProblemSpec, source: &PlanSource) -> Result<Plan> {
    match &source.plan {
        Some(p) => Ok(Plan::from_json(spec, &read(p)?)?),
        None => {
            let cfg = source.planner.config()?;
            let (plan, stats) = run.time("S1", || plan_mission(spec, &cfg))?;
            run.manifest.stage_seconds.insert("S1".into(), stats.elapsed.as_secs_f64());
            Ok(plan)
        }
    }
}

fn parse_retries(text: &str) -> Result<BTreeMap<String, u32>> {
    let body = match text.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => text.to_string(),
    };
    serde_json::from_str(&body).map_err(|e| Error::Usage(format!("--retries must be a JSON object of task budgets: {e}")))
}

fn build_model(run: &mut Run, spec: &ProblemSpec, plan: &Plan) -> Result<ParametricPlanModel> {
    Ok(run.time("S3", || build_parametric_model(spec, plan))?)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = writeln!(stderr, "{}", error_json("usage", &e.to_string()));
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            let _ = writeln!(stdout, "{}", to_json(&summary));
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(e.kind(), &e.to_string()));
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message.trim_end() } }).to_string()
}

fn dispatch(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Validate { spec } => {
            let text = read(&spec)?;
            let doc = serde_json::from_str(&text).map_err(crate::spec::SpecError::Json)?;
            let violations = crate::spec::validate_document(&doc);
            if violations.iter().any(|v| v.severity == Severity::Error) {
                return Err(crate::spec::SpecError::Invalid(violations).into());
            }
            let spec = parse_problem_spec(&text)?;
            Ok(json!({
                "valid": true,
                "agents": spec.agents().len(),
                "locations": spec.locations().len(),
                "tasks": spec.tasks().len(),
                "warnings": violations,
            }))
        }
        Command::Plan { spec: spec_path, planner, pddl, out } => {
            let mut run = Run::new("plan", Some(&spec_path), out.as_deref())?;
            let spec = load_spec(&spec_path)?;
            let cfg = planner.config()?;
            let (plan, stats) = plan_mission(&spec, &cfg)?;
            run.manifest.stage_seconds.insert("S1".into(), stats.elapsed.as_secs_f64());
            let plan = run.time("S2", || Plan::from_trace(&spec, plan.total_order));
            let violations = validate_plan(&spec, &plan);
            let metrics = plan_metrics(&spec, &plan);
            run.manifest.config = json!({ "strategy": format!("{:?}", planner.strategy).to_lowercase(), "timeout": planner.timeout });
            run.write("plan.json", &plan.to_json(&spec))?;
            if pddl {
                run.write("domain.pddl", &export_pddl_domain(&spec))?;
                run.write("problem.pddl", &export_pddl_problem(&spec))?;
            }
            let summary = json!({
                "travel_cost": plan.travel_cost,
                "actions": plan.total_order.len(),
                "makespan": metrics.makespan,
                "valid": violations.is_empty(),
                "expanded": stats.expanded,
                "plan_hash": plan_hash(&spec, &plan),
                "plan": plan.to_document(&spec),
            });
            run.finish()?;
            Ok(summary)
        }
        Command::Synthesize { spec: spec_path, source, ga, exhaustive, out } => {
            let mut run = Run::new("synthesize", Some(&spec_path), out.as_deref())?;
            let spec = load_spec(&spec_path)?;
            let plan = load_plan(&mut run, &spec, &source)?;
            let model = build_model(&mut run, &spec, &plan)?;
            let hash = plan_hash(&spec, &plan);
            let cfg = ga.config();
            let archive: ParetoArchive = match exhaustive {
                Some(limit) => run.time("S4", || exhaustive_synthesize(&model, limit, hash))?.0,
                None => run.time("S4", || synthesize(&model, &cfg, hash))?.0,
            };
            run.manifest.seed = Some(ga.seed);
            run.manifest.config = serde_json::to_value(&cfg).expect("config serializes");
            run.write("plan.json", &plan.to_json(&spec))?;
            run.write("archive.json", &archive.to_json())?;
            run.write("front.csv", &archive.front_csv())?;
            let summary = json!({
                "plan_hash": archive.plan_hash,
                "evaluations": archive.evaluations,
                "entries": archive.entries.len(),
                "front": archive.front,
                "diagnostic": archive.diagnostic,
            });
            run.finish()?;
            Ok(summary)
        }
        Command::Verify { spec: spec_path, source, retries, strict, tol } => {
            let mut run = Run::new("verify", Some(&spec_path), None)?;
            let spec = load_spec(&spec_path)?;
            let plan = load_plan(&mut run, &spec, &source)?;
            let model = build_model(&mut run, &spec, &plan)?;
            let dict = parse_retries(&retries)?;
            let fill = if strict { None } else { Some(0) };
            let a = model.from_dict(&dict, fill)?;
            let mut opts = SolverOptions::default();
            if let Some(t) = tol {
                opts.tolerance = t;
            }
            let m = evaluate_with(&model, &a, &opts)?;
            Ok(json!({
                "expected_cost": m.expected_cost,
                "success_prob": m.success_prob,
                "feasible": m.success_prob >= model.p_succ,
                "p_succ": model.p_succ,
                "retries": model.to_dict(&a),
            }))
        }
        Command::Simulate { spec: spec_path, source, ga, archive, scenario, out } => {
            let mut run = Run::new("simulate", Some(&spec_path), out.as_deref())?;
            let spec = load_spec(&spec_path)?;
            let plan = load_plan(&mut run, &spec, &source)?;
            let scenario = Scenario::from_json(&read(&scenario)?)?;
            let cfg = ga.config();
            let archive = match archive {
                Some(p) => ParetoArchive::from_json(&read(&p)?)?,
                None => {
                    let model = build_model(&mut run, &spec, &plan)?;
                    run.time("S4", || synthesize(&model, &cfg, plan_hash(&spec, &plan)))?.0
                }
            };
            let options = AdaptOptions {
                ga: cfg.clone(),
                planner: source.planner.config()?,
                ..Default::default()
            };
            let trace = run.time("simulate", || simulate(&spec, &plan, &archive, &scenario, ga.seed, options))?;
            run.manifest.seed = Some(ga.seed);
            run.manifest.config = serde_json::to_value(&cfg).expect("config serializes");
            run.write("trace.jsonl", &trace.to_jsonl())?;
            let levels: Vec<Value> =
                trace.levels().iter().map(|(t, l)| json!({ "time": t, "level": l })).collect();
            let summary = json!({
                "status": trace.status,
                "total_cost": trace.total_cost,
                "adaptations": levels,
                "stage_totals": trace.stage_totals,
            });
            run.finish()?;
            Ok(summary)
        }
        Command::Baseline { spec: spec_path, max_states, horizon, pareto, tol, out } => {
            let mut run = Run::new("baseline", Some(&spec_path), out.as_deref())?;
            let spec = load_spec(&spec_path)?;
            let full = run.time("build", || build_full_mdp(&spec, max_states))?;
            let mut report = run.time("query", || analyse(&full, horizon))?;
            if let Some(t) = tol {
                let opts = SolverOptions { tolerance: t, ..Default::default() };
                report.p_max = crate::pmc::mdp_max_reach_prob(&full.mdp, crate::pmc::SUCCESS, &opts)
                    .map_err(crate::baseline::BaselineError::from)?;
            }
            let mut summary = serde_json::to_value(&report).expect("report serializes");
            if pareto {
                let front = run.time("pareto", || pareto_policies(&full, 100_000))?;
                summary["pareto"] = serde_json::to_value(&front).expect("points serialize");
            }
            run.manifest.config = json!({ "max_states": max_states, "horizon": horizon });
            run.write("baseline.json", &to_json(&summary))?;
            run.finish()?;
            Ok(summary)
        }
        Command::ExportPddl { spec: spec_path, out } => {
            let mut run = Run::new("export-pddl", Some(&spec_path), Some(&out))?;
            let spec = load_spec(&spec_path)?;
            run.write("domain.pddl", &export_pddl_domain(&spec))?;
            run.write("problem.pddl", &export_pddl_problem(&spec))?;
            let outputs = run.manifest.outputs.clone();
            run.finish()?;
            Ok(json!({ "outputs": outputs }))
        }
        Command::ExportPrism { spec: spec_path, source, retries, out } => {
            let mut run = Run::new("export-prism", Some(&spec_path), Some(&out))?;
            let spec = load_spec(&spec_path)?;
            let plan = load_plan(&mut run, &spec, &source)?;
            let model = build_model(&mut run, &spec, &plan)?;
            let assignment = match retries {
                Some(r) => Some(model.from_dict(&parse_retries(&r)?, Some(0))?),
                None => None,
            };
            run.write("model.prism", &export_model_source(&model, assignment.as_ref())?)?;
            run.write("properties.props", &export_properties(&model))?;
            let outputs = run.manifest.outputs.clone();
            run.finish()?;
            Ok(json!({ "outputs": outputs, "parametric": assignment.is_none(), "slots": model.slots.len() }))
        }
        Command::Bench { tasks, agents, reps, seed, pop, evals, strategy, plan_repeats, timeout, jobs, out } => {
            let mut run = Run::new("bench", None, out.as_deref())?;
            if tasks.is_empty() || agents.is_empty() || reps == 0 {
                return Err(Error::Usage("bench needs task counts, agent counts and at least one repetition".into()));
            }
            if agents.iter().any(|&a| a < 2) {
                return Err(Error::Usage("bench instances need at least two agents".into()));
            }
            let cfg = BenchConfig {
                tasks,
                agents,
                reps,
                seed,
                ga: GaConfig { population: pop, evaluations: evals, seed, jobs, ..Default::default() },
                planner: PlannerArgs { strategy, timeout }.config()?,
                plan_repeats: plan_repeats.max(1),
                timeout: Duration::from_secs_f64(timeout),
            };
            let report = run_bench(&cfg)?;
            run.manifest.seed = Some(seed);
            run.manifest.config = serde_json::to_value(&cfg).expect("config serializes");
            run.write("bench.csv", &report.rows_csv())?;
            run.write("bench.json", &to_json(&report))?;
            let summary = json!({
                "summary": report.summary,
                "planner_time_monotone": planner_time_monotone(&report),
            });
            run.finish()?;
            Ok(summary)
        }
    }
}
