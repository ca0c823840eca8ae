use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::planner::{plan_mission, timed_schedule, Plan, PlannerConfig};
use crate::spec::{
    AgentDoc, AgentKind, CapabilityDoc, ConstraintsDoc, LocationDoc, PathDoc, ProblemSpec, SpecDocument, TaskGroupDoc,
    TaskInstanceDoc,
};
use crate::synthesis::{plan_hash, synthesize, GaConfig};
use crate::uncertainty::build_parametric_model;

const GRID: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct BenchConfig {
    pub tasks: Vec<usize>,
    pub agents: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub ga: GaConfig,
    /// Search used for S1.
    #[serde(skip)]
    pub planner: PlannerConfig,
    /// Planning runs per instance; S1 is the fastest of them, which strips
    /// scheduler noise from a deterministic search.
    pub plan_repeats: usize,
    /// Planner time limit per instance.
    #[serde(serialize_with = "secs")]
    pub timeout: Duration,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Timings of one instance, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub tasks: usize,
    pub agents: usize,
    pub rep: usize,
    pub seed: u64,
    pub s1_plan: f64,
    pub s2_schedule: f64,
    pub s3_model: f64,
    pub s4_synthesis: f64,
    pub expanded: usize,
    pub travel_cost: f64,
    pub front_size: usize,
}

/// Per-cell statistics over the repetitions: median and geometric standard
/// deviation of each stage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSummary {
    pub tasks: usize,
    pub agents: usize,
    pub runs: usize,
    pub median: [f64; 4],
    pub geometric_sd: [f64; 4],
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
}

impl BenchReport {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("tasks,agents,rep,seed,s1_plan,s2_schedule,s3_model,s4_synthesis,expanded,travel_cost,front_size\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{}\n",
                r.tasks,
                r.agents,
                r.rep,
                r.seed,
                r.s1_plan,
                r.s2_schedule,
                r.s3_model,
                r.s4_synthesis,
                r.expanded,
                r.travel_cost,
                r.front_size
            ));
        }
        s
    }
}

fn loc(r: usize, c: usize) -> String {
    format!("l{}", r * GRID + c + 1)
}

/// Random vineyard-like mission on a 5x5 unit grid: every agent starts at
/// the corner `l1`, even-numbered agents are workers (t1, t3) and odd ones
/// robots (t2, t3), and `tasks` instances land on random non-start cells.
pub fn bench_instance(tasks: usize, agents: usize, seed: u64) -> Result<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations = (0..GRID * GRID).map(|i| LocationDoc { id: format!("l{}", i + 1), description: None }).collect();
    let mut paths = Vec::new();
    for r in 0..GRID {
        for c in 0..GRID {
            if c + 1 < GRID {
                paths.push(PathDoc { start: loc(r, c), end: loc(r, c + 1), distance: 1.0, description: None });
            }
            if r + 1 < GRID {
                paths.push(PathDoc { start: loc(r, c), end: loc(r + 1, c), distance: 1.0, description: None });
            }
        }
    }
    let mut groups: Vec<TaskGroupDoc> = ["t1", "t2", "t3"]
        .iter()
        .map(|g| TaskGroupDoc { id: g.to_string(), description: None, instances: Vec::new() })
        .collect();
    let cells: Vec<usize> = (1..GRID * GRID).collect();
    for i in 0..tasks {
        let g = rng.gen_range(0..groups.len());
        let cell = *cells.choose(&mut rng).expect("grid has cells");
        let id = format!("{}x{}", groups[g].id, i);
        groups[g].instances.push(TaskInstanceDoc { id, location: format!("l{}", cell + 1) });
    }
    groups.retain(|g| !g.instances.is_empty());
    let cap = |id: &str, cost: f64, p: f64, retries: i64| CapabilityDoc { id: id.into(), cost, p_success: p, retries };
    let present: Vec<String> = groups.iter().map(|g| g.id.clone()).collect();
    let agents = (0..agents)
        .map(|i| {
            let mut a = if i % 2 == 0 {
                AgentDoc {
                    id: format!("w{}", i / 2 + 1),
                    kind: AgentKind::Worker,
                    start: Some("l1".into()),
                    tasks: vec![cap("t1", 3.0, 1.0, 5), cap("t3", 5.0, 0.99, 5)],
                }
            } else {
                AgentDoc {
                    id: format!("r{}", i / 2 + 1),
                    kind: AgentKind::Robot,
                    start: Some("l1".into()),
                    tasks: vec![cap("t2", 1.0, 0.99, 10), cap("t3", 1.0, 0.97, 10)],
                }
            };
            a.tasks.retain(|c| present.contains(&c.id));
            a
        })
        .collect();
    let doc = SpecDocument {
        locations,
        paths,
        tasks: groups,
        agents,
        constraints: ConstraintsDoc { mission_probability_of_success: 0.9, min_assignment_probability: 0.9 },
        completed_tasks: Vec::new(),
        overrides: Vec::new(),
    };
    Ok(ProblemSpec::from_document(&doc)?)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn run_one(tasks: usize, agents: usize, rep: usize, seed: u64, cfg: &BenchConfig) -> Result<BenchRow> {
    let spec = bench_instance(tasks, agents, seed)?;
    let planner = PlannerConfig { timeout: cfg.timeout, ..cfg.planner.clone() };
    let (planned, mut s1) = timed(|| plan_mission(&spec, &planner));
    let (plan, stats) = planned?;
    for _ in 1..cfg.plan_repeats {
        s1 = s1.min(timed(|| plan_mission(&spec, &planner)).1);
    }
    let (_, s2) = timed(|| timed_schedule(&spec, &plan.total_order));
    let plan = Plan::from_trace(&spec, plan.total_order);
    let (model, s3) = timed(|| build_parametric_model(&spec, &plan));
    let model = model?;
    let ga = GaConfig { seed, ..cfg.ga.clone() };
    let (archive, s4) = timed(|| synthesize(&model, &ga, plan_hash(&spec, &plan)));
    let (archive, _) = archive?;
    Ok(BenchRow {
        tasks,
        agents,
        rep,
        seed,
        s1_plan: s1,
        s2_schedule: s2,
        s3_model: s3,
        s4_synthesis: s4,
        expanded: stats.expanded,
        travel_cost: plan.travel_cost,
        front_size: archive.front.len(),
    })
}

/// Median of positive samples; for one-dimensional data this is the
/// geometric median.
pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// exp of the standard deviation of the logs; 1 means no spread.
pub(crate) fn geometric_sd(xs: &[f64]) -> f64 {
    let logs: Vec<f64> = xs.iter().map(|x| x.max(1e-12).ln()).collect();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return 1.0;
    }
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt().exp()
}

/// Runs every (tasks, agents) cell `reps` times. Instance seeds depend on
/// the cell and repetition only, so cells with the same task count share
/// task layouts across agent counts.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.tasks {
        for &m in &cfg.agents {
            let mut cell = Vec::with_capacity(cfg.reps);
            for rep in 0..cfg.reps {
                let seed = cfg.seed.wrapping_add((n as u64) * 1000 + rep as u64);
                cell.push(run_one(n, m, rep, seed, cfg)?);
            }
            let stage = |f: fn(&BenchRow) -> f64| cell.iter().map(f).collect::<Vec<_>>();
            let cols = [
                stage(|r| r.s1_plan),
                stage(|r| r.s2_schedule),
                stage(|r| r.s3_model),
                stage(|r| r.s4_synthesis),
            ];
            summary.push(BenchSummary {
                tasks: n,
                agents: m,
                runs: cell.len(),
                median: cols.clone().map(|c| median(&c)),
                geometric_sd: cols.map(|c| geometric_sd(&c)),
            });
            rows.extend(cell);
        }
    }
    Ok(BenchReport { rows, summary })
}

/// Whether, for every task count, the median planning time does not
/// decrease as agents are added.
pub fn planner_time_monotone(report: &BenchReport) -> bool {
    let mut by_tasks: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
    for s in &report.summary {
        by_tasks.entry(s.tasks).or_default().push((s.agents, s.median[0]));
    }
    by_tasks.values_mut().all(|v| {
        v.sort_by_key(|x| x.0);
        v.windows(2).all(|w| w[1].1 >= w[0].1)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_seeded_and_valid() {
        let a = bench_instance(10, 4, 7).unwrap();
        let b = bench_instance(10, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tasks().len(), 10);
        assert_eq!(a.agents().len(), 4);
        assert_eq!(a.locations().len(), 25);
        assert!(a.validate().iter().all(|v| v.severity != crate::spec::Severity::Error));
        assert_ne!(a, bench_instance(10, 4, 8).unwrap());
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((geometric_sd(&[2.0, 2.0, 2.0]) - 1.0).abs() < 1e-12);
        // logs are ln 1 and ln e^2: sample sd sqrt(2)
        let g = geometric_sd(&[1.0, std::f64::consts::E.powi(2)]);
        assert!((g - 2f64.sqrt().exp()).abs() < 1e-12);
    }

    #[test]
    fn small_bench_runs() {
        let cfg = BenchConfig {
            tasks: vec![4],
            agents: vec![2],
            reps: 2,
            seed: 1,
            ga: GaConfig { population: 10, evaluations: 20, ..Default::default() },
            planner: PlannerConfig::gbfs(),
            plan_repeats: 2,
            timeout: Duration::from_secs(30),
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.summary.len(), 1);
        assert!(r.rows_csv().lines().count() == 3);
    }
}
