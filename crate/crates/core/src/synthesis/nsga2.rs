//! NSGA-II with constrained dominance and duplicate elimination. The
//! evaluation budget counts distinct genotypes only.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dominates, evaluate_objectives, Objectives, ParetoArchive, SynthesisError};
use crate::uncertainty::{ParametricPlanModel, RetryAssignment};

/// Below this size the unevaluated genotypes are enumerated when random
/// sampling keeps hitting duplicates.
const ENUMERATE_LIMIT: u128 = 1 << 20;
const REMUTATE_TRIES: usize = 16;
const SAMPLE_TRIES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    /// Distinct genotypes to evaluate (capped at the space size).
    pub evaluations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1 / genes`.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
    /// Worker threads for evaluation; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig { population: 30, evaluations: 150, crossover_rate: 0.9, mutation_rate: None, seed: 42, jobs: None }
    }
}

impl GaConfig {
    fn check(&self) -> Result<(), SynthesisError> {
        if self.population < 2 {
            return Err(SynthesisError::BadConfig("population must be at least 2".into()));
        }
        if self.evaluations == 0 {
            return Err(SynthesisError::BadConfig("evaluation budget must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(SynthesisError::BadConfig("crossover rate must lie in [0, 1]".into()));
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return Err(SynthesisError::BadConfig("mutation rate must lie in [0, 1]".into()));
            }
        }
        if self.jobs == Some(0) {
            return Err(SynthesisError::BadConfig("jobs must be positive".into()));
        }
        Ok(())
    }
}

/// Runs NSGA-II and returns the archive of every feasible non-dominated
/// genotype seen, plus the full evaluation log in evaluation order.
pub fn synthesize(
    model: &ParametricPlanModel,
    cfg: &GaConfig,
    plan_hash: String,
) -> Result<(ParetoArchive, Vec<(RetryAssignment, Objectives)>), SynthesisError> {
    cfg.check()?;
    let run = || -> Result<_, SynthesisError> {
        let mut ga = Ga::new(model, cfg);
        ga.run()?;
        Ok(ga.log)
    };
    let log = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| SynthesisError::BadConfig(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut archive = ParetoArchive::from_evaluations(model, plan_hash, &log);
    archive.seed = Some(cfg.seed);
    archive.config = Some(cfg.clone());
    Ok((archive, log))
}

struct Ga<'a> {
    model: &'a ParametricPlanModel,
    cfg: &'a GaConfig,
    rng: ChaCha8Rng,
    budget: usize,
    mutation: f64,
    seen: HashMap<RetryAssignment, Objectives>,
    log: Vec<(RetryAssignment, Objectives)>,
}

impl<'a> Ga<'a> {
    fn new(model: &'a ParametricPlanModel, cfg: &'a GaConfig) -> Self {
        let space = model.space_size();
        let budget = (cfg.evaluations as u128).min(space) as usize;
        let genes = model.slots.len().max(1);
        Ga {
            model,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            budget,
            mutation: cfg.mutation_rate.unwrap_or(1.0 / genes as f64),
            seen: HashMap::new(),
            log: Vec::new(),
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.log.len()
    }

    fn random_genotype(&mut self) -> RetryAssignment {
        RetryAssignment(self.model.slots.iter().map(|s| self.rng.gen_range(s.lo..=s.hi)).collect())
    }

    /// A genotype neither evaluated nor already in `batch`.
    fn random_unseen(&mut self, batch: &HashSet<RetryAssignment>) -> Option<RetryAssignment> {
        for _ in 0..SAMPLE_TRIES {
            let g = self.random_genotype();
            if !self.seen.contains_key(&g) && !batch.contains(&g) {
                return Some(g);
            }
        }
        if self.model.space_size() > ENUMERATE_LIMIT {
            return None;
        }
        let free: Vec<RetryAssignment> =
            all_genotypes(self.model).filter(|g| !self.seen.contains_key(g) && !batch.contains(g)).collect();
        if free.is_empty() {
            None
        } else {
            let i = self.rng.gen_range(0..free.len());
            Some(free[i].clone())
        }
    }

    fn evaluate_batch(&mut self, mut batch: Vec<RetryAssignment>) -> Result<Vec<usize>, SynthesisError> {
        batch.sort();
        let model = self.model;
        let results: Vec<Objectives> =
            batch.par_iter().map(|g| evaluate_objectives(model, g)).collect::<Result<_, _>>()?;
        let mut ids = Vec::with_capacity(batch.len());
        for (g, o) in batch.into_iter().zip(results) {
            self.seen.insert(g.clone(), o);
            ids.push(self.log.len());
            self.log.push((g, o));
        }
        Ok(ids)
    }

    fn run(&mut self) -> Result<(), SynthesisError> {
        let n = self.cfg.population.min(self.budget);
        let mut batch = HashSet::new();
        let mut init = Vec::new();
        while init.len() < n {
            match self.random_unseen(&batch) {
                Some(g) => {
                    batch.insert(g.clone());
                    init.push(g);
                }
                None => break,
            }
        }
        let mut population = self.evaluate_batch(init)?;

        while self.remaining() > 0 && !population.is_empty() {
            let objs: Vec<Objectives> = population.iter().map(|&i| self.log[i].1).collect();
            let (rank, crowd) = rank_and_crowding(&objs);
            let want = self.cfg.population.min(self.remaining());
            let mut batch: HashSet<RetryAssignment> = HashSet::new();
            let mut offspring = Vec::with_capacity(want);
            while offspring.len() < want {
                let a = self.tournament(&rank, &crowd);
                let b = self.tournament(&rank, &crowd);
                let (pa, pb) = (self.log[population[a]].0.clone(), self.log[population[b]].0.clone());
                let mut child = self.crossover(&pa, &pb);
                self.mutate(&mut child);
                let mut tries = 0;
                while (self.seen.contains_key(&child) || batch.contains(&child)) && tries < REMUTATE_TRIES {
                    self.mutate_at_least_one(&mut child);
                    tries += 1;
                }
                if self.seen.contains_key(&child) || batch.contains(&child) {
                    match self.random_unseen(&batch) {
                        Some(g) => child = g,
                        None => break,
                    }
                }
                batch.insert(child.clone());
                offspring.push(child);
            }
            if offspring.is_empty() {
                break;
            }
            let ids = self.evaluate_batch(offspring)?;
            population.extend(ids);
            population = self.select(population);
        }
        Ok(())
    }

    fn tournament(&mut self, rank: &[usize], crowd: &[f64]) -> usize {
        let a = self.rng.gen_range(0..rank.len());
        let b = self.rng.gen_range(0..rank.len());
        let better = |x: usize, y: usize| rank[x] < rank[y] || (rank[x] == rank[y] && crowd[x] > crowd[y]);
        if better(b, a) {
            b
        } else {
            a
        }
    }

    fn crossover(&mut self, a: &RetryAssignment, b: &RetryAssignment) -> RetryAssignment {
        if self.rng.gen::<f64>() >= self.cfg.crossover_rate {
            return if self.rng.gen::<bool>() { a.clone() } else { b.clone() };
        }
        RetryAssignment(a.0.iter().zip(&b.0).map(|(&x, &y)| if self.rng.gen::<bool>() { x } else { y }).collect())
    }

    fn mutate(&mut self, g: &mut RetryAssignment) {
        for (i, slot) in self.model.slots.iter().enumerate() {
            if self.rng.gen::<f64>() < self.mutation {
                g.0[i] = self.rng.gen_range(slot.lo..=slot.hi);
            }
        }
    }

    fn mutate_at_least_one(&mut self, g: &mut RetryAssignment) {
        let movable: Vec<usize> = (0..g.0.len()).filter(|&i| self.model.slots[i].range_len() > 1).collect();
        if movable.is_empty() {
            return;
        }
        let i = movable[self.rng.gen_range(0..movable.len())];
        let slot = &self.model.slots[i];
        let mut v = self.rng.gen_range(slot.lo..slot.hi);
        if v >= g.0[i] {
            v += 1;
        }
        g.0[i] = v;
        self.mutate(g);
    }

    /// Environmental selection down to the population size.
    fn select(&self, pool: Vec<usize>) -> Vec<usize> {
        let objs: Vec<Objectives> = pool.iter().map(|&i| self.log[i].1).collect();
        let fronts = nondominated_fronts(&objs);
        let cap = self.cfg.population;
        let mut next = Vec::with_capacity(cap);
        for front in fronts {
            if next.len() + front.len() <= cap {
                next.extend(front.iter().map(|&k| pool[k]));
                continue;
            }
            let sub: Vec<Objectives> = front.iter().map(|&k| objs[k]).collect();
            let cd = crowding(&sub);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&x, &y| cd[y].total_cmp(&cd[x]).then(pool[front[x]].cmp(&pool[front[y]])));
            for &o in order.iter().take(cap - next.len()) {
                next.push(pool[front[o]]);
            }
            break;
        }
        next
    }
}

/// Fast non-dominated sort under constrained dominance.
pub(crate) fn nondominated_fronts(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&objs[i], &objs[j]) {
                dominated_by[i].push(j);
            } else if i != j && dominates(&objs[j], &objs[i]) {
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance within one front, over (cost, success).
pub(crate) fn crowding(objs: &[Objectives]) -> Vec<f64> {
    let n = objs.len();
    let mut d = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let keys: [fn(&Objectives) -> f64; 2] = [|o| o.expected_cost, |o| o.success_prob];
    for key in keys {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| key(&objs[a]).total_cmp(&key(&objs[b])).then(a.cmp(&b)));
        let (lo, hi) = (key(&objs[idx[0]]), key(&objs[idx[n - 1]]));
        d[idx[0]] = f64::INFINITY;
        d[idx[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            d[idx[w]] += (key(&objs[idx[w + 1]]) - key(&objs[idx[w - 1]])) / span;
        }
    }
    d
}

fn rank_and_crowding(objs: &[Objectives]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; objs.len()];
    let mut crowd = vec![0.0; objs.len()];
    for (r, front) in nondominated_fronts(objs).into_iter().enumerate() {
        let sub: Vec<Objectives> = front.iter().map(|&i| objs[i]).collect();
        for (k, c) in front.iter().zip(crowding(&sub)) {
            rank[*k] = r;
            crowd[*k] = c;
        }
    }
    (rank, crowd)
}

/// Lexicographic enumeration of the genotype space.
pub(crate) fn all_genotypes(model: &ParametricPlanModel) -> impl Iterator<Item = RetryAssignment> + '_ {
    let mut cur: Option<Vec<u32>> = Some(model.slots.iter().map(|s| s.lo).collect());
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            if next[i] < model.slots[i].hi {
                next[i] += 1;
                cur = Some(next);
                break;
            }
            next[i] = model.slots[i].lo;
        }
        Some(RetryAssignment(out))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner::vineyard_reference_plan;
    use crate::uncertainty::build_parametric_model;

    fn o(c: f64, p: f64) -> Objectives {
        Objectives::new(c, p, 0.5)
    }

    #[test]
    fn fronts_partition_by_rank() {
        let objs = vec![o(1.0, 0.9), o(2.0, 0.95), o(2.0, 0.8), o(3.0, 0.7), o(1.0, 0.4)];
        let f = nondominated_fronts(&objs);
        assert_eq!(f[0], vec![0, 1]);
        assert_eq!(f[1], vec![2]);
        assert_eq!(f[2], vec![3]);
        assert_eq!(f[3], vec![4]);
    }

    #[test]
    fn crowding_boundaries_infinite() {
        let d = crowding(&[o(1.0, 0.6), o(2.0, 0.7), o(4.0, 0.9)]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - (3.0 / 3.0 + 0.3 / 0.3)).abs() < 1e-12);
    }

    #[test]
    fn enumeration_covers_space() {
        let spec = fixtures::m2_analogue();
        let plan = crate::planner::plan_mission(&spec, &Default::default()).unwrap().0;
        let model = build_parametric_model(&spec, &plan).unwrap();
        let all: Vec<_> = all_genotypes(&model).collect();
        assert_eq!(all.len() as u128, model.space_size());
        let set: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
    }

    #[test]
    fn evaluations_are_distinct_and_budgeted() {
        let spec = fixtures::vineyard();
        let model = build_parametric_model(&spec, &vineyard_reference_plan(&spec)).unwrap();
        let cfg = GaConfig { evaluations: 90, ..Default::default() };
        let (archive, log) = synthesize(&model, &cfg, "h".into()).unwrap();
        assert_eq!(log.len(), 90);
        let set: HashSet<_> = log.iter().map(|(g, _)| g.clone()).collect();
        assert_eq!(set.len(), 90);
        assert_eq!(archive.evaluations, 90);
        assert!(!archive.is_empty());
    }

    #[test]
    fn same_seed_same_archive() {
        let spec = fixtures::vineyard();
        let model = build_parametric_model(&spec, &vineyard_reference_plan(&spec)).unwrap();
        let cfg = GaConfig { evaluations: 60, seed: 7, ..Default::default() };
        let a = synthesize(&model, &cfg, "h".into()).unwrap().0;
        let b = synthesize(&model, &GaConfig { jobs: Some(2), ..cfg.clone() }, "h".into()).unwrap().0;
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.front, b.front);
    }

    #[test]
    fn bad_config_rejected() {
        let spec = fixtures::vineyard();
        let model = build_parametric_model(&spec, &vineyard_reference_plan(&spec)).unwrap();
        let cfg = GaConfig { population: 1, ..Default::default() };
        assert!(matches!(synthesize(&model, &cfg, "h".into()), Err(SynthesisError::BadConfig(_))));
    }
}
