//! The three multi-objective searches (NSGA-II, SPEA-II, MOEA/D) over a
//! shared reproduction scheme: tournament-selected parent pairs, uniform or
//! single-point crossover, flip-bit mutation, and an evaluation budget
//! counted in novel function evaluations.

mod moead;
mod nsga2;
mod spea2;

pub use moead::{generate_weight_vectors, run_moead, run_moead_with, tchebycheff};
pub use nsga2::{run_nsga2, run_nsga2_with};
pub use spea2::{run_spea2, run_spea2_with, spea2_fitness};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::{
    dominates, flip_bit_mutation, single_point_crossover, uniform_crossover, Evaluator, Genome,
    GoalPoint, NarxEvaluator, ObjectiveVector, ParetoArchive, PredictionMode,
};
use crate::narx::{Dataset, ModelSet};

/// Safety valve: abandon a run if this many consecutive generations add no
/// novel evaluations (possible only with degenerate operator settings).
const MAX_STALL_GENERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nsga2,
    Spea2,
    Moead,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Nsga2 => "nsga2",
            Algorithm::Spea2 => "spea2",
            Algorithm::Moead => "moead",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    Uniform,
    SinglePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoeadAggregation {
    Tchebycheff,
    WeightedSum,
}

/// Crowded-tournament tie rule. The canonical diversity-preserving rule is
/// larger-crowding-wins; `Smaller` is selectable for sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtsTie {
    Larger,
    Smaller,
}

/// Per-run search settings with the published defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub ps: usize,
    pub fe_budget: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub crossover: CrossoverKind,
    pub spea2_k: usize,
    pub moead_t: usize,
    pub moead_nr: usize,
    pub moead_aggregation: MoeadAggregation,
    pub cts_tie: CtsTie,
    pub seed: u64,
}

impl RunConfig {
    /// Published defaults: population and archive 50, 25,000 evaluations,
    /// k = 10, T = 10% of ps, nr = 2, and per-algorithm (p_c, p_m).
    pub fn defaults_for(algorithm: Algorithm) -> Self {
        let (p_c, p_m) = match algorithm {
            Algorithm::Nsga2 => (0.9, 0.006),
            Algorithm::Spea2 => (0.7, 0.008),
            Algorithm::Moead => (0.8, 0.008),
        };
        RunConfig {
            algorithm,
            ps: 50,
            fe_budget: 25_000,
            p_c,
            p_m,
            crossover: CrossoverKind::Uniform,
            spea2_k: 10,
            moead_t: 5,
            moead_nr: 2,
            moead_aggregation: MoeadAggregation::Tchebycheff,
            cts_tie: CtsTie::Larger,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ps < 4 || self.ps % 2 != 0 {
            return Err(Error::invalid(format!("ps must be even and >= 4, got {}", self.ps)));
        }
        if self.fe_budget < self.ps {
            return Err(Error::invalid("fe_budget must be >= ps"));
        }
        for (name, p) in [("p_c", self.p_c), ("p_m", self.p_m)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.algorithm == Algorithm::Moead {
            if self.moead_nr == 0 || self.moead_nr >= self.moead_t {
                return Err(Error::invalid(format!(
                    "need 0 < moead_nr < moead_t, got nr={} T={}",
                    self.moead_nr, self.moead_t
                )));
            }
            if self.moead_t >= self.ps {
                return Err(Error::invalid(format!(
                    "need moead_t < ps, got T={} ps={}",
                    self.moead_t, self.ps
                )));
            }
        }
        if self.algorithm == Algorithm::Spea2 && self.spea2_k == 0 {
            return Err(Error::invalid("spea2_k must be >= 1"));
        }
        Ok(())
    }
}

/// Population member with its score.
#[derive(Debug, Clone)]
pub struct Member {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
}

/// A population annotated with dominance ranks and crowding distances.
#[derive(Debug, Clone)]
pub struct RankedPopulation {
    pub ranks: Vec<usize>,
    pub crowding: Vec<f64>,
    pub fronts: Vec<Vec<usize>>,
}

/// Fast non-dominated sorting: fronts of member indices, front 1 first.
pub fn non_dominated_sort(objectives: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    fronts
}

/// Crowding distance within one front: per objective, the gap between
/// sorted neighbors normalized by the objective range, summed; extremes
/// get infinity. A degenerate objective (max = min) contributes nothing.
pub fn crowding_distance(objectives: &[(f64, f64)]) -> Vec<f64> {
    let n = objectives.len();
    let mut dist = vec![0.0f64; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for axis in 0..2 {
        let value = |i: usize| if axis == 0 { objectives[i].0 } else { objectives[i].1 };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let lo = value(order[0]);
        let hi = value(order[n - 1]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n - 1 {
                let i = order[w];
                if dist[i].is_finite() {
                    dist[i] += (value(order[w + 1]) - value(order[w - 1])) / (hi - lo);
                }
            }
        }
    }
    dist
}

pub(crate) fn rank_population(members: &[Member]) -> RankedPopulation {
    let objs: Vec<ObjectiveVector> = members.iter().map(|m| m.objectives).collect();
    let fronts = non_dominated_sort(&objs);
    let mut ranks = vec![0usize; members.len()];
    let mut crowding = vec![0.0f64; members.len()];
    for (f, front) in fronts.iter().enumerate() {
        let pairs: Vec<(f64, f64)> = front
            .iter()
            .map(|&i| (objs[i].j1, objs[i].j2))
            .collect();
        let d = crowding_distance(&pairs);
        for (slot, &i) in front.iter().enumerate() {
            ranks[i] = f + 1;
            crowding[i] = d[slot];
        }
    }
    RankedPopulation {
        ranks,
        crowding,
        fronts,
    }
}

/// One crossover application per the shared reproduction scheme.
pub(crate) fn crossover(
    kind: CrossoverKind,
    p: &Genome,
    q: &Genome,
    p_c: f64,
    rng: &mut impl Rng,
) -> (Genome, Genome) {
    match kind {
        CrossoverKind::Uniform => uniform_crossover(p, q, p_c, rng),
        CrossoverKind::SinglePoint => single_point_crossover(p, q, p_c, rng),
    }
}

/// Crossover over selected pairs followed by flip-bit mutation of every
/// offspring; `select` yields one parent index per call.
pub(crate) fn reproduce(
    cfg: &RunConfig,
    parents: &[Member],
    rng: &mut ChaCha12Rng,
    mut select: impl FnMut(&mut ChaCha12Rng) -> usize,
) -> Vec<Genome> {
    let mut offspring = Vec::with_capacity(cfg.ps);
    for _ in 0..cfg.ps / 2 {
        let p = select(rng);
        let q = select(rng);
        let (a, b) = crossover(
            cfg.crossover,
            &parents[p].genome,
            &parents[q].genome,
            cfg.p_c,
            rng,
        );
        offspring.push(a);
        offspring.push(b);
    }
    offspring
        .into_iter()
        .map(|g| flip_bit_mutation(&g, cfg.p_m, rng))
        .collect()
}

pub(crate) fn random_population(
    ps: usize,
    eval: &mut dyn Evaluator,
    rng: &mut ChaCha12Rng,
) -> Vec<Member> {
    let density = eval.init_density();
    (0..ps)
        .map(|_| {
            let genome = Genome::random_with_density(eval.genome_len(), density, rng);
            let objectives = eval.evaluate(&genome);
            Member { genome, objectives }
        })
        .collect()
}

/// Per-generation snapshot passed to an observer; used by invariants tests
/// and progress reporting.
pub struct GenerationView<'a> {
    pub generation: usize,
    pub front: Vec<&'a Member>,
    pub novel_evaluations: usize,
}

pub type Observer<'o> = Option<&'o mut dyn FnMut(&GenerationView<'_>)>;

/// Runs the configured algorithm against NARX structure-selection data.
pub fn run(
    cfg: &RunConfig,
    ms: &ModelSet,
    data: &Dataset,
    goal: &GoalPoint,
) -> Result<ParetoArchive> {
    run_with_mode(cfg, ms, data, goal, PredictionMode::FreeRun)
}

pub fn run_with_mode(
    cfg: &RunConfig,
    ms: &ModelSet,
    data: &Dataset,
    goal: &GoalPoint,
    mode: PredictionMode,
) -> Result<ParetoArchive> {
    cfg.validate()?;
    let mut eval = NarxEvaluator::new(ms, data, *goal, mode);
    match cfg.algorithm {
        Algorithm::Nsga2 => run_nsga2_with(cfg, &mut eval, None),
        Algorithm::Spea2 => run_spea2_with(cfg, &mut eval, None),
        Algorithm::Moead => run_moead_with(cfg, &mut eval, None),
    }
}
