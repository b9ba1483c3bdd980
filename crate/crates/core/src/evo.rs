//! Binary structure encoding, the penalized two-objective criterion,
//! Pareto dominance, shared reproduction operators, and non-dominated
//! archive maintenance.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::narx::{
    estimate_parameters_over, free_run_nmse, nmse, simulate_free_run, simulate_one_step, Dataset,
    ModelSet, Term, NMSE_SENTINEL,
};

/// Fixed-length bit vector selecting terms from a model set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome {
    bits: Vec<bool>,
}

impl Genome {
    pub fn new(bits: Vec<bool>) -> Self {
        Genome { bits }
    }

    /// Uniformly random genome, repaired to have at least one set bit.
    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        Genome::random_with_density(len, 0.5, rng)
    }

    /// Random genome with each bit set with probability `density`,
    /// repaired to have at least one set bit.
    pub fn random_with_density(len: usize, density: f64, rng: &mut impl Rng) -> Self {
        let mut g = Genome {
            bits: (0..len).map(|_| rng.random::<f64>() < density).collect(),
        };
        g.repair(rng);
        g
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// An all-zero genome decodes to nothing; force one random bit on.
    pub fn repair(&mut self, rng: &mut impl Rng) {
        if !self.bits.iter().any(|&b| b) && !self.bits.is_empty() {
            let i = rng.random_range(0..self.bits.len());
            self.bits[i] = true;
        }
    }

    /// `"10110..."` form used in archive JSON.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bad bit char `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(Genome { bits })
    }
}

/// A-priori goal point: upper limits on cardinality and NMSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPoint {
    pub xi_lim: usize,
    pub nmse_lim: f64,
}

impl GoalPoint {
    pub fn new(xi_lim: usize, nmse_lim: f64) -> Result<Self> {
        if xi_lim < 1 {
            return Err(Error::invalid("xi_lim must be >= 1"));
        }
        if nmse_lim <= 0.0 {
            return Err(Error::invalid("nmse_lim must be > 0"));
        }
        Ok(GoalPoint { xi_lim, nmse_lim })
    }
}

impl Default for GoalPoint {
    /// The published rule-of-thumb region of interest.
    fn default() -> Self {
        GoalPoint {
            xi_lim: 20,
            nmse_lim: 30.0,
        }
    }
}

/// Raw criteria (cardinality, NMSE) plus the goal-penalized pair actually
/// searched on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub xi: usize,
    pub nmse: f64,
    pub penalty: f64,
    pub j1: f64,
    pub j2: f64,
}

/// Applies the goal penalty: any excess beyond either limit is charged,
/// scaled by 10, to both criteria.
pub fn penalized_objectives(xi: usize, nmse: f64, goal: &GoalPoint) -> ObjectiveVector {
    let bracket = |operand: f64| if operand < 0.0 { -operand } else { 0.0 };
    let penalty = 10.0 * (bracket(goal.nmse_lim - nmse) + bracket(goal.xi_lim as f64 - xi as f64));
    ObjectiveVector {
        xi,
        nmse,
        penalty,
        j1: xi as f64 + penalty,
        j2: nmse + penalty,
    }
}

/// Pareto dominance over (J1, J2): no worse on both, strictly better on one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    dominates_pair((a.j1, a.j2), (b.j1, b.j2))
}

pub(crate) fn dominates_pair(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Terms at the genome's set bits, in dictionary order.
pub fn decode(genome: &Genome, ms: &ModelSet) -> Result<Vec<Term>> {
    if genome.len() != ms.len() {
        return Err(Error::invalid(format!(
            "genome length {} does not match model set size {}",
            genome.len(),
            ms.len()
        )));
    }
    Ok(genome
        .bits
        .iter()
        .zip(ms.terms())
        .filter(|(&b, _)| b)
        .map(|(_, t)| t.clone())
        .collect())
}

/// Parameterized uniform crossover: with probability `p_c`, each locus
/// swaps between the two offspring with probability 0.5.
pub fn uniform_crossover(
    p: &Genome,
    q: &Genome,
    p_c: f64,
    rng: &mut impl Rng,
) -> (Genome, Genome) {
    assert_eq!(p.len(), q.len());
    let mut a = p.clone();
    let mut b = q.clone();
    if rng.random::<f64>() < p_c {
        for j in 0..a.len() {
            if rng.random::<f64>() < 0.5 {
                let t = a.bits[j];
                a.bits[j] = b.bits[j];
                b.bits[j] = t;
            }
        }
    }
    (a, b)
}

/// Single-point crossover: with probability `p_c`, swap the suffixes after
/// a uniformly chosen cut in `[1, n-1]`.
pub fn single_point_crossover(
    p: &Genome,
    q: &Genome,
    p_c: f64,
    rng: &mut impl Rng,
) -> (Genome, Genome) {
    assert_eq!(p.len(), q.len());
    let mut a = p.clone();
    let mut b = q.clone();
    if a.len() > 1 && rng.random::<f64>() < p_c {
        let cut = rng.random_range(1..a.len());
        for j in cut..a.len() {
            let t = a.bits[j];
            a.bits[j] = b.bits[j];
            b.bits[j] = t;
        }
    }
    (a, b)
}

/// Flip-bit mutation; an all-zero result is repaired with one random bit.
pub fn flip_bit_mutation(g: &Genome, p_m: f64, rng: &mut impl Rng) -> Genome {
    let mut out = g.clone();
    for j in 0..out.len() {
        if rng.random::<f64>() < p_m {
            out.bits[j] = !out.bits[j];
        }
    }
    out.repair(rng);
    out
}

/// One archived structure with its objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
}

/// Mutually non-dominated set of structures. Distinct genomes with equal
/// objectives are all retained; duplicate genomes are not.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
    pub capacity: Option<usize>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        ParetoArchive::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        ParetoArchive {
            entries: Vec::new(),
            capacity: Some(capacity),
        }
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts unless dominated by or duplicating a member; evicts members
    /// the entry dominates. Returns whether the entry was added.
    pub fn insert(&mut self, entry: ArchiveEntry) -> bool {
        if self.entries.iter().any(|e| e.genome == entry.genome) {
            return false;
        }
        if self
            .entries
            .iter()
            .any(|e| dominates(&e.objectives, &entry.objectives))
        {
            return false;
        }
        self.entries
            .retain(|e| !dominates(&entry.objectives, &e.objectives));
        self.entries.push(entry);
        if let Some(cap) = self.capacity {
            while self.entries.len() > cap {
                self.evict_most_crowded();
            }
        }
        true
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = ArchiveEntry>) {
        for e in entries {
            self.insert(e);
        }
    }

    /// Drops the interior entry with the smallest crowding distance.
    fn evict_most_crowded(&mut self) {
        let objs: Vec<(f64, f64)> = self
            .entries
            .iter()
            .map(|e| (e.objectives.j1, e.objectives.j2))
            .collect();
        let crowd = crate::optim::crowding_distance(&objs);
        let (idx, _) = crowd
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite crowding"))
            .expect("non-empty archive");
        self.entries.remove(idx);
    }

    /// Deterministic order for persistence: by (j1, j2, bits).
    pub fn sorted_entries(&self) -> Vec<ArchiveEntry> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| {
            a.objectives
                .j1
                .total_cmp(&b.objectives.j1)
                .then(a.objectives.j2.total_cmp(&b.objectives.j2))
                .then(a.genome.cmp(&b.genome))
        });
        v
    }
}

/// How the search scores a candidate's prediction error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// Model-predicted (free-run) output over the validation partition.
    FreeRun,
    /// One-step-ahead prediction over the validation partition.
    OneStep,
}

/// Anything that can score genomes; lets the optimizers be exercised with
/// synthetic objective landscapes in tests.
pub trait Evaluator {
    fn genome_len(&self) -> usize;
    fn evaluate(&mut self, genome: &Genome) -> ObjectiveVector;
    /// Number of distinct genomes scored so far (cache misses only).
    fn novel_evaluations(&self) -> usize;
    /// Bit density for initial populations. Structure selection seeds the
    /// search inside the goal region (expected cardinality near the
    /// cardinality limit) instead of at half the dictionary.
    fn init_density(&self) -> f64 {
        0.5
    }
}

/// Scores a genome by decoding it, estimating coefficients on the
/// estimation partition and measuring NMSE on the validation partition,
/// then applying the goal penalty. Results are cached by bit pattern;
/// estimation failures score the sentinel error.
pub struct NarxEvaluator<'a> {
    ms: &'a ModelSet,
    data: &'a Dataset,
    goal: GoalPoint,
    mode: PredictionMode,
    cache: HashMap<Genome, ObjectiveVector>,
    novel: usize,
}

impl<'a> NarxEvaluator<'a> {
    pub fn new(ms: &'a ModelSet, data: &'a Dataset, goal: GoalPoint, mode: PredictionMode) -> Self {
        NarxEvaluator {
            ms,
            data,
            goal,
            mode,
            cache: HashMap::new(),
            novel: 0,
        }
    }

    fn raw_nmse(&self, genome: &Genome) -> f64 {
        let structure = match decode(genome, self.ms) {
            Ok(s) if !s.is_empty() => s,
            _ => return NMSE_SENTINEL,
        };
        let row_start = self.ms.max_lag();
        let model = match estimate_parameters_over(self.data, &structure, Some(row_start)) {
            Ok(m) => m,
            Err(_) => return NMSE_SENTINEL,
        };
        let validation = self.data.validation_range();
        let measured = &self.data.y[validation.clone()];
        let result = match self.mode {
            PredictionMode::FreeRun => simulate_free_run(&model, self.data, validation.clone())
                .and_then(|run| free_run_nmse(measured, &run)),
            PredictionMode::OneStep => simulate_one_step(&model, self.data, validation.clone())
                .and_then(|y_hat| nmse(measured, &y_hat)),
        };
        result.unwrap_or(NMSE_SENTINEL)
    }
}

impl Evaluator for NarxEvaluator<'_> {
    fn genome_len(&self) -> usize {
        self.ms.len()
    }

    fn init_density(&self) -> f64 {
        // Start well below the cardinality limit: adding a missing term
        // moves the error objective sharply, so the search climbs toward
        // the knee from sparse structures far more reliably than it
        // shrinks dense ones.
        (self.goal.xi_lim as f64 / (4.0 * self.ms.len() as f64)).min(0.5)
    }

    fn evaluate(&mut self, genome: &Genome) -> ObjectiveVector {
        if let Some(hit) = self.cache.get(genome) {
            return *hit;
        }
        let err = self.raw_nmse(genome);
        let obj = penalized_objectives(genome.count_ones(), err, &self.goal);
        self.cache.insert(genome.clone(), obj);
        self.novel += 1;
        obj
    }

    fn novel_evaluations(&self) -> usize {
        self.novel
    }
}
