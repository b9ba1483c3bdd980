//! MOEA/D: decomposition into scalar sub-problems by uniformly spaced
//! weight vectors, neighborhood-restricted mating and replacement, and an
//! external bounded archive of non-dominated structures.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::evo::{
    flip_bit_mutation, ArchiveEntry, Evaluator, GoalPoint, ObjectiveVector, ParetoArchive,
    PredictionMode,
};
use crate::narx::{Dataset, ModelSet};

use super::{
    crossover, random_population, GenerationView, Member, MoeadAggregation, Observer, RunConfig,
    MAX_STALL_GENERATIONS,
};

/// External archive capacity for MOEA/D; matches the published archive
/// size, truncated by crowding distance when exceeded.
pub const MOEAD_ARCHIVE_CAPACITY: usize = 50;

/// Weights treated as exactly zero would ignore an objective wholesale;
/// they are floored instead.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Uniformly spaced two-objective weights: `(i/(ps-1), 1 - i/(ps-1))`.
pub fn generate_weight_vectors(ps: usize) -> Vec<(f64, f64)> {
    assert!(ps >= 2, "need at least two sub-problems");
    (0..ps)
        .map(|i| {
            let w = i as f64 / (ps - 1) as f64;
            (w, 1.0 - w)
        })
        .collect()
}

/// Tchebycheff aggregation: `max_p lambda_p * |J_p - z*_p|`, with
/// zero weights floored at [`WEIGHT_FLOOR`].
pub fn tchebycheff(j: (f64, f64), lambda: (f64, f64), ideal: (f64, f64)) -> f64 {
    let l1 = lambda.0.max(WEIGHT_FLOOR);
    let l2 = lambda.1.max(WEIGHT_FLOOR);
    (l1 * (j.0 - ideal.0).abs()).max(l2 * (j.1 - ideal.1).abs())
}

fn weighted_sum(j: (f64, f64), lambda: (f64, f64)) -> f64 {
    lambda.0.max(WEIGHT_FLOOR) * j.0 + lambda.1.max(WEIGHT_FLOOR) * j.1
}

fn aggregate(
    kind: MoeadAggregation,
    obj: &ObjectiveVector,
    lambda: (f64, f64),
    ideal: (f64, f64),
) -> f64 {
    match kind {
        MoeadAggregation::Tchebycheff => tchebycheff((obj.j1, obj.j2), lambda, ideal),
        MoeadAggregation::WeightedSum => weighted_sum((obj.j1, obj.j2), lambda),
    }
}

/// Indices of the `t` nearest weight vectors (by Euclidean distance,
/// including the sub-problem itself) for each sub-problem.
pub(crate) fn neighborhoods(weights: &[(f64, f64)], t: usize) -> Vec<Vec<usize>> {
    weights
        .iter()
        .map(|&w| {
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.sort_by(|&a, &b| {
                let da = (weights[a].0 - w.0).powi(2) + (weights[a].1 - w.1).powi(2);
                let db = (weights[b].0 - w.0).powi(2) + (weights[b].1 - w.1).powi(2);
                da.total_cmp(&db).then(a.cmp(&b))
            });
            order.truncate(t);
            order
        })
        .collect()
}

pub fn run_moead(
    cfg: &RunConfig,
    ms: &ModelSet,
    data: &Dataset,
    goal: &GoalPoint,
) -> Result<ParetoArchive> {
    cfg.validate()?;
    let mut eval = crate::evo::NarxEvaluator::new(ms, data, *goal, PredictionMode::FreeRun);
    run_moead_with(cfg, &mut eval, None)
}

pub fn run_moead_with(
    cfg: &RunConfig,
    eval: &mut dyn Evaluator,
    mut observer: Observer<'_>,
) -> Result<ParetoArchive> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let weights = generate_weight_vectors(cfg.ps);
    let hoods = neighborhoods(&weights, cfg.moead_t);
    let mut pop = random_population(cfg.ps, eval, &mut rng);

    let mut ideal = (f64::INFINITY, f64::INFINITY);
    let mut archive = ParetoArchive::with_capacity(MOEAD_ARCHIVE_CAPACITY);
    for m in &pop {
        ideal.0 = ideal.0.min(m.objectives.j1);
        ideal.1 = ideal.1.min(m.objectives.j2);
        archive.insert(ArchiveEntry {
            genome: m.genome.clone(),
            objectives: m.objectives,
        });
    }

    let mut generation = 0usize;
    let mut stall = 0usize;
    while eval.novel_evaluations() < cfg.fe_budget && stall < MAX_STALL_GENERATIONS {
        generation += 1;
        let before = eval.novel_evaluations();
        for i in 0..cfg.ps {
            let hood = &hoods[i];
            let a = hood[rng.random_range(0..hood.len())];
            let b = {
                let mut b = hood[rng.random_range(0..hood.len())];
                while hood.len() > 1 && b == a {
                    b = hood[rng.random_range(0..hood.len())];
                }
                b
            };
            // first offspring of the shared reproduction scheme
            let (child, _) = crossover(
                cfg.crossover,
                &pop[a].genome,
                &pop[b].genome,
                cfg.p_c,
                &mut rng,
            );
            let child = flip_bit_mutation(&child, cfg.p_m, &mut rng);
            let objectives = eval.evaluate(&child);
            ideal.0 = ideal.0.min(objectives.j1);
            ideal.1 = ideal.1.min(objectives.j2);
            // replace at most nr worse neighborhood incumbents
            let mut order = hood.clone();
            order.shuffle(&mut rng);
            let mut replaced = 0usize;
            for &j in &order {
                let incumbent = aggregate(
                    cfg.moead_aggregation,
                    &pop[j].objectives,
                    weights[j],
                    ideal,
                );
                let candidate = aggregate(cfg.moead_aggregation, &objectives, weights[j], ideal);
                if candidate < incumbent {
                    pop[j] = Member {
                        genome: child.clone(),
                        objectives,
                    };
                    replaced += 1;
                    if replaced == cfg.moead_nr {
                        break;
                    }
                }
            }
            archive.insert(ArchiveEntry {
                genome: child,
                objectives,
            });
        }
        stall = if eval.novel_evaluations() == before {
            stall + 1
        } else {
            0
        };
        if let Some(obs) = observer.as_deref_mut() {
            obs(&GenerationView {
                generation,
                front: Vec::new(),
                novel_evaluations: eval.novel_evaluations(),
            });
        }
    }
    Ok(archive)
}
