//! SPEA-II: strength-based pseudo fitness, k-th-neighbor density estimate,
//! fixed-size external archive with pad/truncate environmental selection,
//! and binary-tournament mating over the archive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::evo::{dominates, Evaluator, GoalPoint, ParetoArchive, PredictionMode};
use crate::narx::{Dataset, ModelSet};

use super::{
    random_population, reproduce, GenerationView, Member, Observer, RunConfig,
    MAX_STALL_GENERATIONS,
};

/// Pairwise Euclidean distances in (J1, J2) space; each row sorted
/// ascending, so `row[0]` is the nearest neighbor.
fn sorted_neighbor_distances(objs: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let n = objs.len();
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(n.saturating_sub(1)); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((objs[i].0 - objs[j].0).powi(2) + (objs[i].1 - objs[j].1).powi(2)).sqrt();
            rows[i].push(d);
            rows[j].push(d);
        }
        rows[i].sort_by(f64::total_cmp);
    }
    rows
}

/// SPEA-II pseudo fitness over the population/archive union: strength
/// S(i) = members i dominates; raw R(i) = sum of strengths of i's
/// dominators; density D(i) = 1/(sigma_k + 2). Non-dominated members have
/// R = 0 and hence fitness < 1.
pub fn spea2_fitness(union: &[Member], k: usize) -> Vec<f64> {
    let n = union.len();
    let mut strength = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&union[i].objectives, &union[j].objectives) {
                strength[i] += 1;
            }
        }
    }
    let mut raw = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&union[j].objectives, &union[i].objectives) {
                raw[i] += strength[j] as f64;
            }
        }
    }
    let objs: Vec<(f64, f64)> = union
        .iter()
        .map(|m| (m.objectives.j1, m.objectives.j2))
        .collect();
    let dist = sorted_neighbor_distances(&objs);
    (0..n)
        .map(|i| {
            let row = &dist[i];
            let sigma_k = if row.is_empty() {
                0.0
            } else {
                row[k.clamp(1, row.len()) - 1]
            };
            raw[i] + 1.0 / (sigma_k + 2.0)
        })
        .collect()
}

/// Environmental selection to exactly `ps` members: all non-dominated
/// members first; underfull archives pad with the best-fitness dominated
/// members; overfull archives repeatedly drop the member whose sorted
/// neighbor-distance vector is lexicographically smallest.
fn environmental_selection(union: Vec<Member>, fitness: &[f64], ps: usize) -> Vec<Member> {
    let mut nondom: Vec<usize> = (0..union.len()).filter(|&i| fitness[i] < 1.0).collect();
    if nondom.len() <= ps {
        let mut rest: Vec<usize> = (0..union.len()).filter(|&i| fitness[i] >= 1.0).collect();
        rest.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        nondom.extend(rest.into_iter().take(ps - nondom.len().min(ps)));
        return nondom.into_iter().map(|i| union[i].clone()).collect();
    }
    let mut kept: Vec<Member> = nondom.into_iter().map(|i| union[i].clone()).collect();
    while kept.len() > ps {
        let objs: Vec<(f64, f64)> = kept
            .iter()
            .map(|m| (m.objectives.j1, m.objectives.j2))
            .collect();
        let dist = sorted_neighbor_distances(&objs);
        let mut victim = 0usize;
        for i in 1..kept.len() {
            if dist[i]
                .iter()
                .zip(&dist[victim])
                .find_map(|(a, b)| match a.total_cmp(b) {
                    std::cmp::Ordering::Equal => None,
                    ord => Some(ord),
                })
                .unwrap_or(std::cmp::Ordering::Equal)
                == std::cmp::Ordering::Less
            {
                victim = i;
            }
        }
        kept.remove(victim);
    }
    kept
}

pub fn run_spea2(
    cfg: &RunConfig,
    ms: &ModelSet,
    data: &Dataset,
    goal: &GoalPoint,
) -> Result<ParetoArchive> {
    cfg.validate()?;
    let mut eval = crate::evo::NarxEvaluator::new(ms, data, *goal, PredictionMode::FreeRun);
    run_spea2_with(cfg, &mut eval, None)
}

pub fn run_spea2_with(
    cfg: &RunConfig,
    eval: &mut dyn Evaluator,
    mut observer: Observer<'_>,
) -> Result<ParetoArchive> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut pop = random_population(cfg.ps, eval, &mut rng);
    let mut archive: Vec<Member> = Vec::new();
    let mut generation = 0usize;
    let mut stall = 0usize;
    loop {
        generation += 1;
        let mut union = archive;
        union.extend(pop);
        let fitness = spea2_fitness(&union, cfg.spea2_k);
        archive = environmental_selection(union, &fitness, cfg.ps);
        if let Some(obs) = observer.as_deref_mut() {
            let nd: Vec<&Member> = archive
                .iter()
                .filter(|m| {
                    !archive
                        .iter()
                        .any(|o| dominates(&o.objectives, &m.objectives))
                })
                .collect();
            obs(&GenerationView {
                generation,
                front: nd,
                novel_evaluations: eval.novel_evaluations(),
            });
        }
        if eval.novel_evaluations() >= cfg.fe_budget || stall >= MAX_STALL_GENERATIONS {
            break;
        }
        let before = eval.novel_evaluations();
        let arch_fitness = spea2_fitness(&archive, cfg.spea2_k);
        let offspring = reproduce(cfg, &archive, &mut rng, |rng| {
            let a = rng.random_range(0..arch_fitness.len());
            let b = rng.random_range(0..arch_fitness.len());
            if arch_fitness[a] <= arch_fitness[b] {
                a
            } else {
                b
            }
        });
        pop = offspring
            .into_iter()
            .map(|genome| {
                let objectives = eval.evaluate(&genome);
                Member { genome, objectives }
            })
            .collect();
        stall = if eval.novel_evaluations() == before {
            stall + 1
        } else {
            0
        };
    }
    // final answer is the archive's non-dominated subset
    let mut out = ParetoArchive::new();
    for m in &archive {
        out.insert(crate::evo::ArchiveEntry {
            genome: m.genome.clone(),
            objectives: m.objectives,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::CountingEvaluator;
    use super::*;
    use crate::evo::{Genome, ObjectiveVector};
    use crate::optim::Algorithm;

    fn member(bits: &str, j1: f64, j2: f64) -> Member {
        Member {
            genome: Genome::from_bit_string(bits).unwrap(),
            objectives: ObjectiveVector {
                xi: 0,
                nmse: 0.0,
                penalty: 0.0,
                j1,
                j2,
            },
        }
    }

    #[test]
    fn fitness_sole_nondominated_point() {
        let union = vec![
            member("10000", 0.0, 0.0),
            member("01000", 1.0, 1.0),
            member("00100", 2.0, 1.0),
            member("00010", 1.0, 2.0),
            member("00001", 3.0, 3.0),
        ];
        let f = spea2_fitness(&union, 2);
        assert!(f[0] < 1.0, "non-dominated member must have F < 1");
        assert!(f[1] >= 1.0 && f[4] >= 1.0);
    }

    #[test]
    fn fitness_raw_value_hand_computed() {
        // a and b are non-dominated and each dominates only c:
        // S(a) = S(b) = 1, so R(c) = 2.
        let union = vec![
            member("100", 0.0, 2.0),
            member("010", 2.0, 0.0),
            member("001", 3.0, 3.0),
        ];
        let f = spea2_fitness(&union, 1);
        let raw_c = f[2] - f[2].fract(); // density < 1, raw is the integer part
        assert_eq!(raw_c, 2.0);
        assert!(f[0] < 1.0 && f[1] < 1.0);
    }

    #[test]
    fn fitness_identical_objectives_all_nondominated() {
        let union = vec![
            member("100", 1.0, 1.0),
            member("010", 1.0, 1.0),
            member("001", 1.0, 1.0),
        ];
        let f = spea2_fitness(&union, 1);
        assert!(f.iter().all(|&v| v < 1.0), "no strict dominance, all R = 0");
    }

    #[test]
    fn truncation_removes_an_interior_point() {
        // 4 collinear evenly spaced non-dominated points, capacity 3: the
        // nearest-neighbor rule must evict an interior point.
        let union = vec![
            member("1000", 0.0, 3.0),
            member("0100", 1.0, 2.0),
            member("0010", 2.0, 1.0),
            member("0001", 3.0, 0.0),
        ];
        let fitness = spea2_fitness(&union, 1);
        let kept = environmental_selection(union, &fitness, 3);
        assert_eq!(kept.len(), 3);
        let kept_bits: Vec<String> = kept.iter().map(|m| m.genome.to_bit_string()).collect();
        assert!(kept_bits.contains(&"1000".to_string()));
        assert!(kept_bits.contains(&"0001".to_string()));
    }

    #[test]
    fn underfull_archive_pads_with_best_dominated() {
        let union = vec![
            member("100", 0.0, 0.0),
            member("010", 1.0, 1.0),
            member("001", 2.0, 2.0),
        ];
        let fitness = spea2_fitness(&union, 1);
        let kept = environmental_selection(union, &fitness, 2);
        assert_eq!(kept.len(), 2);
        // the single non-dominated member is always kept
        assert!(kept.iter().any(|m| m.genome.to_bit_string() == "100"));
    }

    #[test]
    fn fe_budget_and_determinism() {
        let cfg = RunConfig {
            ps: 20,
            fe_budget: 500,
            seed: 7,
            ..RunConfig::defaults_for(Algorithm::Spea2)
        };
        let mut e1 = CountingEvaluator::new(24, false);
        let a = run_spea2_with(&cfg, &mut e1, None).unwrap();
        let novel = e1.novel_evaluations();
        assert!(novel >= cfg.fe_budget && novel < cfg.fe_budget + cfg.ps);
        let b = run_spea2_with(&cfg, &mut CountingEvaluator::new(24, false), None).unwrap();
        assert_eq!(a.sorted_entries(), b.sorted_entries());
    }

    #[test]
    fn degenerate_objective_collapses_to_min_cardinality() {
        let cfg = RunConfig {
            ps: 20,
            fe_budget: 600,
            seed: 3,
            ..RunConfig::defaults_for(Algorithm::Spea2)
        };
        let mut eval = CountingEvaluator::new(24, true);
        let arch = run_spea2_with(&cfg, &mut eval, None).unwrap();
        assert!(arch.entries().iter().all(|e| e.objectives.xi == 1));
    }

    #[test]
    fn elitism_never_regresses_by_coverage() {
        use crate::metrics::{coverage, FrontSnapshot};
        let cfg = RunConfig {
            ps: 16,
            fe_budget: 400,
            seed: 11,
            ..RunConfig::defaults_for(Algorithm::Spea2)
        };
        let mut eval = CountingEvaluator::new(16, false);
        let mut snapshots: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut best: Vec<(f64, f64)> = Vec::new();
        {
            let mut obs = |view: &crate::optim::GenerationView<'_>| {
                let front: Vec<(f64, f64)> = view
                    .front
                    .iter()
                    .map(|m| (m.objectives.j1, m.objectives.j2))
                    .collect();
                snapshots.push(front.clone());
                let mut pool = best.clone();
                pool.extend(front);
                best = pool
                    .iter()
                    .cloned()
                    .filter(|p| !pool.iter().any(|q| q != p && crate::evo::dominates_pair(*q, *p)))
                    .collect();
            };
            run_spea2_with(&cfg, &mut eval, Some(&mut obs)).unwrap();
        }
        let tracked = FrontSnapshot::new(best, "best");
        for snap in &snapshots {
            let earlier = FrontSnapshot::new(snap.clone(), "gen");
            assert_eq!(coverage(&earlier, &tracked).unwrap(), 0.0);
        }
    }
}
