//! Acceptance suite: one test per release criterion, each printing a
//! summary line. Tolerances are fixed here, not tuned at runtime.
//!
//! The stochastic searches run at the published defaults with fixed seeds,
//! so every figure below is reproducible bit for bit.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use narxsel::datagen::{builtin_system, simulate_discrete};
use narxsel::evo::{
    dominates, penalized_objectives, ArchiveEntry, Genome, GoalPoint, ObjectiveVector,
    ParetoArchive,
};
use narxsel::frf::{default_grid, duffing_knee_model, linear_frf, resonance_from_poles};
use narxsel::mcdm::{mmd_rank, preference_weights, PreferenceSpec};
use narxsel::metrics::{coverage, hypervolume, FrontSnapshot, ReferencePoint};
use narxsel::narx::{estimate_parameters_over, generate_model_set, model_set_size};
use narxsel::optim::{non_dominated_sort, run_nsga2, Algorithm, RunConfig};
use narxsel::outcomes::{classify_outcome, refine_structure, OutcomeLabel};
use narxsel::pipeline::{cmd_search, cmd_sweep, derive_seed};
use narxsel::stats::{friedman, hommel_posthoc, published_hv_table, wilcoxon_signed_rank};

/// Master seed for every stochastic acceptance experiment. The derived
/// data streams give bounded trajectories for all six benchmark systems
/// (some realizations drive the cubic-feedback system unstable; datagen
/// rejects those with an error).
const MASTER_SEED: u64 = 2;

fn obj(j1: f64, j2: f64) -> ObjectiveVector {
    ObjectiveVector {
        xi: j1.max(0.0) as usize,
        nmse: j2,
        penalty: 0.0,
        j1,
        j2,
    }
}

#[test]
fn c01_term_count_identities() {
    let start = Instant::now();
    let ms165 = generate_model_set(4, 4, 3).unwrap();
    let ms286 = generate_model_set(5, 5, 3).unwrap();
    assert_eq!(ms165.len(), 165);
    assert_eq!(ms286.len(), 286);
    assert_eq!(model_set_size(4, 4, 3), 165);
    assert_eq!(model_set_size(5, 5, 3), 286);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 PASS: term counts 165 and 286 exact in {elapsed:?}");
}

#[test]
fn c02_preference_weights() {
    let spec = PreferenceSpec::new(vec![1, 2], 5.0).unwrap();
    let wv = preference_weights(&spec, 2).unwrap();
    assert!((wv.raw[0] - 2.2361).abs() <= 1e-3, "raw w1 {}", wv.raw[0]);
    assert!((wv.raw[1] - 0.4472).abs() <= 1e-3, "raw w2 {}", wv.raw[1]);
    assert!((wv.w[0] - 0.83).abs() <= 0.005, "w1 {}", wv.w[0]);
    assert!((wv.w[1] - 0.17).abs() <= 0.005, "w2 {}", wv.w[1]);
    println!(
        "criterion 2 PASS: weights [{:.4}, {:.4}] from raw [{:.4}, {:.4}]",
        wv.w[0], wv.w[1], wv.raw[0], wv.raw[1]
    );
}

#[test]
fn c03_penalty_function_exact() {
    let goal = GoalPoint::new(20, 30.0).unwrap();
    let a = penalized_objectives(5, 10.0, &goal);
    assert_eq!((a.penalty, a.j1, a.j2), (0.0, 5.0, 10.0));
    let b = penalized_objectives(25, 10.0, &goal);
    assert_eq!((b.penalty, b.j1, b.j2), (50.0, 75.0, 60.0));
    let c = penalized_objectives(25, 40.0, &goal);
    assert_eq!((c.penalty, c.j1, c.j2), (150.0, 175.0, 190.0));
    println!("criterion 3 PASS: penalized criteria (5,10)->(5,10), (25,10)->(75,60), (25,40)->(175,190)");
}

#[test]
fn c04_friedman_on_published_hv_table() {
    let start = Instant::now();
    let report = friedman(&published_hv_table()).unwrap();
    let ranks = report.mean_ranks.clone().unwrap();
    for (got, want) in ranks.iter().zip([1.2, 2.1, 2.7]) {
        assert!((got - want).abs() <= 0.25, "mean rank {got} vs {want}");
    }
    assert!(
        (6.5..=11.0).contains(&report.statistic),
        "statistic {}",
        report.statistic
    );
    assert!(report.p_value < 0.05, "p {}", report.p_value);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 4 PASS: mean ranks [{:.2}, {:.2}, {:.2}], chi2 {:.3}, p {:.4}",
        ranks[0], ranks[1], ranks[2], report.statistic, report.p_value
    );
}

#[test]
fn c05_hommel_posthoc_published_ranks() {
    let report = hommel_posthoc(&[1.2, 2.1, 2.7], 9, 0).unwrap();
    let cmp = report.comparisons.clone().unwrap();
    assert_eq!(cmp.len(), 2);
    assert!((cmp[0].z - 1.88).abs() <= 0.15, "z1 {}", cmp[0].z);
    assert!((cmp[1].z - 3.06).abs() <= 0.15, "z2 {}", cmp[1].z);
    assert!(
        (cmp[0].p_value - 0.0593).abs() <= 0.01,
        "p1 {}",
        cmp[0].p_value
    );
    assert!(
        (cmp[1].p_value - 0.0022).abs() <= 0.01,
        "p2 {}",
        cmp[1].p_value
    );
    println!(
        "criterion 5 PASS: z [{:.3}, {:.3}], p [{:.4}, {:.4}], APV [{:.4}, {:.4}]",
        cmp[0].z, cmp[1].z, cmp[0].p_value, cmp[1].p_value, cmp[0].adjusted_p, cmp[1].adjusted_p
    );
}

#[test]
fn c06_duffing_linear_frf_validation() {
    let model = duffing_knee_model();
    let fs = 500.0;
    let grid = default_grid(fs);
    let frf = linear_frf(&model, fs, &grid);
    let peak = frf.peak_frequency().unwrap();
    assert!((peak - 22.44).abs() <= 0.5, "peak {peak} Hz");
    let pole = resonance_from_poles(&model, fs).unwrap();
    assert!(
        (peak - pole).abs() <= frf.grid_step(),
        "grid argmax {peak} vs pole oracle {pole}"
    );
    println!(
        "criterion 6 PASS: |H1| peak {:.3} Hz, pole-angle oracle {:.3} Hz (grid step {:.3} Hz)",
        peak,
        pole,
        frf.grid_step()
    );
}

#[test]
fn c07_scaled_identification_experiment() {
    let ms = generate_model_set(4, 4, 3).unwrap();
    let goal = GoalPoint::default();
    let mut summary = Vec::new();
    for sys in ["s1", "s2", "s3", "s4", "s5", "s6"] {
        let start = Instant::now();
        let data_seed = derive_seed(MASTER_SEED, &format!("data:{sys}"), 0, 0);
        let spec = builtin_system(sys).unwrap().with_seed(data_seed);
        let data = simulate_discrete(&spec).unwrap();
        let truth = spec.true_terms();
        let mut wins = 0;
        for run in 0..10u64 {
            let cfg = RunConfig {
                seed: derive_seed(MASTER_SEED, sys, 0, run),
                ..RunConfig::defaults_for(Algorithm::Nsga2)
            };
            let archive = run_nsga2(&cfg, &ms, &data, &goal).unwrap();
            let ranked = mmd_rank(&archive.sorted_entries()).unwrap();
            let top = &ranked.entries[0].entry;
            let structure = narxsel::evo::decode(&top.genome, &ms).unwrap();
            let model = estimate_parameters_over(&data, &structure, Some(ms.max_lag())).unwrap();
            let refined = refine_structure(&model, &data, 0.05).unwrap();
            if classify_outcome(&refined.model.structure, &truth) == OutcomeLabel::ExactFitting {
                wins += 1;
            }
        }
        let elapsed = start.elapsed();
        assert!(
            elapsed.as_secs_f64() < 900.0,
            "{sys}: runtime {elapsed:?} exceeds 15 min"
        );
        summary.push(format!("{sys} {wins}/10 ({elapsed:.0?})"));
        assert!(
            wins >= 8,
            "{sys}: MMD-top refined to the true structure in only {wins}/10 seeds"
        );
    }
    println!("criterion 7 PASS: {}", summary.join(", "));
}

#[test]
fn c08_oracle_equivalences() {
    let mut rng = ChaCha12Rng::seed_from_u64(MASTER_SEED);

    // (a) 2-D hypervolume vs rasterized-area oracle
    let r = ReferencePoint(1.1, 1.1);
    let mut max_gap = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..50);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let exact = hypervolume(&FrontSnapshot::new(pts.clone(), "a"), r);
        let raster = raster_hypervolume(&pts, r, 2000);
        max_gap = max_gap.max((exact - raster).abs());
        assert!(
            (exact - raster).abs() < 1e-3,
            "sweep {exact} vs raster {raster}"
        );
    }

    // (b) non-dominated sort vs iterated brute-force filter
    for _ in 0..100 {
        let objs: Vec<ObjectiveVector> = (0..40)
            .map(|_| {
                obj(
                    rng.random_range(0..10) as f64,
                    rng.random_range(0..10) as f64,
                )
            })
            .collect();
        let mut got = non_dominated_sort(&objs);
        let mut want = brute_force_fronts(&objs);
        for f in got.iter_mut().chain(want.iter_mut()) {
            f.sort_unstable();
        }
        assert_eq!(got, want);
    }

    // (c) coverage vs double-loop oracle
    for _ in 0..100 {
        let gen = |rng: &mut ChaCha12Rng| -> Vec<(f64, f64)> {
            (0..15)
                .map(|_| {
                    (
                        rng.random_range(0..8) as f64 / 2.0,
                        rng.random_range(0..8) as f64 / 2.0,
                    )
                })
                .collect()
        };
        let a = gen(&mut rng);
        let b = gen(&mut rng);
        let mut covered = 0;
        for p in &b {
            if a
                .iter()
                .any(|q| q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1))
            {
                covered += 1;
            }
        }
        let want = covered as f64 / b.len() as f64;
        let got = coverage(
            &FrontSnapshot::new(a, "a"),
            &FrontSnapshot::new(b, "b"),
        )
        .unwrap();
        assert_eq!(got, want);
    }

    // (d) archive insertion stream vs pairwise filter
    for _ in 0..100 {
        let mut archive = ParetoArchive::new();
        let mut stream: Vec<ArchiveEntry> = Vec::new();
        for i in 0..60u32 {
            let mut bits = vec![false; 34];
            for (j, bit) in bits.iter_mut().enumerate().take(32) {
                *bit = (i >> (j % 6)) & 1 == 1;
            }
            bits[32] = rng.random();
            bits[33] = true;
            let genome = Genome::new(bits);
            if stream.iter().any(|e| e.genome == genome) {
                continue;
            }
            let entry = ArchiveEntry {
                genome,
                objectives: obj(
                    rng.random_range(0..8) as f64,
                    rng.random_range(0..8) as f64,
                ),
            };
            stream.push(entry.clone());
            archive.insert(entry);
        }
        let mut want: Vec<String> = stream
            .iter()
            .filter(|e| {
                !stream
                    .iter()
                    .any(|f| dominates(&f.objectives, &e.objectives))
            })
            .map(|e| e.genome.to_bit_string())
            .collect();
        let mut got: Vec<String> = archive
            .entries()
            .iter()
            .map(|e| e.genome.to_bit_string())
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    println!("criterion 8 PASS: hypervolume/raster max gap {max_gap:.2e}; sort, coverage and archive oracles exact over 100 instances each");
}

#[test]
fn c09_byte_identical_determinism() {
    let experiment = narxsel::config::parse_config(
        r#"
[experiment]
system = "s6"
samples = 400
n_u = 2
n_y = 2
n_l = 2
xi_lim = 10
nmse_lim = 30.0
runs = 2

[experiment.run]
ps = 10
fe_budget = 300

[experiment.mcdm]
method = "both"
objective_ranks = [1, 2]
intensity = 5.0
"#,
    )
    .unwrap()
    .experiment
    .unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    cmd_search(&experiment, MASTER_SEED, d1.path()).unwrap();
    cmd_search(&experiment, MASTER_SEED, d2.path()).unwrap();
    let mut checked = 0;
    for entry in std::fs::read_dir(d1.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(d1.path().join(&name)).unwrap();
        let b = std::fs::read(d2.path().join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between identical search commands");
        checked += 1;
    }
    assert!(checked >= 5);

    let sweep = narxsel::config::parse_config(
        r#"
[sweep]
systems = ["s6"]
runs = 2
algorithm = "nsga2"
crossover = "uniform"
n_u = 2
n_y = 2
n_l = 2
xi_lim = 10
nmse_lim = 30.0
samples = 400
p_c = [0.5, 0.9]
p_m = [0.005]
ps = 10
fe_budget = 200
"#,
    )
    .unwrap()
    .sweep
    .unwrap();
    let s1 = tempfile::tempdir().unwrap();
    let s2 = tempfile::tempdir().unwrap();
    cmd_sweep(&sweep, MASTER_SEED, s1.path()).unwrap();
    cmd_sweep(&sweep, MASTER_SEED, s2.path()).unwrap();
    for name in ["sweep.csv", "metrics.csv", "sweep.json"] {
        let a = std::fs::read(s1.path().join(name)).unwrap();
        let b = std::fs::read(s2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical sweep commands");
        checked += 1;
    }
    println!("criterion 9 PASS: {checked} artifacts byte-identical across repeated search and sweep commands");
}

#[test]
fn c10_crossover_comparison_harness() {
    // Miniature robustness analysis: 2x2 grid, 2 systems, R = 5, run once
    // per crossover kind; per-(system, cell) hypervolume ratios feed the
    // one-sided Wilcoxon test. Direction is not asserted at this scale.
    let base = r#"
[sweep]
systems = ["s3", "s6"]
runs = 5
algorithm = "nsga2"
crossover = "CROSSOVER"
n_u = 4
n_y = 4
n_l = 3
xi_lim = 20
nmse_lim = 30.0
p_c = [0.4, 0.9]
p_m = [0.004, 0.012]
ps = 20
fe_budget = 2000
"#;
    let run = |kind: &str| {
        let cfg = narxsel::config::parse_config(&base.replace("CROSSOVER", kind))
            .unwrap()
            .sweep
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_sweep(&cfg, MASTER_SEED, dir.path()).unwrap()
    };
    let single = run("single_point");
    let uniform = run("uniform");

    let mut x = Vec::new(); // uniform
    let mut y = Vec::new(); // single point
    for sys in &single.systems {
        for c in 0..single.cells.len() {
            x.push(uniform.hvr(sys, c).unwrap());
            y.push(single.hvr(sys, c).unwrap());
        }
    }
    assert_eq!(x.len(), 8);
    let report =
        wilcoxon_signed_rank(&x, &y, narxsel::stats::Alternative::Greater).unwrap();
    assert_eq!(report.test, "wilcoxon");
    assert!((0.0..=1.0).contains(&report.p_value));
    assert!(report.statistic >= 0.0);
    println!(
        "criterion 10 PASS: mini robustness sweep end-to-end; one-sided Wilcoxon W+ {:.1}, p {:.4} over {} (system, cell) pairs",
        report.statistic,
        report.p_value,
        x.len()
    );
}

#[test]
fn c11_friedman_null_calibration() {
    let mut rng = ChaCha12Rng::seed_from_u64(MASTER_SEED);
    let normal = rand_distr::StandardNormal;
    let trials = 1000;
    let mut rejections = 0;
    for _ in 0..trials {
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..3).map(|_| rng.sample::<f64, _>(normal)).collect())
            .collect();
        let report = friedman(&narxsel::stats::BlockedSamples::new(rows).unwrap()).unwrap();
        if report.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    assert!(
        (0.03..=0.07).contains(&rate),
        "false-positive rate {rate} outside 5% +/- 2%"
    );
    println!("criterion 11 PASS: Friedman null rejection rate {:.1}% over {trials} trials", rate * 100.0);
}

/// Column-raster oracle: counts grid-cell centers inside the dominated
/// region, independent of the sweep accumulation.
fn raster_hypervolume(points: &[(f64, f64)], r: ReferencePoint, cells: usize) -> f64 {
    let x0 = points.iter().map(|p| p.0).fold(r.0, f64::min);
    let y0 = points.iter().map(|p| p.1).fold(r.1, f64::min);
    let (width, height) = (r.0 - x0, r.1 - y0);
    if width <= 0.0 || height <= 0.0 {
        return 0.0;
    }
    let dx = width / cells as f64;
    let dy = height / cells as f64;
    let mut inside = 0usize;
    for i in 0..cells {
        let cx = x0 + (i as f64 + 0.5) * dx;
        let env = points
            .iter()
            .filter(|p| p.0 <= cx)
            .map(|p| p.1)
            .fold(f64::INFINITY, f64::min);
        if env.is_infinite() {
            continue;
        }
        for j in 0..cells {
            let cy = y0 + (j as f64 + 0.5) * dy;
            if cy >= env && cy <= r.1 {
                inside += 1;
            }
        }
    }
    inside as f64 * dx * dy
}

/// Iterated brute-force filter used as the sorting oracle.
fn brute_force_fronts(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .cloned()
            .filter(|&i| {
                !remaining
                    .iter()
                    .any(|&j| j != i && dominates(&objs[j], &objs[i]))
            })
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}
