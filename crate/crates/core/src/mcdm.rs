//! A-posteriori decision making over a non-dominated front:
//! preference-ordering weights, knee-point ranking by normalized Manhattan
//! distance to the ideal point (MMD), and pairwise-tournament ranking under
//! preference weights (MTD).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::{dominates, ArchiveEntry};

/// Decision-maker preferences: a rank per objective (1 = most important)
/// and an intensity on the 1..9 scale (1 = indifferent, 9 = extreme).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSpec {
    pub objective_ranks: Vec<usize>,
    pub intensity: f64,
}

impl PreferenceSpec {
    pub fn new(objective_ranks: Vec<usize>, intensity: f64) -> Result<Self> {
        if !(1.0..=9.0).contains(&intensity) {
            return Err(Error::invalid(format!(
                "preference intensity must be in [1, 9], got {intensity}"
            )));
        }
        let m = objective_ranks.len();
        let mut seen = vec![false; m + 1];
        for &r in &objective_ranks {
            if r < 1 || r > m || seen[r] {
                return Err(Error::invalid(format!(
                    "objective_ranks must be a permutation of 1..={m}"
                )));
            }
            seen[r] = true;
        }
        Ok(PreferenceSpec {
            objective_ranks,
            intensity,
        })
    }
}

/// Normalized priority weights plus the unnormalized geometric means they
/// came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub raw: Vec<f64>,
}

/// Multiplicative preference relations `a[i][j] = I^((O_j - O_i)/(m-1))`
/// aggregated into weights `w_i = (prod_j a[i][j])^(1/m)` and normalized to
/// sum 1.
pub fn preference_weights(spec: &PreferenceSpec, m: usize) -> Result<WeightVector> {
    if m < 2 {
        return Err(Error::invalid("need at least two objectives"));
    }
    if spec.objective_ranks.len() != m {
        return Err(Error::invalid(format!(
            "expected {m} objective ranks, got {}",
            spec.objective_ranks.len()
        )));
    }
    if !(1.0..=9.0).contains(&spec.intensity) {
        return Err(Error::invalid("preference intensity must be in [1, 9]"));
    }
    let o = &spec.objective_ranks;
    let raw: Vec<f64> = (0..m)
        .map(|i| {
            let product: f64 = (0..m)
                .map(|j| {
                    let delta = (o[j] as f64 - o[i] as f64) / (m as f64 - 1.0);
                    spec.intensity.powf(delta)
                })
                .product();
            product.powf(1.0 / m as f64)
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(WeightVector {
        w: raw.iter().map(|v| v / sum).collect(),
        raw,
    })
}

/// One ranked structure.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub entry: ArchiveEntry,
    pub score: f64,
}

/// A front sorted by an MCDM score (ascending for MMD, descending for MTD).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFront {
    pub entries: Vec<RankedEntry>,
    /// `"mmd_d"` or `"mtd_r"`, the score column name in CSV output.
    pub score_name: &'static str,
}

impl RankedFront {
    pub fn top(&self, n: usize) -> &[RankedEntry] {
        &self.entries[..n.min(self.entries.len())]
    }
}

/// Drops dominated entries so rankers never crown a dominated point even
/// when handed a raw pool.
fn non_dominated_filter(front: &[ArchiveEntry]) -> Vec<ArchiveEntry> {
    front
        .iter()
        .filter(|e| {
            !front
                .iter()
                .any(|o| dominates(&o.objectives, &e.objectives))
        })
        .cloned()
        .collect()
}

/// Parsimony-first tie-break: smaller cardinality, then smaller error,
/// then genome bits.
fn tie_break(a: &ArchiveEntry, b: &ArchiveEntry) -> std::cmp::Ordering {
    a.objectives
        .xi
        .cmp(&b.objectives.xi)
        .then(a.objectives.nmse.total_cmp(&b.objectives.nmse))
        .then(a.genome.cmp(&b.genome))
}

/// Ranks by normalized Manhattan distance to the per-objective ideal point,
/// ascending; a degenerate objective (max = min) contributes nothing.
pub fn mmd_rank(front: &[ArchiveEntry]) -> Result<RankedFront> {
    if front.is_empty() {
        return Err(Error::invalid("cannot rank an empty front"));
    }
    let front = non_dominated_filter(front);
    let j1: Vec<f64> = front.iter().map(|e| e.objectives.j1).collect();
    let j2: Vec<f64> = front.iter().map(|e| e.objectives.j2).collect();
    let bound = |v: &[f64]| {
        (
            v.iter().cloned().fold(f64::INFINITY, f64::min),
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (min1, max1) = bound(&j1);
    let (min2, max2) = bound(&j2);
    let axis = |v: f64, lo: f64, hi: f64| {
        if hi > lo {
            (v - lo).abs() / (hi - lo)
        } else {
            0.0
        }
    };
    let mut entries: Vec<RankedEntry> = front
        .into_iter()
        .map(|entry| {
            let score = axis(entry.objectives.j1, min1, max1) + axis(entry.objectives.j2, min2, max2);
            RankedEntry { entry, score }
        })
        .collect();
    entries.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| tie_break(&a.entry, &b.entry))
    });
    Ok(RankedFront {
        entries,
        score_name: "mmd_d",
    })
}

/// Ranks by the weighted geometric mean of per-objective tournament wins,
/// descending. `T_p(i)` is the fraction of other entries with a strictly
/// worse value of objective p.
pub fn mtd_rank(front: &[ArchiveEntry], weights: &WeightVector) -> Result<RankedFront> {
    if front.len() < 2 {
        return Err(Error::invalid(
            "tournament ranking needs at least two structures",
        ));
    }
    if weights.w.len() != 2 {
        return Err(Error::invalid("expected one weight per objective"));
    }
    let front = non_dominated_filter(front);
    if front.len() < 2 {
        return Err(Error::invalid(
            "tournament ranking needs at least two non-dominated structures",
        ));
    }
    let n = front.len();
    let m = 2.0;
    let mut entries: Vec<RankedEntry> = front
        .iter()
        .map(|entry| {
            let mut wins = [0usize; 2];
            for other in &front {
                if std::ptr::eq(other, entry) {
                    continue;
                }
                if other.objectives.j1 > entry.objectives.j1 {
                    wins[0] += 1;
                }
                if other.objectives.j2 > entry.objectives.j2 {
                    wins[1] += 1;
                }
            }
            let t1 = wins[0] as f64 / (n as f64 - 1.0);
            let t2 = wins[1] as f64 / (n as f64 - 1.0);
            let score = (t1.powf(weights.w[0]) * t2.powf(weights.w[1])).powf(1.0 / m);
            RankedEntry {
                entry: entry.clone(),
                score,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| tie_break(&a.entry, &b.entry))
    });
    Ok(RankedFront {
        entries,
        score_name: "mtd_r",
    })
}
