//! Nonparametric comparison suite: Friedman two-way analysis of variance by
//! ranks (chi-square form with tie correction), Hommel-adjusted post-hoc
//! comparisons against a control, and the Wilcoxon matched-pairs
//! signed-ranks test under a normal approximation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Measurements blocked by problem: rows are blocks (systems), columns are
/// treatments (algorithms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockedSamples {
    rows: Vec<Vec<f64>>,
}

impl BlockedSamples {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::invalid("need at least 2 blocks"));
        }
        let k = rows[0].len();
        if k < 2 {
            return Err(Error::invalid("need at least 2 treatments"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(format!(
                    "block {i} has {} treatments, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("block {i} has non-finite values")));
            }
        }
        Ok(BlockedSamples { rows })
    }

    pub fn blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn treatments(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// One post-hoc comparison against the control treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub treatment: usize,
    pub z: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub reject: bool,
}

/// Outcome of any test in this module; `reject` flags are at the 0.05
/// level. Post-hoc reports carry one [`Comparison`] per non-control
/// treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub mean_ranks: Option<Vec<f64>>,
    pub comparisons: Option<Vec<Comparison>>,
    pub reject: bool,
}

pub const ALPHA: f64 = 0.05;

/// Midranks of one block, with rank 1 going to the LARGEST value (the
/// convention for quality metrics where higher is better). The test
/// statistic and p-value are invariant to reversing this direction.
fn midranks_descending(row: &[f64]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman two-way analysis of variance by ranks, chi-square form with
/// midrank ties and the tie-correction divisor
/// `1 - sum(t^3 - t) / (N k (k^2 - 1))`. Rank 1 is the best (largest)
/// value in each block.
pub fn friedman(samples: &BlockedSamples) -> Result<TestReport> {
    let n = samples.blocks() as f64;
    let k = samples.treatments() as f64;
    let mut rank_sums = vec![0.0f64; samples.treatments()];
    let mut tie_sum = 0.0f64;
    for row in samples.rows() {
        let ranks = midranks_descending(row);
        for (s, r) in rank_sums.iter_mut().zip(&ranks) {
            *s += r;
        }
        // tie groups within the block
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_sum += t * t * t - t;
            i = j + 1;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / n).collect();
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let uncorrected = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
    let correction = 1.0 - tie_sum / (n * k * (k * k - 1.0));
    let statistic = if correction > 0.0 {
        uncorrected / correction
    } else {
        0.0 // every block fully tied
    };
    let statistic = statistic.max(0.0);
    let dist = ChiSquared::new(k - 1.0)
        .map_err(|e| Error::degenerate(format!("chi-square distribution: {e}")))?;
    let p_value = (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0);
    Ok(TestReport {
        test: "friedman".into(),
        statistic,
        p_value,
        mean_ranks: Some(mean_ranks),
        comparisons: None,
        reject: p_value < ALPHA,
    })
}

/// Hommel-adjusted p-values for `m` hypotheses (Wright's algorithm over the
/// ascending p-values).
pub fn hommel_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    if m <= 1 {
        return p_values.to_vec();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let p: Vec<f64> = order.iter().map(|&i| p_values[i]).collect();
    let mut adj = p.clone();
    for j in (2..=m).rev() {
        let upper: Vec<usize> = (m - j..m).collect();
        let cmin = upper
            .iter()
            .map(|&i| j as f64 * p[i] / ((j + i - m + 1) as f64))
            .fold(f64::INFINITY, f64::min);
        for &i in &upper {
            if adj[i] < cmin {
                adj[i] = cmin;
            }
        }
        for i in 0..m - j {
            let candidate = cmin.min(j as f64 * p[i]);
            if adj[i] < candidate {
                adj[i] = candidate;
            }
        }
    }
    let mut out = vec![0.0; m];
    for (sorted_pos, &orig) in order.iter().enumerate() {
        out[orig] = adj[sorted_pos].min(1.0);
    }
    out
}

/// Post-hoc comparison of every treatment against a control using the
/// Friedman mean ranks: `z = (R_i - R_control) / sqrt(k(k+1)/(6N))`,
/// two-sided normal p-values, Hommel-adjusted; reject when the adjusted
/// p-value is at most 0.05.
pub fn hommel_posthoc(mean_ranks: &[f64], n_blocks: usize, control: usize) -> Result<TestReport> {
    let k = mean_ranks.len();
    if k < 2 {
        return Err(Error::invalid("need at least 2 treatments"));
    }
    if control >= k {
        return Err(Error::invalid(format!(
            "control index {control} out of range for {k} treatments"
        )));
    }
    if n_blocks < 2 {
        return Err(Error::invalid("need at least 2 blocks"));
    }
    let se = (k as f64 * (k as f64 + 1.0) / (6.0 * n_blocks as f64)).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let others: Vec<usize> = (0..k).filter(|&i| i != control).collect();
    let zs: Vec<f64> = others
        .iter()
        .map(|&i| (mean_ranks[i] - mean_ranks[control]) / se)
        .collect();
    let ps: Vec<f64> = zs
        .iter()
        .map(|&z| (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0))
        .collect();
    let adjusted = hommel_adjust(&ps);
    let comparisons: Vec<Comparison> = others
        .iter()
        .zip(zs.iter().zip(ps.iter().zip(&adjusted)))
        .map(|(&treatment, (&z, (&p_value, &adjusted_p)))| Comparison {
            treatment,
            z,
            p_value,
            adjusted_p,
            reject: adjusted_p <= ALPHA,
        })
        .collect();
    let statistic = zs.iter().cloned().fold(0.0, |m: f64, z| m.max(z.abs()));
    let p_value = adjusted.iter().cloned().fold(1.0, f64::min);
    let reject = comparisons.iter().any(|c| c.reject);
    Ok(TestReport {
        test: "hommel".into(),
        statistic,
        p_value,
        mean_ranks: Some(mean_ranks.to_vec()),
        comparisons: Some(comparisons),
        reject,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// H1: the first sample's median difference is positive.
    Greater,
    TwoSided,
}

/// Wilcoxon matched-pairs signed-ranks test with midranks on |d|, zero
/// differences dropped, tie-corrected variance and continuity correction.
/// All-zero differences give a degenerate p = 1 report; fewer than 6
/// non-zero differences is an argument error.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestReport> {
    if x.len() != y.len() {
        return Err(Error::invalid("paired samples must have equal length"));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(TestReport {
            test: "wilcoxon".into(),
            statistic: 0.0,
            p_value: 1.0,
            mean_ranks: None,
            comparisons: None,
            reject: false,
        });
    }
    if diffs.len() < 6 {
        return Err(Error::invalid(format!(
            "need at least 6 non-zero differences, got {}",
            diffs.len()
        )));
    }
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0.0f64; n];
    let mut tie_sum = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum / 48.0;
    if variance <= 0.0 {
        return Ok(TestReport {
            test: "wilcoxon".into(),
            statistic: w_plus,
            p_value: 1.0,
            mean_ranks: None,
            comparisons: None,
            reject: false,
        });
    }
    let sd = variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // continuity correction pulls the statistic half a step toward the mean
    let p_value = match alternative {
        Alternative::Greater => 1.0 - normal.cdf((w_plus - mean - 0.5) / sd),
        Alternative::TwoSided => {
            let z = (w_plus - mean).abs() - 0.5;
            (2.0 * (1.0 - normal.cdf(z.max(0.0) / sd))).min(1.0)
        }
    }
    .clamp(0.0, 1.0);
    Ok(TestReport {
        test: "wilcoxon".into(),
        statistic: w_plus,
        p_value,
        mean_ranks: None,
        comparisons: None,
        reject: p_value < ALPHA,
    })
}

/// The published 9-system hypervolume comparison matrix (NSGA-II, SPEA-II,
/// MOEA/D columns), used by the acceptance suite and as a worked example.
pub fn published_hv_table() -> BlockedSamples {
    BlockedSamples::new(vec![
        vec![0.7310, 0.7260, 0.7269],
        vec![0.9280, 0.9279, 0.9280],
        vec![0.8768, 0.8771, 0.8760],
        vec![0.9316, 0.9315, 0.9315],
        vec![0.6388, 0.6382, 0.6354],
        vec![0.9389, 0.9389, 0.9388],
        vec![0.8745, 0.8686, 0.8634],
        vec![0.9353, 0.9353, 0.9353],
        vec![0.7609, 0.7462, 0.7353],
    ])
    .expect("static table is well-formed")
}
