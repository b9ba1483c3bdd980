//! Coefficient-significance refinement, qualitative outcome classification
//! against a known true structure, and information-criterion curves for
//! auditing the cardinality goal.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::evo::{decode, ParetoArchive};
use crate::narx::{
    build_regressor, estimate_parameters_over, simulate_one_step, Dataset, EstimatedModel,
    ModelSet, Term,
};

/// How an identified structure relates to the known true structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    /// All true terms, nothing else.
    ExactFitting,
    /// All true terms plus spurious ones.
    OverFitting,
    /// A strict subset of the true terms, no spurious ones.
    UnderFitting1,
    /// Missing true terms and carrying spurious ones.
    UnderFitting2,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 4] = [
        OutcomeLabel::ExactFitting,
        OutcomeLabel::OverFitting,
        OutcomeLabel::UnderFitting1,
        OutcomeLabel::UnderFitting2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeLabel::ExactFitting => "exact_fitting",
            OutcomeLabel::OverFitting => "over_fitting",
            OutcomeLabel::UnderFitting1 => "under_fitting_1",
            OutcomeLabel::UnderFitting2 => "under_fitting_2",
        }
    }
}

/// Exactly one label for any (structure, truth) pair, by set comparison.
pub fn classify_outcome(structure: &[Term], truth: &[Term]) -> OutcomeLabel {
    let s: BTreeSet<&Term> = structure.iter().collect();
    let t: BTreeSet<&Term> = truth.iter().collect();
    let has_all_true = t.is_subset(&s);
    let has_spurious = !s.is_subset(&t);
    match (has_all_true, has_spurious) {
        (true, false) => OutcomeLabel::ExactFitting,
        (true, true) => OutcomeLabel::OverFitting,
        (false, false) => OutcomeLabel::UnderFitting1,
        (false, true) => OutcomeLabel::UnderFitting2,
    }
}

/// A refined model; `degenerate` marks the everything-removed case.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedModel {
    pub model: EstimatedModel,
    pub degenerate: bool,
}

/// Residual variance below this fraction of the output power means the fit
/// is exact to rounding and t-ratios are 0/0 noise; refinement then drops
/// terms whose coefficients are numerically zero instead.
const EXACT_FIT_VARIANCE_RATIO: f64 = 1e-20;
const EXACT_FIT_COEFF_RATIO: f64 = 1e-8;

struct TStats {
    t: Vec<f64>,
    critical: f64,
    exact_fit: bool,
}

fn t_statistics(data: &Dataset, structure: &[Term], alpha: f64) -> Result<TStats> {
    let need = structure
        .iter()
        .map(|t| t.max_output_lag().max(t.max_input_lag()))
        .max()
        .unwrap_or(0);
    let k_range = need..data.estimation_len;
    let rows = k_range.len();
    let p = structure.len();
    if rows <= p {
        return Err(Error::invalid(format!(
            "need more estimation rows ({rows}) than terms ({p})"
        )));
    }
    let x = build_regressor(data, structure, k_range.clone())?;
    let y = nalgebra::DVector::from_iterator(rows, data.y[k_range].iter().cloned());
    let theta = crate::narx::lstsq(&x, &y)?;
    let residual = &x * &theta - &y;
    let s2 = residual.norm_squared() / (rows - p) as f64;

    let y_power = y.norm_squared() / rows as f64;
    if s2 <= EXACT_FIT_VARIANCE_RATIO * (y_power + 1.0) {
        let max_c = theta.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        // zero-coefficient terms are the removable ones; report |t| = 0 for
        // them and infinity for the rest
        let t = theta
            .iter()
            .map(|c| {
                if c.abs() <= EXACT_FIT_COEFF_RATIO * max_c {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        return Ok(TStats {
            t,
            critical: 1.0,
            exact_fit: true,
        });
    }

    // diag of (X^T X)^+ through the SVD of X
    let svd = x.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = x.nrows().max(x.ncols()) as f64 * f64::EPSILON * sigma_max;
    let v = svd.v_t.as_ref().expect("v_t requested").transpose();
    let mut diag = vec![0.0f64; p];
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let inv_s2 = 1.0 / (s * s);
            for (i, d) in diag.iter_mut().enumerate() {
                *d += v[(i, j)] * v[(i, j)] * inv_s2;
            }
        }
    }
    let dof = (rows - p) as f64;
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::degenerate(format!("t distribution: {e}")))?;
    let critical = dist.inverse_cdf(1.0 - alpha / 2.0);
    let t = theta
        .iter()
        .zip(&diag)
        .map(|(c, d)| {
            let se = (s2 * d).sqrt();
            if se == 0.0 {
                f64::INFINITY
            } else {
                (c / se).abs()
            }
        })
        .collect();
    Ok(TStats {
        t,
        critical,
        exact_fit: false,
    })
}

/// Backward elimination on coefficient t-ratios: while the smallest |t| is
/// below the two-sided critical value at `alpha`, drop that term and
/// re-estimate. Removing everything yields an empty structure flagged
/// degenerate.
pub fn refine_structure(
    model: &EstimatedModel,
    data: &Dataset,
    alpha: f64,
) -> Result<RefinedModel> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    let mut structure = model.structure.clone();
    loop {
        if structure.is_empty() {
            return Ok(RefinedModel {
                model: EstimatedModel {
                    structure,
                    coefficients: Vec::new(),
                },
                degenerate: true,
            });
        }
        let stats = t_statistics(data, &structure, alpha)?;
        let (weakest, &t_min) = stats
            .t
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty structure");
        let threshold = if stats.exact_fit { 0.5 } else { stats.critical };
        if t_min < threshold {
            structure.remove(weakest);
        } else {
            let refit = estimate_parameters_over(data, &structure, None)?;
            return Ok(RefinedModel {
                model: refit,
                degenerate: false,
            });
        }
    }
}

/// Frequencies of each outcome after refining and classifying every
/// archived structure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub exact_fitting: usize,
    pub over_fitting: usize,
    pub under_fitting_1: usize,
    pub under_fitting_2: usize,
    pub total: usize,
}

impl OutcomeCounts {
    pub fn count(&self, label: OutcomeLabel) -> usize {
        match label {
            OutcomeLabel::ExactFitting => self.exact_fitting,
            OutcomeLabel::OverFitting => self.over_fitting,
            OutcomeLabel::UnderFitting1 => self.under_fitting_1,
            OutcomeLabel::UnderFitting2 => self.under_fitting_2,
        }
    }

    fn add(&mut self, label: OutcomeLabel) {
        match label {
            OutcomeLabel::ExactFitting => self.exact_fitting += 1,
            OutcomeLabel::OverFitting => self.over_fitting += 1,
            OutcomeLabel::UnderFitting1 => self.under_fitting_1 += 1,
            OutcomeLabel::UnderFitting2 => self.under_fitting_2 += 1,
        }
        self.total += 1;
    }
}

/// Refines each archived structure, classifies it against the truth and
/// tabulates the outcome frequencies. Degenerate refinements (all terms
/// removed) classify as their own empty structure.
pub fn outcome_table(
    archive: &ParetoArchive,
    ms: &ModelSet,
    truth: &[Term],
    data: &Dataset,
    alpha: f64,
) -> Result<OutcomeCounts> {
    let mut counts = OutcomeCounts::default();
    for entry in archive.entries() {
        let structure = decode(&entry.genome, ms)?;
        let model = match estimate_parameters_over(data, &structure, Some(ms.max_lag())) {
            Ok(m) => m,
            Err(_) => {
                counts.add(classify_outcome(&structure, truth));
                continue;
            }
        };
        let refined = refine_structure(&model, data, alpha)?;
        counts.add(classify_outcome(&refined.model.structure, truth));
    }
    Ok(counts)
}

/// One audit row: structure size against the two information criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcRow {
    pub xi: usize,
    pub bic: f64,
    pub lilc: f64,
}

const RSS_FLOOR: f64 = 1e-300;

/// BIC and the law-of-iterated-logarithm criterion over the estimation
/// one-step residuals of every archived structure, sorted by cardinality.
pub fn information_criteria(
    archive: &ParetoArchive,
    ms: &ModelSet,
    data: &Dataset,
) -> Result<Vec<IcRow>> {
    let mut rows = Vec::with_capacity(archive.len());
    let k_range = ms.max_lag()..data.estimation_len;
    let n_e = k_range.len() as f64;
    for entry in archive.entries() {
        let structure = decode(&entry.genome, ms)?;
        let model = match estimate_parameters_over(data, &structure, Some(ms.max_lag())) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let y_hat = simulate_one_step(&model, data, k_range.clone())?;
        let rss: f64 = data.y[k_range.clone()]
            .iter()
            .zip(&y_hat)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .max(RSS_FLOOR);
        let xi = structure.len();
        let fit = n_e * (rss / n_e).ln();
        rows.push(IcRow {
            xi,
            bic: fit + xi as f64 * n_e.ln(),
            lilc: fit + 2.0 * xi as f64 * n_e.ln().ln(),
        });
    }
    rows.sort_by(|a, b| a.xi.cmp(&b.xi).then(a.bic.total_cmp(&b.bic)));
    Ok(rows)
}
