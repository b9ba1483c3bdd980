//! Polynomial NARX models: term enumeration, regressor construction,
//! least-squares parameter estimation, one-step and free-run simulation,
//! and the normalized prediction error.
//!
//! A model term is a product of lagged outputs `y(k-i)` and inputs `u(k-j)`;
//! the empty product is the constant term. The candidate term dictionary for
//! given lag bounds and polynomial degree is the model set, ordered
//! deterministically so that a bit index always maps to the same term.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output values whose magnitude exceeds this bound flag a free-run
/// simulation as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// NMSE reported for divergent or otherwise unusable predictions.
pub const NMSE_SENTINEL: f64 = 1e6;

/// Which lagged signal a factor reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Output,
    Input,
}

/// One lagged-signal factor of a term, e.g. `y(k-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub signal: Signal,
    pub lag: usize,
}

impl Factor {
    pub fn output(lag: usize) -> Self {
        Factor {
            signal: Signal::Output,
            lag,
        }
    }

    pub fn input(lag: usize) -> Self {
        Factor {
            signal: Signal::Input,
            lag,
        }
    }
}

/// A product of lagged input/output factors; the empty product is the
/// constant term. Factors are kept sorted (outputs before inputs, then by
/// lag) so equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    /// The constant term `1`.
    pub fn constant() -> Self {
        Term {
            factors: Vec::new(),
        }
    }

    /// Builds a term, normalizing factor order.
    pub fn new(mut factors: Vec<Factor>) -> Self {
        factors.sort();
        Term { factors }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn max_output_lag(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| f.signal == Signal::Output)
            .map(|f| f.lag)
            .max()
            .unwrap_or(0)
    }

    pub fn max_input_lag(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| f.signal == Signal::Input)
            .map(|f| f.lag)
            .max()
            .unwrap_or(0)
    }

    /// Value of the term at time `k` given output and input histories.
    #[inline]
    pub fn eval(&self, y: &[f64], u: &[f64], k: usize) -> f64 {
        let mut v = 1.0;
        for f in &self.factors {
            v *= match f.signal {
                Signal::Output => y[k - f.lag],
                Signal::Input => u[k - f.lag],
            };
        }
        v
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let mut i = 0;
        while i < self.factors.len() {
            let fac = self.factors[i];
            let mut power = 1;
            while i + power < self.factors.len() && self.factors[i + power] == fac {
                power += 1;
            }
            let name = match fac.signal {
                Signal::Output => "y",
                Signal::Input => "u",
            };
            write!(f, "{}(k-{})", name, fac.lag)?;
            if power > 1 {
                write!(f, "^{}", power)?;
            }
            i += power;
        }
        Ok(())
    }
}

/// The ordered candidate-term dictionary for given lag bounds and degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    terms: Vec<Term>,
    pub n_u: usize,
    pub n_y: usize,
    pub n_l: usize,
}

impl ModelSet {
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest lag over all candidate terms; regressor rows for any subset
    /// start here so that error figures are comparable across subsets.
    pub fn max_lag(&self) -> usize {
        self.n_u.max(self.n_y)
    }

    /// Index of a term in the dictionary, if present.
    pub fn index_of(&self, term: &Term) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// Closed-form size of the model set: sum over degrees of the number of
/// multisets of size `i` drawn from the `n_y + n_u` lagged variables.
pub fn model_set_size(n_u: usize, n_y: usize, n_l: usize) -> usize {
    let vars = n_u + n_y;
    let mut total = 1usize; // degree-0 constant
    let mut n_i = 1usize;
    for i in 1..=n_l {
        n_i = n_i * (vars + i - 1) / i;
        total += n_i;
    }
    total
}

/// Enumerates every distinct monomial of degree <= `n_l` over the lagged
/// variables, plus the constant. Ordering is degree-major, then
/// lexicographic on the (signal, lag) factor sequence.
pub fn generate_model_set(n_u: usize, n_y: usize, n_l: usize) -> Result<ModelSet> {
    if n_l < 1 {
        return Err(Error::invalid(format!("n_l must be >= 1, got {n_l}")));
    }
    if n_u + n_y < 1 {
        return Err(Error::invalid("n_u + n_y must be >= 1"));
    }

    let mut vars: Vec<Factor> = Vec::with_capacity(n_u + n_y);
    for lag in 1..=n_y {
        vars.push(Factor::output(lag));
    }
    for lag in 1..=n_u {
        vars.push(Factor::input(lag));
    }

    let mut terms = vec![Term::constant()];
    for degree in 1..=n_l {
        let mut stack: Vec<usize> = vec![0; degree];
        // Non-decreasing index sequences of length `degree` over `vars`,
        // in lexicographic order.
        loop {
            terms.push(Term::new(stack.iter().map(|&i| vars[i]).collect()));
            // advance to next non-decreasing sequence
            let mut pos = degree;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                if stack[pos] + 1 < vars.len() {
                    let next = stack[pos] + 1;
                    for s in stack.iter_mut().skip(pos) {
                        *s = next;
                    }
                    break;
                }
                if pos == 0 {
                    stack.clear();
                    break;
                }
            }
            if stack.is_empty() {
                break;
            }
        }
    }

    debug_assert_eq!(terms.len(), model_set_size(n_u, n_y, n_l));
    Ok(ModelSet {
        terms,
        n_u,
        n_y,
        n_l,
    })
}

/// An input/output record with a fixed estimation/validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub estimation_len: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, estimation_len: usize, name: &str) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::invalid(format!(
                "input/output length mismatch: {} vs {}",
                u.len(),
                y.len()
            )));
        }
        if estimation_len == 0 || estimation_len >= y.len() {
            return Err(Error::invalid(format!(
                "estimation_len {} must lie strictly inside 0..{}",
                estimation_len,
                y.len()
            )));
        }
        Ok(Dataset {
            u,
            y,
            estimation_len,
            name: name.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validation_len(&self) -> usize {
        self.len() - self.estimation_len
    }

    /// Estimation rows, starting where all lags up to `max_lag` are defined.
    pub fn estimation_range(&self, max_lag: usize) -> Range<usize> {
        max_lag..self.estimation_len
    }

    pub fn validation_range(&self) -> Range<usize> {
        self.estimation_len..self.len()
    }
}

/// A selected structure with estimated coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedModel {
    #[serde(rename = "terms")]
    pub structure: Vec<Term>,
    pub coefficients: Vec<f64>,
}

impl EstimatedModel {
    pub fn cardinality(&self) -> usize {
        self.structure.len()
    }

    pub fn max_output_lag(&self) -> usize {
        self.structure
            .iter()
            .map(Term::max_output_lag)
            .max()
            .unwrap_or(0)
    }

    pub fn max_input_lag(&self) -> usize {
        self.structure
            .iter()
            .map(Term::max_input_lag)
            .max()
            .unwrap_or(0)
    }

    /// Model output at time `k` from the supplied histories.
    #[inline]
    pub fn predict(&self, y: &[f64], u: &[f64], k: usize) -> f64 {
        self.structure
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.eval(y, u, k))
            .sum()
    }
}

fn check_k_range(data: &Dataset, structure: &[Term], k_range: &Range<usize>) -> Result<()> {
    let need = structure
        .iter()
        .map(|t| t.max_output_lag().max(t.max_input_lag()))
        .max()
        .unwrap_or(0);
    if k_range.start < need {
        return Err(Error::invalid(format!(
            "k_range starts at {} but structure needs lags up to {}",
            k_range.start, need
        )));
    }
    if k_range.end > data.len() {
        return Err(Error::invalid(format!(
            "k_range ends at {} beyond data length {}",
            k_range.end,
            data.len()
        )));
    }
    Ok(())
}

/// Regression matrix: one row per time index in `k_range`, one column per
/// term; entry (k, i) is term i evaluated on the measured signals at k.
pub fn build_regressor(
    data: &Dataset,
    structure: &[Term],
    k_range: Range<usize>,
) -> Result<DMatrix<f64>> {
    check_k_range(data, structure, &k_range)?;
    let rows = k_range.len();
    let mut m = DMatrix::zeros(rows, structure.len());
    for (r, k) in k_range.enumerate() {
        for (c, term) in structure.iter().enumerate() {
            m[(r, c)] = term.eval(&data.y, &data.u, k);
        }
    }
    Ok(m)
}

/// Least-squares solve via SVD. Singular values below
/// `max(nrows, ncols) * eps * sigma_max` are treated as zero, so collinear
/// or all-zero columns yield a finite pseudo-solution instead of blowing up.
///
/// Columns are equilibrated to unit norm first; candidate structures mix
/// linear and cubic terms whose scales differ by orders of magnitude, and
/// the iteration is capped because the decomposition can stall on the
/// near-rank-deficient regressors the search routinely proposes. Stalled
/// decompositions fall back to a normal-equations pseudo-solve.
pub(crate) fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = x.ncols();
    let scales: Vec<f64> = (0..n)
        .map(|c| {
            let norm = x.column(c).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (c, &s) in scales.iter().enumerate() {
        xs.column_mut(c).scale_mut(1.0 / s);
    }
    let dim = x.nrows().max(n) as f64;
    let theta_scaled = match xs.clone().try_svd(true, true, 1e-13, 300) {
        Some(svd) => {
            let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let tol = dim * f64::EPSILON * sigma_max;
            svd.solve(y, tol)
                .map_err(|e| Error::degenerate(format!("SVD solve failed: {e}")))?
        }
        None => {
            // normal-equations pseudo-solve through the (always
            // convergent) symmetric eigendecomposition
            let xtx = xs.transpose() * &xs;
            let xty = xs.transpose() * y;
            let eig = xtx.symmetric_eigen();
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let tol = dim * f64::EPSILON * lmax;
            let mut theta = DVector::zeros(n);
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                if l > tol {
                    let v = eig.eigenvectors.column(i);
                    theta += &v * (v.dot(&xty) / l);
                }
            }
            theta
        }
    };
    Ok(DVector::from_iterator(
        n,
        theta_scaled.iter().zip(&scales).map(|(t, s)| t / s),
    ))
}

/// Estimates coefficients for `structure` by least squares over the
/// estimation partition.
pub fn estimate_parameters(data: &Dataset, structure: &[Term]) -> Result<EstimatedModel> {
    estimate_parameters_over(data, structure, None)
}

/// As [`estimate_parameters`], but with an explicit first regressor row,
/// letting every subset of one model set share the same rows.
pub fn estimate_parameters_over(
    data: &Dataset,
    structure: &[Term],
    row_start: Option<usize>,
) -> Result<EstimatedModel> {
    if structure.is_empty() {
        return Err(Error::invalid("cannot estimate an empty structure"));
    }
    let need = structure
        .iter()
        .map(|t| t.max_output_lag().max(t.max_input_lag()))
        .max()
        .unwrap_or(0);
    let start = row_start.unwrap_or(need).max(need);
    let k_range = start..data.estimation_len;
    if k_range.len() < structure.len() {
        return Err(Error::invalid(format!(
            "{} estimation rows for {} terms",
            k_range.len(),
            structure.len()
        )));
    }
    let x = build_regressor(data, structure, k_range.clone())?;
    let t = DVector::from_iterator(k_range.len(), data.y[k_range].iter().cloned());
    let theta = lstsq(&x, &t)?;
    if theta.iter().any(|c| !c.is_finite()) {
        return Err(Error::degenerate("non-finite coefficients"));
    }
    Ok(EstimatedModel {
        structure: structure.to_vec(),
        coefficients: theta.iter().cloned().collect(),
    })
}

/// One-step-ahead prediction: every lag reads the measured signals.
pub fn simulate_one_step(
    model: &EstimatedModel,
    data: &Dataset,
    k_range: Range<usize>,
) -> Result<Vec<f64>> {
    check_k_range(data, &model.structure, &k_range)?;
    Ok(k_range
        .map(|k| model.predict(&data.y, &data.u, k))
        .collect())
}

/// Free-run (model-predicted) output over `k_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeRun {
    /// Predicted output, aligned with `k_range`; truncated if divergent.
    pub y_hat: Vec<f64>,
    pub divergent: bool,
}

/// Simulates the model feeding its own predictions back into the output
/// lags. The first `max_output_lag` samples of the range are primed from
/// the measured output; inputs are always measured. Exceeding
/// [`DIVERGENCE_BOUND`] (or going non-finite) stops the run and flags it.
pub fn simulate_free_run(
    model: &EstimatedModel,
    data: &Dataset,
    k_range: Range<usize>,
) -> Result<FreeRun> {
    check_k_range(data, &model.structure, &k_range)?;
    let start = k_range.start;
    let prime = model.max_output_lag();
    let mut y_sim = data.y.clone();
    let mut y_hat = Vec::with_capacity(k_range.len());
    for k in k_range {
        let v = if k < start + prime {
            data.y[k]
        } else {
            model.predict(&y_sim, &data.u, k)
        };
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Ok(FreeRun {
                y_hat,
                divergent: true,
            });
        }
        y_sim[k] = v;
        y_hat.push(v);
    }
    Ok(FreeRun {
        y_hat,
        divergent: false,
    })
}

/// Normalized mean squared error, in percent:
/// `100 * sqrt( sum (y - y_hat)^2 / sum (y - mean(y))^2 )`.
/// Non-finite predictions map to [`NMSE_SENTINEL`].
pub fn nmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    if y_hat.iter().any(|v| !v.is_finite()) {
        return Ok(NMSE_SENTINEL);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::degenerate("constant output signal"));
    }
    let num: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(100.0 * (num / denom).sqrt())
}

/// NMSE of a free run against the measured output on the same range;
/// divergent runs score [`NMSE_SENTINEL`].
pub fn free_run_nmse(y: &[f64], run: &FreeRun) -> Result<f64> {
    if run.divergent {
        return Ok(NMSE_SENTINEL);
    }
    nmse(y, &run.y_hat)
}
