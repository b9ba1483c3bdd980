//! Linear frequency response of identified models: the first-order
//! harmonic-probing result (the transfer function of the model's linear
//! part) and a closed-form resonance cross-check from the pole angles.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::narx::{EstimatedModel, Signal};

/// Sampled linear frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFrf {
    pub frequencies: Vec<f64>,
    pub response: Vec<Complex64>,
    pub fs: f64,
    /// Set when the model has no linear input term, so the numerator is
    /// identically zero.
    pub degenerate: bool,
}

impl LinearFrf {
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.response.iter().map(|h| 20.0 * h.norm().log10()).collect()
    }

    /// Frequency of the largest magnitude.
    pub fn peak_frequency(&self) -> Option<f64> {
        self.response
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| self.frequencies[i])
    }

    pub fn grid_step(&self) -> f64 {
        if self.frequencies.len() < 2 {
            0.0
        } else {
            self.frequencies[1] - self.frequencies[0]
        }
    }
}

/// Linear coefficients of the model: `a[i]` on `y(k-i)`, `b[i]` on
/// `u(k-i)`, ignoring all higher-degree terms (which do not enter the
/// first-order response).
fn linear_parts(model: &EstimatedModel) -> (Vec<f64>, Vec<f64>) {
    let n_a = model.max_output_lag();
    let n_b = model.max_input_lag();
    let mut a = vec![0.0; n_a + 1];
    let mut b = vec![0.0; n_b + 1];
    for (term, &c) in model.structure.iter().zip(&model.coefficients) {
        if term.degree() != 1 {
            continue;
        }
        let f = term.factors()[0];
        match f.signal {
            Signal::Output => a[f.lag] += c,
            Signal::Input => b[f.lag] += c,
        }
    }
    (a, b)
}

/// Default analysis grid: 2048 points spanning `[0, fs/2]`.
pub fn default_grid(fs: f64) -> Vec<f64> {
    let n = 2048;
    (0..n).map(|i| i as f64 * (fs / 2.0) / (n - 1) as f64).collect()
}

/// First-order frequency response
/// `H1(f) = sum_i b_i e^{-j w i} / (1 - sum_i a_i e^{-j w i})`,
/// `w = 2 pi f / fs`, from the model's linear input and output terms.
pub fn linear_frf(model: &EstimatedModel, fs: f64, grid: &[f64]) -> LinearFrf {
    let (a, b) = linear_parts(model);
    let degenerate = b.iter().all(|&v| v == 0.0);
    let response = grid
        .iter()
        .map(|&f| {
            let w = 2.0 * std::f64::consts::PI * f / fs;
            let z = |lag: usize| Complex64::from_polar(1.0, -w * lag as f64);
            let num: Complex64 = b
                .iter()
                .enumerate()
                .map(|(lag, &c)| c * z(lag))
                .sum();
            let den: Complex64 = Complex64::new(1.0, 0.0)
                - a.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(lag, &c)| c * z(lag))
                    .sum::<Complex64>();
            num / den
        })
        .collect();
    LinearFrf {
        frequencies: grid.to_vec(),
        response,
        fs,
        degenerate,
    }
}

/// Roots of the autoregressive polynomial `z^n - a_1 z^{n-1} - ... - a_n`
/// via companion-matrix eigenvalues.
fn ar_poles(a: &[f64]) -> Vec<Complex64> {
    let n = a.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(a[1], 0.0)];
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for (i, &coef) in a.iter().enumerate().skip(1) {
        companion[(0, i - 1)] = coef;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|e| Complex64::new(e.re, e.im))
        .collect()
}

/// Resonant frequency implied by the dominant complex-conjugate pole pair
/// of the linear part: `f = angle * fs / (2 pi)`. Models whose linear part
/// has only real poles (or no output lags) have no oscillatory resonance.
pub fn resonance_from_poles(model: &EstimatedModel, fs: f64) -> Option<f64> {
    let (a, _) = linear_parts(model);
    let poles = ar_poles(&a);
    let im_tol = 1e-9;
    poles
        .iter()
        .filter(|p| p.im > im_tol)
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .map(|p| p.arg() * fs / (2.0 * std::f64::consts::PI))
}

/// The published 5-term oscillator model used for frequency-domain
/// validation checks.
pub fn duffing_knee_model() -> EstimatedModel {
    use crate::narx::{Factor, Term};
    EstimatedModel {
        structure: vec![
            Term::new(vec![Factor::output(1)]),
            Term::new(vec![Factor::output(2)]),
            Term::new(vec![Factor::input(1)]),
            Term::new(vec![Factor::input(2)]),
            Term::new(vec![Factor::output(1); 3]),
        ],
        coefficients: vec![1.9152, -0.99436, 1.983e-6, 1.9792e-6, -0.23154],
    }
}
