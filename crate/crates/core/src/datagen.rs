//! Identification data generation: benchmark discrete-time systems, the
//! continuous-time Duffing oscillator, seeded noise synthesis, and CSV I/O.
//!
//! All randomness flows through ChaCha12 streams seeded per (system, run),
//! so a spec plus seed reproduces a dataset bit for bit.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::narx::{Dataset, Factor, Term};

/// Samples discarded from the start of discrete-system simulations to wash
/// out the zero initial state.
pub const WARMUP: usize = 50;

/// A seeded white-noise source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum NoiseKind {
    /// White uniform noise on `[a, b]`.
    Wun { a: f64, b: f64 },
    /// White Gaussian noise with the given mean and *variance*.
    Wgn { mean: f64, variance: f64 },
}

impl NoiseSpec {
    pub fn wun(a: f64, b: f64, seed: u64) -> Result<Self> {
        if a >= b {
            return Err(Error::invalid(format!("WUN bounds need a < b, got [{a}, {b}]")));
        }
        Ok(NoiseSpec {
            kind: NoiseKind::Wun { a, b },
            seed,
        })
    }

    pub fn wgn(mean: f64, variance: f64, seed: u64) -> Result<Self> {
        if variance < 0.0 {
            return Err(Error::invalid(format!("WGN variance must be >= 0, got {variance}")));
        }
        Ok(NoiseSpec {
            kind: NoiseKind::Wgn { mean, variance },
            seed,
        })
    }

    /// Zero noise (used when a system is simulated without disturbance).
    pub fn silent() -> Self {
        NoiseSpec {
            kind: NoiseKind::Wgn {
                mean: 0.0,
                variance: 0.0,
            },
            seed: 0,
        }
    }

    /// Draws `n` samples from a fresh stream.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        match self.kind {
            NoiseKind::Wun { a, b } => {
                let d = Uniform::new_inclusive(a, b).expect("validated bounds");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            NoiseKind::Wgn { mean, variance } => {
                if variance == 0.0 {
                    return vec![mean; n];
                }
                let d = Normal::new(mean, variance.sqrt()).expect("validated variance");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
        }
    }
}

/// Continuous-time oscillator parameters for [`simulate_duffing`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub omega_n: f64,
    pub zeta: f64,
    pub epsilon: f64,
    /// Output sampling rate in Hz.
    pub fs: f64,
    /// RK4 sub-steps per output sample (>= 10).
    pub substeps: usize,
}

impl Default for DuffingParams {
    fn default() -> Self {
        DuffingParams {
            omega_n: 45.0 * std::f64::consts::PI,
            zeta: 0.01,
            epsilon: 3.0,
            fs: 500.0,
            substeps: 10,
        }
    }
}

/// Full description of a data source: a known discrete difference equation,
/// the Duffing oscillator, or an external file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: String,
    /// Published (term, coefficient) list for discrete systems.
    pub structure: Vec<(Term, f64)>,
    pub duffing: Option<DuffingParams>,
    pub input: NoiseSpec,
    pub noise: NoiseSpec,
    pub samples: usize,
    pub estimation_len: usize,
}

impl SystemSpec {
    pub fn true_terms(&self) -> Vec<Term> {
        self.structure.iter().map(|(t, _)| t.clone()).collect()
    }

    /// Reseeds the two noise streams, keeping them distinct.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.input.seed = seed;
        self.noise.seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        self
    }
}

fn term(factors: &[Factor]) -> Term {
    Term::new(factors.to_vec())
}

/// Output-noise scale for the benchmark systems. The source table prints
/// some noise entries as explicit squares (0.33^2, 0.01^2) and the rest as
/// plain values; treating the plain values as standard deviations is the
/// only reading under which the published near-universal exact-fitting
/// results are reproducible (taken as variances, the true structures of
/// the first two systems land outside the 30% error goal entirely).
fn wgn_sigma(sigma: f64) -> Result<NoiseSpec> {
    NoiseSpec::wgn(0.0, sigma * sigma, 0)
}

/// The published benchmark systems. `s1`..`s6` use a 165-term model set
/// (4, 4, 3); `s7` uses 286 terms (5, 5, 3); `duffing` is continuous-time.
pub fn builtin_system(id: &str) -> Result<SystemSpec> {
    let y = Factor::output;
    let u = Factor::input;
    let samples = 1000;
    let estimation_len = 700;
    let spec = |structure: Vec<(Term, f64)>, input: NoiseSpec, noise: NoiseSpec| SystemSpec {
        id: id.to_string(),
        structure,
        duffing: None,
        input,
        noise,
        samples,
        estimation_len,
    };
    match id {
        "s1" => Ok(spec(
            vec![
                (term(&[y(1), y(1), y(1)]), 0.2),
                (term(&[y(1), u(1)]), 0.7),
                (term(&[u(2), u(2)]), 0.6),
                (term(&[y(2), u(2), u(2)]), -0.7),
                (term(&[y(2)]), -0.5),
            ],
            NoiseSpec::wun(-1.0, 1.0, 0)?,
            wgn_sigma(0.004)?,
        )),
        "s2" => Ok(spec(
            vec![
                (Term::constant(), 0.5),
                (term(&[y(1)]), 0.5),
                (term(&[u(2)]), 0.8),
                (term(&[u(1), u(1)]), 1.0),
                (term(&[y(2), y(2)]), -0.05),
            ],
            NoiseSpec::wun(0.0, 1.0, 0)?,
            wgn_sigma(0.05)?,
        )),
        "s3" => Ok(spec(
            vec![
                (term(&[y(1)]), 0.8),
                (term(&[u(1)]), 0.4),
                (term(&[u(1), u(1)]), 0.4),
                (term(&[u(1), u(1), u(1)]), 0.4),
            ],
            NoiseSpec::wgn(0.0, 1.0, 0)?,
            NoiseSpec::wgn(0.0, 0.33 * 0.33, 0)?,
        )),
        "s4" => Ok(spec(
            vec![
                (term(&[y(1)]), 0.1586),
                (term(&[u(1)]), 0.6777),
                (term(&[y(2), y(2)]), 0.3037),
                (term(&[y(2), u(1), u(1)]), -0.2566),
                (term(&[u(3), u(3), u(3)]), -0.0339),
            ],
            NoiseSpec::wun(0.0, 1.0, 0)?,
            wgn_sigma(0.002)?,
        )),
        "s5" => Ok(spec(
            vec![
                (term(&[y(1), u(1)]), 0.7),
                (term(&[y(2)]), -0.5),
                (term(&[u(2), u(2)]), 0.6),
                (term(&[y(2), u(2), u(2)]), -0.7),
            ],
            NoiseSpec::wun(-1.0, 1.0, 0)?,
            wgn_sigma(0.004)?,
        )),
        "s6" => Ok(spec(
            vec![
                (term(&[y(1)]), 0.5),
                (term(&[u(1)]), 0.3),
                (term(&[u(1), y(1)]), 0.3),
                (term(&[u(1), u(1)]), 0.5),
            ],
            NoiseSpec::wun(0.0, 1.0, 0)?,
            wgn_sigma(0.002)?,
        )),
        "s7" => Ok(spec(
            vec![
                (term(&[u(1)]), 0.8833),
                (term(&[u(2)]), 0.0393),
                (term(&[u(3)]), 0.8546),
                (term(&[u(1), u(1)]), 0.8528),
                (term(&[u(1), u(2)]), 0.7582),
                (term(&[u(1), u(3)]), 0.1750),
                (term(&[u(2), u(2)]), 0.0864),
                (term(&[u(2), u(3)]), 0.4916),
                (term(&[u(3), u(3)]), 0.0711),
                (term(&[y(1)]), -0.0375),
                (term(&[y(2)]), -0.0598),
                (term(&[y(3)]), -0.0370),
                (term(&[y(4)]), -0.0468),
                (term(&[y(1), y(1)]), -0.0476),
                (term(&[y(1), y(2)]), -0.0781),
                (term(&[y(1), y(3)]), -0.0189),
                (term(&[y(1), y(4)]), -0.0626),
                (term(&[y(2), y(2)]), -0.0221),
                (term(&[y(2), y(3)]), -0.0617),
                (term(&[y(2), y(4)]), -0.0378),
                (term(&[y(3), y(3)]), -0.0041),
                (term(&[y(3), y(4)]), -0.0543),
                (term(&[y(4), y(4)]), -0.0603),
            ],
            NoiseSpec::wun(0.0, 1.0, 0)?,
            NoiseSpec::wgn(0.0, 0.01 * 0.01, 0)?,
        )),
        "duffing" => Ok(SystemSpec {
            id: id.to_string(),
            structure: Vec::new(),
            duffing: Some(DuffingParams::default()),
            input: NoiseSpec::wun(0.0, 1.0, 0)?,
            noise: NoiseSpec::silent(),
            samples,
            estimation_len,
        }),
        other => Err(Error::invalid(format!("unknown system id `{other}`"))),
    }
}

/// Model-set bounds conventionally paired with a builtin system.
pub fn builtin_model_set_bounds(id: &str) -> (usize, usize, usize) {
    match id {
        "s7" | "duffing" => (5, 5, 3),
        _ => (4, 4, 3),
    }
}

/// Iterates a difference equation over explicit input and disturbance
/// sequences, with all lagged values before the first sample taken as zero.
/// Exposed so tests can drive systems with hand-picked signals.
pub fn iterate_structure(structure: &[(Term, f64)], u: &[f64], e: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), e.len());
    let pad = structure
        .iter()
        .map(|(t, _)| t.max_output_lag().max(t.max_input_lag()))
        .max()
        .unwrap_or(0);
    let n = u.len();
    let mut uu = vec![0.0; pad];
    uu.extend_from_slice(u);
    let mut y = vec![0.0; pad + n];
    for k in pad..pad + n {
        let mut v = e[k - pad];
        for (t, c) in structure {
            v += c * t.eval(&y, &uu, k);
        }
        y[k] = v;
    }
    y.split_off(pad)
}

/// Simulates a published discrete-time system with seeded input and output
/// noise, discarding a [`WARMUP`]-sample transient.
pub fn simulate_discrete(spec: &SystemSpec) -> Result<Dataset> {
    if spec.structure.is_empty() {
        return Err(Error::invalid(format!(
            "system `{}` has no discrete structure",
            spec.id
        )));
    }
    let total = spec.samples + WARMUP;
    let u = spec.input.sample(total);
    let e = spec.noise.sample(total);
    let y = iterate_structure(&spec.structure, &u, &e);
    if y.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
        return Err(Error::Integration(format!(
            "system `{}` diverged for this noise realization; try another seed",
            spec.id
        )));
    }
    Dataset::new(
        u[WARMUP..].to_vec(),
        y[WARMUP..].to_vec(),
        spec.estimation_len,
        &spec.id,
    )
}

/// Integrates the forced Duffing equation
/// `y'' + 2*zeta*omega_n*y' + omega_n^2*y + omega_n^2*epsilon*y^3 = u(t)`
/// with classical RK4, holding the input constant between output samples,
/// and samples the displacement at `fs`.
pub fn simulate_duffing(spec: &SystemSpec) -> Result<Dataset> {
    let p = spec
        .duffing
        .ok_or_else(|| Error::invalid(format!("system `{}` has no oscillator parameters", spec.id)))?;
    if p.omega_n <= 0.0 || p.zeta < 0.0 {
        return Err(Error::invalid("need omega_n > 0 and zeta >= 0"));
    }
    if p.substeps < 10 {
        return Err(Error::invalid("need at least 10 integrator sub-steps"));
    }
    let u = spec.input.sample(spec.samples);
    let y = integrate_duffing(&p, &u)?;
    Dataset::new(u, y, spec.estimation_len, &spec.id)
}

/// RK4 integration over a zero-order-hold input sequence; returns the
/// displacement at the input/output sample instants.
pub fn integrate_duffing(p: &DuffingParams, u: &[f64]) -> Result<Vec<f64>> {
    let dt = 1.0 / (p.fs * p.substeps as f64);
    let accel = |pos: f64, vel: f64, force: f64| {
        force - 2.0 * p.zeta * p.omega_n * vel
            - p.omega_n.powi(2) * pos
            - p.omega_n.powi(2) * p.epsilon * pos.powi(3)
    };
    let mut pos = 0.0f64;
    let mut vel = 0.0f64;
    let mut out = Vec::with_capacity(u.len());
    for &force in u {
        out.push(pos);
        for _ in 0..p.substeps {
            let k1v = accel(pos, vel, force);
            let k1x = vel;
            let k2v = accel(pos + 0.5 * dt * k1x, vel + 0.5 * dt * k1v, force);
            let k2x = vel + 0.5 * dt * k1v;
            let k3v = accel(pos + 0.5 * dt * k2x, vel + 0.5 * dt * k2v, force);
            let k3x = vel + 0.5 * dt * k2v;
            let k4v = accel(pos + dt * k3x, vel + dt * k3v, force);
            let k4x = vel + dt * k3v;
            pos += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            vel += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if !pos.is_finite() || !vel.is_finite() {
                return Err(Error::Integration("oscillator state left the finite domain".into()));
            }
        }
    }
    Ok(out)
}

/// Dispatches on the spec: discrete difference equation or oscillator.
pub fn simulate(spec: &SystemSpec) -> Result<Dataset> {
    if spec.duffing.is_some() {
        simulate_duffing(spec)
    } else {
        simulate_discrete(spec)
    }
}

/// Reads a two-column `u,y` CSV (header required) into a dataset.
pub fn load_csv(path: &Path, estimation_len: usize, name: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 2 columns, got {}", record.len()),
            });
        }
        let parse = |field: &str, col: &str| {
            field.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column `{col}`: {e}"),
            })
        };
        u.push(parse(&record[0], "u")?);
        y.push(parse(&record[1], "y")?);
    }
    Dataset::new(u, y, estimation_len, name)
}

/// Writes a dataset as `u,y` CSV.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["u", "y"])?;
    for (u, y) in data.u.iter().zip(&data.y) {
        w.write_record([format!("{u}"), format!("{y}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::estimate_parameters;
    use approx::assert_relative_eq;

    #[test]
    fn s3_fixed_point_under_unit_input() {
        let spec = builtin_system("s3").unwrap();
        let n = 400;
        let u = vec![1.0; n];
        let e = vec![0.0; n];
        let y = iterate_structure(&spec.structure, &u, &e);
        // steady state solves y* = 0.8 y* + 0.4 + 0.4 + 0.4
        assert_relative_eq!(y[n - 1], 6.0, epsilon = 1e-9);
    }

    #[test]
    fn s6_zero_input_stays_zero() {
        let spec = builtin_system("s6").unwrap();
        let u = vec![0.0; 100];
        let e = vec![0.0; 100];
        let y = iterate_structure(&spec.structure, &u, &e);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn s1_default_spec_matches_published_setup() {
        let spec = builtin_system("s1").unwrap();
        assert_eq!(spec.samples, 1000);
        assert_eq!(spec.structure.len(), 5);
        assert_eq!(spec.input.kind, NoiseKind::Wun { a: -1.0, b: 1.0 });
        // noise level 0.004 is a standard deviation (see `wgn_sigma`)
        assert_eq!(
            spec.noise.kind,
            NoiseKind::Wgn {
                mean: 0.0,
                variance: 0.004 * 0.004
            }
        );
        let data = simulate_discrete(&spec).unwrap();
        assert_eq!(data.len(), 1000);
        assert_eq!(data.estimation_len, 700);
    }

    #[test]
    fn s7_has_23_terms() {
        assert_eq!(builtin_system("s7").unwrap().structure.len(), 23);
    }

    #[test]
    fn unknown_system_rejected() {
        assert!(builtin_system("s9").is_err());
    }

    #[test]
    fn seeded_determinism() {
        let spec = builtin_system("s2").unwrap().with_seed(42);
        let a = simulate_discrete(&spec).unwrap();
        let b = simulate_discrete(&spec).unwrap();
        assert_eq!(a, b);
        let c = simulate_discrete(&builtin_system("s2").unwrap().with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_moments() {
        let n = 100_000;
        let wgn = NoiseSpec::wgn(0.0, 0.25, 11).unwrap().sample(n);
        let mean = wgn.iter().sum::<f64>() / n as f64;
        let var = wgn.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 0.25).abs() / 0.25 < 0.05, "WGN variance {var}");

        let wun = NoiseSpec::wun(0.0, 1.0, 12).unwrap().sample(n);
        let mean = wun.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() / 0.5 < 0.01, "WUN mean {mean}");
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::wun(1.0, 1.0, 0).is_err());
        assert!(NoiseSpec::wgn(0.0, -0.1, 0).is_err());
    }

    #[test]
    fn reestimation_recovers_published_coefficients() {
        // Noise-free variant of every discrete benchmark: fitting the true
        // structure on generated data must give back the published
        // coefficients.
        for id in ["s1", "s2", "s3", "s4", "s5", "s6", "s7"] {
            let mut spec = builtin_system(id).unwrap().with_seed(5);
            spec.noise = NoiseSpec::silent();
            let data = simulate_discrete(&spec).unwrap();
            let structure = spec.true_terms();
            let model = estimate_parameters(&data, &structure).unwrap();
            for ((_, expected), got) in spec.structure.iter().zip(&model.coefficients) {
                assert_relative_eq!(*got, *expected, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn duffing_zero_input_equilibrium() {
        let mut spec = builtin_system("duffing").unwrap();
        spec.input = NoiseSpec::wgn(0.0, 0.0, 0).unwrap(); // u = 0
        let data = simulate_duffing(&spec).unwrap();
        assert!(data.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duffing_step_halving_convergence() {
        let spec = builtin_system("duffing").unwrap().with_seed(3);
        let u = spec.input.sample(300);
        let p10 = DuffingParams::default();
        let p20 = DuffingParams {
            substeps: 20,
            ..p10
        };
        let a = integrate_duffing(&p10, &u).unwrap();
        let b = integrate_duffing(&p20, &u).unwrap();
        let rms = (a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / a.len() as f64)
            .sqrt();
        assert!(rms < 1e-6, "step-halving RMS {rms}");
    }

    #[test]
    fn duffing_linear_resonance_near_22_5_hz() {
        // With the cubic term removed the oscillator is linear with natural
        // frequency omega_n/(2 pi) = 22.5 Hz. Drive it with sinusoids over a
        // frequency sweep and locate the steady-state response peak.
        let p = DuffingParams {
            epsilon: 0.0,
            ..DuffingParams::default()
        };
        let fs = p.fs;
        let total = 2000; // 4 s; transient dies in ~0.7 s
        let mut best = (0.0f64, 0.0f64);
        let mut f = 20.0;
        while f <= 25.0 {
            let u: Vec<f64> = (0..total)
                .map(|k| (2.0 * std::f64::consts::PI * f * k as f64 / fs).sin())
                .collect();
            let y = integrate_duffing(&p, &u).unwrap();
            let tail = &y[total - 500..];
            let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
            if rms > best.1 {
                best = (f, rms);
            }
            f += 0.25;
        }
        assert!(
            (best.0 - 22.5).abs() <= 0.5,
            "response peak at {} Hz",
            best.0
        );
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = Dataset::new(vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 3.5], 2, "t").unwrap();
        write_csv(&path, &data).unwrap();
        let back = load_csv(&path, 2, "t").unwrap();
        assert_eq!(back, data);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "u,y\n0.1,1.0\n0.2\n").unwrap();
        let err = load_csv(&bad, 1, "bad").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");

        let short = dir.path().join("short.csv");
        std::fs::write(&short, "u,y\n0.1,1.0\n0.2,2.0\n0.3,3.0\n").unwrap();
        assert_eq!(load_csv(&short, 2, "s").unwrap().len(), 3);
    }
}
