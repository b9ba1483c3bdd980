//! Structure selection for polynomial NARX models by multi-objective
//! evolutionary search.
//!
//! The pipeline: enumerate a candidate-term dictionary ([`narx`]), encode
//! term subsets as bit vectors and score them on (cardinality, validation
//! NMSE) under an a-priori goal penalty ([`evo`]), search with NSGA-II,
//! SPEA-II or MOEA/D ([`optim`]), pool non-dominated structures over
//! independent runs, rank them a posteriori ([`mcdm`]), refine and classify
//! them ([`outcomes`]), and compare search quality with coverage,
//! hypervolume ([`metrics`]) and nonparametric statistics ([`stats`]).
//! Identified models can be validated in the frequency domain ([`frf`]).

pub mod config;
pub mod datagen;
pub mod error;
pub mod evo;
pub mod frf;
pub mod mcdm;
pub mod metrics;
pub mod narx;
pub mod optim;
pub mod outcomes;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};

/// Version stamped into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
