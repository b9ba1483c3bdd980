//! Multi-run search orchestration and the robustness sweep, plus the JSON
//! and CSV artifact formats they persist. Every byte written is a pure
//! function of (configuration, master seed).

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, McdmMethod, SweepConfig};
use crate::datagen;
use crate::error::{Error, Result};
use crate::evo::{ArchiveEntry, Genome, GoalPoint, ObjectiveVector, ParetoArchive};
use crate::mcdm::{self, RankedFront};
use crate::metrics::{coverage, hypervolume, normalize_and_reference, FrontSnapshot};
use crate::narx::{estimate_parameters_over, Dataset, EstimatedModel, ModelSet};
use crate::optim::{run_with_mode, RunConfig};
use crate::SCHEMA_VERSION;

/// Independent, reproducible stream seed for one (label, cell, run) slot
/// under a master seed.
pub fn derive_seed(master: u64, label: &str, cell: u64, run: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(label.as_bytes());
    hasher.update([0x1f]);
    hasher.update(cell.to_le_bytes());
    hasher.update(run.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Serialized archive: one searched front with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveDocument {
    pub schema_version: u32,
    pub system: String,
    pub algorithm: String,
    pub seed: u64,
    pub entries: Vec<ArchiveRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRecord {
    pub bits: String,
    pub xi: usize,
    pub nmse: f64,
    pub j1: f64,
    pub j2: f64,
}

impl ArchiveDocument {
    pub fn from_archive(archive: &ParetoArchive, system: &str, algorithm: &str, seed: u64) -> Self {
        ArchiveDocument {
            schema_version: SCHEMA_VERSION,
            system: system.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            entries: archive
                .sorted_entries()
                .iter()
                .map(|e| ArchiveRecord {
                    bits: e.genome.to_bit_string(),
                    xi: e.objectives.xi,
                    nmse: e.objectives.nmse,
                    j1: e.objectives.j1,
                    j2: e.objectives.j2,
                })
                .collect(),
        }
    }

    pub fn to_archive(&self) -> Result<ParetoArchive> {
        let mut archive = ParetoArchive::new();
        for r in &self.entries {
            archive.insert(ArchiveEntry {
                genome: Genome::from_bit_string(&r.bits)?,
                objectives: ObjectiveVector {
                    xi: r.xi,
                    nmse: r.nmse,
                    penalty: r.j1 - r.xi as f64,
                    j1: r.j1,
                    j2: r.j2,
                },
            });
        }
        Ok(archive)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Serialized estimated models decoded from a pooled archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsDocument {
    pub schema_version: u32,
    pub models: Vec<EstimatedModel>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Ranked front as CSV: `rank,xi,nmse,<score>,bits`.
pub fn write_ranking_csv(path: &Path, ranked: &RankedFront) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("rank,xi,nmse,{},bits\n", ranked.score_name));
    for (i, r) in ranked.entries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            r.entry.objectives.xi,
            r.entry.objectives.nmse,
            r.score,
            r.entry.genome.to_bit_string()
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Everything `search` leaves on disk, plus the pooled archive in memory.
#[derive(Debug)]
pub struct SearchResult {
    pub out_dir: PathBuf,
    pub run_archives: Vec<ParetoArchive>,
    pub pooled: ParetoArchive,
    pub models: Vec<EstimatedModel>,
    pub dataset: Dataset,
    pub model_set: ModelSet,
}

/// Resolves the experiment's data source; generated systems derive their
/// noise streams from the master seed.
pub fn experiment_dataset(exp: &ExperimentConfig, master_seed: u64) -> Result<Dataset> {
    if let Some(system) = &exp.system {
        let mut spec = datagen::builtin_system(system)?;
        if let Some(n) = exp.samples {
            if let Some(est) = exp.estimation_len {
                spec.estimation_len = est;
            } else {
                spec.estimation_len = (n * 7) / 10;
            }
            spec.samples = n;
        } else if let Some(est) = exp.estimation_len {
            spec.estimation_len = est;
        }
        let data_seed = derive_seed(master_seed, &format!("data:{system}"), 0, 0);
        datagen::simulate(&spec.with_seed(data_seed))
    } else {
        let path = exp.data.as_ref().expect("validated: system or data");
        let est = exp.estimation_len.expect("validated: estimation_len");
        datagen::load_csv(path, est, &path.display().to_string())
    }
}

/// Pools per-run archives into the overall non-dominated set.
pub fn pool_archives(runs: &[ParetoArchive]) -> ParetoArchive {
    let mut pooled = ParetoArchive::new();
    for run in runs {
        for e in run.sorted_entries() {
            pooled.insert(e);
        }
    }
    pooled
}

/// The multi-run search pipeline: R seeded independent runs, pooled and
/// re-filtered, decoded to estimated models and ranked. Writes per-run and
/// pooled archives, models and rankings under `out_dir`.
pub fn cmd_search(
    exp: &ExperimentConfig,
    master_seed: u64,
    out_dir: &Path,
) -> Result<SearchResult> {
    exp.validate()?;
    let ms = crate::narx::generate_model_set(exp.n_u, exp.n_y, exp.n_l)?;
    let goal = exp.goal()?;
    let data = experiment_dataset(exp, master_seed)?;
    let base_cfg = exp.run.resolve()?;
    let system_label = exp
        .system
        .clone()
        .unwrap_or_else(|| "external".to_string());
    std::fs::create_dir_all(out_dir)?;

    let seeds: Vec<u64> = (0..exp.runs)
        .map(|r| derive_seed(master_seed, &system_label, 0, r as u64))
        .collect();
    let run_archives: Vec<ParetoArchive> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = RunConfig { seed, ..base_cfg };
            run_with_mode(&cfg, &ms, &data, &goal, exp.prediction.into())
        })
        .collect::<Result<Vec<_>>>()?;

    for (i, (archive, &seed)) in run_archives.iter().zip(&seeds).enumerate() {
        let doc = ArchiveDocument::from_archive(
            archive,
            &system_label,
            &base_cfg.algorithm.to_string(),
            seed,
        );
        write_json(&out_dir.join(format!("run_{i:03}.json")), &doc)?;
    }

    let pooled = pool_archives(&run_archives);
    let pooled_doc = ArchiveDocument::from_archive(
        &pooled,
        &system_label,
        &base_cfg.algorithm.to_string(),
        master_seed,
    );
    write_json(&out_dir.join("pooled.json"), &pooled_doc)?;

    let models: Vec<EstimatedModel> = pooled
        .sorted_entries()
        .iter()
        .filter_map(|e| {
            let structure = crate::evo::decode(&e.genome, &ms).ok()?;
            estimate_parameters_over(&data, &structure, Some(ms.max_lag())).ok()
        })
        .collect();
    write_json(
        &out_dir.join("models.json"),
        &ModelsDocument {
            schema_version: SCHEMA_VERSION,
            models: models.clone(),
        },
    )?;

    let entries = pooled.sorted_entries();
    match exp.mcdm.method {
        McdmMethod::Mmd | McdmMethod::Both => {
            let ranked = mcdm::mmd_rank(&entries)?;
            write_ranking_csv(&out_dir.join("ranking_mmd.csv"), &ranked)?;
        }
        McdmMethod::Mtd => {}
    }
    if matches!(exp.mcdm.method, McdmMethod::Mtd | McdmMethod::Both) && entries.len() >= 2 {
        let weights = mcdm::preference_weights(&exp.mcdm.preference()?, 2)?;
        let ranked = mcdm::mtd_rank(&entries, &weights)?;
        write_ranking_csv(&out_dir.join("ranking_mtd.csv"), &ranked)?;
    }

    Ok(SearchResult {
        out_dir: out_dir.to_path_buf(),
        run_archives,
        pooled,
        models,
        dataset: data,
        model_set: ms,
    })
}

/// One sweep cell outcome for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub system: String,
    pub p_c: f64,
    pub p_m: f64,
    /// Hypervolume of the cell's pooled front under the per-system shared
    /// normalization.
    pub hv: f64,
    /// Ratio against the system's pooled ideal front.
    pub hv_ratio: f64,
    pub c_ab: f64,
    pub c_ba: f64,
    pub delta_c: f64,
}

/// Sweep outcome: per-(system, cell) metrics and the aggregated
/// performance per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub systems: Vec<String>,
    pub cells: Vec<(f64, f64)>,
    pub metrics: Vec<CellMetrics>,
    /// Mean hypervolume ratio across systems, one entry per cell.
    pub pm_mean: Vec<f64>,
}

impl SweepResult {
    /// HVR for one (system, cell) pair.
    pub fn hvr(&self, system: &str, cell: usize) -> Option<f64> {
        let (pc, pm) = self.cells[cell];
        self.metrics
            .iter()
            .find(|m| m.system == system && m.p_c == pc && m.p_m == pm)
            .map(|m| m.hv_ratio)
    }
}

/// The robustness sweep: stage 1 searches every (system, cell) with R
/// pooled runs; stage 2 scores each cell's front against the system's
/// pooled ideal front by hypervolume ratio and aggregates across systems.
/// Writes `sweep.csv` (contour-ready), `metrics.csv` and `sweep.json`.
pub fn cmd_sweep(sweep: &SweepConfig, master_seed: u64, out_dir: &Path) -> Result<SweepResult> {
    sweep.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let ms = crate::narx::generate_model_set(sweep.n_u, sweep.n_y, sweep.n_l)?;
    let goal = GoalPoint::new(sweep.xi_lim, sweep.nmse_lim)?;
    let cells = sweep.cells();

    // stage 1: pooled front per (system, cell)
    let mut fronts: Vec<Vec<FrontSnapshot>> = Vec::with_capacity(sweep.systems.len());
    for system in &sweep.systems {
        let mut spec = datagen::builtin_system(system)?;
        if let Some(n) = sweep.samples {
            spec.samples = n;
            spec.estimation_len = (n * 7) / 10;
        }
        let data_seed = derive_seed(master_seed, &format!("data:{system}"), 0, 0);
        let data = datagen::simulate(&spec.with_seed(data_seed))?;

        let jobs: Vec<(usize, u64)> = (0..cells.len())
            .flat_map(|c| {
                (0..sweep.runs).map(move |r| (c, (c as u64, r as u64)))
            })
            .map(|(c, (cell, run))| (c, derive_seed(master_seed, system, cell, run)))
            .collect();
        let archives: Vec<(usize, ParetoArchive)> = jobs
            .par_iter()
            .map(|&(c, seed)| {
                let (pc, pm) = cells[c];
                let cfg = sweep.run_config(pc, pm, seed);
                run_with_mode(&cfg, &ms, &data, &goal, crate::evo::PredictionMode::FreeRun)
                    .map(|a| (c, a))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut per_cell: Vec<ParetoArchive> = vec![ParetoArchive::new(); cells.len()];
        for (c, archive) in archives {
            for e in archive.sorted_entries() {
                per_cell[c].insert(e);
            }
        }
        fronts.push(
            per_cell
                .iter()
                .enumerate()
                .map(|(c, archive)| {
                    FrontSnapshot::new(
                        archive
                            .sorted_entries()
                            .iter()
                            .map(|e| (e.objectives.j1, e.objectives.j2))
                            .collect(),
                        &format!("{system}:cell{c}"),
                    )
                })
                .collect(),
        );
    }

    // stage 2: hypervolume ratio against the per-system pooled ideal front
    let mut metrics = Vec::with_capacity(sweep.systems.len() * cells.len());
    for (system, cell_fronts) in sweep.systems.iter().zip(&fronts) {
        let (normalized, r) = normalize_and_reference(cell_fronts);
        let union_points: Vec<(f64, f64)> = normalized
            .iter()
            .flat_map(|f| f.points.iter().cloned())
            .collect();
        let union = FrontSnapshot::new(union_points, "union");
        let ideal = FrontSnapshot::new(union.non_dominated(), "ideal");
        let hv_ideal = hypervolume(&ideal, r);
        for (c, front) in normalized.iter().enumerate() {
            let hv = hypervolume(front, r);
            let hv_ratio = if hv_ideal > 0.0 {
                hv / hv_ideal
            } else if hv == 0.0 {
                1.0
            } else {
                0.0
            };
            let c_ab = if ideal.points.is_empty() {
                0.0
            } else {
                coverage(front, &ideal)?
            };
            let c_ba = if front.points.is_empty() {
                0.0
            } else {
                coverage(&ideal, front)?
            };
            metrics.push(CellMetrics {
                system: system.clone(),
                p_c: cells[c].0,
                p_m: cells[c].1,
                hv,
                hv_ratio,
                c_ab,
                c_ba,
                delta_c: c_ab - c_ba,
            });
        }
    }

    let pm_mean: Vec<f64> = (0..cells.len())
        .map(|c| {
            let (pc, pm) = cells[c];
            let vals: Vec<f64> = metrics
                .iter()
                .filter(|m| m.p_c == pc && m.p_m == pm)
                .map(|m| m.hv_ratio)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();

    // contour-ready aggregate
    let mut sweep_csv = String::from("pc,pm,pm_mean\n");
    for (c, &(pc, pm)) in cells.iter().enumerate() {
        sweep_csv.push_str(&format!("{pc},{pm},{}\n", pm_mean[c]));
    }
    std::fs::write(out_dir.join("sweep.csv"), sweep_csv)?;

    let mut metrics_csv = String::from("system,algorithm,hv,hv_ratio,c_ab,c_ba,delta_c\n");
    for m in &metrics {
        metrics_csv.push_str(&format!(
            "{},{} pc={} pm={},{},{},{},{},{}\n",
            m.system,
            sweep.algorithm,
            m.p_c,
            m.p_m,
            m.hv,
            m.hv_ratio,
            m.c_ab,
            m.c_ba,
            m.delta_c
        ));
    }
    std::fs::write(out_dir.join("metrics.csv"), metrics_csv)?;

    let result = SweepResult {
        systems: sweep.systems.clone(),
        cells,
        metrics,
        pm_mean,
    };
    write_json(&out_dir.join("sweep.json"), &result)?;
    Ok(result)
}

/// Writes outcome counts as `label,count` CSV.
pub fn write_outcome_csv(path: &Path, counts: &crate::outcomes::OutcomeCounts) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "label,count")?;
    for label in crate::outcomes::OutcomeLabel::ALL {
        writeln!(f, "{},{}", label.as_str(), counts.count(label))?;
    }
    writeln!(f, "total,{}", counts.total)?;
    Ok(())
}

/// Writes information-criterion rows as `xi,bic,lilc` CSV.
pub fn write_ic_csv(path: &Path, rows: &[crate::outcomes::IcRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "xi,bic,lilc")?;
    for r in rows {
        writeln!(f, "{},{},{}", r.xi, r.bic, r.lilc)?;
    }
    Ok(())
}

/// Writes a sampled frequency response as `f_hz,re,im,mag_db` CSV.
pub fn write_frf_csv(path: &Path, frf: &crate::frf::LinearFrf) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "f_hz,re,im,mag_db")?;
    for (freq, h) in frf.frequencies.iter().zip(&frf.response) {
        writeln!(f, "{},{},{},{}", freq, h.re, h.im, 20.0 * h.norm().log10())?;
    }
    Ok(())
}

/// Reads a numeric matrix CSV (header row of treatment names) into blocked
/// samples plus the treatment names.
pub fn read_matrix_csv(path: &Path) -> Result<(crate::stats::BlockedSamples, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file".into(),
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((crate::stats::BlockedSamples::new(rows)?, names))
}
