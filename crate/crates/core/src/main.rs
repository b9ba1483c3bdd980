//! Command-line front end: term-set queries, data generation, the
//! multi-run search pipeline, a-posteriori ranking, outcome classification,
//! the robustness sweep, nonparametric tests and frequency-response export.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use narxsel::config::{load_config, ConfigFile, McdmMethod};
use narxsel::datagen;
use narxsel::error::Error;
use narxsel::frf;
use narxsel::mcdm;
use narxsel::outcomes;
use narxsel::pipeline::{
    self, derive_seed, read_matrix_csv, write_frf_csv, write_ic_csv, write_json,
    write_outcome_csv, write_ranking_csv, ArchiveDocument,
};
use narxsel::stats::{friedman, hommel_posthoc, wilcoxon_signed_rank, Alternative, TestReport};

#[derive(Parser)]
#[command(
    name = "narxsel",
    about = "Multi-objective evolutionary structure selection for polynomial NARX models",
    version
)]
struct Cli {
    /// Configuration file (TOML) for `search` and `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every stream in a run derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Show the candidate-term dictionary for given lag/degree bounds.
    Terms(TermsArgs),
    /// Generate identification data for a builtin system as CSV.
    Simulate(SimulateArgs),
    /// Run the multi-run structure search from the config file.
    Search,
    /// Rank an archive JSON a posteriori (MMD or MTD).
    Rank(RankArgs),
    /// Refine and classify an archive against a system's true structure.
    Classify(ClassifyArgs),
    /// Run the (p_c, p_m) robustness sweep from the config file.
    Sweep,
    /// Nonparametric tests over a CSV matrix.
    Stats(StatsArgs),
    /// Export the linear frequency response of an estimated model.
    Frf(FrfArgs),
}

#[derive(Args)]
struct TermsArgs {
    #[arg(long)]
    n_u: usize,
    #[arg(long)]
    n_y: usize,
    #[arg(long)]
    n_l: usize,
    /// List every term instead of just the count.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Builtin system id: s1..s7 or duffing.
    #[arg(long)]
    system: String,
    #[arg(long)]
    samples: Option<usize>,
    /// Output CSV path (default: <out>/<system>.csv).
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Archive JSON produced by `search`.
    #[arg(long)]
    archive: PathBuf,
    #[arg(long, value_parser = ["mmd", "mtd"])]
    method: String,
    /// MTD objective importance order, most important first.
    #[arg(long, num_args = 2, default_values_t = [1, 2])]
    ranks: Vec<usize>,
    /// MTD preference intensity in [1, 9].
    #[arg(long, default_value_t = 5.0)]
    intensity: f64,
    /// How many top structures to print.
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Builtin system id with a known true structure (s1..s7).
    #[arg(long)]
    system: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write the information-criterion audit curve.
    #[arg(long)]
    ic: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Test to run.
    #[arg(long, value_parser = ["friedman", "hommel", "wilcoxon"])]
    test: String,
    /// CSV matrix: header row of treatment names, one row per block.
    #[arg(long)]
    matrix: PathBuf,
    /// Control treatment (column index) for the post-hoc procedure.
    #[arg(long, default_value_t = 0)]
    control: usize,
    /// Columns compared by the Wilcoxon test.
    #[arg(long, default_value_t = 0)]
    x_col: usize,
    #[arg(long, default_value_t = 1)]
    y_col: usize,
    #[arg(long, value_parser = ["greater", "two_sided"], default_value = "greater")]
    alternative: String,
}

#[derive(Args)]
struct FrfArgs {
    /// models.json produced by `search`.
    #[arg(long)]
    models: PathBuf,
    /// Which model in the file to probe.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 500.0)]
    fs: f64,
    /// Grid points over [0, fs/2].
    #[arg(long, default_value_t = 2048)]
    points: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn require_config(cli: &Cli) -> Result<ConfigFile, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "this subcommand needs a configuration file".into(),
    })?;
    load_config(path)
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Terms(args) => {
            let ms = narxsel::narx::generate_model_set(args.n_u, args.n_y, args.n_l)?;
            println!(
                "model set (n_u={}, n_y={}, n_l={}): {} terms",
                args.n_u,
                args.n_y,
                args.n_l,
                ms.len()
            );
            if args.list {
                for (i, t) in ms.terms().iter().enumerate() {
                    println!("{i:5}  {t}");
                }
            }
            Ok(())
        }
        Command::Simulate(args) => {
            let mut spec = datagen::builtin_system(&args.system)?;
            if let Some(n) = args.samples {
                spec.samples = n;
                spec.estimation_len = (n * 7) / 10;
            }
            let data_seed = derive_seed(cli.seed, &format!("data:{}", args.system), 0, 0);
            let data = datagen::simulate(&spec.with_seed(data_seed))?;
            std::fs::create_dir_all(&cli.out)?;
            let path = args
                .file
                .clone()
                .unwrap_or_else(|| cli.out.join(format!("{}.csv", args.system)));
            datagen::write_csv(&path, &data)?;
            println!(
                "wrote {} samples ({} estimation / {} validation) to {}",
                data.len(),
                data.estimation_len,
                data.validation_len(),
                path.display()
            );
            Ok(())
        }
        Command::Search => {
            let cfg = require_config(cli)?;
            let exp = cfg.experiment.ok_or_else(|| Error::Config {
                path: "experiment".into(),
                message: "missing [experiment] section".into(),
            })?;
            let result = pipeline::cmd_search(&exp, cli.seed, &cli.out)?;
            println!(
                "pooled archive: {} non-dominated structures from {} runs -> {}",
                result.pooled.len(),
                result.run_archives.len(),
                result.out_dir.display()
            );
            let entries = result.pooled.sorted_entries();
            if matches!(exp.mcdm.method, McdmMethod::Mmd | McdmMethod::Both) {
                let ranked = mcdm::mmd_rank(&entries)?;
                println!("top structures by knee distance:");
                print_top(&result, &ranked, 5);
            }
            Ok(())
        }
        Command::Rank(args) => {
            let doc = ArchiveDocument::load(&args.archive)?;
            let archive = doc.to_archive()?;
            let entries = archive.sorted_entries();
            let ranked = match args.method.as_str() {
                "mmd" => mcdm::mmd_rank(&entries)?,
                _ => {
                    let pref = mcdm::PreferenceSpec::new(args.ranks.clone(), args.intensity)?;
                    let weights = mcdm::preference_weights(&pref, 2)?;
                    mcdm::mtd_rank(&entries, &weights)?
                }
            };
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join(format!("ranking_{}.csv", args.method));
            write_ranking_csv(&path, &ranked)?;
            println!("rank  xi  nmse          {}", ranked.score_name);
            for (i, r) in ranked.top(args.top).iter().enumerate() {
                println!(
                    "{:4}  {:2}  {:<12.6}  {:.6}",
                    i + 1,
                    r.entry.objectives.xi,
                    r.entry.objectives.nmse,
                    r.score
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Classify(args) => {
            let doc = ArchiveDocument::load(&args.archive)?;
            let archive = doc.to_archive()?;
            let spec = datagen::builtin_system(&args.system)?;
            if spec.structure.is_empty() {
                return Err(Error::invalid(format!(
                    "system `{}` has no known true structure to classify against",
                    args.system
                )));
            }
            let (n_u, n_y, n_l) = datagen::builtin_model_set_bounds(&args.system);
            let ms = narxsel::narx::generate_model_set(n_u, n_y, n_l)?;
            let data_seed = derive_seed(cli.seed, &format!("data:{}", args.system), 0, 0);
            let data = datagen::simulate(&spec.clone().with_seed(data_seed))?;
            let truth = spec.true_terms();
            let counts = outcomes::outcome_table(&archive, &ms, &truth, &data, args.alpha)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("outcomes.csv");
            write_outcome_csv(&path, &counts)?;
            println!(
                "exact={} over={} under1={} under2={} total={}",
                counts.exact_fitting,
                counts.over_fitting,
                counts.under_fitting_1,
                counts.under_fitting_2,
                counts.total
            );
            if args.ic {
                let rows = outcomes::information_criteria(&archive, &ms, &data)?;
                let ic_path = cli.out.join("ic.csv");
                write_ic_csv(&ic_path, &rows)?;
                println!("wrote {}", ic_path.display());
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep => {
            let cfg = require_config(cli)?;
            let sweep = cfg.sweep.ok_or_else(|| Error::Config {
                path: "sweep".into(),
                message: "missing [sweep] section".into(),
            })?;
            let result = pipeline::cmd_sweep(&sweep, cli.seed, &cli.out)?;
            let best = result
                .pm_mean
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty grid");
            let (pc, pm) = result.cells[best.0];
            println!(
                "{} cells x {} systems; best mean HVR {:.4} at pc={pc} pm={pm}",
                result.cells.len(),
                result.systems.len(),
                best.1
            );
            println!("wrote {}", cli.out.join("sweep.csv").display());
            Ok(())
        }
        Command::Stats(args) => {
            let (samples, names) = read_matrix_csv(&args.matrix)?;
            let report: TestReport = match args.test.as_str() {
                "friedman" => friedman(&samples)?,
                "hommel" => {
                    let base = friedman(&samples)?;
                    let ranks = base.mean_ranks.expect("friedman reports mean ranks");
                    hommel_posthoc(&ranks, samples.blocks(), args.control)?
                }
                _ => {
                    let x: Vec<f64> = samples.rows().iter().map(|r| r[args.x_col]).collect();
                    let y: Vec<f64> = samples.rows().iter().map(|r| r[args.y_col]).collect();
                    let alt = if args.alternative == "greater" {
                        Alternative::Greater
                    } else {
                        Alternative::TwoSided
                    };
                    wilcoxon_signed_rank(&x, &y, alt)?
                }
            };
            #[derive(serde::Serialize)]
            struct ReportDocument<'a> {
                schema_version: u32,
                treatments: &'a [String],
                #[serde(flatten)]
                report: &'a TestReport,
            }
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join(format!("stats_{}.json", args.test));
            write_json(
                &path,
                &ReportDocument {
                    schema_version: narxsel::SCHEMA_VERSION,
                    treatments: &names,
                    report: &report,
                },
            )?;
            println!(
                "{}: statistic={:.4} p={:.4} reject(0.05)={}",
                report.test, report.statistic, report.p_value, report.reject
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Frf(args) => {
            let text = std::fs::read_to_string(&args.models)?;
            let doc: pipeline::ModelsDocument = serde_json::from_str(&text)?;
            let model = doc.models.get(args.index).ok_or_else(|| {
                Error::invalid(format!(
                    "model index {} out of range ({} models)",
                    args.index,
                    doc.models.len()
                ))
            })?;
            let grid: Vec<f64> = (0..args.points)
                .map(|i| i as f64 * (args.fs / 2.0) / (args.points.max(2) - 1) as f64)
                .collect();
            let response = frf::linear_frf(model, args.fs, &grid);
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join(format!("frf_{}.csv", args.index));
            write_frf_csv(&path, &response)?;
            match (response.degenerate, response.peak_frequency()) {
                (false, Some(peak)) => println!("|H1| peaks at {peak:.2} Hz"),
                _ => println!("degenerate response (no linear input term)"),
            }
            if let Some(f) = frf::resonance_from_poles(model, args.fs) {
                println!("pole-angle resonance: {f:.2} Hz");
            }
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn print_top(result: &pipeline::SearchResult, ranked: &mcdm::RankedFront, n: usize) {
    for (i, r) in ranked.top(n).iter().enumerate() {
        let structure = narxsel::evo::decode(&r.entry.genome, &result.model_set)
            .map(|terms| {
                terms
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(" + ")
            })
            .unwrap_or_else(|_| "<decode failed>".into());
        println!(
            "{:2}. xi={:2} nmse={:<10.4} score={:.4}  {}",
            i + 1,
            r.entry.objectives.xi,
            r.entry.objectives.nmse,
            r.score,
            structure
        );
    }
}
