use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stablemil::base::{accuracy, BagClassifier};
use stablemil::bench::{biased_split, draw_a, generate_population, ShiftConfig};
use stablemil::embed::{embed_dataset, EmbeddingSpec};
use stablemil::eval::{pr_curve, reproduce, train_base, ExperimentConfig};
use stablemil::fmt::to_canonical_json;
use stablemil::mil::{load_dataset, save_dataset, DataFormat, MilDataset};
use stablemil::select::{learn_stable_instances_with, select_threshold, SelectionOptions, StablePool};
use stablemil::{seeds, Bag, Error};

#[derive(Parser)]
#[command(name = "stablemil", version, about = "Distribution-robust multi-instance learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a shift-bench population and write a biased train/test split.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_train: Option<PathBuf>,
        #[arg(long)]
        out_test: Option<PathBuf>,
        /// Fixed split ratio instead of a draw from the configured range.
        #[arg(long)]
        a: Option<f64>,
    },
    /// Train the base bag classifier and write it as JSON.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        /// Output model path (default: <out-dir>/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score candidates with a trained base classifier and write pool.json.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Use this threshold instead of the negative-split quartile.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Embed bags against a learned pool and write the vectors as CSV.
    Embed {
        #[command(flatten)]
        common: Common,
        /// Training bags (local-scaling reference).
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        /// Bags to embed (default: the training bags).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the configured methods on fixed train/test files.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Repeated seeded runs on a pinned synthetic setting.
    Reproduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        setting: u32,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Precision-recall curve of a pool's candidate scores.
    PrCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pool: PathBuf,
    },
}

/// Exit status 2 for configuration problems, 3 for data problems.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_config_error() { 2 } else { 3 }, message: e.to_string() }
    }
}

fn config_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: format!("{}: {e}", path.display()) }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_config(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| config_failure(path, e))
}

fn experiment_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_toml(&read_config(path)?).map_err(|e| config_failure(path, e))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load(path: &Path) -> CliResult<MilDataset> {
    load_dataset(path, DataFormat::from_path(path)).map_err(|e| {
        let f = Failure::from(e);
        Failure { message: format!("{}: {}", path.display(), f.message), ..f }
    })
}

fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::from)?;
    }
    std::fs::write(path, contents).map_err(|e| Error::from(e).into())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { common, out_train, out_test, a } => {
            let mut shift = match &common.config {
                Some(path) => ShiftConfig::from_toml(&read_config(path)?).map_err(|e| config_failure(path, e))?,
                None => ShiftConfig::setting1(),
            };
            let root = common.seed.unwrap_or(shift.seed);
            shift.seed = seeds::substream(root, seeds::DATAGEN, 0);
            let population = generate_population(&shift)?;
            let a = a.unwrap_or_else(|| draw_a(shift.a_range, seeds::substream(root, seeds::SPLIT_RATIO, 0)));
            let split = biased_split(&population, a, seeds::substream(root, seeds::SPLIT, 0))?;
            let train = out_train.unwrap_or_else(|| common.out_dir.join("train.jsonl"));
            let test = out_test.unwrap_or_else(|| common.out_dir.join("test.jsonl"));
            for (path, data) in [(&train, &split.train), (&test, &split.test)] {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(Error::from)?;
                }
                save_dataset(data, path, DataFormat::from_path(path))?;
            }
            println!("a = {a}; train {} bags, test {} bags", split.train.len(), split.test.len());
        }
        Command::Train { common, train, out } => {
            let cfg = experiment_config(&common)?;
            let data = load(&train)?;
            let model = train_base(&data, &cfg, seeds::substream(cfg.seed, "repetition", 0))?;
            let out = out.unwrap_or_else(|| common.out_dir.join("model.json"));
            write(&out, &model.to_json())?;
            println!("training accuracy {}", accuracy(&model, &data)?);
        }
        Command::Select { common, train, model, tau } => {
            let cfg = experiment_config(&common)?;
            let data = load(&train)?;
            let text = read_input(&model)?;
            let classifier = BagClassifier::from_json(&text)?;
            let seed = seeds::substream(cfg.seed, "repetition", 0);
            let tau = match tau.or(cfg.selection.fixed_tau) {
                Some(t) => t,
                None => {
                    let negatives: Vec<Bag> = data.negatives().cloned().collect();
                    select_threshold(&negatives, &classifier, seeds::substream(seed, seeds::THRESHOLD_SPLIT, 0))?
                }
            };
            let options = SelectionOptions {
                rule: cfg.selection.rule,
                subsample_negatives: cfg.selection.subsample_negatives,
                subsample_seed: seeds::substream(seed, "subsample", 0),
            };
            let pool = learn_stable_instances_with(&data, &classifier, tau, &options)?;
            write(&common.out_dir.join("pool.json"), &pool.to_json())?;
            if let Ok(pr) = pr_curve(&pool.all_scores) {
                write(&common.out_dir.join("pr.csv"), &pr.to_csv())?;
            }
            println!("tau = {tau}; pool size {} of {}{}", pool.len(), pool.all_scores.len(), if pool.fallback { " (fallback)" } else { "" });
        }
        Command::Embed { common, train, pool, data } => {
            let cfg = experiment_config(&common)?;
            let train_set = load(&train)?;
            let pool = StablePool::from_json(&read_input(&pool)?)?;
            let spec = EmbeddingSpec::from_pool(&pool, &train_set, &cfg.embedding)?;
            let target = match &data {
                Some(path) => load(path)?,
                None => train_set,
            };
            let embedded = embed_dataset(&target, &spec)?;
            write(&common.out_dir.join("embedding.csv"), &embedded.to_csv())?;
            write(&common.out_dir.join("embedding_spec.json"), &to_canonical_json(&spec).expect("spec serializes"))?;
            println!("{} bags embedded into {} dimensions", embedded.ids.len(), spec.len());
        }
        Command::Evaluate { common, train, test, repetitions, jobs } => {
            let mut cfg = experiment_config(&common)?;
            cfg.train_path = Some(train);
            cfg.test_path = Some(test);
            cfg.repetitions = repetitions.unwrap_or(1);
            let report = reproduce(&cfg, jobs)?;
            report.write_to(&common.out_dir)?;
            print!("{}", report.report_txt());
        }
        Command::Reproduce { common, setting, repetitions, jobs } => {
            let mut cfg = experiment_config(&common)?;
            cfg.shift = ShiftConfig::setting(setting)?;
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            let report = reproduce(&cfg, jobs)?;
            report.write_to(&common.out_dir)?;
            print!("{}", report.report_txt());
        }
        Command::PrCurve { common, pool } => {
            let pool = StablePool::from_json(&read_input(&pool)?)?;
            let pr = pr_curve(&pool.all_scores)?;
            write(&common.out_dir.join("pr.csv"), &pr.to_csv())?;
            println!("average precision {}", pr.average_precision);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
