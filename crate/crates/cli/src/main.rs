use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use jointie_core::corpus::{corpus_statistics, load_dataset_dir, Dataset, DatasetFormat};
use jointie_core::harness::{
    predict, score_predictions, train_dataset, Checkpoint, PredictionSet, Setting, SettingConfig,
    DATA_DIR_ENV,
};
use jointie_core::metrics::FactIndex;
use jointie_core::synthetic::{generate, SyntheticConfig};

#[derive(Parser)]
#[command(
    name = "jointie",
    version,
    about = "Joint document-level information extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Auto,
    Docred,
    Dwie,
    Canonical,
}

impl From<Format> for DatasetFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Auto => DatasetFormat::Auto,
            Format::Docred => DatasetFormat::Docred,
            Format::Dwie => DatasetFormat::Dwie,
            Format::Canonical => DatasetFormat::Canonical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write its best checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory; defaults to `paths.data` from the config.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides the setting in the config file.
        #[arg(long)]
        setting: Option<String>,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
        /// Checkpoint path; defaults to `<paths.output>/<setting>.ckpt`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-epoch training history as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Predict clusters and relation triples with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset directory; defaults to the environment override or the
        /// checkpoint's `paths.data`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
    },
    /// Score a prediction file against gold annotations.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// Training facts for the RE Ign score (see `index-facts`).
        #[arg(long)]
        fact_index: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
    },
    /// Print per-split corpus statistics.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
    },
    /// Collect the relational facts of a split for RE Ign scoring.
    IndexFacts {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
    },
    /// Write a planted synthetic dataset. Every split holds the same
    /// documents, for overfitting checks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dense: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        documents: Option<usize>,
    },
}

fn load_data(dir: &Path, format: Format) -> Result<Dataset> {
    load_dataset_dir(dir, format.into()).with_context(|| format!("loading dataset from {}", dir.display()))
}

fn split_docs(dataset: &Dataset, split: Split) -> Result<&[jointie_core::Document]> {
    let docs = dataset.split(split.name()).expect("known split name");
    if docs.is_empty() {
        bail!("the dataset has no {} documents", split.name());
    }
    Ok(docs)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            config,
            data,
            setting,
            format,
            out,
            history,
        } => {
            let mut cfg = SettingConfig::load(&config)?;
            if let Some(s) = setting {
                cfg = cfg.with_setting(s.parse::<Setting>()?);
                cfg.validate()?;
            }
            let data = data
                .or_else(|| cfg.paths.data.clone())
                .context("no dataset directory: pass --data or set paths.data")?;
            let dataset = load_data(&data, format)?;
            let sweep = train_dataset(&cfg, &dataset)?;
            let out = out.unwrap_or_else(|| {
                let dir = cfg.paths.output.clone().unwrap_or_else(|| PathBuf::from("."));
                dir.join(format!("{}.ckpt", cfg.setting))
            });
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            let best = &sweep.best;
            Checkpoint::from_model(&best.model, &best.state)?.save(&out)?;
            if let Some(path) = history {
                fs::write(&path, serde_json::to_string_pretty(&best.history)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print_json(&json!({
                "setting": cfg.setting.as_str(),
                "checkpoint": out,
                "seed": best.state.seed,
                "best_epoch": best.state.best_epoch,
                "epochs_run": best.state.epoch,
                "best_dev_re_f1": best.state.best_dev_f1,
                "runs": sweep.runs.iter().map(|(s, f)| json!({"seed": s, "dev_re_f1": f})).collect::<Vec<_>>(),
            }))
        }
        Command::Predict {
            checkpoint,
            out,
            data,
            split,
            format,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let data = data
                .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
                .or_else(|| ckpt.config.paths.data.clone())
                .context("no dataset directory: pass --data")?;
            let dataset = load_data(&data, format)?;
            if dataset.schema != ckpt.schema {
                bail!("the dataset's relation schema differs from the checkpoint's");
            }
            let model = ckpt.into_model()?;
            let predictions = predict(&model, split_docs(&dataset, split)?)?;
            predictions.save(&out)?;
            log::info!(
                "wrote {} predictions to {}",
                predictions.documents.len(),
                out.display()
            );
            Ok(())
        }
        Command::Score {
            pred,
            gold,
            split,
            fact_index,
            format,
        } => {
            let predictions = PredictionSet::load(&pred)?;
            let dataset = load_data(&gold, format)?;
            let index = fact_index.map(FactIndex::load).transpose()?;
            let report = score_predictions(
                &predictions,
                split_docs(&dataset, split)?,
                &dataset.schema,
                index.as_ref(),
            )?;
            let mut value = serde_json::to_value(report)?;
            if index.is_none() {
                value
                    .as_object_mut()
                    .expect("report is an object")
                    .remove("relation_ign");
            }
            print_json(&value)
        }
        Command::Stats { data, format } => {
            let dataset = load_data(&data, format)?;
            let mut value = serde_json::Map::new();
            for split in [Split::Train, Split::Dev, Split::Test] {
                let docs = dataset.split(split.name()).expect("known split name");
                if !docs.is_empty() {
                    value.insert(
                        split.name().into(),
                        serde_json::to_value(corpus_statistics(docs)?)?,
                    );
                }
            }
            value.insert(
                "all".into(),
                serde_json::to_value(corpus_statistics(dataset.all_documents())?)?,
            );
            value.insert("relation_types".into(), json!(dataset.schema.len()));
            print_json(&value.into())
        }
        Command::IndexFacts {
            data,
            out,
            split,
            format,
        } => {
            let dataset = load_data(&data, format)?;
            let index = FactIndex::from_documents(split_docs(&dataset, split)?, &dataset.schema);
            index.save(&out)?;
            log::info!("wrote {} facts to {}", index.len(), out.display());
            Ok(())
        }
        Command::Synth {
            out,
            dense,
            seed,
            documents,
        } => {
            let mut config = if dense {
                SyntheticConfig::dense()
            } else {
                SyntheticConfig::default()
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(n) = documents {
                config.documents = n;
            }
            let corpus = generate(&config)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for file in ["train.json", "dev.json", "test.json"] {
                corpus.save(out.join(file))?;
            }
            log::info!("wrote {} documents to {}", corpus.documents.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(Cli::parse().command)
}
