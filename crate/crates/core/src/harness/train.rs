use candle_core::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::SettingConfig;
use super::model::{build_model, JointModel, LossBreakdown};
use super::optim::{AdamW, OptimizerState};
use super::predict::evaluate;
use crate::corpus::{holdout_split, Dataset, Document, RelationSchema};
use crate::encoding::Vocabulary;
use crate::error::{Error, Result};
use crate::metrics::EvaluationReport;
use crate::nn::NamedTensor;

/// Parameters and optimizer state of the selected epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub seed: u64,
    /// Epochs run in total.
    pub epoch: usize,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Dev RE F1 of the kept parameters, if dev data was available.
    pub best_dev_f1: Option<f64>,
    pub params: Vec<NamedTensor>,
    pub optimizer: OptimizerState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Summed over the epoch's documents.
    pub loss: LossBreakdown,
    pub dev: Option<EvaluationReport>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The model with the selected parameters loaded.
    pub model: JointModel,
    pub state: TrainState,
    pub history: Vec<EpochLog>,
    /// Loss of every optimisation step, summed over the batch.
    pub step_losses: Vec<LossBreakdown>,
}

/// Builds a fresh model for `seed` and trains it.
pub fn train(
    config: &SettingConfig,
    schema: &RelationSchema,
    train_docs: &[Document],
    dev_docs: &[Document],
    seed: u64,
) -> Result<TrainOutcome> {
    let vocab = Vocabulary::build(train_docs);
    let model = build_model(config, schema, &vocab, seed)?;
    train_model(model, train_docs, dev_docs, seed)
}

/// Trains `model` in place of its current parameters. With dev documents,
/// the epoch with the best dev RE F1 is kept (earliest on ties); without,
/// the last epoch is kept.
pub fn train_model(
    model: JointModel,
    train_docs: &[Document],
    dev_docs: &[Document],
    seed: u64,
) -> Result<TrainOutcome> {
    if train_docs.is_empty() {
        return Err(Error::InvalidArgument("no training documents".into()));
    }
    let config = model.config().clone();
    let batch_size = config.optim.batch_size;
    let epochs = config.optim.epochs;
    let steps_per_epoch = train_docs.len().div_ceil(batch_size);
    let mut optimizer = AdamW::new(&config.optim, steps_per_epoch * epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..train_docs.len()).collect();

    let mut history = Vec::new();
    let mut step_losses = Vec::new();
    let mut best: Option<(f64, usize, Vec<NamedTensor>, OptimizerState)> = None;
    let mut epochs_run = 0;
    let mut step = 0;

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossBreakdown::default();
        for batch in order.chunks(batch_size) {
            step += 1;
            let mut total: Option<Tensor> = None;
            let mut batch_loss = LossBreakdown::default();
            for &i in batch {
                let doc = &train_docs[i];
                let (loss, parts) = model.loss(doc)?;
                if !parts.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        step,
                        detail: format!("non-finite loss on document {}: {parts:?}", doc.id),
                    });
                }
                batch_loss.accumulate(&parts);
                total = Some(match total {
                    Some(t) => (t + loss)?,
                    None => loss,
                });
            }
            let grads = total.expect("batches are non-empty").backward()?;
            optimizer
                .step(model.store(), &grads)
                .map_err(|e| Error::Divergence {
                    epoch,
                    step,
                    detail: e.to_string(),
                })?;
            epoch_loss.accumulate(&batch_loss);
            step_losses.push(batch_loss);
        }
        epochs_run = epoch;

        let evaluate_now = !dev_docs.is_empty() && (epoch % config.eval.every == 0 || epoch == epochs);
        let dev = if evaluate_now {
            Some(evaluate(&model, dev_docs, None)?)
        } else {
            None
        };
        match &dev {
            Some(r) => log::info!(
                "seed {seed} epoch {epoch}: loss {:.4}, dev RE F1 {:.4}, coref avg F1 {:.4}",
                epoch_loss.total,
                r.relation.f1,
                r.coref_avg_f1
            ),
            None => log::info!("seed {seed} epoch {epoch}: loss {:.4}", epoch_loss.total),
        }
        history.push(EpochLog {
            epoch,
            loss: epoch_loss,
            dev,
        });

        if let Some(report) = dev {
            let f1 = report.relation.f1;
            if best.as_ref().is_none_or(|b| f1 > b.0) {
                best = Some((f1, epoch, model.store().snapshot()?, optimizer.state()?));
            }
            if config.eval.stop_at_dev_f1.is_some_and(|target| f1 >= target) {
                log::info!("seed {seed}: dev RE F1 {f1:.4} reached the target, stopping");
                break;
            }
        }
    }

    let (best_dev_f1, best_epoch, params, optimizer_state) = match best {
        Some((f1, epoch, params, opt)) => {
            model.store().restore(&params)?;
            (Some(f1), epoch, params, opt)
        }
        None => (None, epochs_run, model.store().snapshot()?, optimizer.state()?),
    };
    Ok(TrainOutcome {
        model,
        state: TrainState {
            seed,
            epoch: epochs_run,
            best_epoch,
            best_dev_f1,
            params,
            optimizer: optimizer_state,
        },
        history,
        step_losses,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub best: TrainOutcome,
    /// `(seed, best dev RE F1)` of every run.
    pub runs: Vec<(u64, Option<f64>)>,
}

/// One run per configured seed; keeps the run with the best dev RE F1
/// (the first seed on ties).
pub fn train_sweep(
    config: &SettingConfig,
    schema: &RelationSchema,
    train_docs: &[Document],
    dev_docs: &[Document],
) -> Result<SweepOutcome> {
    let mut best: Option<TrainOutcome> = None;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let outcome = train(config, schema, train_docs, dev_docs, seed)?;
        let f1 = outcome.state.best_dev_f1;
        runs.push((seed, f1));
        let better = match &best {
            None => true,
            Some(b) => f1.unwrap_or(f64::NEG_INFINITY) > b.state.best_dev_f1.unwrap_or(f64::NEG_INFINITY),
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(SweepOutcome {
        best: best.ok_or_else(|| Error::Config("seeds must not be empty".into()))?,
        runs,
    })
}

/// Trains on a dataset. Without a dev split, a seeded fraction of train is
/// held out for model selection; with `eval.final_retrain`, the best seed is
/// then retrained on the full training split for the selected number of
/// epochs.
pub fn train_dataset(config: &SettingConfig, dataset: &Dataset) -> Result<SweepOutcome> {
    let (train_docs, dev_docs) = if dataset.dev.is_empty() {
        holdout_split(&dataset.train, config.eval.dev_fraction, config.seeds[0])?
    } else {
        (dataset.train.clone(), dataset.dev.clone())
    };
    log::info!(
        "training {} on {} documents, selecting on {}",
        config.setting,
        train_docs.len(),
        dev_docs.len()
    );
    let mut sweep = train_sweep(config, &dataset.schema, &train_docs, &dev_docs)?;
    if config.eval.final_retrain {
        let mut full = config.clone();
        full.optim.epochs = sweep.best.state.best_epoch.max(1);
        full.eval.stop_at_dev_f1 = None;
        let seed = sweep.best.state.seed;
        log::info!(
            "retraining seed {seed} on all {} training documents for {} epochs",
            dataset.train.len(),
            full.optim.epochs
        );
        let mut outcome = train(&full, &dataset.schema, &dataset.train, &[], seed)?;
        outcome.state.best_dev_f1 = sweep.best.state.best_dev_f1;
        sweep.best = outcome;
    }
    Ok(sweep)
}
