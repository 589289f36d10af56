//! The five multi-task settings: configuration, model assembly, training
//! with model selection, prediction and checkpoints.

mod checkpoint;
mod config;
mod model;
mod optim;
mod predict;
mod train;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{
    EncoderConfig, EncoderKind, EvalConfig, GcConfig, GpConfig, LossWeights, ModelConfig, OptimConfig,
    PathsConfig, Setting, SettingConfig, DATA_DIR_ENV, OUTPUT_DIR_ENV,
};
pub use model::{build_model, CandidateScores, Forward, JointModel, LossBreakdown};
pub use optim::{is_encoder_parameter, AdamW, OptimizerState};
pub use predict::{evaluate, predict, score_predictions, DocumentPrediction, PredictedTriple, PredictionSet};
pub use train::{
    train, train_dataset, train_model, train_sweep, EpochLog, SweepOutcome, TrainOutcome, TrainState,
};
