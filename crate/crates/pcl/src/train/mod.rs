//! Training loops, optimizers, metrics, and the experiment harness.
//!
//! A training loop is single-threaded and owns its parameters; independent
//! runs (folds, seeds) may execute in parallel since they share no mutable
//! state.

mod experiment;
mod finetune;
mod metrics;
mod optim;
mod pretrain;

pub use experiment::{
    analyze_false_negatives, evaluate_on_volumes, kfold_test_indices, run_experiment,
    ExperimentReport, ExperimentSpec, FnAnalysisReport, FnStatRecord, PretrainCurve, RunRecord,
    Strategy, SummaryRecord,
};
pub use finetune::{cross_entropy, finetune, labels_of, FinetuneConfig, FinetuneOutcome};
pub use metrics::{dice, predict_labels, DiceScores};
pub use optim::{cosine_lr, Optimizer, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use pretrain::{pretrain, pretrain_with_hook, PretrainConfig, PretrainOutcome, StepTrace};
