//! Interleaved collection and gradient steps, evaluation on unseen scenes,
//! metrics logging and checkpoints.

mod config;
mod eval;
mod learner;
mod metrics;
mod run;

pub use config::{Ablation, Logging, RunConfig, Schedule};
pub use eval::{evaluate, EvalSummary, MeanPolicy, Policy};
pub use learner::{encoder_spec, streams, Learner, UpdateRngs};
pub use metrics::{read_metrics, MetricsRecord, MetricsWriter, StepLosses};
pub use run::{
    probe_r2, run, run_observed, save_checkpoint, RunInfo, RunOutcome, SavedRun, CHECKPOINT_DIR,
    CONFIG_FILE, METRICS_FILE, RUN_FILE,
};
