//! Desk-scale analog of domain-conditioned speaker adaptation.
//!
//! The module builds a parametric speech-feature universe ([`ToyWorld`]),
//! a linear domain-conditioned generator ([`ToyModel`]), gradient training
//! with momentum over a [`crate::compose::CompositionPlan`], an exact
//! weighted-least-squares oracle for that training, and the experiment grid
//! with its ablations.
//!
//! Feature vectors stand in for speech: a speaker direction plus a text
//! component plus (for synthetic renders) a shift toward a source-model
//! prototype. Because the generator is linear and the loss is squared
//! error, every training outcome can be cross-checked in closed form.

mod grid;
mod model;
mod oracle;
mod train;
mod world;

pub use grid::{
    ablate_embedding_size, run_experiment_grid, AblationRow, ExperimentArm, GridConfig,
};
pub use model::{grad_check, infer, RenderedDataset, ToyModel};
pub use oracle::closed_form_solution;
pub use train::{render_plan, train_model, train_on_dataset, TrainConfig, TrainOutcome};
pub use world::{demo_corpus, generate_texts, generate_world, TextMapKind, ToyWorld, WorldConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("unknown speaker {0:?}")]
    UnknownSpeaker(String),
    #[error("unknown source model {0:?}")]
    UnknownModel(String),
    #[error(
        "calibration failed: target {target} outside reachable range [{lo:.4}, {hi:.4}] or tolerance missed"
    )]
    CalibrationFailure { target: f64, lo: f64, hi: f64 },
    #[error("training diverged at epoch {epoch}: loss {loss:.3e} > 10x initial {initial:.3e}")]
    DivergenceDetected { epoch: usize, loss: f64, initial: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("plan references unknown utterance {0:?}")]
    MissingUtterance(String),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Compose(#[from] crate::compose::ComposeError),
}
