//! Desk-scale experiment pipeline for synthetic-data augmentation in
//! low-resource speaker adaptation.
//!
//! The crate covers the full loop of an augmentation study: dataset
//! manifests, deterministic splits and training compositions, a wire
//! protocol for synthesis/transcription/embedding services (with bundled
//! mock services), objective metrics with significance statistics, a fully
//! analyzable toy generator with a closed-form training oracle, and 2-D
//! projection of latent vectors.
//!
//! Modules map onto pipeline stages:
//!
//! - [`manifest`] — corpus data model, JSON-lines manifest I/O, transcript
//!   filtering.
//! - [`compose`] — seeded train/valid/test splits, low-resource subsetting,
//!   oversampled domain-labeled training plans, mismatch pairing.
//! - [`gateway`] — HTTP clients for synthesis/ASR/embedding endpoints,
//!   reference-prompt selection, hallucination filtering, mock services.
//! - [`metrics`] — edit distance, CER/WER, embedding cosine similarity,
//!   multi-seed aggregation, binomial ABX test, MOS confidence intervals.
//! - [`toy`] — parametric speech-feature world, domain-conditioned linear
//!   generator, gradient training with a least-squares oracle, experiment
//!   grid and ablations.
//! - [`projection`] — mean pooling, exact t-SNE, PCA, scatter emission.
//! - [`pipeline`] — stage orchestration, config files, artifact ledger.
//!
//! Each major capability has a runnable example under `examples/`; the
//! `vocaug` binary exposes the same stages as subcommands.

pub mod compose;
pub mod gateway;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod projection;
pub mod toy;

mod seeding;

pub use seeding::derive_seed;
