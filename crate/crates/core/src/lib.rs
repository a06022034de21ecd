//! A desk-scale laboratory for soft-target training objectives.
//!
//! The crate implements the classic knowledge-distillation loss and its
//! teacher-transform variants (TTM, WTTM) together with the confidence
//! penalty and label smoothing baselines, the power-transform machinery that
//! ties temperature scaling to Rényi entropy, analytic gradients for every
//! objective, and just enough infrastructure to exercise them end to end:
//! a hand-written MLP with SGD, deterministic Gaussian-mixture data, and
//! seeded batching.
//!
//! Module map:
//!
//! * [`prob`] — simplex transforms and information measures
//! * [`losses`] — the objectives, their gradients, and identity checks
//! * [`netkit`] — MLP forward/backward, SGD, evaluation, persistence
//! * [`datagen`] — synthetic data, CSV formats, standardization, batching
//! * [`rng`] — the portable seeded generator everything draws from

pub mod datagen;
pub mod error;
pub mod losses;
pub mod netkit;
pub mod prob;
pub mod rng;

pub use error::{Error, Result};
pub use losses::{LossBreakdown, LossKind, LossSpec};
pub use netkit::{EvalReport, MlpModel, OptimState};
pub use prob::{LogitVec, MappingSpec, ProbVec};
