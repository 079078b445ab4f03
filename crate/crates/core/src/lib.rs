//! Membership-inference scoring under a common exponential-family
//! log-likelihood-ratio model.
//!
//! Every attack in this crate scores an audited point by estimating
//! `log p(z | IN) - log p(z | OUT)` for a scalar statistic `z` of the target
//! model's output, using per-point shadow-model observations whose membership
//! is known. Attacks differ only in the assumed distribution of `z` and in how
//! many parameters are estimated per point:
//!
//! - [`family`]: Exponential, Gamma, Beta and Gaussian class-conditional fits
//!   and their closed-form LLRs.
//! - [`base`]: the pooled-to-per-class Gaussian hierarchy (BASE1..BASE4),
//!   LiRA with its variance switch, and RMIA through its BASE1 form.
//! - [`bavaria`]: normal-inverse-gamma shrinkage of per-point variances
//!   (BaVarIA-n / BaVarIA-t) and the offline scorers.
//! - [`elsa`]: per-point ridge logistic regression on a sufficient-statistic
//!   feature map.
//! - [`metrics`]: ROC, AUC, TPR at fixed FPR and Anderson-Darling diagnostics.
//! - [`synth`]: a seeded generator with known per-point parameters.

pub mod base;
pub mod bavaria;
pub mod data;
pub mod elsa;
mod error;
pub mod family;
pub mod method;
pub mod metrics;
pub mod numeric;
pub mod score;
pub mod special;
pub mod synth;

pub use base::{CenteringMode, VarianceMode};
pub use bavaria::{Nig, NigPrior, TPredictive};
pub use data::{AuditDataset, PointRecord, StatisticKind};
pub use elsa::{ElsaWeights, FeatureMask};
pub use error::{Error, Result};
pub use family::{BetaParams, ExpParams, GammaConstraint, GammaParams, GaussParams};
pub use method::Method;
pub use metrics::{AdResult, RocCurve};
pub use score::{PointFailure, ScoreReport, ScoreVector};
pub use synth::{SynthConfig, SynthFamily, SynthTruth};
