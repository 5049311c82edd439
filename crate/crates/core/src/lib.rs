//! Predictive-causality toolkit linking day-to-day semantic shifts in news
//! outlets to structural financial-market shocks.
//!
//! The pipeline runs in stages:
//!
//! * [`ingest`] parses articles and shocks and builds per-outlet daily
//!   embedding series with forward fill.
//! * [`features`] turns those into cosine-distance news features and daily
//!   emotion scores, then joins everything on a common calendar.
//! * [`svar`] estimates a daily VAR on bond-yield changes and stock returns
//!   and identifies four structural shocks with sign restrictions.
//! * [`models`] fits base and enhanced autoregressions (linear least squares
//!   and RBF kernel ridge).
//! * [`causality`] runs the base/enhanced comparison over a grid of pairs and
//!   performs the paired t-test, binomial group test, Bonferroni selection,
//!   confounder scan, feedback detection and rolling-window analysis.
//! * [`synth`], [`config`], [`pipeline`] and [`report`] make up the harness.

pub mod causality;
pub mod config;
pub mod error;
pub mod features;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod provider;
pub mod report;
pub mod seed;
pub mod svar;
pub mod synth;

pub use error::{Error, Result};
