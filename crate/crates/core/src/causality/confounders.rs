//! Scan for third variables that predict both members of a significant pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::PartitionSpec;
use super::inference::bonferroni_threshold;
use super::{evaluate_pair, Direction, DtConvention, PairResult};
use crate::error::{Error, Result};
use crate::features::{AlignedPanel, FeatureKind, FeatureSeries};
use crate::models::{ModelKind, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfounderCategory {
    NewsOutlet,
    Shock,
    EconomicIndicator,
    Emotion,
}

impl From<FeatureKind> for ConfounderCategory {
    fn from(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::NewsDistance => ConfounderCategory::NewsOutlet,
            FeatureKind::Shock => ConfounderCategory::Shock,
            FeatureKind::Auxiliary => ConfounderCategory::EconomicIndicator,
            FeatureKind::Emotion => ConfounderCategory::Emotion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confounder {
    pub variable: String,
    pub category: ConfounderCategory,
    /// Smallest p-value of `z -> treatment` across the lag set.
    pub p_treatment: f64,
    /// Smallest p-value of `z -> outcome` across the lag set.
    pub p_outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfounderReport {
    pub treatment: String,
    pub outcome: String,
    pub direction: Direction,
    pub model: ModelKind,
    pub lag: usize,
    pub threshold: f64,
    pub confounders: Vec<Confounder>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub lags: Vec<usize>,
    pub params: ModelParams,
    pub dt: DtConvention,
    pub alpha: f64,
    pub partition: PartitionSpec,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            lags: (1..=10).collect(),
            params: ModelParams::default(),
            dt: DtConvention::default(),
            alpha: 0.05,
            partition: PartitionSpec::Static,
        }
    }
}

/// For every selected pair `x -> y`, test each candidate `z` (other than `x`
/// and `y`) for `z -> x` and `z -> y` across the lag set. `z` is reported when
/// the smallest p-value in both directions is below `alpha / M`, with `M` the
/// number of tests in the whole scan.
pub fn confounder_scan(
    selected: &[PairResult],
    candidates: &[FeatureSeries],
    panel: &AlignedPanel,
    cfg: &ScanConfig,
) -> Result<Vec<ConfounderReport>> {
    for c in candidates {
        if c.dates != panel.dates {
            return Err(Error::input(format!(
                "candidate `{}` covers {} days but the panel has {}",
                c.id,
                c.len(),
                panel.len()
            )));
        }
    }
    let lookup = |id: &str| {
        panel
            .series(id)
            .ok_or_else(|| Error::input(format!("series `{id}` is not in the panel")))
    };
    let pairs: Vec<(&PairResult, FeatureSeries, FeatureSeries, Vec<&FeatureSeries>)> = selected
        .iter()
        .map(|r| {
            let x = lookup(r.treatment())?;
            let y = lookup(r.outcome())?;
            let eligible = candidates.iter().filter(|z| z.id != x.id && z.id != y.id).collect();
            Ok((r, x, y, eligible))
        })
        .collect::<Result<_>>()?;
    let total: usize = pairs.iter().map(|(_, _, _, z)| z.len() * 2 * cfg.lags.len()).sum();
    let threshold = bonferroni_threshold(cfg.alpha, total);

    let min_p = |target: &FeatureSeries, z: &FeatureSeries, kind: ModelKind| -> Result<f64> {
        cfg.lags.iter().try_fold(1.0f64, |best, &lag| {
            let rows = cfg.partition.rows(panel.len(), lag)?;
            let e = evaluate_pair(target, z, lag, kind, &cfg.params, &rows, cfg.dt)?;
            Ok(best.min(e.p_value))
        })
    };

    pairs
        .iter()
        .map(|(r, x, y, eligible)| {
            let confounders = eligible
                .par_iter()
                .map(|z| {
                    let p_treatment = min_p(x, z, r.model)?;
                    let p_outcome = min_p(y, z, r.model)?;
                    Ok((p_treatment < threshold && p_outcome < threshold).then(|| Confounder {
                        variable: z.id.clone(),
                        category: z.kind.into(),
                        p_treatment,
                        p_outcome,
                    }))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            Ok(ConfounderReport {
                treatment: x.id.clone(),
                outcome: y.id.clone(),
                direction: r.direction,
                model: r.model,
                lag: r.lag,
                threshold,
                confounders,
            })
        })
        .collect()
}
