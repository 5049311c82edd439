use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{make_static_split, RowPartition, Window};
use super::{evaluate_pair, Direction, DtConvention, PairResult};
use crate::error::{Error, Result};
use crate::features::{AlignedPanel, FeatureKind, FeatureSeries};
use crate::models::{ModelKind, ModelParams};

/// Which rows each evaluation trains and tests on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PartitionSpec {
    /// 70/30 static split of the design rows for each lag.
    #[default]
    Static,
    /// A single rolling window over panel rows.
    Window(Window),
}

impl PartitionSpec {
    pub fn rows(&self, panel_len: usize, lag: usize) -> Result<RowPartition> {
        match self {
            PartitionSpec::Static => Ok(make_static_split(panel_len.saturating_sub(lag))?.rows()),
            PartitionSpec::Window(w) => {
                if w.span.end > panel_len {
                    return Err(Error::input(format!("window {} runs past the panel", w.index)));
                }
                Ok(w.design_rows(lag))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lags: Vec<usize>,
    pub kinds: Vec<ModelKind>,
    pub directions: Vec<Direction>,
    pub params: ModelParams,
    pub dt: DtConvention,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lags: (1..=10).collect(),
            kinds: vec![ModelKind::Linear],
            directions: Direction::BOTH.to_vec(),
            params: ModelParams::default(),
            dt: DtConvention::default(),
        }
    }
}

/// Evaluate every (direction, outlet, shock, lag, model) combination of the
/// panel's news and shock columns. Results come back in that order.
pub fn run_grid(panel: &AlignedPanel, spec: &GridSpec, partition: &PartitionSpec) -> Result<Vec<PairResult>> {
    let outlets: Vec<FeatureSeries> = panel
        .columns_of(FeatureKind::NewsDistance)
        .filter_map(|c| panel.series(&c.id))
        .collect();
    let shocks: Vec<FeatureSeries> = panel
        .columns_of(FeatureKind::Shock)
        .filter_map(|c| panel.series(&c.id))
        .collect();
    let mut directions = spec.directions.clone();
    directions.sort();
    directions.dedup();
    let mut lags = spec.lags.clone();
    lags.sort();
    lags.dedup();
    let mut kinds = spec.kinds.clone();
    kinds.sort();
    kinds.dedup();

    let mut tasks = Vec::new();
    for &direction in &directions {
        for outlet in &outlets {
            for shock in &shocks {
                for &lag in &lags {
                    for &kind in &kinds {
                        tasks.push((direction, outlet, shock, lag, kind));
                    }
                }
            }
        }
    }
    if tasks.is_empty() {
        return Err(Error::input(format!(
            "empty grid: {} news series, {} shock series, {} lags, {} model kinds, {} directions",
            outlets.len(),
            shocks.len(),
            lags.len(),
            kinds.len(),
            directions.len()
        )));
    }
    let orientation_of = |s: &FeatureSeries| {
        s.orientation
            .ok_or_else(|| Error::input(format!("news series `{}` has no orientation", s.id)))
    };

    tasks
        .into_par_iter()
        .map(|(direction, outlet, shock, lag, kind)| {
            let (y, x) = match direction {
                Direction::EconToText => (outlet, shock),
                Direction::TextToEcon => (shock, outlet),
            };
            let rows = partition.rows(panel.len(), lag)?;
            let e = evaluate_pair(y, x, lag, kind, &spec.params, &rows, spec.dt)?;
            Ok(PairResult {
                direction,
                orientation: orientation_of(outlet)?,
                outlet: outlet.id.clone(),
                shock: shock.id.clone(),
                lag,
                model: kind,
                mse_base: e.mse_base,
                mse_enhanced: e.mse_enhanced,
                t_stat: e.t_stat,
                p_value: e.p_value,
                n_test: e.n_test,
                degenerate: e.degenerate,
            })
        })
        .collect()
}
