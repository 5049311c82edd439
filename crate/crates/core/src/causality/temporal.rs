//! Rolling-window evaluation and per-window deviation of the enhanced
//! model's improvement from its average.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::grid::{run_grid, GridSpec, PartitionSpec};
use super::split::Window;
use super::Direction;
use crate::error::{Error, Result};
use crate::features::AlignedPanel;
use crate::ingest::Orientation;
use crate::models::ModelKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// `MSE_B - MSE_E`.
    #[default]
    Absolute,
    /// `(MSE_B - MSE_E) / MSE_B`.
    Relative,
}

/// How a group's pairs are combined into one `Δ_v` per window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowAggregation {
    /// Average the pairs' MSEs, then take the improvement.
    #[default]
    MeanMse,
    /// Take each pair's improvement, then average.
    MeanDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSeries {
    pub window_index: Vec<usize>,
    pub delta: Vec<f64>,
    pub mean_delta: f64,
    pub deviation: Vec<f64>,
}

/// Per-window improvement `MSE_B - MSE_E` and its deviation from the mean
/// over windows. Input pairs are `(mse_base, mse_enhanced)`.
pub fn temporal_deviation(window_results: &[(f64, f64)], mode: DeltaMode) -> Result<DeviationSeries> {
    if window_results.is_empty() {
        return Err(Error::input("no windows to compare"));
    }
    Ok(center(window_results.iter().map(|&(b, e)| improvement(b, e, mode)).collect()))
}

fn improvement(b: f64, e: f64, mode: DeltaMode) -> f64 {
    match mode {
        DeltaMode::Absolute => b - e,
        DeltaMode::Relative if b > 0.0 => (b - e) / b,
        DeltaMode::Relative => 0.0,
    }
}

fn center(delta: Vec<f64>) -> DeviationSeries {
    let mean_delta = delta.iter().sum::<f64>() / delta.len() as f64;
    DeviationSeries {
        window_index: (0..delta.len()).collect(),
        deviation: delta.iter().map(|d| d - mean_delta).collect(),
        delta,
        mean_delta,
    }
}

/// Deviation series for one (direction, model, orientation) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDeviation {
    pub direction: Direction,
    pub model: ModelKind,
    pub orientation: Orientation,
    /// First and last date of each window's test block.
    pub test_dates: Vec<(NaiveDate, NaiveDate)>,
    pub series: DeviationSeries,
}

/// Run the grid inside every window, combine each (direction, model,
/// orientation) group's pairs per window, then compute deviations.
pub fn rolling_deviations(
    panel: &AlignedPanel,
    spec: &GridSpec,
    windows: &[Window],
    mode: DeltaMode,
    aggregation: WindowAggregation,
) -> Result<Vec<GroupDeviation>> {
    if windows.is_empty() {
        return Err(Error::input("no windows to compare"));
    }
    type Key = (Direction, ModelKind, Orientation);
    // per window: sum of MSE_B, sum of MSE_E, sum of per-pair deltas, count
    let mut sums: BTreeMap<Key, Vec<(f64, f64, f64, usize)>> = BTreeMap::new();
    for (w_pos, w) in windows.iter().enumerate() {
        let results = run_grid(panel, spec, &PartitionSpec::Window(w.clone()))?;
        for r in results {
            let slots = sums
                .entry((r.direction, r.model, r.orientation))
                .or_insert_with(|| vec![(0.0, 0.0, 0.0, 0); windows.len()]);
            let s = &mut slots[w_pos];
            s.0 += r.mse_base;
            s.1 += r.mse_enhanced;
            s.2 += improvement(r.mse_base, r.mse_enhanced, mode);
            s.3 += 1;
        }
    }
    let test_dates: Vec<(NaiveDate, NaiveDate)> = windows
        .iter()
        .map(|w| (panel.dates[w.test.start], panel.dates[w.test.end - 1]))
        .collect();
    Ok(sums
        .into_iter()
        .map(|((direction, model, orientation), slots)| {
            let delta = slots
                .iter()
                .map(|&(b, e, d, n)| {
                    let n = n.max(1) as f64;
                    match aggregation {
                        WindowAggregation::MeanMse => improvement(b / n, e / n, mode),
                        WindowAggregation::MeanDelta => d / n,
                    }
                })
                .collect();
            GroupDeviation {
                direction,
                model,
                orientation,
                test_dates: test_dates.clone(),
                series: center(delta),
            }
        })
        .collect())
}
