//! Base/enhanced out-of-sample comparison and everything built on it.
//!
//! For a target `y` and candidate driver `x`, the base model predicts `y_t`
//! from `y_{t-1..t-L}` and the enhanced model adds `x_{t-L}`. Both are fitted
//! on the training rows and scored on the test rows; a one-sided paired
//! t-test on the per-row loss differential decides whether `x` helps.

pub mod confounders;
pub mod feedback;
pub mod grid;
pub mod inference;
pub mod split;
pub mod temporal;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSeries;
use crate::ingest::Orientation;
use crate::models::{build_design, fit_predict, ModelKind, ModelParams};

pub use confounders::{confounder_scan, ConfounderCategory, ConfounderReport, ScanConfig};
pub use feedback::{detect_feedback, FeedbackLoop};
pub use grid::{run_grid, GridSpec, PartitionSpec};
pub use inference::{
    binomial_group_test, bonferroni_select, group_results, paired_t, BonferroniScope, GroupField, GroupResult,
    Multiplicity, TTest,
};
pub use split::{make_splits, make_static_split, make_windows, RowPartition, Split, SplitMode, SplitPlan, Window, WindowParams};
pub use temporal::{rolling_deviations, temporal_deviation, DeltaMode, DeviationSeries, GroupDeviation, WindowAggregation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `y` = news feature, `x` = market shock.
    EconToText,
    /// `y` = market shock, `x` = news feature.
    TextToEcon,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::EconToText, Direction::TextToEcon];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::EconToText => "econ_to_text",
            Direction::TextToEcon => "text_to_econ",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "econ_to_text" => Ok(Direction::EconToText),
            "text_to_econ" => Ok(Direction::TextToEcon),
            other => Err(Error::input(format!("unknown direction `{other}`"))),
        }
    }
}

/// How the per-row loss differential `d_t` is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtConvention {
    /// `e_B^2 - e_E^2`: a positive mean means lower squared error.
    #[default]
    Squared,
    /// `e_B - e_E` on signed errors.
    Signed,
}

/// Outcome of one base/enhanced comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    /// Per-test-row `d_t`.
    pub differential: Vec<f64>,
    pub mse_base: f64,
    pub mse_enhanced: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub n_test: usize,
    pub degenerate: bool,
}

/// Compare the base and enhanced models for `y` with driver `x` at lag `lag`.
///
/// `rows` indexes design rows, i.e. row `r` predicts `y[r + lag]`.
pub fn evaluate_pair(
    y: &FeatureSeries,
    x: &FeatureSeries,
    lag: usize,
    kind: ModelKind,
    params: &ModelParams,
    rows: &RowPartition,
    dt: DtConvention,
) -> Result<PairEvaluation> {
    let enhanced = build_design(y, Some(x), lag)?;
    let base = enhanced.base();
    let fb = fit_predict(&base, rows.train.clone(), rows.test.clone(), kind, params)?;
    let fe = fit_predict(&enhanced, rows.train.clone(), rows.test.clone(), kind, params)?;
    let truth = &enhanced.targets[rows.test.clone()];
    let eb: Vec<f64> = fb.predictions.iter().zip(truth).map(|(p, y)| p - y).collect();
    let ee: Vec<f64> = fe.predictions.iter().zip(truth).map(|(p, y)| p - y).collect();
    let n = truth.len() as f64;
    let mse_base = eb.iter().map(|e| e * e).sum::<f64>() / n;
    let mse_enhanced = ee.iter().map(|e| e * e).sum::<f64>() / n;
    let d: Vec<f64> = eb
        .iter()
        .zip(&ee)
        .map(|(b, e)| match dt {
            DtConvention::Squared => b * b - e * e,
            DtConvention::Signed => b - e,
        })
        .collect();
    let test = paired_t(&d)?;
    Ok(PairEvaluation {
        differential: d,
        mse_base,
        mse_enhanced,
        t_stat: test.t_stat,
        p_value: test.p_value,
        n_test: truth.len(),
        degenerate: test.degenerate,
    })
}

/// One directed evaluation in a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub direction: Direction,
    pub orientation: Orientation,
    pub outlet: String,
    pub shock: String,
    pub lag: usize,
    pub model: ModelKind,
    pub mse_base: f64,
    pub mse_enhanced: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub n_test: usize,
    pub degenerate: bool,
}

impl PairResult {
    /// Id of the driver series.
    pub fn treatment(&self) -> &str {
        match self.direction {
            Direction::EconToText => &self.shock,
            Direction::TextToEcon => &self.outlet,
        }
    }

    /// Id of the target series.
    pub fn outcome(&self) -> &str {
        match self.direction {
            Direction::EconToText => &self.outlet,
            Direction::TextToEcon => &self.shock,
        }
    }
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "direction",
    "orientation",
    "outlet",
    "shock",
    "lag",
    "model",
    "mse_base",
    "mse_enhanced",
    "t_stat",
    "p_value",
    "n_test",
    "degenerate",
];

pub fn write_results<W: Write>(results: &[PairResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for r in results {
        w.write_record([
            r.direction.as_str().to_string(),
            r.orientation.as_str().to_string(),
            r.outlet.clone(),
            r.shock.clone(),
            r.lag.to_string(),
            r.model.as_str().to_string(),
            r.mse_base.to_string(),
            r.mse_enhanced.to_string(),
            r.t_stat.to_string(),
            r.p_value.to_string(),
            r.n_test.to_string(),
            r.degenerate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results output>", e))?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<PairResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(RESULT_COLUMNS) {
        return Err(Error::input(format!("result table header must be {}", RESULT_COLUMNS.join(","))));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::input(format!("bad {what} `{s}`")))
    };
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            Ok(PairResult {
                direction: f(0).parse()?,
                orientation: f(1).parse()?,
                outlet: f(2).to_string(),
                shock: f(3).to_string(),
                lag: f(4).parse().map_err(|_| Error::input(format!("bad lag `{}`", f(4))))?,
                model: f(5).parse()?,
                mse_base: num(f(6), "mse_base")?,
                mse_enhanced: num(f(7), "mse_enhanced")?,
                t_stat: num(f(8), "t_stat")?,
                p_value: num(f(9), "p_value")?,
                n_test: f(10).parse().map_err(|_| Error::input(format!("bad n_test `{}`", f(10))))?,
                degenerate: f(11).parse().map_err(|_| Error::input(format!("bad flag `{}`", f(11))))?,
            })
        })
        .collect()
}
