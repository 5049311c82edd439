//! Static train/validation/test split and rolling windows.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static temporal split over design rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Rows the models are fitted on.
    pub train: Range<usize>,
    /// Final tenth of the training block; carved out and left unused.
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    /// Training block including validation rows.
    pub fn training_block(&self) -> Range<usize> {
        self.train.start..self.validation.end
    }

    pub fn rows(&self) -> RowPartition {
        RowPartition {
            train: self.train.clone(),
            test: self.test.clone(),
        }
    }
}

/// Rows used for fitting and for out-of-sample evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPartition {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// 70% training block (last tenth held out for validation), 30% test.
pub fn make_static_split(n_rows: usize) -> Result<Split> {
    if n_rows < 20 {
        return Err(Error::input(format!("{n_rows} rows are too few for a static split (need 20)")));
    }
    let block = n_rows * 7 / 10;
    let validation = block / 10;
    Ok(Split {
        train: 0..block - validation,
        validation: block - validation..block,
        test: block..n_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowParams {
    pub span: usize,
    pub test: usize,
    pub step: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            span: 365,
            test: 90,
            step: 180,
        }
    }
}

/// One rolling window over panel rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    pub span: Range<usize>,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

impl Window {
    /// Design rows for a lag-`lag` design built on the same panel: design row
    /// `r` predicts panel row `r + lag`. Targets without enough history are
    /// dropped from the front of the window.
    pub fn design_rows(&self, lag: usize) -> RowPartition {
        let shift = |r: Range<usize>| r.start.saturating_sub(lag)..r.end.saturating_sub(lag);
        RowPartition {
            train: shift(self.train.clone()),
            test: shift(self.test.clone()),
        }
    }
}

/// Windows of `params.span` rows starting every `params.step` rows; the last
/// `params.test` rows of each are the test set.
pub fn make_windows(n_rows: usize, params: &WindowParams) -> Result<Vec<Window>> {
    if params.test == 0 || params.test >= params.span || params.step == 0 {
        return Err(Error::config(format!("invalid window parameters {params:?}")));
    }
    if n_rows < params.span {
        return Err(Error::input(format!(
            "{n_rows} rows are too few for a {}-row window",
            params.span
        )));
    }
    Ok((0..)
        .map(|i| i * params.step)
        .take_while(|s| s + params.span <= n_rows)
        .enumerate()
        .map(|(index, start)| {
            let end = start + params.span;
            Window {
                index,
                span: start..end,
                train: start..end - params.test,
                test: end - params.test..end,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitPlan {
    Static(Split),
    Rolling(Vec<Window>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Static,
    Rolling,
}

pub fn make_splits(n_rows: usize, mode: SplitMode, params: &WindowParams) -> Result<SplitPlan> {
    match mode {
        SplitMode::Static => make_static_split(n_rows).map(SplitPlan::Static),
        SplitMode::Rolling => make_windows(n_rows, params).map(SplitPlan::Rolling),
    }
}
