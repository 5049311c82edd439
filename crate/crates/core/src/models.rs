//! Lagged design matrices and the two regressors used for the base/enhanced
//! comparison: least squares and RBF kernel ridge.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Krr,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Krr => "krr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(ModelKind::Linear),
            "krr" => Ok(ModelKind::Krr),
            other => Err(Error::input(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Regression problem for one target, built from lagged values.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub targets: Vec<f64>,
    /// `rows x p`; columns are `y[t-1], .., y[t-L]` and, for the enhanced
    /// design, a final `x[t-L]`.
    pub regressors: DMatrix<f64>,
    pub row_dates: Vec<NaiveDate>,
    pub lag: usize,
    pub enhanced: bool,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn width(&self) -> usize {
        self.regressors.ncols()
    }

    /// The design without its exogenous column.
    pub fn base(&self) -> Design {
        if !self.enhanced {
            return self.clone();
        }
        Design {
            regressors: self.regressors.columns(0, self.lag).into_owned(),
            enhanced: false,
            ..self.clone()
        }
    }

    fn select_rows(&self, rows: &Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let x = self.regressors.rows(rows.start, rows.len()).into_owned();
        let y = DVector::from_column_slice(&self.targets[rows.clone()]);
        (x, y)
    }
}

/// Lagged design for `y`, optionally enhanced with the single predictor `x[t-L]`.
pub fn build_design(y: &FeatureSeries, x: Option<&FeatureSeries>, lag: usize) -> Result<Design> {
    if lag == 0 {
        return Err(Error::input("lag must be at least 1"));
    }
    let n = y.len();
    if n <= lag + 1 {
        return Err(Error::input(format!("series `{}` of length {n} too short for lag {lag}", y.id)));
    }
    if let Some(x) = x {
        if x.dates != y.dates {
            return Err(Error::input(format!("series `{}` and `{}` are on different calendars", y.id, x.id)));
        }
    }
    let rows = n - lag;
    let width = lag + usize::from(x.is_some());
    let regressors = DMatrix::from_fn(rows, width, |r, j| {
        let t = r + lag;
        if j < lag {
            y.values[t - 1 - j]
        } else {
            x.expect("enhanced column requires x").values[t - lag]
        }
    });
    Ok(Design {
        targets: y.values[lag..].to_vec(),
        regressors,
        row_dates: y.dates[lag..].to_vec(),
        lag,
        enhanced: x.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Ridge weight for kernel ridge.
    pub lambda: f64,
    /// RBF width; `None` means `1 / p`.
    pub gamma: Option<f64>,
    /// Z-score regressors with train statistics before kernel ridge.
    pub standardize: bool,
    /// Fit an intercept in the linear model.
    pub intercept: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda: 1.0,
            gamma: None,
            standardize: true,
            intercept: true,
        }
    }
}

/// Per-column z-score learned from training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (mean, scale) = x
            .column_iter()
            .map(|c| {
                let m = c.sum() / n;
                let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                (m, if s > 0.0 { s } else { 1.0 })
            })
            .unzip();
        Scaler { mean, scale }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - self.mean[c]) / self.scale[c])
    }
}

fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let d2: f64 = (0..a.ncols()).map(|k| (a[(i, k)] - b[(j, k)]).powi(2)).sum();
        (-gamma * d2).exp()
    })
}

/// Fitted state of either regressor.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear {
        coefficients: DVector<f64>,
        intercept: f64,
    },
    Krr {
        dual: DVector<f64>,
        train_inputs: DMatrix<f64>,
        gamma: f64,
        scaler: Option<Scaler>,
    },
}

impl FittedModel {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, kind: ModelKind, params: &ModelParams) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::input("empty training set"));
        }
        match kind {
            ModelKind::Linear => fit_linear(x, y, params.intercept),
            ModelKind::Krr => fit_krr(x, y, params),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match self {
            FittedModel::Linear {
                coefficients,
                intercept,
            } => (x * coefficients).iter().map(|v| v + intercept).collect(),
            FittedModel::Krr {
                dual,
                train_inputs,
                gamma,
                scaler,
            } => {
                let x = match scaler {
                    Some(s) => s.apply(x),
                    None => x.clone(),
                };
                (rbf_kernel(&x, train_inputs, *gamma) * dual).iter().copied().collect()
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Linear { .. } => ModelKind::Linear,
            FittedModel::Krr { .. } => ModelKind::Krr,
        }
    }
}

/// Minimum-norm least squares, optionally on centered data with a separate intercept.
fn fit_linear(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Result<FittedModel> {
    let n = x.nrows() as f64;
    let (xc, yc, x_mean, y_mean) = if intercept {
        let x_mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
        let y_mean = y.sum() / n;
        let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - x_mean[c]);
        (xc, y.add_scalar(-y_mean), x_mean, y_mean)
    } else {
        (x.clone(), y.clone(), vec![0.0; x.ncols()], 0.0)
    };
    let svd = xc.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = f64::EPSILON * (x.nrows().max(x.ncols()) as f64) * smax;
    let beta = svd
        .solve(&yc, eps)
        .map_err(|e| Error::numerical(format!("least squares solve failed: {e}")))?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::numerical("least squares produced non-finite coefficients"));
    }
    let b0 = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(FittedModel::Linear {
        coefficients: beta,
        intercept: b0,
    })
}

fn fit_krr(x: &DMatrix<f64>, y: &DVector<f64>, params: &ModelParams) -> Result<FittedModel> {
    if !(params.lambda > 0.0) {
        return Err(Error::config(format!("kernel ridge lambda must be positive, got {}", params.lambda)));
    }
    let gamma = params.gamma.unwrap_or(1.0 / x.ncols().max(1) as f64);
    if !(gamma > 0.0) {
        return Err(Error::config(format!("kernel width gamma must be positive, got {gamma}")));
    }
    let scaler = params.standardize.then(|| Scaler::fit(x));
    let inputs = match &scaler {
        Some(s) => s.apply(x),
        None => x.clone(),
    };
    let mut system = rbf_kernel(&inputs, &inputs, gamma);
    for i in 0..system.nrows() {
        system[(i, i)] += params.lambda;
    }
    let dual = match system.clone().cholesky() {
        Some(ch) => {
            // one step of iterative refinement recovers the last ulp or so
            let a = ch.solve(y);
            let r = y - &system * &a;
            a + ch.solve(&r)
        }
        None => system
            .lu()
            .solve(y)
            .ok_or_else(|| Error::numerical("kernel ridge system is singular"))?,
    };
    if dual.iter().any(|a| !a.is_finite()) {
        return Err(Error::numerical("kernel ridge solve produced non-finite weights"));
    }
    Ok(FittedModel::Krr {
        dual,
        train_inputs: inputs,
        gamma,
        scaler,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FittedModel,
    /// Out-of-sample predictions, in test-row order.
    pub predictions: Vec<f64>,
    pub train_rows: usize,
    pub test_rows: usize,
}

impl FitResult {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }
}

/// Fit on `train` rows of `design` and predict its `test` rows.
pub fn fit_predict(
    design: &Design,
    train: Range<usize>,
    test: Range<usize>,
    kind: ModelKind,
    params: &ModelParams,
) -> Result<FitResult> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::input("train and test row ranges must be non-empty"));
    }
    if train.end > test.start || test.end > design.rows() {
        return Err(Error::input(format!(
            "invalid split: train {train:?}, test {test:?} over {} rows",
            design.rows()
        )));
    }
    let (xt, yt) = design.select_rows(&train);
    let model = FittedModel::fit(&xt, &yt, kind, params)?;
    let (xs, _) = design.select_rows(&test);
    let predictions = model.predict(&xs);
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::numerical("non-finite prediction"));
    }
    Ok(FitResult {
        model,
        predictions,
        train_rows: train.len(),
        test_rows: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn series(id: &str, values: Vec<f64>) -> FeatureSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = start.iter_days().take(values.len()).collect();
        FeatureSeries::new(id, FeatureKind::Auxiliary, dates, values).unwrap()
    }

    #[test]
    fn base_design_by_hand() {
        let d = build_design(&series("y", vec![1.0, 2.0, 3.0, 4.0]), None, 2).unwrap();
        assert_eq!(d.targets, vec![3.0, 4.0]);
        assert_eq!(d.regressors, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 3.0, 2.0]));
        assert!(!d.enhanced);
    }

    #[test]
    fn enhanced_design_adds_single_column() {
        let y = series("y", vec![1.0, 2.0, 3.0, 4.0]);
        let x = series("x", vec![10.0, 20.0, 30.0, 40.0]);
        let d = build_design(&y, Some(&x), 2).unwrap();
        assert_eq!(d.width(), 3);
        assert_eq!(d.regressors.column(2).iter().copied().collect::<Vec<_>>(), vec![10.0, 20.0]);
        assert_eq!(d.base(), build_design(&y, None, 2).unwrap());
    }

    #[test]
    fn design_errors() {
        let y = series("y", vec![1.0, 2.0, 3.0, 4.0]);
        assert!(build_design(&y, None, 0).is_err());
        assert!(build_design(&y, None, 3).is_err());
        let mut x = series("x", vec![1.0; 4]);
        x.dates[0] = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        assert!(build_design(&y, Some(&x), 1).is_err());
    }

    #[test]
    fn linear_exact_line() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let y = DVector::from_column_slice(&[1.0, 3.0, 5.0]);
        let m = FittedModel::fit(&x, &y, ModelKind::Linear, &ModelParams::default()).unwrap();
        let p = m.predict(&DMatrix::from_column_slice(1, 1, &[3.0]));
        assert!((p[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn linear_min_norm_on_duplicate_columns() {
        // y = 2 * x, x duplicated: min-norm splits the weight evenly.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_column_slice(&[2.0, 4.0, 6.0]);
        let params = ModelParams {
            intercept: false,
            ..ModelParams::default()
        };
        let FittedModel::Linear { coefficients, .. } = FittedModel::fit(&x, &y, ModelKind::Linear, &params).unwrap() else {
            unreachable!()
        };
        assert!((coefficients[0] - 1.0).abs() < 1e-10);
        assert!((coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn krr_single_point() {
        let x = DMatrix::from_column_slice(1, 1, &[0.0]);
        let y = DVector::from_column_slice(&[1.0]);
        for gamma in [0.1, 1.0, 7.0] {
            let params = ModelParams {
                lambda: 1.0,
                gamma: Some(gamma),
                standardize: false,
                intercept: false,
            };
            let m = FittedModel::fit(&x, &y, ModelKind::Krr, &params).unwrap();
            assert_eq!(m.predict(&x), vec![0.5]);
        }
    }

    #[test]
    fn krr_rejects_bad_params() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let y = DVector::from_column_slice(&[1.0, 2.0]);
        let params = ModelParams {
            lambda: 0.0,
            ..ModelParams::default()
        };
        assert!(FittedModel::fit(&x, &y, ModelKind::Krr, &params).is_err());
    }

    #[test]
    fn fit_predict_checks_split() {
        let d = build_design(&series("y", (0..20).map(f64::from).collect()), None, 1).unwrap();
        let p = ModelParams::default();
        assert!(fit_predict(&d, 0..0, 10..19, ModelKind::Linear, &p).is_err());
        assert!(fit_predict(&d, 0..12, 10..19, ModelKind::Linear, &p).is_err());
        let r = fit_predict(&d, 0..10, 10..19, ModelKind::Linear, &p).unwrap();
        assert_eq!(r.predictions.len(), 9);
        // y_t = y_{t-1} + 1 is linear in the lag
        assert!((r.predictions[0] - 11.0).abs() < 1e-9);
    }
}
