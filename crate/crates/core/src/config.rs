//! Flat TOML configuration for the pipeline. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causality::split::WindowParams;
use crate::causality::{BonferroniScope, DeltaMode, DtConvention, GroupField, WindowAggregation};
use crate::error::{Error, Result};
use crate::features::WeekendMode;
use crate::models::{ModelKind, ModelParams};
use crate::svar::{IdentifyOptions, RotationSelection};

/// Which evaluation schemes the pipeline runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSelection {
    /// Static 70/30 grid only; the deviation file stays empty.
    Static,
    /// Rolling windows only; the static grid still feeds inference.
    Rolling,
    /// Static grid for inference plus rolling-window deviations.
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// JSON-lines article records.
    pub articles: Option<PathBuf>,
    /// Precomputed shock CSV (`date,growth,monetary,common_premium,hedging_premium`).
    pub shocks: Option<PathBuf>,
    /// Raw market CSV (`date,dy2,dy5,dy10,dlogS`), used when `shocks` is absent.
    pub market: Option<PathBuf>,
    /// Sign-restriction CSV; the built-in matrix is used when absent.
    pub restrictions: Option<PathBuf>,
    /// Extra indicators (`date,<id>...`) offered to the confounder scan.
    pub auxiliary: Option<PathBuf>,

    pub terms: Vec<String>,
    pub weekend_mode: WeekendMode,
    pub coverage_threshold: f64,
    pub emotion_labels: Vec<String>,
    pub provider_url: Option<String>,
    pub provider_batch_size: usize,

    pub lags: Vec<usize>,
    pub model_kinds: Vec<ModelKind>,
    pub krr_lambda: f64,
    pub krr_gamma: Option<f64>,
    pub standardize: bool,
    pub intercept: bool,
    pub dt_convention: DtConvention,

    pub alpha: f64,
    pub bonferroni_scope: BonferroniScope,
    /// Binomial-test groupings, e.g. `"orientation+lag"`.
    pub group_by: Vec<String>,
    pub confounder_scan: bool,

    pub split_mode: SplitSelection,
    pub window_span: usize,
    pub window_test: usize,
    pub window_step: usize,
    pub delta_mode: DeltaMode,
    pub window_aggregation: WindowAggregation,

    pub var_lag: usize,
    pub rotation_budget: usize,
    pub rotation_selection: RotationSelection,
    pub irf_horizon: usize,

    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let w = WindowParams::default();
        PipelineConfig {
            articles: None,
            shocks: None,
            market: None,
            restrictions: None,
            auxiliary: None,
            terms: Vec::new(),
            weekend_mode: WeekendMode::default(),
            coverage_threshold: 0.25,
            emotion_labels: Vec::new(),
            provider_url: None,
            provider_batch_size: 32,
            lags: (1..=10).collect(),
            model_kinds: vec![ModelKind::Linear, ModelKind::Krr],
            krr_lambda: 1.0,
            krr_gamma: None,
            standardize: true,
            intercept: true,
            dt_convention: DtConvention::default(),
            alpha: 0.05,
            bonferroni_scope: BonferroniScope::default(),
            group_by: vec!["orientation".into(), "orientation+lag".into(), "orientation+shock".into()],
            confounder_scan: true,
            split_mode: SplitSelection::default(),
            window_span: w.span,
            window_test: w.test,
            window_step: w.step,
            delta_mode: DeltaMode::default(),
            window_aggregation: WindowAggregation::default(),
            var_lag: 5,
            rotation_budget: 10_000,
            rotation_selection: RotationSelection::default(),
            irf_horizon: 0,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

pub fn parse_group_fields(spec: &str) -> Result<Vec<GroupField>> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "all" {
        return Ok(Vec::new());
    }
    spec.split('+')
        .map(|f| match f.trim() {
            "orientation" => Ok(GroupField::Orientation),
            "lag" => Ok(GroupField::Lag),
            "shock" => Ok(GroupField::Shock),
            other => Err(Error::config(format!("unknown grouping field `{other}`"))),
        })
        .collect()
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Load a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.articles);
        fix(&mut self.shocks);
        fix(&mut self.market);
        fix(&mut self.restrictions);
        fix(&mut self.auxiliary);
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
    }

    /// Check invariants: referenced paths exist, lags non-empty and positive,
    /// `alpha` in (0, 1), and numeric knobs in range.
    pub fn validate(&self) -> Result<()> {
        for (key, path) in [
            ("articles", &self.articles),
            ("shocks", &self.shocks),
            ("market", &self.market),
            ("restrictions", &self.restrictions),
            ("auxiliary", &self.auxiliary),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::config(format!("{key} path {} does not exist", p.display())));
                }
            }
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(Error::config("lags must be a non-empty list of positive integers"));
        }
        if self.model_kinds.is_empty() {
            return Err(Error::config("model_kinds must not be empty"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return Err(Error::config(format!("coverage_threshold {} not in (0, 1]", self.coverage_threshold)));
        }
        if !(self.krr_lambda > 0.0) || self.krr_gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::config("krr_lambda and krr_gamma must be positive"));
        }
        if self.provider_batch_size == 0 {
            return Err(Error::config("provider_batch_size must be positive"));
        }
        if self.window_test == 0 || self.window_test >= self.window_span || self.window_step == 0 {
            return Err(Error::config("need 0 < window_test < window_span and window_step > 0"));
        }
        if self.var_lag == 0 || self.rotation_budget == 0 {
            return Err(Error::config("var_lag and rotation_budget must be positive"));
        }
        for g in &self.group_by {
            parse_group_fields(g)?;
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            lambda: self.krr_lambda,
            gamma: self.krr_gamma,
            standardize: self.standardize,
            intercept: self.intercept,
        }
    }

    pub fn window_params(&self) -> WindowParams {
        WindowParams {
            span: self.window_span,
            test: self.window_test,
            step: self.window_step,
        }
    }

    pub fn identify_options(&self) -> IdentifyOptions {
        IdentifyOptions {
            budget: self.rotation_budget,
            seed: self.seed,
            horizon: self.irf_horizon,
            selection: self.rotation_selection,
        }
    }

    pub fn groupings(&self) -> Result<Vec<Vec<GroupField>>> {
        self.group_by.iter().map(|g| parse_group_fields(g)).collect()
    }
}
