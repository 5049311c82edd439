//! End-to-end orchestration: ingest → features → shocks → grid → inference → reports.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;

use crate::causality::inference::{bonferroni_threshold, test_counts};
use crate::causality::{
    confounder_scan, detect_feedback, group_results, make_windows, rolling_deviations, run_grid, GroupDeviation,
    GridSpec, Multiplicity, PairResult, PartitionSpec, ScanConfig,
};
use crate::config::{PipelineConfig, SplitSelection};
use crate::error::{Error, Result};
use crate::features::{
    align_panel, emotion_daily, load_auxiliary, news_feature, news_feature_trading, shock_features, AlignedPanel,
    FeatureSeries, WeekendMode,
};
use crate::ingest::{
    coverage_check, daily_calendar, daily_outlet_embedding, read_articles, read_shocks, select_relevant,
    write_shocks, ArticleRecord, DailyEmbeddingSeries, ShockPanel, TermSet,
};
use crate::provider::EmbeddingProvider;
use crate::report::{emit_reports, grouping_name, ReportBundle, Reports};
use crate::svar::{fit_var, identify_shocks, MarketPanel, SignRestrictions};

/// Relevant articles and the outlets that pass the coverage rule.
#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub articles: Vec<ArticleRecord>,
    pub calendar: Vec<NaiveDate>,
    pub outlets: Vec<DailyEmbeddingSeries>,
    /// Outlets removed for no articles or insufficient coverage.
    pub dropped: Vec<String>,
}

pub fn ingest_stage(cfg: &PipelineConfig) -> Result<IngestOutput> {
    let path = cfg
        .articles
        .as_deref()
        .ok_or_else(|| Error::config("no articles path configured"))?;
    let terms = TermSet::new(cfg.terms.iter())?;
    let parsed = read_articles(path)?;
    for s in &parsed.skipped {
        log::warn!("{}:{}: skipped: {}", path.display(), s.line, s.reason);
    }
    let mut articles = parsed.articles;
    if let Some(url) = &cfg.provider_url {
        let n = EmbeddingProvider::new(url)
            .with_batch_size(cfg.provider_batch_size)
            .embed_missing(&mut articles)?;
        log::info!("fetched {n} embeddings from {url}");
    }
    let articles = select_relevant(&articles, &terms);
    let (Some(start), Some(end)) = (articles.iter().map(|a| a.date).min(), articles.iter().map(|a| a.date).max())
    else {
        return Err(Error::input("no relevant articles"));
    };
    let calendar = daily_calendar(start, end);
    let built = daily_outlet_embedding(&articles, &calendar)?;
    let mut dropped = built.dropped;
    let mut outlets = Vec::new();
    for s in built.series {
        if coverage_check(&s, cfg.coverage_threshold)? {
            outlets.push(s);
        } else {
            log::warn!("dropping outlet `{}`: coverage below {}", s.outlet_id, cfg.coverage_threshold);
            dropped.push(s.outlet_id.clone());
        }
    }
    if outlets.is_empty() {
        return Err(Error::input("no outlet passes the coverage rule"));
    }
    Ok(IngestOutput {
        articles,
        calendar,
        outlets,
        dropped,
    })
}

/// Shock series: read from the shocks CSV, or identified from raw market
/// data when only that is configured. The shocks CSV wins if both are given.
pub fn shock_stage(cfg: &PipelineConfig) -> Result<ShockPanel> {
    match (&cfg.shocks, &cfg.market) {
        (Some(shocks), market) => {
            if market.is_some() {
                log::warn!("both shocks and market inputs configured; using shocks {}", shocks.display());
            }
            read_shocks(shocks)
        }
        (None, Some(market)) => {
            let panel = MarketPanel::read_path(market)?;
            let restrictions = match &cfg.restrictions {
                Some(p) => SignRestrictions::read_path(p)?,
                None => SignRestrictions::default(),
            };
            let model = fit_var(&panel, cfg.var_lag)?;
            let factors = identify_shocks(&model, &restrictions, &cfg.identify_options())?;
            log::info!(
                "accepted rotation after {} draws ({} admissible)",
                factors.draws_tried,
                factors.draws_accepted
            );
            factors.to_shock_panel()
        }
        (None, None) => Err(Error::config("either a shocks or a market path is required")),
    }
}

/// News, emotion, shock and auxiliary series joined on common dates.
pub fn feature_stage(cfg: &PipelineConfig, ingest: &IngestOutput, shocks: &ShockPanel) -> Result<AlignedPanel> {
    let mut series: Vec<FeatureSeries> = Vec::new();
    for s in &ingest.outlets {
        series.push(match cfg.weekend_mode {
            WeekendMode::Calendar => news_feature(s)?,
            WeekendMode::Trading => news_feature_trading(s, &shocks.dates)?,
        });
    }
    for label in &cfg.emotion_labels {
        series.push(emotion_daily(&ingest.articles, label, &ingest.calendar)?);
    }
    series.extend(shock_features(shocks));
    if let Some(path) = &cfg.auxiliary {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        series.extend(load_auxiliary(f)?);
    }
    align_panel(&series)
}

pub fn grid_spec(cfg: &PipelineConfig) -> GridSpec {
    GridSpec {
        lags: cfg.lags.clone(),
        kinds: cfg.model_kinds.clone(),
        params: cfg.model_params(),
        dt: cfg.dt_convention,
        ..GridSpec::default()
    }
}

/// Static-split grid over every news × shock pair.
pub fn grid_stage(cfg: &PipelineConfig, panel: &AlignedPanel) -> Result<Vec<PairResult>> {
    run_grid(panel, &grid_spec(cfg), &PartitionSpec::Static)
}

/// Group tests, Bonferroni selection, feedback detection and, when a panel
/// is available, the confounder scan. Deviations are left empty.
pub fn inference_stage(cfg: &PipelineConfig, results: Vec<PairResult>, panel: Option<&AlignedPanel>) -> Result<Reports> {
    let mut groups = Vec::new();
    for fields in cfg.groupings()? {
        let name = grouping_name(&fields);
        groups.extend(group_results(&results, &fields, cfg.alpha)?.into_iter().map(|g| (name.clone(), g)));
    }
    let m = Multiplicity::Scoped(cfg.bonferroni_scope);
    let selected: Vec<(PairResult, usize)> = results
        .iter()
        .zip(test_counts(&results, m))
        .filter(|(r, c)| r.p_value < bonferroni_threshold(cfg.alpha, *c))
        .map(|(r, c)| (r.clone(), c))
        .collect();
    let feedback = detect_feedback(&results, cfg.alpha, m);
    let confounders = match panel {
        Some(panel) if cfg.confounder_scan && !selected.is_empty() => {
            let pairs: Vec<PairResult> = selected.iter().map(|(r, _)| r.clone()).collect();
            let candidates: Vec<FeatureSeries> = panel.columns.iter().filter_map(|c| panel.series(&c.id)).collect();
            let scan = ScanConfig {
                lags: cfg.lags.clone(),
                params: cfg.model_params(),
                dt: cfg.dt_convention,
                alpha: cfg.alpha,
                partition: PartitionSpec::Static,
            };
            confounder_scan(&pairs, &candidates, panel, &scan)?
        }
        _ => Vec::new(),
    };
    Ok(Reports {
        alpha: cfg.alpha,
        results,
        groups,
        selected,
        confounders,
        feedback,
        deviations: Vec::new(),
    })
}

/// Rolling-window deviations, or nothing when disabled or the panel is too short.
pub fn rolling_stage(cfg: &PipelineConfig, panel: &AlignedPanel) -> Result<Vec<GroupDeviation>> {
    if cfg.split_mode == SplitSelection::Static {
        return Ok(Vec::new());
    }
    if panel.len() < cfg.window_span {
        log::warn!(
            "panel has {} rows, fewer than one {}-row window; skipping rolling analysis",
            panel.len(),
            cfg.window_span
        );
        return Ok(Vec::new());
    }
    let windows = make_windows(panel.len(), &cfg.window_params())?;
    rolling_deviations(panel, &grid_spec(cfg), &windows, cfg.delta_mode, cfg.window_aggregation)
}

/// Grid, inference and rolling analysis on an aligned panel.
pub fn analysis_stage(cfg: &PipelineConfig, panel: &AlignedPanel) -> Result<Reports> {
    let results = grid_stage(cfg, panel).map_err(|e| e.in_stage("grid"))?;
    let mut reports = inference_stage(cfg, results, Some(panel)).map_err(|e| e.in_stage("inference"))?;
    reports.deviations = rolling_stage(cfg, panel).map_err(|e| e.in_stage("rolling"))?;
    Ok(reports)
}

/// Write `panel.csv` and `panel_meta.csv` into `dir`.
pub fn write_panel(panel: &AlignedPanel, dir: &Path) -> Result<()> {
    let p = dir.join("panel.csv");
    panel.write_csv(BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))?;
    let p = dir.join("panel_meta.csv");
    panel.write_meta_csv(BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))
}

/// Run every stage and write all artifacts to `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    if cfg.articles.is_none() {
        return Err(Error::config("no articles path configured"));
    }
    if cfg.shocks.is_none() && cfg.market.is_none() {
        return Err(Error::config("either a shocks or a market path is required"));
    }
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let ingest = ingest_stage(cfg).map_err(|e| e.in_stage("ingest"))?;
    let shocks = shock_stage(cfg).map_err(|e| e.in_stage("svar"))?;
    if cfg.shocks.is_none() {
        let p = out.join("shocks.csv");
        write_shocks(&shocks, BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))?;
    }
    let panel = feature_stage(cfg, &ingest, &shocks).map_err(|e| e.in_stage("features"))?;
    write_panel(&panel, out)?;
    let reports = analysis_stage(cfg, &panel)?;
    let mut bundle = emit_reports(&reports, out).map_err(|e| e.in_stage("report"))?;
    bundle.files.push(out.join("panel.csv"));
    bundle.files.push(out.join("panel_meta.csv"));
    if cfg.shocks.is_none() {
        bundle.files.push(out.join("shocks.csv"));
    }
    Ok(bundle)
}
