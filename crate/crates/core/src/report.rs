//! CSV / JSONL report emission.
//!
//! Files written by [`emit_reports`]:
//!
//! | file | header |
//! |------|--------|
//! | `results.csv` | see [`RESULT_COLUMNS`] |
//! | `table1.csv` | `direction,model,n_tests,n_significant,proportion,binomial_p,significant` |
//! | `per_lag.csv` | `direction,model,orientation,lag,n_tests,n_significant,proportion,binomial_p,star` |
//! | `per_shock.csv` | `direction,model,orientation,shock,n_tests,n_significant,proportion,binomial_p,star` |
//! | `groups.csv` | `grouping,direction,model,orientation,lag,shock,n_tests,n_significant,proportion,binomial_p,significant` |
//! | `bonferroni.csv` | result columns plus `m,threshold` |
//! | `deviations.csv` | `direction,model,orientation,window_index,test_start,test_end,delta,mean_delta,deviation` |
//! | `confounders.jsonl`, `feedback.jsonl` | one JSON record per line |
//!
//! A pair counts as significant in the proportion tables when `p < alpha`;
//! `star` is `*` when the group's binomial p-value is below `alpha`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::causality::inference::GroupKey;
use crate::causality::temporal::GroupDeviation;
use crate::causality::{
    group_results, write_results, ConfounderReport, FeedbackLoop, GroupField, GroupResult, PairResult,
    RESULT_COLUMNS,
};
use crate::error::{Error, Result};

/// Everything the analysis stages produced.
#[derive(Debug, Clone, Default)]
pub struct Reports {
    pub alpha: f64,
    pub results: Vec<PairResult>,
    /// Configured groupings, each tagged with its name (e.g. `orientation+lag`).
    pub groups: Vec<(String, GroupResult)>,
    /// Bonferroni-retained results with their denominator `M`.
    pub selected: Vec<(PairResult, usize)>,
    pub confounders: Vec<ConfounderReport>,
    pub feedback: Vec<FeedbackLoop>,
    pub deviations: Vec<GroupDeviation>,
}

/// Paths of the files written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl ReportBundle {
    pub fn file(&self, name: &str) -> Option<&Path> {
        self.files.iter().map(PathBuf::as_path).find(|p| p.file_name().is_some_and(|f| f == name))
    }
}

/// Name of a grouping, e.g. `orientation+shock`.
pub fn grouping_name(fields: &[GroupField]) -> String {
    if fields.is_empty() {
        return "all".into();
    }
    fields
        .iter()
        .map(|f| match f {
            GroupField::Orientation => "orientation",
            GroupField::Lag => "lag",
            GroupField::Shock => "shock",
        })
        .collect::<Vec<_>>()
        .join("+")
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(BufWriter::new(f))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn key_str(k: &GroupKey) -> [String; 5] {
    [
        k.direction.map(|d| d.as_str().to_string()).unwrap_or_default(),
        k.model.map(|m| m.as_str().to_string()).unwrap_or_default(),
        k.orientation.map(|o| o.as_str().to_string()).unwrap_or_default(),
        opt(&k.lag),
        opt(&k.shock),
    ]
}

fn star(g: &GroupResult) -> &'static str {
    if g.significant {
        "*"
    } else {
        ""
    }
}

fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W, path: &Path) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::input(format!("serializing report: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write every report file into `dir`, creating it if needed.
pub fn emit_reports(reports: &Reports, dir: &Path) -> Result<ReportBundle> {
    if reports.results.is_empty() {
        return Err(Error::input("no results to report"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let alpha = reports.alpha;
    let mut files = Vec::new();

    write_results(&reports.results, create(dir, "results.csv", &mut files)?)?;

    let mut w = csv::Writer::from_writer(create(dir, "table1.csv", &mut files)?);
    w.write_record(["direction", "model", "n_tests", "n_significant", "proportion", "binomial_p", "significant"])?;
    for g in group_results(&reports.results, &[], alpha)? {
        let [d, m, ..] = key_str(&g.key);
        w.write_record([
            d,
            m,
            g.n_tests.to_string(),
            g.n_significant.to_string(),
            g.rho_hat.to_string(),
            g.binomial_p.to_string(),
            g.significant.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("table1.csv"), e))?;

    for (name, field, label) in [
        ("per_lag.csv", GroupField::Lag, "lag"),
        ("per_shock.csv", GroupField::Shock, "shock"),
    ] {
        let mut w = csv::Writer::from_writer(create(dir, name, &mut files)?);
        w.write_record([
            "direction",
            "model",
            "orientation",
            label,
            "n_tests",
            "n_significant",
            "proportion",
            "binomial_p",
            "star",
        ])?;
        for g in group_results(&reports.results, &[GroupField::Orientation, field], alpha)? {
            let [d, m, o, lag, shock] = key_str(&g.key);
            let value = if field == GroupField::Lag { lag } else { shock };
            w.write_record([
                d,
                m,
                o,
                value,
                g.n_tests.to_string(),
                g.n_significant.to_string(),
                g.rho_hat.to_string(),
                g.binomial_p.to_string(),
                star(&g).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join(name), e))?;
    }

    let mut w = csv::Writer::from_writer(create(dir, "groups.csv", &mut files)?);
    w.write_record([
        "grouping",
        "direction",
        "model",
        "orientation",
        "lag",
        "shock",
        "n_tests",
        "n_significant",
        "proportion",
        "binomial_p",
        "significant",
    ])?;
    for (grouping, g) in &reports.groups {
        let [d, m, o, lag, shock] = key_str(&g.key);
        w.write_record([
            grouping.clone(),
            d,
            m,
            o,
            lag,
            shock,
            g.n_tests.to_string(),
            g.n_significant.to_string(),
            g.rho_hat.to_string(),
            g.binomial_p.to_string(),
            g.significant.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("groups.csv"), e))?;

    let mut w = csv::Writer::from_writer(create(dir, "bonferroni.csv", &mut files)?);
    w.write_record(RESULT_COLUMNS.iter().copied().chain(["m", "threshold"]))?;
    for (r, m) in &reports.selected {
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
            m.to_string(),
            (alpha / *m as f64).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("bonferroni.csv"), e))?;

    let mut w = csv::Writer::from_writer(create(dir, "deviations.csv", &mut files)?);
    w.write_record([
        "direction",
        "model",
        "orientation",
        "window_index",
        "test_start",
        "test_end",
        "delta",
        "mean_delta",
        "deviation",
    ])?;
    for g in &reports.deviations {
        let s = &g.series;
        for (i, &v) in s.window_index.iter().enumerate() {
            let (start, end) = g.test_dates.get(i).map(|(a, b)| (a.to_string(), b.to_string())).unwrap_or_default();
            w.write_record([
                g.direction.as_str().to_string(),
                g.model.as_str().to_string(),
                g.orientation.as_str().to_string(),
                v.to_string(),
                start,
                end,
                s.delta[i].to_string(),
                s.mean_delta.to_string(),
                s.deviation[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir.join("deviations.csv"), e))?;

    let path = dir.join("confounders.jsonl");
    write_jsonl(&reports.confounders, create(dir, "confounders.jsonl", &mut files)?, &path)?;
    let path = dir.join("feedback.jsonl");
    write_jsonl(&reports.feedback, create(dir, "feedback.jsonl", &mut files)?, &path)?;

    Ok(ReportBundle {
        out_dir: dir.to_path_buf(),
        files,
    })
}
