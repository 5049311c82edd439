//! News features, daily emotion scores and the date-aligned panel.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{parse_date, ArticleRecord, DailyEmbeddingSeries, Orientation, ShockPanel, ShockKind};

/// Column kinds, in panel column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    NewsDistance,
    Emotion,
    Shock,
    Auxiliary,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::NewsDistance => "news_distance",
            FeatureKind::Emotion => "emotion",
            FeatureKind::Shock => "shock",
            FeatureKind::Auxiliary => "auxiliary",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "news_distance" => Ok(FeatureKind::NewsDistance),
            "emotion" => Ok(FeatureKind::Emotion),
            "shock" => Ok(FeatureKind::Shock),
            "auxiliary" => Ok(FeatureKind::Auxiliary),
            other => Err(Error::input(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// How news shifts are paired with trading-day series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeekendMode {
    /// Distances between consecutive calendar days, sampled on the join calendar.
    #[default]
    Calendar,
    /// Distances between consecutive trading days.
    Trading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub id: String,
    pub kind: FeatureKind,
    pub orientation: Option<Orientation>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl FeatureSeries {
    pub fn new(id: impl Into<String>, kind: FeatureKind, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(Error::input(format!("series `{id}`: {} dates but {} values", dates.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("series `{id}`: non-finite value at {}", dates[i])));
        }
        Ok(FeatureSeries {
            id,
            kind,
            orientation: None,
            dates,
            values,
        })
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = Some(orientation);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

fn distances_at(series: &DailyEmbeddingSeries, positions: &[usize]) -> Result<FeatureSeries> {
    if positions.len() < 2 {
        return Err(Error::input(format!(
            "outlet `{}`: need at least two active days for a news feature",
            series.outlet_id
        )));
    }
    let mut dates = Vec::with_capacity(positions.len() - 1);
    let mut values = Vec::with_capacity(positions.len() - 1);
    for w in positions.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        let unchanged = (prev + 1..=cur).all(|t| series.filled_mask[t]);
        let value = if unchanged {
            0.0
        } else {
            cosine_distance(&series.vectors[cur], &series.vectors[prev]).ok_or_else(|| {
                Error::input(format!(
                    "outlet `{}`: zero-norm embedding near day index {cur} ({})",
                    series.outlet_id, series.dates[cur]
                ))
            })?
        };
        dates.push(series.dates[cur]);
        values.push(value);
    }
    Ok(FeatureSeries::new(series.outlet_id.clone(), FeatureKind::NewsDistance, dates, values)?
        .with_orientation(series.orientation))
}

/// Day-to-day cosine distance `1 - cos(E_t, E_{t-1})` of an outlet's daily embeddings.
///
/// The series starts the day after the outlet's first article; forward-filled
/// days are exactly zero.
pub fn news_feature(series: &DailyEmbeddingSeries) -> Result<FeatureSeries> {
    let positions: Vec<usize> = (series.first_active..series.len()).collect();
    distances_at(series, &positions)
}

/// News feature computed between consecutive days of `trading_days` rather
/// than consecutive calendar days. A value is zero when no article appeared
/// since the previous trading day.
pub fn news_feature_trading(series: &DailyEmbeddingSeries, trading_days: &[NaiveDate]) -> Result<FeatureSeries> {
    let index: HashMap<NaiveDate, usize> = series.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let positions: Vec<usize> = trading_days
        .iter()
        .filter_map(|d| index.get(d).copied())
        .filter(|&p| p >= series.first_active)
        .collect();
    distances_at(series, &positions)
}

/// Daily mean probability of `label` across all articles, forward filled over
/// article-free days (zero before the first labelled article).
pub fn emotion_daily(articles: &[ArticleRecord], label: &str, calendar: &[NaiveDate]) -> Result<FeatureSeries> {
    let index: HashMap<NaiveDate, usize> = calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut sums = vec![(0.0, 0usize); calendar.len()];
    for a in articles {
        let Some(p) = a.emotion_probs.as_ref().and_then(|m| m.get(label)) else {
            continue;
        };
        let &day = index
            .get(&a.date)
            .ok_or_else(|| Error::input(format!("article dated {} outside the calendar", a.date)))?;
        sums[day].0 += p;
        sums[day].1 += 1;
    }
    if sums.iter().all(|(_, n)| *n == 0) {
        return Err(Error::input(format!("emotion label `{label}` absent from every article")));
    }
    let mut current = 0.0;
    let values = sums
        .iter()
        .map(|&(s, n)| {
            if n > 0 {
                current = s / n as f64;
            }
            current
        })
        .collect();
    FeatureSeries::new(label, FeatureKind::Emotion, calendar.to_vec(), values)
}

/// Shock panel columns as feature series.
pub fn shock_features(panel: &ShockPanel) -> Vec<FeatureSeries> {
    ShockKind::ALL
        .iter()
        .map(|k| FeatureSeries {
            id: k.as_str().to_string(),
            kind: FeatureKind::Shock,
            orientation: None,
            dates: panel.dates.clone(),
            values: panel.series(*k).to_vec(),
        })
        .collect()
}

/// Read auxiliary indicators from a CSV with a `date` column and one column per indicator.
pub fn load_auxiliary<R: Read>(reader: R) -> Result<Vec<FeatureSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_col = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| Error::input("auxiliary table has no `date` column"))?;
    let names: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let mut dates = Vec::new();
    let mut cols = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        dates.push(parse_date(rec.get(date_col).unwrap_or("")).map_err(|e| Error::input(format!("row {row}: {e}")))?);
        for (k, (c, name)) in names.iter().enumerate() {
            let cell = rec.get(*c).unwrap_or("");
            cols[k].push(
                cell.parse::<f64>()
                    .map_err(|_| Error::input(format!("row {row}: bad `{name}` value `{cell}`")))?,
            );
        }
    }
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("auxiliary dates must be strictly increasing"));
    }
    names
        .into_iter()
        .zip(cols)
        .map(|((_, name), values)| FeatureSeries::new(name, FeatureKind::Auxiliary, dates.clone(), values))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelColumn {
    pub id: String,
    pub kind: FeatureKind,
    pub orientation: Option<Orientation>,
    pub values: Vec<f64>,
}

/// Feature series joined on a common calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    pub dates: Vec<NaiveDate>,
    /// Sorted by kind, then id.
    pub columns: Vec<PanelColumn>,
}

impl AlignedPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, id: &str) -> Option<&PanelColumn> {
        self.columns.iter().find(|c| c.id == id)
    }

    pub fn columns_of(&self, kind: FeatureKind) -> impl Iterator<Item = &PanelColumn> {
        self.columns.iter().filter(move |c| c.kind == kind)
    }

    pub fn series(&self, id: &str) -> Option<FeatureSeries> {
        self.column(id).map(|c| FeatureSeries {
            id: c.id.clone(),
            kind: c.kind,
            orientation: c.orientation,
            dates: self.dates.clone(),
            values: c.values.clone(),
        })
    }

    /// Build a panel from columns that already share `dates`.
    pub fn from_columns(dates: Vec<NaiveDate>, mut columns: Vec<PanelColumn>) -> Result<Self> {
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("panel dates must be strictly increasing"));
        }
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.values.len() != dates.len() {
                return Err(Error::input(format!("panel column `{}` has the wrong length", c.id)));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(Error::input(format!("duplicate panel column `{}`", c.id)));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("panel column `{}` has non-finite values", c.id)));
            }
        }
        columns.sort_by(|a, b| (a.kind, &a.id).cmp(&(b.kind, &b.id)));
        Ok(AlignedPanel { dates, columns })
    }

    /// Panel values as CSV: `date` followed by one column per id.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|c| c.id.clone()));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<panel output>", e))?;
        Ok(())
    }

    /// Column metadata as CSV: `id,kind,orientation`.
    pub fn write_meta_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "kind", "orientation"])?;
        for c in &self.columns {
            w.write_record([c.id.as_str(), c.kind.as_str(), c.orientation.map_or("", Orientation::as_str)])?;
        }
        w.flush().map_err(|e| Error::io("<panel metadata output>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read, M: Read>(values: R, meta: M) -> Result<Self> {
        let mut kinds: BTreeMap<String, (FeatureKind, Option<Orientation>)> = BTreeMap::new();
        let mut mr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(meta);
        for rec in mr.records() {
            let rec = rec?;
            let kind = rec.get(1).unwrap_or("").parse()?;
            let orientation = match rec.get(2).unwrap_or("") {
                "" => None,
                o => Some(o.parse()?),
            };
            kinds.insert(rec.get(0).unwrap_or("").to_string(), (kind, orientation));
        }
        let mut vr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(values);
        let headers = vr.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::input("panel CSV must start with a `date` column"));
        }
        let ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut cols = vec![Vec::new(); ids.len()];
        for (row, rec) in vr.records().enumerate() {
            let rec = rec?;
            dates.push(parse_date(rec.get(0).unwrap_or(""))?);
            for (k, col) in cols.iter_mut().enumerate() {
                let cell = rec.get(k + 1).unwrap_or("");
                col.push(
                    cell.parse::<f64>()
                        .map_err(|_| Error::input(format!("panel row {row}: bad value `{cell}` in `{}`", ids[k])))?,
                );
            }
        }
        let columns = ids
            .into_iter()
            .zip(cols)
            .map(|(id, values)| {
                let (kind, orientation) = *kinds
                    .get(&id)
                    .ok_or_else(|| Error::input(format!("panel column `{id}` missing from metadata")))?;
                Ok(PanelColumn {
                    id,
                    kind,
                    orientation,
                    values,
                })
            })
            .collect::<Result<_>>()?;
        AlignedPanel::from_columns(dates, columns)
    }

    pub fn read_files(values: &Path, meta: &Path) -> Result<Self> {
        let v = std::fs::File::open(values).map_err(|e| Error::io(values, e))?;
        let m = std::fs::File::open(meta).map_err(|e| Error::io(meta, e))?;
        AlignedPanel::read_csv(v, m)
    }
}

/// Join series on the dates present in every one of them.
pub fn align_panel(series: &[FeatureSeries]) -> Result<AlignedPanel> {
    if series.len() < 2 {
        return Err(Error::input("need at least two series to align"));
    }
    let mut common: BTreeSet<NaiveDate> = series[0].dates.iter().copied().collect();
    for s in &series[1..] {
        let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::input("series calendars do not overlap"));
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    let columns = series
        .iter()
        .map(|s| {
            let lookup: HashMap<NaiveDate, f64> = s.dates.iter().copied().zip(s.values.iter().copied()).collect();
            PanelColumn {
                id: s.id.clone(),
                kind: s.kind,
                orientation: s.orientation,
                values: dates.iter().map(|d| lookup[d]).collect(),
            }
        })
        .collect();
    AlignedPanel::from_columns(dates, columns)
}
