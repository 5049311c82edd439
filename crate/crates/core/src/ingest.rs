//! Article, embedding and shock inputs.
//!
//! Articles arrive as line-delimited JSON. Each line carries `outlet`,
//! `date`, `orientation` and at least one of `embedding`,
//! `chunk_embeddings` or `text`, plus an optional `emotion` map. Shocks
//! arrive as CSV with header `date,growth,monetary,common_premium,hedging_premium`
//! in any column order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Left,
    Center,
    Right,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::Left, Orientation::Center, Orientation::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Left => "left",
            Orientation::Center => "center",
            Orientation::Right => "right",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Orientation::Left),
            "center" | "centre" => Ok(Orientation::Center),
            "right" => Ok(Orientation::Right),
            other => Err(Error::input(format!("unknown orientation `{other}`"))),
        }
    }
}

/// Parse an ISO-8601 calendar day. Full timestamps are truncated to their date.
pub fn parse_date(s: &str) -> Result<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.date_naive());
    }
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.date());
    }
    Err(Error::input(format!("unparseable date `{s}`")))
}

/// Every calendar day from `start` to `end` inclusive.
pub fn daily_calendar(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start.iter_days().take_while(|d| *d <= end).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArticleRecord {
    pub outlet_id: String,
    pub date: NaiveDate,
    pub orientation: Orientation,
    pub embedding: Option<Vec<f64>>,
    pub chunk_embeddings: Option<Vec<Vec<f64>>>,
    pub emotion_probs: Option<BTreeMap<String, f64>>,
    pub text: Option<String>,
    /// Set when the record carried no text and so could not be term-filtered here.
    pub prefiltered: bool,
}

impl ArticleRecord {
    /// The article vector: its embedding, or the mean of its chunk embeddings.
    pub fn article_vector(&self) -> Option<Vec<f64>> {
        if let Some(e) = &self.embedding {
            return Some(e.clone());
        }
        let chunks = self.chunk_embeddings.as_ref()?;
        mean_of(chunks.iter().map(Vec::as_slice))
    }

    fn dimension(&self) -> Option<usize> {
        self.embedding
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.chunk_embeddings.as_ref().and_then(|c| c.first()).map(Vec::len))
    }
}

fn mean_of<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
    let mut sum: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for v in vectors {
        match &mut sum {
            None => sum = Some(v.to_vec()),
            Some(s) => s.iter_mut().zip(v).for_each(|(a, b)| *a += b),
        }
        n += 1;
    }
    sum.map(|mut s| {
        s.iter_mut().for_each(|a| *a /= n as f64);
        s
    })
}

#[derive(Debug, Deserialize)]
struct RawArticle {
    outlet: Option<String>,
    date: Option<String>,
    orientation: Option<String>,
    embedding: Option<Vec<f64>>,
    chunk_embeddings: Option<Vec<Vec<f64>>>,
    text: Option<String>,
    emotion: Option<BTreeMap<String, f64>>,
}

/// A record that was rejected during parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedArticles {
    pub articles: Vec<ArticleRecord>,
    pub skipped: Vec<SkippedRecord>,
}

impl ParsedArticles {
    pub fn dimension(&self) -> Option<usize> {
        self.articles.iter().find_map(ArticleRecord::dimension)
    }
}

fn validate_raw(raw: RawArticle) -> std::result::Result<ArticleRecord, String> {
    let outlet_id = raw
        .outlet
        .filter(|o| !o.trim().is_empty())
        .ok_or("missing outlet")?;
    let date = parse_date(raw.date.as_deref().ok_or("missing date")?).map_err(|e| e.to_string())?;
    let orientation: Orientation = raw
        .orientation
        .as_deref()
        .ok_or("missing orientation")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    let chunk_embeddings = raw.chunk_embeddings.filter(|c| !c.is_empty());
    if raw.embedding.is_none() && chunk_embeddings.is_none() && raw.text.is_none() {
        return Err("record has none of embedding, chunk_embeddings, text".into());
    }
    if let Some(emotion) = &raw.emotion {
        if let Some((label, p)) = emotion.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(format!("emotion probability {label}={p} outside [0, 1]"));
        }
    }
    let all_finite = raw.embedding.iter().flatten().all(|v| v.is_finite())
        && chunk_embeddings.iter().flatten().flatten().all(|v| v.is_finite());
    if !all_finite {
        return Err("non-finite embedding value".into());
    }
    Ok(ArticleRecord {
        outlet_id,
        date,
        orientation,
        embedding: raw.embedding,
        chunk_embeddings,
        emotion_probs: raw.emotion,
        text: raw.text,
        prefiltered: false,
    })
}

/// Parse line-delimited article records.
///
/// Malformed lines and records without any content field are skipped and
/// reported; a vector whose dimension disagrees with the first one seen is
/// fatal.
pub fn parse_articles<R: BufRead>(reader: R) -> Result<ParsedArticles> {
    let mut out = ParsedArticles::default();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::input(format!("article stream unreadable at line {line_no}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawArticle>(&line)
            .map_err(|e| e.to_string())
            .and_then(validate_raw);
        let record = match parsed {
            Ok(r) => r,
            Err(reason) => {
                log::warn!("skipping article at line {line_no}: {reason}");
                out.skipped.push(SkippedRecord { line: line_no, reason });
                continue;
            }
        };
        let dims = record
            .embedding
            .iter()
            .map(Vec::len)
            .chain(record.chunk_embeddings.iter().flatten().map(Vec::len));
        for d in dims {
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(Error::input(format!(
                        "dimension mismatch at line {line_no}: expected {expected}, found {d}"
                    )))
                }
                Some(_) => {}
            }
        }
        out.articles.push(record);
    }
    Ok(out)
}

pub fn read_articles(path: &Path) -> Result<ParsedArticles> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_articles(std::io::BufReader::new(file))
}

/// Lowercase search terms (single words or multi-word phrases).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSet {
    terms: BTreeSet<String>,
}

impl TermSet {
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(Error::config("term set is empty"));
        }
        Ok(TermSet { terms })
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Whole-word, case-insensitive match of any term in `text`.
    pub fn matches(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        let words = tokenize(&lower);
        self.terms.iter().any(|term| {
            let phrase = tokenize(term);
            !phrase.is_empty() && words.windows(phrase.len()).any(|w| w == phrase.as_slice())
        })
    }
}

fn tokenize(s: &str) -> Vec<&str> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Keep articles whose text mentions at least one term.
///
/// Records without text are assumed to have been filtered upstream; they are
/// kept and marked `prefiltered`.
pub fn select_relevant(articles: &[ArticleRecord], terms: &TermSet) -> Vec<ArticleRecord> {
    articles
        .iter()
        .filter_map(|a| match &a.text {
            Some(text) => terms.matches(text).then(|| a.clone()),
            None => Some(ArticleRecord {
                prefiltered: true,
                ..a.clone()
            }),
        })
        .collect()
}

/// Per-outlet mean embedding for every day of a calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyEmbeddingSeries {
    pub outlet_id: String,
    pub orientation: Orientation,
    pub dates: Vec<NaiveDate>,
    pub vectors: Vec<Vec<f64>>,
    pub article_counts: Vec<usize>,
    /// True where the row was carried over from an earlier day (or, before
    /// the first active day, copied back from it).
    pub filled_mask: Vec<bool>,
    /// Index of the first day with at least one article.
    pub first_active: usize,
}

impl DailyEmbeddingSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn active_days(&self) -> usize {
        self.article_counts.iter().filter(|&&c| c > 0).count()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OutletSeries {
    pub series: Vec<DailyEmbeddingSeries>,
    /// Outlets without a single article on the calendar.
    pub dropped: Vec<String>,
}

/// Build daily outlet embeddings over `calendar`.
///
/// Each article contributes one vector (its embedding or its chunk mean). A
/// day with articles gets their mean; a day without carries the previous
/// day forward. Days before an outlet's first article reuse the first
/// available embedding and are flagged as filled.
pub fn daily_outlet_embedding(articles: &[ArticleRecord], calendar: &[NaiveDate]) -> Result<OutletSeries> {
    if calendar.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("calendar must be strictly increasing"));
    }
    let index: BTreeMap<NaiveDate, usize> = calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    struct Acc {
        orientation: Orientation,
        sums: BTreeMap<usize, (Vec<f64>, usize)>,
    }
    let mut outlets: BTreeMap<&str, Acc> = BTreeMap::new();
    for a in articles {
        let &day = index
            .get(&a.date)
            .ok_or_else(|| Error::input(format!("article dated {} outside the calendar", a.date)))?;
        let v = a.article_vector().ok_or_else(|| {
            Error::input(format!(
                "article from `{}` on {} has no embedding; configure an embedding provider",
                a.outlet_id, a.date
            ))
        })?;
        let acc = outlets.entry(&a.outlet_id).or_insert_with(|| Acc {
            orientation: a.orientation,
            sums: BTreeMap::new(),
        });
        if acc.orientation != a.orientation {
            return Err(Error::input(format!(
                "outlet `{}` has conflicting orientations {} and {}",
                a.outlet_id, acc.orientation, a.orientation
            )));
        }
        match acc.sums.get_mut(&day) {
            Some((sum, n)) => {
                if sum.len() != v.len() {
                    return Err(Error::input(format!("dimension mismatch for outlet `{}`", a.outlet_id)));
                }
                sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
                *n += 1;
            }
            None => {
                acc.sums.insert(day, (v, 1));
            }
        }
    }

    let mut out = OutletSeries::default();
    for (outlet, acc) in outlets {
        let Some((&first_active, (first_sum, first_n))) = acc.sums.iter().next() else {
            log::warn!("dropping outlet `{outlet}`: no articles on the calendar");
            out.dropped.push(outlet.to_string());
            continue;
        };
        let first_mean: Vec<f64> = first_sum.iter().map(|s| s / *first_n as f64).collect();
        let mut vectors = Vec::with_capacity(calendar.len());
        let mut counts = Vec::with_capacity(calendar.len());
        let mut filled = Vec::with_capacity(calendar.len());
        let mut current = first_mean;
        for day in 0..calendar.len() {
            match acc.sums.get(&day) {
                Some((sum, n)) => {
                    current = sum.iter().map(|s| s / *n as f64).collect();
                    counts.push(*n);
                    filled.push(false);
                }
                None => {
                    counts.push(0);
                    filled.push(true);
                }
            }
            vectors.push(current.clone());
        }
        out.series.push(DailyEmbeddingSeries {
            outlet_id: outlet.to_string(),
            orientation: acc.orientation,
            dates: calendar.to_vec(),
            vectors,
            article_counts: counts,
            filled_mask: filled,
            first_active,
        });
    }
    Ok(out)
}

/// True iff the fraction of days with at least one article reaches `threshold`.
pub fn coverage_check(series: &DailyEmbeddingSeries, threshold: f64) -> Result<bool> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::config(format!("coverage threshold {threshold} not in (0, 1]")));
    }
    if series.is_empty() {
        return Err(Error::input(format!("series for `{}` is empty", series.outlet_id)));
    }
    // Tolerance absorbs rounding in threshold * len at the boundary.
    let active = series.active_days() as f64;
    Ok(active >= threshold * series.len() as f64 - 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    Growth,
    Monetary,
    CommonPremium,
    HedgingPremium,
}

impl ShockKind {
    pub const ALL: [ShockKind; 4] = [
        ShockKind::Growth,
        ShockKind::Monetary,
        ShockKind::CommonPremium,
        ShockKind::HedgingPremium,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShockKind::Growth => "growth",
            ShockKind::Monetary => "monetary",
            ShockKind::CommonPremium => "common_premium",
            ShockKind::HedgingPremium => "hedging_premium",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ShockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShockKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::input(format!("unknown shock `{s}`")))
    }
}

/// The four daily structural shock series.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockPanel {
    pub dates: Vec<NaiveDate>,
    /// Indexed by [`ShockKind::index`].
    pub values: [Vec<f64>; 4],
}

impl ShockPanel {
    pub fn new(dates: Vec<NaiveDate>, values: [Vec<f64>; 4]) -> Result<Self> {
        if values.iter().any(|v| v.len() != dates.len()) {
            return Err(Error::input("shock series lengths differ from the date column"));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::input(format!(
                "shock dates must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        for (k, v) in ShockKind::ALL.iter().zip(&values) {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::input(format!("non-finite {k} shock at row {i}")));
            }
        }
        Ok(ShockPanel { dates, values })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn series(&self, kind: ShockKind) -> &[f64] {
        &self.values[kind.index()]
    }
}

/// Read a shock CSV, mapping columns by header name.
pub fn load_shocks<R: Read>(reader: R) -> Result<ShockPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::input(format!("shock table is missing column `{name}`")))
    };
    let date_col = column("date")?;
    let cols: Vec<usize> = ShockKind::ALL
        .iter()
        .map(|k| column(k.as_str()))
        .collect::<Result<_>>()?;

    let mut dates = Vec::new();
    let mut values: [Vec<f64>; 4] = Default::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = parse_date(rec.get(date_col).unwrap_or(""))
            .map_err(|e| Error::input(format!("row {row}: {e}")))?;
        if let Some(prev) = dates.last() {
            if *prev == date {
                return Err(Error::input(format!("duplicate shock date {date} at row {row}")));
            }
        }
        dates.push(date);
        for (k, &c) in cols.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::input(format!("row {row}: unparseable {} value `{cell}`", ShockKind::ALL[k])))?;
            if !v.is_finite() {
                return Err(Error::input(format!("row {row}: non-finite {} value", ShockKind::ALL[k])));
            }
            values[k].push(v);
        }
    }
    ShockPanel::new(dates, values)
}

pub fn read_shocks(path: &Path) -> Result<ShockPanel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_shocks(file)
}

/// Write a shock panel in the same layout [`load_shocks`] reads.
pub fn write_shocks<W: Write>(panel: &ShockPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date"];
    header.extend(ShockKind::ALL.iter().map(|k| k.as_str()));
    w.write_record(&header)?;
    for (i, d) in panel.dates.iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(panel.values.iter().map(|v| v[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<shock output>", e))?;
    Ok(())
}
