//! Synthetic panels with known planted structure, for verification.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AlignedPanel, FeatureKind, PanelColumn};
use crate::ingest::{Orientation, ShockKind, ShockPanel};
use crate::seed;
use crate::svar::{MarketPanel, VARIABLES};

/// Autoregressive coefficient of every generated series.
pub const AR_COEF: f64 = 0.3;
const BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    NullPanel,
    Coupled,
    SvarSystem,
    RegimeSwitch,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "null_panel" => Ok(SyntheticKind::NullPanel),
            "coupled" => Ok(SyntheticKind::Coupled),
            "svar_system" => Ok(SyntheticKind::SvarSystem),
            "regime_switch" => Ok(SyntheticKind::RegimeSwitch),
            other => Err(Error::config(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Linear,
    Quadratic,
}

impl Coupling {
    fn apply(self, v: f64) -> f64 {
        match self {
            Coupling::Linear => v,
            Coupling::Quadratic => v * v,
        }
    }
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Coupling::Linear),
            "quadratic" | "square" => Ok(Coupling::Quadratic),
            other => Err(Error::config(format!("unknown coupling `{other}`"))),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coupling::Linear => "linear",
            Coupling::Quadratic => "quadratic",
        })
    }
}

/// Which way the planted coupling runs between the news and shock series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingDirection {
    /// Shock drives news.
    #[default]
    EconToText,
    /// News drives shock.
    TextToEcon,
    Bidirectional,
}

impl FromStr for CouplingDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "econ_to_text" => Ok(CouplingDirection::EconToText),
            "text_to_econ" => Ok(CouplingDirection::TextToEcon),
            "bidirectional" => Ok(CouplingDirection::Bidirectional),
            other => Err(Error::config(format!("unknown coupling direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub lag: usize,
    pub coupling: Coupling,
    pub strength: f64,
    pub seed: u64,
    /// Series count for `null_panel` (four shocks, the rest news).
    pub n_series: usize,
    pub direction: CouplingDirection,
    /// Add a common driver `confounder` of both coupled series (`coupled` only).
    pub confounder: bool,
    /// Extra independent auxiliary series.
    pub distractors: usize,
    /// Row at which a regime switch turns the coupling on; defaults to `n / 2`.
    pub onset: Option<usize>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            kind: SyntheticKind::Coupled,
            n: 1000,
            lag: 1,
            coupling: Coupling::Linear,
            strength: 1.0,
            seed: 0,
            n_series: 10,
            direction: CouplingDirection::EconToText,
            confounder: false,
            distractors: 0,
            onset: None,
        }
    }
}

/// A planted `source -> target` dependence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub source: String,
    pub target: String,
    pub lag: usize,
    pub coupling: Coupling,
    pub strength: f64,
    /// First row at which the edge is active.
    pub onset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub edges: Vec<PlantedEdge>,
    /// Structural impact matrix for `svar_system`, row-major over `dy2, dy5, dy10, dlogS`.
    pub impact: Option<[[f64; 4]; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub panel: AlignedPanel,
    pub truth: GroundTruth,
}

pub const NEWS_ID: &str = "outlet_0";
pub const SHOCK_ID: &str = "growth";
pub const CONFOUNDER_ID: &str = "confounder";

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 1, 1).expect("valid date")
}

fn dates(n: usize) -> Vec<NaiveDate> {
    start_date().iter_days().take(n).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn ar1(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + BURN_IN {
        v = AR_COEF * v + normal(rng);
        if t >= BURN_IN {
            out.push(v);
        }
    }
    out
}

fn orientation_for(i: usize) -> Orientation {
    Orientation::ALL[i % 3]
}

fn column(id: impl Into<String>, kind: FeatureKind, orientation: Option<Orientation>, values: Vec<f64>) -> PanelColumn {
    PanelColumn {
        id: id.into(),
        kind,
        orientation,
        values,
    }
}

/// Structural impact matrix used by `svar_system`; rows are `dy2, dy5, dy10,
/// dlogS`, columns growth, monetary, common premium, hedging premium.
///
/// Sign restrictions only pin down a set of impact matrices. This one
/// satisfies the default restrictions and sits at the element-wise median of
/// the set they admit for its own covariance `B Bᵀ`, so median rotation
/// selection recovers it.
pub fn default_impact() -> Matrix4<f64> {
    Matrix4::new(
        0.54, 0.96, -0.51, -0.16, //
        0.22, 0.59, -0.72, 0.07, //
        -0.19, 0.19, -0.92, 0.51, //
        0.98, -0.87, -0.68, -0.56,
    )
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::config(format!("strength must be finite and >= 0, got {}", self.strength)));
        }
        let coupled = matches!(self.kind, SyntheticKind::Coupled | SyntheticKind::RegimeSwitch);
        if coupled && self.lag == 0 {
            return Err(Error::config("coupled generators need lag >= 1"));
        }
        if self.confounder && self.kind != SyntheticKind::Coupled {
            return Err(Error::config("a planted confounder requires kind = coupled"));
        }
        if coupled && self.direction == CouplingDirection::Bidirectional && self.coupling == Coupling::Quadratic {
            return Err(Error::config("bidirectional quadratic coupling is explosive"));
        }
        if !coupled && self.direction != CouplingDirection::EconToText {
            return Err(Error::config("a coupling direction only applies to coupled generators"));
        }
        if self.kind == SyntheticKind::NullPanel && self.n_series < 2 {
            return Err(Error::config("null_panel needs at least 2 series"));
        }
        if let Some(onset) = self.onset {
            if self.kind != SyntheticKind::RegimeSwitch || onset >= self.n {
                return Err(Error::config("onset only applies to regime_switch and must lie inside the sample"));
            }
        }
        if self.n < 10 + self.lag {
            return Err(Error::config(format!("n = {} is too short", self.n)));
        }
        Ok(())
    }
}

/// Generate a panel with planted structure. Every planted edge is listed in
/// the returned ground truth.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let (mut columns, edges, impact) = match spec.kind {
        SyntheticKind::NullPanel => (null_columns(spec, &mut rng), Vec::new(), None),
        SyntheticKind::Coupled | SyntheticKind::RegimeSwitch => {
            let (c, e) = coupled_columns(spec, &mut rng);
            (c, e, None)
        }
        SyntheticKind::SvarSystem => {
            let (c, b) = svar_columns(spec, &mut rng);
            (c, Vec::new(), Some(b))
        }
    };
    for k in 0..spec.distractors {
        columns.push(column(format!("noise_{k}"), FeatureKind::Auxiliary, None, ar1(spec.n, &mut rng)));
    }
    Ok(SyntheticPanel {
        panel: AlignedPanel::from_columns(dates(spec.n), columns)?,
        truth: GroundTruth {
            spec: spec.clone(),
            edges,
            impact,
        },
    })
}

fn null_columns(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<PanelColumn> {
    let shocks = 4.min(spec.n_series - 1);
    let news = spec.n_series - shocks;
    let mut cols: Vec<PanelColumn> = (0..news)
        .map(|i| {
            column(
                format!("outlet_{i}"),
                FeatureKind::NewsDistance,
                Some(orientation_for(i)),
                ar1(spec.n, rng),
            )
        })
        .collect();
    cols.extend(
        ShockKind::ALL[..shocks]
            .iter()
            .map(|k| column(k.as_str(), FeatureKind::Shock, None, ar1(spec.n, rng))),
    );
    cols
}

fn coupled_columns(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> (Vec<PanelColumn>, Vec<PlantedEdge>) {
    let n = spec.n;
    let total = n + BURN_IN;
    let onset = match spec.kind {
        SyntheticKind::RegimeSwitch => spec.onset.unwrap_or(n / 2),
        _ => 0,
    };
    let lag = spec.lag;
    let f = |v: f64| spec.coupling.apply(v);
    let (news_driven, shock_driven) = match spec.direction {
        CouplingDirection::EconToText => (true, false),
        CouplingDirection::TextToEcon => (false, true),
        CouplingDirection::Bidirectional => (true, true),
    };

    let mut news = vec![0.0; total];
    let mut shock = vec![0.0; total];
    let mut conf = vec![0.0; total];
    for t in 1..total {
        let strength = if t >= onset + BURN_IN { spec.strength } else { 0.0 };
        if spec.confounder {
            conf[t] = AR_COEF * conf[t - 1] + normal(rng);
        }
        let past = |s: &[f64]| if t >= lag { s[t - lag] } else { 0.0 };
        let mut s = AR_COEF * shock[t - 1] + normal(rng);
        let mut y = AR_COEF * news[t - 1] + normal(rng);
        if shock_driven {
            s += strength * f(past(&news));
        }
        if news_driven {
            y += strength * f(past(&shock));
        }
        if spec.confounder {
            let z = past(&conf);
            s += spec.strength * z;
            y += spec.strength * z;
        }
        shock[t] = s;
        news[t] = y;
    }

    let edge = |source: &str, target: &str| PlantedEdge {
        source: source.into(),
        target: target.into(),
        lag,
        coupling: spec.coupling,
        strength: spec.strength,
        onset,
    };
    let mut edges = Vec::new();
    if news_driven {
        edges.push(edge(SHOCK_ID, NEWS_ID));
    }
    if shock_driven {
        edges.push(edge(NEWS_ID, SHOCK_ID));
    }
    let mut cols = vec![
        column(NEWS_ID, FeatureKind::NewsDistance, Some(Orientation::Left), news[BURN_IN..].to_vec()),
        column(SHOCK_ID, FeatureKind::Shock, None, shock[BURN_IN..].to_vec()),
    ];
    if spec.confounder {
        let mut e = edge(CONFOUNDER_ID, SHOCK_ID);
        e.coupling = Coupling::Linear;
        edges.push(e.clone());
        e.target = NEWS_ID.into();
        edges.push(e);
        cols.push(column(CONFOUNDER_ID, FeatureKind::Auxiliary, None, conf[BURN_IN..].to_vec()));
    }
    (cols, edges)
}

fn svar_columns(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> (Vec<PanelColumn>, [[f64; 4]; 4]) {
    let b = default_impact();
    let a = Matrix4::from_diagonal_element(0.1);
    let total = spec.n + BURN_IN;
    let mut y = Vector4::zeros();
    let mut market = DMatrix::zeros(spec.n, 4);
    let mut shocks = DMatrix::zeros(spec.n, 4);
    for t in 0..total {
        let e = Vector4::from_fn(|_, _| normal(rng));
        y = a * y + b * e;
        if t >= BURN_IN {
            market.set_row(t - BURN_IN, &y.transpose());
            shocks.set_row(t - BURN_IN, &e.transpose());
        }
    }
    let mut cols: Vec<PanelColumn> = VARIABLES
        .iter()
        .enumerate()
        .map(|(k, v)| column(*v, FeatureKind::Auxiliary, None, market.column(k).iter().copied().collect()))
        .collect();
    cols.extend(
        ShockKind::ALL
            .iter()
            .map(|k| column(k.as_str(), FeatureKind::Shock, None, shocks.column(k.index()).iter().copied().collect())),
    );
    let rows = [0, 1, 2, 3].map(|i| [0, 1, 2, 3].map(|j| b[(i, j)]));
    (cols, rows)
}

/// The market columns of a panel (`dy2, dy5, dy10, dlogS`) as a [`MarketPanel`].
pub fn market_panel(panel: &AlignedPanel) -> Result<MarketPanel> {
    let cols: Vec<&PanelColumn> = VARIABLES
        .iter()
        .map(|v| {
            panel
                .column(v)
                .ok_or_else(|| Error::input(format!("panel has no `{v}` column")))
        })
        .collect::<Result<_>>()?;
    let y = DMatrix::from_fn(panel.len(), 4, |r, c| cols[c].values[r]);
    MarketPanel::new(panel.dates.clone(), y)
}

/// Write a small article corpus with shocks, market data and a ready-to-run
/// `config.toml` into `dir`. Returns the config path.
///
/// Three outlets publish on most days; the left outlet's embedding drifts with
/// positive growth shocks two days earlier. Shocks exist on weekdays only.
pub fn write_fixture_corpus(dir: &Path, n_days: usize, seed: u64) -> Result<PathBuf> {
    const DIM: usize = 8;
    let outlets = [
        ("left_daily", Orientation::Left),
        ("center_wire", Orientation::Center),
        ("right_post", Orientation::Right),
    ];
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = seed::rng(seed);
    let days = dates(n_days);
    let shocks: Vec<Vec<f64>> = (0..4).map(|_| ar1(n_days, &mut rng)).collect();

    let mut lines = String::new();
    for (o, (outlet, orientation)) in outlets.iter().enumerate() {
        let mut state = [0.0; DIM];
        state[0] = 3.0;
        for (t, day) in days.iter().enumerate() {
            // the left outlet shifts further after positive growth shocks
            let jolt = if o == 0 && t >= 2 { shocks[0][t - 2].max(0.0) } else { 0.0 };
            for v in state.iter_mut().skip(1) {
                *v = 0.9 * *v + (0.1 + 1.2 * jolt) * normal(&mut rng);
            }
            let count = [0usize, 1, 1, 2][rng.random_range(0..4)];
            for k in 0..count {
                let embedding: Vec<f64> = state.iter().map(|v| v + 0.05 * normal(&mut rng)).collect();
                let relevant = (t + k + o) % 5 != 0;
                let text = if relevant {
                    format!("{outlet}: the economy and inflation outlook, day {t}")
                } else {
                    format!("{outlet}: weekend sports round-up, day {t}")
                };
                let fear = 1.0 / (1.0 + (-state[1]).exp());
                let rec = serde_json::json!({
                    "outlet": outlet,
                    "date": day.to_string(),
                    "orientation": orientation.as_str(),
                    "embedding": embedding,
                    "text": text,
                    "emotion": { "fear": fear, "joy": 1.0 - fear },
                });
                lines.push_str(&rec.to_string());
                lines.push('\n');
            }
        }
    }
    let write = |name: &str, body: &str| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("articles.jsonl", &lines)?;

    let trading: Vec<usize> = (0..n_days)
        .filter(|&t| days[t].weekday().number_from_monday() <= 5)
        .collect();
    let values = [0, 1, 2, 3].map(|k| trading.iter().map(|&t| shocks[k][t]).collect());
    let panel = ShockPanel::new(trading.iter().map(|&t| days[t]).collect(), values)?;
    let mut buf = Vec::new();
    crate::ingest::write_shocks(&panel, &mut buf)?;
    write("shocks.csv", &String::from_utf8_lossy(&buf))?;

    // market data implied by the shocks through the default impact matrix
    let b = default_impact();
    let y = DMatrix::from_fn(trading.len(), 4, |r, c| {
        (0..4).map(|k| b[(c, k)] * shocks[k][trading[r]]).sum::<f64>()
    });
    let market = MarketPanel::new(panel.dates.clone(), y)?;
    let mut buf = Vec::new();
    market.write_csv(&mut buf)?;
    write("market.csv", &String::from_utf8_lossy(&buf))?;

    write(
        "config.toml",
        "articles = \"articles.jsonl\"\n\
         shocks = \"shocks.csv\"\n\
         terms = [\"economy\", \"inflation\"]\n\
         emotion_labels = [\"fear\"]\n\
         lags = [1, 2, 3]\n\
         model_kinds = [\"linear\", \"krr\"]\n\
         out_dir = \"out\"\n",
    )?;
    Ok(dir.join("config.toml"))
}
