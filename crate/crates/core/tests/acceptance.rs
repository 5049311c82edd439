//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`harness = false`) so the lines are always printed. Set
//! `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use narrashock::causality::{
    binomial_group_test, detect_feedback, evaluate_pair, make_splits, make_static_split, paired_t,
    rolling_deviations, run_grid, confounder_scan, bonferroni_select, DeltaMode, Direction, DtConvention,
    GridSpec, Multiplicity, PartitionSpec, ScanConfig, SplitMode, SplitPlan, WindowAggregation, WindowParams,
};
use narrashock::config::PipelineConfig;
use narrashock::features::news_feature;
use narrashock::ingest::{daily_calendar, daily_outlet_embedding, ArticleRecord, Orientation};
use narrashock::models::{FittedModel, ModelKind, ModelParams};
use narrashock::pipeline::run_pipeline;
use narrashock::svar::{correlation, column, fit_var, identify_shocks, IdentifyOptions, RotationSelection, SignRestrictions};
use narrashock::synth::{
    self, gen_synthetic, market_panel, Coupling, CouplingDirection, SyntheticKind, SyntheticSpec, CONFOUNDER_ID,
    NEWS_ID, SHOCK_ID,
};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
}

fn ols_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(11);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let p = 1 + case % 5;
        let n = p + 3 + (case * 7) % (48 - p);
        let x = random_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let test = random_matrix(&mut rng, 10, p);
        for intercept in [false, true] {
            let params = ModelParams {
                intercept,
                ..ModelParams::default()
            };
            let m = FittedModel::fit(&to_dmatrix(&x), &DVector::from_vec(y.clone()), ModelKind::Linear, &params)
                .expect("fit");
            let got = m.predict(&to_dmatrix(&test));
            worst = worst.max(max_abs_diff(&got, &ols_predict(&x, &y, &test, intercept)));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && elapsed < Duration::from_secs(5),
        format!("100 instances, max |Δ| = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn krr_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(12);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let p = 1 + case % 4;
        let n = 1 + (case * 13) % 40;
        let x = random_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let test = random_matrix(&mut rng, 8, p);
        let lambda = [1.0, 0.1, 3.0][case % 3];
        let gamma = 1.0 / p as f64;
        for scaled in [false, true] {
            let params = ModelParams {
                lambda,
                gamma: None,
                standardize: scaled,
                intercept: false,
            };
            let m = FittedModel::fit(&to_dmatrix(&x), &DVector::from_vec(y.clone()), ModelKind::Krr, &params)
                .expect("fit");
            let got = m.predict(&to_dmatrix(&test));
            let want = if scaled {
                krr_predict(&standardize(&x, &x), &y, &standardize(&x, &test), lambda, gamma)
            } else {
                krr_predict(&x, &y, &test, lambda, gamma)
            };
            worst = worst.max(max_abs_diff(&got, &want));
        }
    }
    let single = FittedModel::fit(
        &DMatrix::from_element(1, 1, 0.0),
        &DVector::from_element(1, 1.0),
        ModelKind::Krr,
        &ModelParams {
            standardize: false,
            ..ModelParams::default()
        },
    )
    .expect("fit")
    .predict(&DMatrix::from_element(1, 1, 0.0))[0];
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && single == 0.5 && elapsed < Duration::from_secs(10),
        format!("100 instances, max |Δ| = {worst:.2e}, single point = {single}, {elapsed:.2?}"),
    )
}

fn news_feature_oracle() -> Outcome {
    let mut rng = rng(13);
    let start = NaiveDate::from_ymd_opt(2015, 3, 1).unwrap();
    let calendar = daily_calendar(start, start + chrono::Days::new(199));
    let mut worst: f64 = 0.0;
    let mut filled_ok = true;
    let mut in_range = true;
    let mut checked = 0;
    for outlet in 0..20 {
        let dim = 3 + outlet % 6;
        let mut articles = Vec::new();
        // per-day article vectors, for the oracle
        let mut by_day: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
        for (t, &day) in calendar.iter().enumerate() {
            if t < 5 + outlet || rng.random_range(0.0..1.0) < 0.4 {
                continue;
            }
            for _ in 0..rng.random_range(1..4) {
                let v: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
                by_day.entry(t).or_default().push(v.clone());
                articles.push(ArticleRecord {
                    outlet_id: format!("o{outlet}"),
                    date: day,
                    orientation: Orientation::Center,
                    embedding: Some(v),
                    chunk_embeddings: None,
                    emotion_probs: None,
                    text: None,
                    prefiltered: true,
                });
            }
        }
        let series = daily_outlet_embedding(&articles, &calendar).expect("embedding").series;
        let f = news_feature(&series[0]).expect("feature");
        // oracle: daily means carried forward
        let mean = |vs: &Vec<Vec<f64>>| -> Vec<f64> {
            (0..dim).map(|k| vs.iter().map(|v| v[k]).sum::<f64>() / vs.len() as f64).collect()
        };
        let first = *by_day.keys().next().unwrap();
        let mut current = mean(&by_day[&first]);
        for t in first + 1..calendar.len() {
            let value = f.values[t - first - 1];
            assert_eq!(f.dates[t - first - 1], calendar[t]);
            in_range &= (0.0..=2.0).contains(&value);
            match by_day.get(&t) {
                Some(vs) => {
                    let m = mean(vs);
                    worst = worst.max((value - cosine_distance(&m, &current)).abs());
                    current = m;
                    checked += 1;
                }
                None => filled_ok &= value == 0.0,
            }
        }
    }
    outcome(
        worst < 1e-12 && filled_ok && in_range,
        format!("{checked} active days, max |Δ| = {worst:.2e}, filled days exactly 0: {filled_ok}, all in [0, 2]: {in_range}"),
    )
}

fn t_test_oracle() -> Outcome {
    let r = paired_t(&[1.0, 2.0, 3.0]).expect("t");
    let p_exact = 1.0 - t2_cdf(2.0 * 3f64.sqrt());
    let zero = paired_t(&[0.0, 0.0, 0.0]).expect("t");
    let pos = paired_t(&[0.7, 0.7, 0.7]).expect("t");
    let too_short = paired_t(&[1.0]).is_err();
    let pass = (r.t_stat - 3.4641).abs() < 1e-4
        && (r.p_value - 0.0371).abs() < 1e-4
        && (r.p_value - p_exact).abs() < 1e-10
        && zero.degenerate
        && zero.p_value == 1.0
        && pos.degenerate
        && pos.p_value == 0.0
        && too_short;
    outcome(
        pass,
        format!(
            "t = {:.4}, p = {:.4} (closed form {:.4}); [0,0,0] → p = {}; [c,c,c] → p = {}; T < 2 rejected: {too_short}",
            r.t_stat, r.p_value, p_exact, zero.p_value, pos.p_value
        ),
    )
}

fn binomial_oracle() -> Outcome {
    let mut ps = vec![0.5; 20];
    ps[..3].fill(0.01);
    let g = binomial_group_test(&ps, 0.05).expect("binomial");
    let exact = binomial_tail(20, 3, 0.05);
    let none = binomial_group_test(&[0.5; 20], 0.05).expect("binomial");
    let pass = (g.binomial_p - 0.0755).abs() < 1e-4 && (g.binomial_p - exact).abs() < 1e-12 && !g.significant && none.binomial_p == 1.0;
    outcome(
        pass,
        format!("N = 20, k = 3 → p = {:.4} (exact sum {exact:.6}); k = 0 → p = {}", g.binomial_p, none.binomial_p),
    )
}

fn pair_p(spec: &SyntheticSpec, lag: usize, kind: ModelKind, direction: Direction) -> f64 {
    let s = gen_synthetic(spec).expect("synthetic");
    let news = s.panel.columns.iter().find(|c| c.kind == narrashock::features::FeatureKind::NewsDistance).unwrap();
    let shock = s.panel.columns.iter().find(|c| c.kind == narrashock::features::FeatureKind::Shock).unwrap();
    let (y, x) = match direction {
        Direction::EconToText => (&news.id, &shock.id),
        Direction::TextToEcon => (&shock.id, &news.id),
    };
    let y = s.panel.series(y).unwrap();
    let x = s.panel.series(x).unwrap();
    let rows = make_static_split(s.panel.len() - lag).unwrap().rows();
    evaluate_pair(&y, &x, lag, kind, &ModelParams::default(), &rows, DtConvention::Squared)
        .expect("evaluate")
        .p_value
}

fn null_calibration() -> Outcome {
    let start = Instant::now();
    let hits = (0..1000u64)
        .filter(|&seed| {
            let spec = SyntheticSpec {
                kind: SyntheticKind::NullPanel,
                n: 500,
                n_series: 2,
                seed,
                ..SyntheticSpec::default()
            };
            pair_p(&spec, 1, ModelKind::Linear, Direction::EconToText) < 0.05
        })
        .count();
    let rate = hits as f64 / 1000.0;
    let elapsed = start.elapsed();
    outcome(
        (0.032..=0.068).contains(&rate) && elapsed < Duration::from_secs(300),
        format!("{hits}/1000 pairs with p < 0.05 (rate {rate:.3}), {elapsed:.2?}"),
    )
}

fn power() -> Outcome {
    let mut detected = 0;
    let mut argmin_ok = 0;
    for seed in 0..200u64 {
        let s = gen_synthetic(&SyntheticSpec {
            n: 800,
            lag: 3,
            strength: 1.0,
            seed,
            ..SyntheticSpec::default()
        })
        .expect("synthetic");
        let spec = GridSpec {
            lags: (1..=10).collect(),
            directions: vec![Direction::EconToText],
            ..GridSpec::default()
        };
        let results = run_grid(&s.panel, &spec, &PartitionSpec::Static).expect("grid");
        let at3 = results.iter().find(|r| r.lag == 3).unwrap();
        if at3.p_value < 0.05 {
            detected += 1;
            let best = results.iter().min_by(|a, b| a.p_value.total_cmp(&b.p_value)).unwrap();
            if best.lag == 3 {
                argmin_ok += 1;
            }
        }
    }
    let rate = detected as f64 / 200.0;
    let lag_rate = argmin_ok as f64 / detected.max(1) as f64;
    outcome(
        rate >= 0.9 && lag_rate >= 0.8,
        format!("detected {detected}/200 ({rate:.3}); argmin-p lag = 3 in {argmin_ok}/{detected} ({lag_rate:.3})"),
    )
}

fn krr_vs_linear() -> Outcome {
    let mut hits = [0usize; 2];
    for seed in 0..200u64 {
        let spec = SyntheticSpec {
            n: 500,
            lag: 1,
            coupling: Coupling::Quadratic,
            strength: 0.5,
            seed,
            ..SyntheticSpec::default()
        };
        for (i, kind) in [ModelKind::Linear, ModelKind::Krr].into_iter().enumerate() {
            if pair_p(&spec, 1, kind, Direction::EconToText) < 0.05 {
                hits[i] += 1;
            }
        }
    }
    let (lin, krr) = (hits[0] as f64 / 200.0, hits[1] as f64 / 200.0);
    outcome(
        krr >= 2.0 * lin && krr > 0.0,
        format!("quadratic coupling detected: krr {}/200 ({krr:.3}), linear {}/200 ({lin:.3})", hits[1], hits[0]),
    )
}

fn svar_recovery() -> Outcome {
    let start = Instant::now();
    let s = gen_synthetic(&SyntheticSpec {
        kind: SyntheticKind::SvarSystem,
        n: 5000,
        seed: 5,
        ..SyntheticSpec::default()
    })
    .expect("synthetic");
    let model = fit_var(&market_panel(&s.panel).unwrap(), 5).expect("var");
    let opts = IdentifyOptions {
        budget: 10_000,
        seed: 5,
        selection: RotationSelection::Median,
        ..IdentifyOptions::default()
    };
    let f = identify_shocks(&model, &SignRestrictions::default(), &opts).expect("identify");
    let elapsed = start.elapsed();
    let offset = s.panel.len() - f.shocks.nrows();
    let corr: Vec<f64> = ["growth", "monetary", "common_premium", "hedging_premium"]
        .iter()
        .enumerate()
        .map(|(k, id)| correlation(&column(&f.shocks, k), &s.panel.column(id).unwrap().values[offset..]).abs())
        .collect();
    let ppt = (f.p * f.p.transpose() - model.sigma).abs().max();
    let qqt = (f.q * f.q.transpose() - nalgebra::Matrix4::identity()).abs().max();
    // first-accepted selection, reported for reference
    let first = identify_shocks(&model, &SignRestrictions::default(), &IdentifyOptions { selection: RotationSelection::First, ..opts })
        .expect("identify");
    let first_corr: Vec<String> = (0..4)
        .map(|k| format!("{:.2}", correlation(&column(&first.shocks, k), &s.panel.columns.iter().find(|c| c.id == narrashock::ingest::ShockKind::ALL[k].as_str()).unwrap().values[offset..]).abs()))
        .collect();
    outcome(
        corr.iter().all(|&c| c >= 0.9) && ppt < 1e-8 && qqt < 1e-8 && elapsed < Duration::from_secs(120),
        format!(
            "median selection |corr| = [{}], |PPᵀ−Σ| = {ppt:.1e}, |QQᵀ−I| = {qqt:.1e}, {elapsed:.2?}; first-draw selection would give [{}]",
            corr.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join(", "),
            first_corr.join(", ")
        ),
    )
}

fn feedback_and_confounders() -> Outcome {
    let alpha = 0.05;
    let spec = GridSpec {
        lags: (1..=5).collect(),
        ..GridSpec::default()
    };
    let mut bi_flagged = 0;
    let mut uni_clear = 0;
    let mut recovered = 0;
    let mut false_confounders = 0;
    for seed in 0..50u64 {
        let flagged = |direction| {
            let s = gen_synthetic(&SyntheticSpec {
                n: 800,
                lag: 2,
                strength: 0.5,
                direction,
                seed,
                ..SyntheticSpec::default()
            })
            .expect("synthetic");
            let results = run_grid(&s.panel, &spec, &PartitionSpec::Static).expect("grid");
            !detect_feedback(&results, alpha, Multiplicity::default()).is_empty()
        };
        bi_flagged += flagged(CouplingDirection::Bidirectional) as usize;
        uni_clear += !flagged(if seed % 2 == 0 { CouplingDirection::EconToText } else { CouplingDirection::TextToEcon }) as usize;

        let s = gen_synthetic(&SyntheticSpec {
            n: 800,
            lag: 2,
            strength: 1.0,
            confounder: true,
            distractors: 3,
            seed,
            ..SyntheticSpec::default()
        })
        .expect("synthetic");
        let results = run_grid(&s.panel, &spec, &PartitionSpec::Static).expect("grid");
        let selected = bonferroni_select(&results, alpha, Multiplicity::default());
        let candidates: Vec<_> = s.panel.columns.iter().filter_map(|c| s.panel.series(&c.id)).collect();
        let scan = ScanConfig {
            lags: spec.lags.clone(),
            alpha,
            ..ScanConfig::default()
        };
        let reports = confounder_scan(&selected, &candidates, &s.panel, &scan).expect("scan");
        let planted = reports.iter().any(|r| {
            r.treatment == SHOCK_ID && r.outcome == NEWS_ID && r.confounders.iter().any(|c| c.variable == CONFOUNDER_ID)
        });
        recovered += planted as usize;
        false_confounders += reports
            .iter()
            .flat_map(|r| &r.confounders)
            .filter(|c| c.variable.starts_with("noise_"))
            .count();
    }
    outcome(
        bi_flagged >= 45 && uni_clear >= 45 && recovered >= 45 && false_confounders == 0,
        format!(
            "bidirectional flagged {bi_flagged}/50, unidirectional not flagged {uni_clear}/50; confounder recovered {recovered}/50, false confounders {false_confounders}"
        ),
    )
}

fn splits() -> Outcome {
    let s = make_static_split(1000).expect("split");
    let static_ok = s.training_block() == (0..700) && s.validation == (630..700) && s.train == (0..630) && s.test == (700..1000);
    let starts: Vec<usize> = match make_splits(1095, SplitMode::Rolling, &WindowParams::default()).expect("windows") {
        SplitPlan::Rolling(w) => w.iter().map(|w| w.span.start).collect(),
        SplitPlan::Static(_) => Vec::new(),
    };
    let short = make_splits(364, SplitMode::Rolling, &WindowParams::default()).is_err();
    outcome(
        static_ok && starts == [0, 180, 360, 540, 720] && short,
        format!(
            "n = 1000: train block {:?} (validation {:?}), test {:?}; n = 1095 window starts {starts:?}; n = 364 rejected: {short}",
            s.training_block(),
            s.validation,
            s.test
        ),
    )
}

fn regime_switch() -> Outcome {
    // five years of rows: nine windows, the last three entirely after the onset
    let n = 1825;
    let windows = match make_splits(n, SplitMode::Rolling, &WindowParams::default()).unwrap() {
        SplitPlan::Rolling(w) => w,
        SplitPlan::Static(_) => unreachable!(),
    };
    let onset = n / 2;
    let spec = GridSpec {
        lags: vec![2],
        directions: vec![Direction::TextToEcon],
        ..GridSpec::default()
    };
    let mut ok = 0;
    for seed in 0..50u64 {
        let s = gen_synthetic(&SyntheticSpec {
            kind: SyntheticKind::RegimeSwitch,
            n,
            lag: 2,
            strength: 1.0,
            direction: CouplingDirection::TextToEcon,
            seed,
            ..SyntheticSpec::default()
        })
        .expect("synthetic");
        let devs = rolling_deviations(&s.panel, &spec, &windows, DeltaMode::Absolute, WindowAggregation::MeanMse)
            .expect("rolling");
        let d = &devs[0].series;
        let post: Vec<f64> = windows
            .iter()
            .zip(&d.deviation)
            .filter(|(w, _)| w.span.start >= onset)
            .map(|(_, v)| *v)
            .collect();
        ok += (!post.is_empty() && post.iter().all(|&v| v > 0.0)) as usize;
    }
    let post = windows.iter().filter(|w| w.span.start >= onset).count();
    outcome(
        ok >= 45,
        format!("{} windows, onset at row {onset}; all {post} post-onset deviations positive in {ok}/50 seeds", windows.len()),
    )
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = synth::write_fixture_corpus(&tmp.path().join("corpus"), 800, 21).expect("fixture");
    let mut outputs = Vec::new();
    for (run, market) in [(0, false), (1, false), (2, true), (3, true)] {
        let mut cfg = PipelineConfig::load(&config).expect("config");
        if market {
            cfg.market = cfg.shocks.take().map(|p| p.with_file_name("market.csv"));
        }
        cfg.out_dir = tmp.path().join(format!("run{run}"));
        run_pipeline(&cfg).expect("pipeline");
        outputs.push(dir_bytes(&cfg.out_dir));
    }
    let files = outputs[0].len();
    let same = outputs[0] == outputs[1] && outputs[2] == outputs[3];
    outcome(
        same && files >= 10,
        format!("two runs each with precomputed and identified shocks; {files} files per run, byte-identical: {same}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("OLS oracle equivalence", ols_oracle),
        ("KRR closed-form equivalence", krr_oracle),
        ("news-feature correctness", news_feature_oracle),
        ("t-test oracle", t_test_oracle),
        ("binomial test oracle", binomial_oracle),
        ("null calibration", null_calibration),
        ("power", power),
        ("KRR > linear on nonlinear coupling", krr_vs_linear),
        ("SVAR recovery", svar_recovery),
        ("feedback and confounder oracles", feedback_and_confounders),
        ("split/window bookkeeping", splits),
        ("regime-switch deviation", regime_switch),
        ("determinism", determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let (mut ran, mut failed) = (0, 0);
    for (name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        ran += 1;
        failed += !o.pass as usize;
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
        std::process::exit(1);
    }
}
