use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::inference::{bonferroni_threshold, test_counts, Multiplicity};
use super::{Direction, PairResult};
use crate::models::ModelKind;

/// An (outlet, shock) pair significant in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackLoop {
    pub outlet: String,
    pub shock: String,
    pub model: ModelKind,
    pub econ_to_text_lags: Vec<usize>,
    pub text_to_econ_lags: Vec<usize>,
}

/// Pairs with at least one Bonferroni-significant result in each direction.
pub fn detect_feedback(results: &[PairResult], alpha: f64, m: Multiplicity) -> Vec<FeedbackLoop> {
    let mut hits: BTreeMap<(&str, &str, ModelKind), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (r, m) in results.iter().zip(test_counts(results, m)) {
        if r.p_value >= bonferroni_threshold(alpha, m) {
            continue;
        }
        let entry = hits.entry((&r.outlet, &r.shock, r.model)).or_default();
        match r.direction {
            Direction::EconToText => entry.0.push(r.lag),
            Direction::TextToEcon => entry.1.push(r.lag),
        }
    }
    hits.into_iter()
        .filter(|(_, (a, b))| !a.is_empty() && !b.is_empty())
        .map(|((outlet, shock, model), (mut a, mut b))| {
            a.sort_unstable();
            b.sort_unstable();
            FeedbackLoop {
                outlet: outlet.to_string(),
                shock: shock.to_string(),
                model,
                econ_to_text_lags: a,
                text_to_econ_lags: b,
            }
        })
        .collect()
}
