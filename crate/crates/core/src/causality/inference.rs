//! Paired t-test on loss differentials, binomial group test and Bonferroni
//! selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::factorial::ln_binomial;

use super::{Direction, PairResult};
use crate::error::{Error, Result};
use crate::ingest::Orientation;
use crate::models::ModelKind;

/// Variance below which a loss differential is treated as constant.
pub const DEGENERATE_VARIANCE: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

/// One-sided paired t-test of `H0: E[d] <= 0` against `E[d] > 0`.
///
/// A (numerically) constant sample is degenerate: `p = 0` when its mean is
/// positive, otherwise `p = 1`.
pub fn paired_t(d: &[f64]) -> Result<TTest> {
    let t = d.len();
    if t < 2 {
        return Err(Error::input(format!("paired t-test needs at least 2 observations, got {t}")));
    }
    let n = t as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var < DEGENERATE_VARIANCE {
        let (t_stat, p_value) = if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 1.0)
        };
        return Ok(TTest {
            t_stat,
            p_value,
            degenerate: true,
        });
    }
    let t_stat = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::numerical(e.to_string()))?;
    Ok(TTest {
        t_stat,
        p_value: dist.sf(t_stat).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// `P(X >= k)` for `X ~ Binomial(n, p)` by exact summation.
pub fn binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (k..=n)
        .map(|i| (ln_binomial(n, i) + i as f64 * lp + (n - i) as f64 * lq).exp())
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Keys a group of results may be split by.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct GroupKey {
    pub direction: Option<Direction>,
    pub model: Option<ModelKind>,
    pub orientation: Option<Orientation>,
    pub lag: Option<usize>,
    pub shock: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub key: GroupKey,
    pub n_tests: usize,
    pub n_significant: usize,
    pub rho_hat: f64,
    pub binomial_p: f64,
    /// `binomial_p < alpha`.
    pub significant: bool,
}

/// Is the share of `p < alpha` among `p_values` larger than chance?
pub fn binomial_group_test(p_values: &[f64], alpha: f64) -> Result<GroupResult> {
    if p_values.is_empty() {
        return Err(Error::input("binomial group test needs at least one p-value"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} not in (0, 1)")));
    }
    let n = p_values.len();
    let k = p_values.iter().filter(|&&p| p < alpha).count();
    let binomial_p = binomial_upper_tail(n as u64, k as u64, alpha);
    Ok(GroupResult {
        key: GroupKey::default(),
        n_tests: n,
        n_significant: k,
        rho_hat: k as f64 / n as f64,
        binomial_p,
        significant: binomial_p < alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupField {
    Orientation,
    Lag,
    Shock,
}

/// Group results by direction, model kind and `fields`, and test each group.
pub fn group_results(results: &[PairResult], fields: &[GroupField], alpha: f64) -> Result<Vec<GroupResult>> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for r in results {
        let key = GroupKey {
            direction: Some(r.direction),
            model: Some(r.model),
            orientation: fields.contains(&GroupField::Orientation).then_some(r.orientation),
            lag: fields.contains(&GroupField::Lag).then_some(r.lag),
            shock: fields.contains(&GroupField::Shock).then(|| r.shock.clone()),
        };
        groups.entry(key).or_default().push(r.p_value);
    }
    groups
        .into_iter()
        .map(|(key, ps)| binomial_group_test(&ps, alpha).map(|g| GroupResult { key, ..g }))
        .collect()
}

/// Which tests count towards the Bonferroni denominator of a result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonferroniScope {
    /// Tests sharing direction, model kind and partisan group.
    #[default]
    PartisanGroup,
    /// Tests sharing direction and model kind.
    DirectionModel,
    /// Every test.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    Fixed(usize),
    Scoped(BonferroniScope),
}

impl Default for Multiplicity {
    fn default() -> Self {
        Multiplicity::Scoped(BonferroniScope::default())
    }
}

type ScopeKey = (Option<Direction>, Option<ModelKind>, Option<Orientation>);

fn scope_key(r: &PairResult, scope: BonferroniScope) -> ScopeKey {
    match scope {
        BonferroniScope::PartisanGroup => (Some(r.direction), Some(r.model), Some(r.orientation)),
        BonferroniScope::DirectionModel => (Some(r.direction), Some(r.model), None),
        BonferroniScope::All => (None, None, None),
    }
}

/// Bonferroni denominator for each result.
pub fn test_counts(results: &[PairResult], m: Multiplicity) -> Vec<usize> {
    match m {
        Multiplicity::Fixed(m) => vec![m; results.len()],
        Multiplicity::Scoped(scope) => {
            let mut counts: BTreeMap<ScopeKey, usize> = BTreeMap::new();
            for r in results {
                *counts.entry(scope_key(r, scope)).or_default() += 1;
            }
            results.iter().map(|r| counts[&scope_key(r, scope)]).collect()
        }
    }
}

pub fn bonferroni_threshold(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

/// Results with `p < alpha / M`.
pub fn bonferroni_select(results: &[PairResult], alpha: f64, m: Multiplicity) -> Vec<PairResult> {
    results
        .iter()
        .zip(test_counts(results, m))
        .filter(|(r, m)| r.p_value < bonferroni_threshold(alpha, *m))
        .map(|(r, _)| r.clone())
        .collect()
}
