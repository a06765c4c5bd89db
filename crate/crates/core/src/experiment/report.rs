use serde::{Deserialize, Serialize};

use crate::abx::{mann_whitney_u, relative_improvement, ScoreReport};
use crate::error::{Error, Result};

/// Two-sided 97.5% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// Mean and normal-approximation 95% confidence interval of replicate
/// overall scores: `mean ± 1.96 s / sqrt(n)` with the sample standard
/// deviation `s` (zero width for a single replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub replicates: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ConditionSummary {
    pub fn from_scores(condition: &str, scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("replicate scores"));
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = if scores.len() > 1 {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let half = Z_95 * std / n.sqrt();
        Ok(Self {
            condition: condition.to_string(),
            replicates: scores.len(),
            mean,
            std,
            ci_low: mean - half,
            ci_high: mean + half,
        })
    }
}

/// Outcome of comparing two sets of replicate reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mean_1: f64,
    pub mean_2: f64,
    /// `mean_1 - mean_2`.
    pub absolute_difference: f64,
    /// `(mean_1 - mean_2) / (mean_2 - 0.5)`; absent when set 2 sits at chance.
    pub relative_improvement: Option<f64>,
    pub u: f64,
    pub p: f64,
    pub exact_p: bool,
    /// Set when the two sides were scored on different batteries.
    pub battery_mismatch: bool,
}

fn contrast_signature(r: &ScoreReport) -> Vec<(&str, &str, usize)> {
    r.contrasts
        .iter()
        .map(|c| (c.label_1.as_str(), c.label_2.as_str(), c.triples))
        .collect()
}

/// Compares set 1 against set 2 (the baseline) over per-replicate overall
/// scores.
pub fn compare_runs(set_1: &[ScoreReport], set_2: &[ScoreReport]) -> Result<Comparison> {
    if set_1.is_empty() || set_2.is_empty() {
        return Err(Error::Empty("report set"));
    }
    let s1: Vec<f64> = set_1.iter().map(|r| r.overall).collect();
    let s2: Vec<f64> = set_2.iter().map(|r| r.overall).collect();
    let mean_1 = s1.iter().sum::<f64>() / s1.len() as f64;
    let mean_2 = s2.iter().sum::<f64>() / s2.len() as f64;
    let reference = &set_1[0];
    let battery_mismatch = set_1.iter().chain(set_2).any(|r| {
        r.battery != reference.battery || contrast_signature(r) != contrast_signature(reference)
    });
    if battery_mismatch {
        log::warn!("compared report sets were scored on different batteries");
    }
    let mw = mann_whitney_u(&s1, &s2)?;
    let relative = match relative_improvement(mean_1, mean_2) {
        Ok(v) => Some(v),
        Err(Error::BaselineAtChance) => None,
        Err(e) => return Err(e),
    };
    Ok(Comparison {
        mean_1,
        mean_2,
        absolute_difference: mean_1 - mean_2,
        relative_improvement: relative,
        u: mw.u,
        p: mw.p,
        exact_p: mw.exact,
        battery_mismatch,
    })
}
