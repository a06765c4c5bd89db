use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alignment::{ClassMap, PhoneClass};
use super::battery::AbxBattery;
use super::divergence::{dtw_dissimilarity, PosteriorToken};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// 1 when X is closer to A, 0 when closer to B, 0.5 on exact equality.
pub fn score_triple(a: &PosteriorToken, b: &PosteriorToken, x: &PosteriorToken) -> Result<f64> {
    Ok(score_from(dtw_dissimilarity(a, x)?, dtw_dissimilarity(b, x)?))
}

fn score_from(dax: f64, dbx: f64) -> f64 {
    if dax < dbx {
        1.0
    } else if dbx < dax {
        0.0
    } else {
        0.5
    }
}

/// Scores every triple of `battery`. `posteriors[i]` belongs to
/// `battery.tokens[i]`. Each distinct token pair is aligned once.
pub fn score_battery(battery: &AbxBattery, posteriors: &[PosteriorToken]) -> Result<Vec<f64>> {
    if posteriors.len() != battery.tokens.len() {
        return Err(Error::DimensionMismatch {
            expected: battery.tokens.len(),
            found: posteriors.len(),
        });
    }
    let key = |p: usize, q: usize| (p.min(q), p.max(q));
    let pairs: BTreeSet<(usize, usize)> = battery
        .triples
        .iter()
        .flat_map(|t| [key(t.a, t.x), key(t.b, t.x)])
        .collect();
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    let values = pairs
        .par_iter()
        .map(|&(p, q)| dtw_dissimilarity(&posteriors[p], &posteriors[q]))
        .collect::<Result<Vec<f64>>>()?;
    let cache: HashMap<(usize, usize), f64> = pairs.into_iter().zip(values).collect();
    Ok(battery
        .triples
        .iter()
        .map(|t| score_from(cache[&key(t.a, t.x)], cache[&key(t.b, t.x)]))
        .collect())
}

/// How contrast scores are combined into the overall score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Each contrast counts once.
    #[default]
    Contrast,
    /// Each triple counts once.
    Triple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastScore {
    pub label_1: String,
    pub label_2: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<PhoneClass>,
    pub score: f64,
    pub triples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema_version: u32,
    /// Digest of the battery the scores were computed on, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<String>,
    pub weighting: Weighting,
    pub overall: f64,
    pub triples: usize,
    pub contrasts: Vec<ContrastScore>,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Format(format!("score report: {e}")))?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "score report schema {} is not supported",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn contrasts_csv(&self) -> String {
        let mut out = String::from("label_1,label_2,class,score,triples\n");
        for c in &self.contrasts {
            let class = c.class.map(|k| k.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{class},{},{}\n", c.label_1, c.label_2, c.score, c.triples));
        }
        out
    }
}

/// One scored triple: the X/A label, the B label and the score.
pub type LabelledScore<'a> = (&'a str, &'a str, f64);

/// Averages triple scores per unordered contrast, then across contrasts.
pub fn aggregate<'a>(
    scores: impl IntoIterator<Item = LabelledScore<'a>>,
    weighting: Weighting,
    classes: Option<&ClassMap>,
) -> Result<ScoreReport> {
    let mut by_contrast: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for (x, b, s) in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Data(format!("triple score {s} outside [0, 1]")));
        }
        let key = if x <= b { (x, b) } else { (b, x) };
        let e = by_contrast.entry(key).or_insert((0.0, 0));
        e.0 += s;
        e.1 += 1;
    }
    if by_contrast.is_empty() {
        return Err(Error::Empty("ABX battery"));
    }
    let contrasts: Vec<ContrastScore> = by_contrast
        .iter()
        .map(|(&(l1, l2), &(sum, n))| ContrastScore {
            label_1: l1.to_string(),
            label_2: l2.to_string(),
            class: classes.and_then(|c| c.get(l1).ok()),
            score: sum / n as f64,
            triples: n,
        })
        .collect();
    let triples: usize = contrasts.iter().map(|c| c.triples).sum();
    let overall = match weighting {
        Weighting::Contrast => contrasts.iter().map(|c| c.score).sum::<f64>() / contrasts.len() as f64,
        Weighting::Triple => by_contrast.values().map(|v| v.0).sum::<f64>() / triples as f64,
    };
    Ok(ScoreReport {
        schema_version: REPORT_SCHEMA_VERSION,
        battery: None,
        weighting,
        overall,
        triples,
        contrasts,
    })
}

/// Aggregates the scores of a whole battery.
pub fn aggregate_battery(
    battery: &AbxBattery,
    scores: &[f64],
    weighting: Weighting,
    classes: Option<&ClassMap>,
) -> Result<ScoreReport> {
    if scores.len() != battery.triples.len() {
        return Err(Error::DimensionMismatch {
            expected: battery.triples.len(),
            found: scores.len(),
        });
    }
    aggregate(
        battery.triples.iter().zip(scores).map(|(t, &s)| {
            (
                battery.tokens[t.x].label.as_str(),
                battery.tokens[t.b].label.as_str(),
                s,
            )
        }),
        weighting,
        classes,
    )
}

/// Gain over `baseline` relative to its margin above chance.
pub fn relative_improvement(test: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.5 {
        return Err(Error::BaselineAtChance);
    }
    Ok((test - baseline) / (baseline - 0.5))
}
