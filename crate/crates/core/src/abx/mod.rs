//! ABX phone discrimination: alignments and contexts, battery construction,
//! DTW over symmetrized KL between cluster posteriors, scoring, aggregation
//! and the Mann-Whitney U test used to compare runs.

mod alignment;
mod battery;
mod divergence;
mod score;
mod stats;

pub use alignment::{
    alignment_to_tsv, parse_alignment, read_alignment, tokens_from_alignment, AlignmentRow,
    ClassMap, PhoneClass, PhoneToken, EDGE_LABEL,
};
pub use battery::{build_battery, AbxBattery, AbxTriple, BatteryOptions};
pub use divergence::{dtw_dissimilarity, js_divergence, PosteriorToken, PROB_FLOOR};
pub use score::{
    aggregate, aggregate_battery, relative_improvement, score_battery, score_triple,
    ContrastScore, LabelledScore, ScoreReport, Weighting, REPORT_SCHEMA_VERSION,
};
pub use stats::{mann_whitney_u, MannWhitney, EXACT_LIMIT};

use crate::dpgmm::{ClusterPosterior, GaussianMixture};
use crate::error::{Error, Result};
use crate::fusion::FeatureSequence;

/// Posterior tokens for `tokens` of one utterance: the posteriors of the
/// windows whose centers lie within each token's span. Tokens covering no
/// window center yield `None`.
pub fn token_posteriors(
    mixture: &GaussianMixture,
    seq: &FeatureSequence,
    tokens: &[PhoneToken],
) -> Result<Vec<Option<PosteriorToken>>> {
    let mut cache: Vec<Option<ClusterPosterior>> = vec![None; seq.len()];
    tokens
        .iter()
        .map(|t| {
            if t.utterance != seq.utterance {
                return Err(Error::Data(format!(
                    "token {} does not belong to utterance {}",
                    t.id(),
                    seq.utterance
                )));
            }
            let range = seq.grid.windows_within(t.start, t.end);
            if range.is_empty() {
                return Ok(None);
            }
            let mut frames = Vec::with_capacity(range.len());
            for w in range {
                if cache[w].is_none() {
                    cache[w] = Some(mixture.posterior(&seq.vectors[w])?);
                }
                frames.push(cache[w].clone().expect("filled above"));
            }
            PosteriorToken::new(&frames).map(Some)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::divergence::tests::{post, random_token};
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn battery_of(n_per_label: usize) -> AbxBattery {
        let mut tokens = Vec::new();
        let mut classes = ClassMap::default();
        for (li, label) in ["a", "e", "i"].iter().enumerate() {
            classes.insert(*label, PhoneClass::Vowel);
            for r in 0..n_per_label {
                tokens.push(PhoneToken {
                    utterance: format!("u{li}{r}"),
                    position: 1,
                    label: label.to_string(),
                    start: 0.0,
                    end: 0.1,
                    prev: "t".into(),
                    next: "k".into(),
                    speaker: "s".into(),
                });
            }
        }
        build_battery(&tokens, &classes, BatteryOptions::default()).unwrap()
    }

    fn permuted(perm: &[usize], frames: &[Vec<f64>]) -> PosteriorToken {
        let out: Vec<ClusterPosterior> = frames
            .iter()
            .map(|f| post(&perm.iter().map(|&p| f[p]).collect::<Vec<_>>()))
            .collect();
        PosteriorToken::new(&out).unwrap()
    }

    #[test]
    fn identical_a_scores_one() {
        let battery = battery_of(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // tokens of the same label share one posterior sequence
        let per_label: Vec<PosteriorToken> = (0..3).map(|_| random_token(&mut rng, 4, 3)).collect();
        let posteriors: Vec<PosteriorToken> = battery
            .tokens
            .iter()
            .map(|t| per_label[["a", "e", "i"].iter().position(|l| *l == t.label).unwrap()].clone())
            .collect();
        let scores = score_battery(&battery, &posteriors).unwrap();
        let r = aggregate_battery(&battery, &scores, Weighting::Contrast, None).unwrap();
        assert_eq!(r.overall, 1.0);
        assert_eq!(r.contrasts.len(), 3);
    }

    #[test]
    fn battery_scores_match_direct_scoring() {
        let battery = battery_of(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let posteriors: Vec<PosteriorToken> = (0..battery.tokens.len())
            .map(|_| random_token(&mut rng, 3, 4))
            .collect();
        let cached = score_battery(&battery, &posteriors).unwrap();
        for (t, s) in battery.triples.iter().zip(&cached) {
            assert_eq!(*s, score_triple(&posteriors[t.a], &posteriors[t.b], &posteriors[t.x]).unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn overall_invariant_to_cluster_relabeling(seed in any::<u64>()) {
            let battery = battery_of(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 4;
            let raw: Vec<Vec<Vec<f64>>> = (0..battery.tokens.len())
                .map(|_| (0..3).map(|_| {
                    let w: Vec<f64> = (0..k).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
                    let s: f64 = w.iter().sum();
                    w.iter().map(|x| x / s).collect()
                }).collect())
                .collect();
            let identity: Vec<usize> = (0..k).collect();
            let mut perm = identity.clone();
            perm.shuffle(&mut rng);
            let base: Vec<PosteriorToken> = raw.iter().map(|f| {
                PosteriorToken::new(&f.iter().map(|p| post(p)).collect::<Vec<_>>()).unwrap()
            }).collect();
            let shuffled: Vec<PosteriorToken> = raw.iter().map(|f| permuted(&perm, f)).collect();
            let r1 = aggregate_battery(&battery, &score_battery(&battery, &base).unwrap(), Weighting::Contrast, None).unwrap();
            let r2 = aggregate_battery(&battery, &score_battery(&battery, &shuffled).unwrap(), Weighting::Contrast, None).unwrap();
            prop_assert!((r1.overall - r2.overall).abs() < 1e-12);
        }
    }
}
