use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::alignment::{ClassMap, PhoneToken};
use crate::error::Result;

/// Indices into [`AbxBattery::tokens`]: `a` and `x` share a label, `b` has a
/// different label of the same class, and all three share a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbxTriple {
    pub a: usize,
    pub b: usize,
    pub x: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryOptions {
    /// Allow A, B and X to come from different speakers.
    pub cross_speaker: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxBattery {
    pub tokens: Vec<PhoneToken>,
    pub triples: Vec<AbxTriple>,
}

impl AbxBattery {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Unordered label pair of a triple, alphabetical.
    pub fn contrast(&self, t: &AbxTriple) -> (&str, &str) {
        let (p, q) = (&self.tokens[t.x].label, &self.tokens[t.b].label);
        if p <= q {
            (p, q)
        } else {
            (q, p)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,b,x,label_ax,label_b,prev,next\n");
        for t in &self.triples {
            let (a, b, x) = (&self.tokens[t.a], &self.tokens[t.b], &self.tokens[t.x]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                a.id(),
                b.id(),
                x.id(),
                x.label,
                b.label,
                x.prev,
                x.next
            ));
        }
        out
    }
}

/// Enumerates every valid ordered triple. Tokens are first sorted by
/// `(utterance, position)`; triples come out ordered by `(x, a, b)` over
/// the sorted token indices.
pub fn build_battery(
    tokens: &[PhoneToken],
    class_map: &ClassMap,
    options: BatteryOptions,
) -> Result<AbxBattery> {
    let mut tokens = tokens.to_vec();
    tokens.sort_by(|p, q| {
        (p.utterance.as_str(), p.position).cmp(&(q.utterance.as_str(), q.position))
    });
    let classes = tokens
        .iter()
        .map(|t| class_map.get(&t.label))
        .collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<(&str, &str, &str), Vec<usize>> = BTreeMap::new();
    for (i, t) in tokens.iter().enumerate() {
        let speaker = if options.cross_speaker { "" } else { t.speaker.as_str() };
        groups
            .entry((t.prev.as_str(), t.next.as_str(), speaker))
            .or_default()
            .push(i);
    }

    let mut triples = Vec::new();
    for members in groups.values() {
        for &x in members {
            for &a in members {
                if a == x || tokens[a].label != tokens[x].label {
                    continue;
                }
                for &b in members {
                    if tokens[b].label != tokens[x].label && classes[b] == classes[x] {
                        triples.push(AbxTriple { a, b, x });
                    }
                }
            }
        }
    }
    triples.sort_by_key(|t| (t.x, t.a, t.b));
    if triples.is_empty() {
        log::warn!("ABX battery is empty: no context-matched contrasts");
    }
    Ok(AbxBattery { tokens, triples })
}
