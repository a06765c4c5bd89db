use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Context label used before the first and after the last phone of an
/// utterance.
pub const EDGE_LABEL: &str = "#";

/// One row of an alignment TSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub start_s: f64,
    pub end_s: f64,
    pub phoneme_label: String,
    pub word: String,
    pub speaker: String,
}

/// A phone token with its immediate phonemic context. Neighbours across
/// word boundaries count as context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneToken {
    pub utterance: String,
    /// Position of the phone within its utterance.
    pub position: usize,
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub prev: String,
    pub next: String,
    pub speaker: String,
}

impl PhoneToken {
    pub fn id(&self) -> String {
        format!("{}:{}", self.utterance, self.position)
    }
}

pub fn parse_alignment(text: &str) -> Result<Vec<AlignmentRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("alignment header: {e}")))?
        .clone();
    let want = ["start_s", "end_s", "phoneme_label", "word", "speaker"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::Data(format!(
            "alignment header must be {:?}, found {:?}",
            want,
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let rows: Vec<AlignmentRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("alignment row: {e}")))?;
    for (i, r) in rows.iter().enumerate() {
        if !(r.start_s.is_finite() && r.end_s.is_finite() && r.start_s < r.end_s) {
            return Err(Error::Data(format!(
                "alignment row {}: start {} must precede end {}",
                i + 1,
                r.start_s,
                r.end_s
            )));
        }
        if r.phoneme_label == EDGE_LABEL || r.phoneme_label.is_empty() {
            return Err(Error::Data(format!(
                "alignment row {}: invalid phoneme label {:?}",
                i + 1,
                r.phoneme_label
            )));
        }
        if i > 0 && r.start_s < rows[i - 1].end_s - 1e-9 {
            return Err(Error::Data(format!(
                "alignment row {} overlaps the previous segment",
                i + 1
            )));
        }
    }
    Ok(rows)
}

pub fn read_alignment(path: &Path) -> Result<Vec<AlignmentRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alignment(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn alignment_to_tsv(rows: &[AlignmentRow]) -> String {
    let mut out = String::from("start_s\tend_s\tphoneme_label\tword\tspeaker\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.start_s, r.end_s, r.phoneme_label, r.word, r.speaker
        ));
    }
    out
}

/// Turns the rows of one utterance into context-annotated tokens.
pub fn tokens_from_alignment(utterance: &str, rows: &[AlignmentRow]) -> Vec<PhoneToken> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| PhoneToken {
            utterance: utterance.to_string(),
            position: i,
            label: r.phoneme_label.clone(),
            start: r.start_s,
            end: r.end_s,
            prev: if i == 0 {
                EDGE_LABEL.to_string()
            } else {
                rows[i - 1].phoneme_label.clone()
            },
            next: rows
                .get(i + 1)
                .map_or_else(|| EDGE_LABEL.to_string(), |n| n.phoneme_label.clone()),
            speaker: r.speaker.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhoneClass {
    Vowel,
    Consonant,
}

impl fmt::Display for PhoneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhoneClass::Vowel => "vowel",
            PhoneClass::Consonant => "consonant",
        })
    }
}

/// Phoneme label to vowel/consonant class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMap(pub BTreeMap<String, PhoneClass>);

impl ClassMap {
    pub fn get(&self, label: &str) -> Result<PhoneClass> {
        self.0
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnmappedPhoneme(label.to_string()))
    }

    pub fn insert(&mut self, label: impl Into<String>, class: PhoneClass) {
        self.0.insert(label.into(), class);
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (i == 0 && line.starts_with("phoneme_label")) {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(label), Some(class), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Data(format!("class map line {}: expected 2 columns", i + 1)));
            };
            let class = match class.trim() {
                "vowel" => PhoneClass::Vowel,
                "consonant" => PhoneClass::Consonant,
                other => {
                    return Err(Error::Data(format!(
                        "class map line {}: unknown class {other:?}",
                        i + 1
                    )))
                }
            };
            map.insert(label.trim().to_string(), class);
        }
        Ok(Self(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("phoneme_label\tclass\n");
        for (label, class) in &self.0 {
            out.push_str(&format!("{label}\t{class}\n"));
        }
        out
    }
}
