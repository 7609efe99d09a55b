//! First-order Markov chain over chord symbols.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chord::ChordSymbol;
use crate::rng::SceneRng;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("corpus holds no adjacent chord pair")]
    EmptyCorpus,
    #[error("chord {0} is not in the model vocabulary")]
    UnknownChord(ChordSymbol),
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Vocabulary, pair counts and row-stochastic transition matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordModel {
    vocabulary: Vec<ChordSymbol>,
    counts: Vec<Vec<u64>>,
    transitions: Vec<Vec<f64>>,
}

/// Tolerance on row sums, both when training and when loading a model file.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Maximum-likelihood training. Rows without any outgoing pair fall back to
/// the uniform distribution over the vocabulary.
pub fn train_markov(sequences: &[Vec<ChordSymbol>]) -> Result<ChordModel, ModelError> {
    let vocabulary: Vec<ChordSymbol> = sequences
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = vocabulary.len();
    let mut counts = vec![vec![0u64; n]; n];
    let mut pairs = 0u64;
    for seq in sequences {
        for w in seq.windows(2) {
            let i = vocabulary.binary_search(&w[0]).unwrap();
            let j = vocabulary.binary_search(&w[1]).unwrap();
            counts[i][j] += 1;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(ModelError::EmptyCorpus);
    }
    let transitions = counts.iter().map(|row| normalize(row)).collect();
    Ok(ChordModel {
        vocabulary,
        counts,
        transitions,
    })
}

fn normalize(row: &[u64]) -> Vec<f64> {
    let total: u64 = row.iter().sum();
    if total == 0 {
        vec![1.0 / row.len() as f64; row.len()]
    } else {
        row.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

impl ChordModel {
    pub fn vocabulary(&self) -> &[ChordSymbol] {
        &self.vocabulary
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn index_of(&self, chord: ChordSymbol) -> Option<usize> {
        self.vocabulary.binary_search(&chord).ok()
    }

    pub fn contains(&self, chord: ChordSymbol) -> bool {
        self.index_of(chord).is_some()
    }

    /// P(to | from), zero when either chord is outside the vocabulary.
    pub fn probability(&self, from: ChordSymbol, to: ChordSymbol) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.transitions[i][j],
            _ => 0.0,
        }
    }

    /// Draws the successor of `current` from its transition row.
    pub fn next_chord(&self, current: ChordSymbol, rng: &mut SceneRng) -> Result<ChordSymbol, ModelError> {
        let i = self.index_of(current).ok_or(ModelError::UnknownChord(current))?;
        let row = &self.transitions[i];
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                last_positive = j;
                acc += p;
                if u < acc {
                    return Ok(self.vocabulary[j]);
                }
            }
        }
        // u landed in the rounding gap at the top of the row
        Ok(self.vocabulary[last_positive])
    }

    /// The `k` most likely successors of `chord`, most likely first; ties by
    /// vocabulary order. Zero-count successors are skipped.
    pub fn top_transitions(&self, chord: ChordSymbol, k: usize) -> Vec<(ChordSymbol, f64, u64)> {
        let Some(i) = self.index_of(chord) else {
            return Vec::new();
        };
        let mut row: Vec<(usize, f64)> = self.transitions[i]
            .iter()
            .copied()
            .enumerate()
            .filter(|&(j, _)| self.counts[i][j] > 0)
            .collect();
        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        row.into_iter()
            .take(k)
            .map(|(j, p)| (self.vocabulary[j], p, self.counts[i][j]))
            .collect()
    }

    /// Serializes to the model text format: a `vocabulary` line followed by
    /// one `counts` and one `row` line per chord.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# musictraces chord model v1\n");
        let vocab: Vec<String> = self.vocabulary.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "vocabulary {}", vocab.join(" "));
        for (i, chord) in self.vocabulary.iter().enumerate() {
            let counts: Vec<String> = self.counts[i].iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "counts {} {}", chord, counts.join(" "));
        }
        for (i, chord) in self.vocabulary.iter().enumerate() {
            let probs: Vec<String> = self.transitions[i].iter().map(|p| format!("{p:?}")).collect();
            let _ = writeln!(out, "row {} {}", chord, probs.join(" "));
        }
        out
    }

    /// Parses the model text format and checks it is row-stochastic.
    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let err = |line: usize, reason: &str| ModelError::Format {
            line,
            reason: reason.to_string(),
        };
        let mut vocabulary: Option<Vec<ChordSymbol>> = None;
        let mut counts: Vec<Vec<u64>> = Vec::new();
        let mut transitions: Vec<Vec<f64>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = crate::chord::strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let keyword = fields.next().unwrap();
            match keyword {
                "vocabulary" => {
                    if vocabulary.is_some() {
                        return Err(err(line_no, "duplicate vocabulary line"));
                    }
                    let v = fields
                        .map(|t| t.parse::<ChordSymbol>().map_err(|e| err(line_no, &e.to_string())))
                        .collect::<Result<Vec<_>, _>>()?;
                    if v.is_empty() {
                        return Err(err(line_no, "empty vocabulary"));
                    }
                    if v.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(err(line_no, "vocabulary must be sorted and unique"));
                    }
                    vocabulary = Some(v);
                }
                "counts" | "row" => {
                    let v = vocabulary
                        .as_ref()
                        .ok_or_else(|| err(line_no, "row before vocabulary"))?;
                    let target = if keyword == "counts" {
                        counts.len()
                    } else {
                        transitions.len()
                    };
                    let chord: ChordSymbol = fields
                        .next()
                        .ok_or_else(|| err(line_no, "missing chord"))?
                        .parse()
                        .map_err(|e: crate::chord::InvalidChord| err(line_no, &e.to_string()))?;
                    if v.get(target) != Some(&chord) {
                        return Err(err(line_no, "rows out of vocabulary order"));
                    }
                    let cells: Vec<&str> = fields.collect();
                    if cells.len() != v.len() {
                        return Err(err(line_no, "row width does not match vocabulary"));
                    }
                    if keyword == "counts" {
                        let row = cells
                            .iter()
                            .map(|c| c.parse::<u64>().map_err(|_| err(line_no, "bad count")))
                            .collect::<Result<Vec<_>, _>>()?;
                        counts.push(row);
                    } else {
                        let row = cells
                            .iter()
                            .map(|c| match c.parse::<f64>() {
                                Ok(p) if p.is_finite() && (0.0..=1.0).contains(&p) => Ok(p),
                                _ => Err(err(line_no, "bad probability")),
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        let sum: f64 = row.iter().sum();
                        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                            return Err(err(line_no, "row does not sum to 1"));
                        }
                        transitions.push(row);
                    }
                }
                _ => return Err(err(line_no, "unknown keyword")),
            }
        }
        let vocabulary = vocabulary.ok_or_else(|| err(0, "missing vocabulary"))?;
        if counts.len() != vocabulary.len() || transitions.len() != vocabulary.len() {
            return Err(err(0, "incomplete matrix"));
        }
        Ok(ChordModel {
            vocabulary,
            counts,
            transitions,
        })
    }
}
