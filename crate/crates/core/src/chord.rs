//! Chord symbols and the chord-corpus text format.
//!
//! A corpus is UTF-8 text with one song per line and whitespace separated
//! chord tokens. A `#` at the start of a token begins a comment that runs to the
//! end of the line.
//! Token grammar: `[A-G] [#|b]? (m | dim | aug | 7 | maj7 | m7)?`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quality {
    Maj,
    Min,
    Dim,
    Aug,
    Dom7,
    Maj7,
    Min7,
}

impl Quality {
    pub const ALL: [Quality; 7] = [
        Quality::Maj,
        Quality::Min,
        Quality::Dim,
        Quality::Aug,
        Quality::Dom7,
        Quality::Maj7,
        Quality::Min7,
    ];

    /// Semitone offsets of the chord tones above the root.
    pub fn intervals(self) -> &'static [u8] {
        match self {
            Quality::Maj => &[0, 4, 7],
            Quality::Min => &[0, 3, 7],
            Quality::Dim => &[0, 3, 6],
            Quality::Aug => &[0, 4, 8],
            Quality::Dom7 => &[0, 4, 7, 10],
            Quality::Maj7 => &[0, 4, 7, 11],
            Quality::Min7 => &[0, 3, 7, 10],
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Quality::Maj => "",
            Quality::Min => "m",
            Quality::Dim => "dim",
            Quality::Aug => "aug",
            Quality::Dom7 => "7",
            Quality::Maj7 => "maj7",
            Quality::Min7 => "m7",
        }
    }

    fn from_suffix(s: &str) -> Option<Self> {
        Quality::ALL.into_iter().find(|q| q.suffix() == s)
    }
}

/// A chord: root pitch class plus quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChordSymbol {
    root: u8,
    pub quality: Quality,
}

const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

impl ChordSymbol {
    /// `root` is reduced modulo 12.
    pub fn new(root: u8, quality: Quality) -> Self {
        Self {
            root: root % 12,
            quality,
        }
    }

    pub fn root(&self) -> u8 {
        self.root
    }

    /// Pitch classes of the chord, unordered.
    pub fn pitch_classes(&self) -> impl Iterator<Item = u8> + '_ {
        self.quality.intervals().iter().map(|i| (self.root + i) % 12)
    }

    pub fn contains_pitch_class(&self, pc: u8) -> bool {
        self.pitch_classes().any(|c| c == pc % 12)
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", NAMES[self.root as usize], self.quality.suffix())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid chord symbol {0:?}")]
pub struct InvalidChord(pub String);

impl FromStr for ChordSymbol {
    type Err = InvalidChord;

    fn from_str(token: &str) -> Result<Self, Self::Err> {
        let bad = || InvalidChord(token.to_string());
        let mut chars = token.chars();
        let root = match chars.next() {
            Some('C') => 0,
            Some('D') => 2,
            Some('E') => 4,
            Some('F') => 5,
            Some('G') => 7,
            Some('A') => 9,
            Some('B') => 11,
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let (root, rest) = if let Some(r) = rest.strip_prefix('#') {
            ((root + 1) % 12, r)
        } else if let Some(r) = rest.strip_prefix('b') {
            ((root + 11) % 12, r)
        } else {
            (root, rest)
        };
        let quality = Quality::from_suffix(rest).ok_or_else(bad)?;
        Ok(ChordSymbol::new(root, quality))
    }
}

impl Serialize for ChordSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChordSymbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unrecognized token in a corpus. Line and column are 1-based; the column
/// counts characters.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: unrecognized chord token {token:?}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub token: String,
}

/// Parsed corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sequences: Vec<Vec<ChordSymbol>>,
    /// Non-empty lines dropped for holding fewer than two chords.
    pub dropped: usize,
}

/// Parses a corpus. Any bad token fails the whole file.
pub fn parse_chord_corpus(text: &str) -> Result<Corpus, ParseError> {
    let mut corpus = Corpus::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let mut seq = Vec::new();
        for (column, token) in tokens_with_columns(line) {
            let chord = token.parse().map_err(|_| ParseError {
                line: idx + 1,
                column,
                token: token.to_string(),
            })?;
            seq.push(chord);
        }
        match seq.len() {
            0 => {}
            1 => corpus.dropped += 1,
            _ => corpus.sequences.push(seq),
        }
    }
    Ok(corpus)
}

/// A `#` opens a comment only where a token could start, so sharps such as
/// `F#m` stay intact.
pub(crate) fn strip_comment(line: &str) -> &str {
    let mut prev_space = true;
    for (i, ch) in line.char_indices() {
        if ch == '#' && prev_space {
            return &line[..i];
        }
        prev_space = ch.is_whitespace();
    }
    line
}

fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut column = 1;
    std::iter::from_fn(move || {
        let skipped = rest.len() - rest.trim_start().len();
        column += rest[..skipped].chars().count();
        rest = &rest[skipped..];
        if rest.is_empty() {
            return None;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let (tok, tail) = rest.split_at(end);
        let at = column;
        column += tok.chars().count();
        rest = tail;
        Some((at, tok))
    })
}

/// Prints sequences in corpus format, one per line.
pub fn format_corpus(sequences: &[Vec<ChordSymbol>]) -> String {
    let mut out = String::new();
    for seq in sequences {
        let line: Vec<String> = seq.iter().map(ToString::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
