//! Rendering rules: canvas ordinate to chord-relative pitch, abscissa to pan.

use serde::{Deserialize, Serialize};

use crate::chord::ChordSymbol;

/// Chord tones replicated over a range of octaves, as MIDI note numbers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitchGrid {
    pub chord: ChordSymbol,
    pub octave_span: u8,
    pub base_midi: u8,
    tones: Vec<u8>,
}

impl PitchGrid {
    /// Every note in `[base_midi, base_midi + 12 * octave_span)` whose pitch
    /// class belongs to `chord`. `octave_span` is raised to at least 1.
    pub fn new(chord: ChordSymbol, octave_span: u8, base_midi: u8) -> Self {
        let octave_span = octave_span.max(1);
        let top = (base_midi as u16 + 12 * octave_span as u16).min(128);
        let tones = (base_midi as u16..top)
            .map(|m| m as u8)
            .filter(|m| chord.contains_pitch_class(m % 12))
            .collect();
        Self {
            chord,
            octave_span,
            base_midi,
            tones,
        }
    }

    pub fn tones(&self) -> &[u8] {
        &self.tones
    }
}

/// Maps `y` (clamped to `[0, 1]`) onto the grid: `tones[floor(y·(N−1)+0.5)]`.
pub fn quantize_pitch(y: f64, grid: &PitchGrid) -> u8 {
    let n = grid.tones.len();
    let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, 1.0) };
    let idx = ((y * (n - 1) as f64) + 0.5).floor() as usize;
    grid.tones[idx.min(n - 1)]
}

/// Linear stereo position, `2x − 1`.
pub fn melody_pan(x: f64) -> f64 {
    2.0 * x.clamp(0.0, 1.0) - 1.0
}
