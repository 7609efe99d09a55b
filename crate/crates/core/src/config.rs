//! Engine configuration and its `key = value` text format.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chord::{ChordSymbol, Quality};
use crate::interaction::EvolutionMode;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

macro_rules! engine_config {
    ($( $(#[$doc:meta])* $name:ident : $ty:ty = $default:expr ),* $(,)?) => {
        /// Tunable engine parameters. Distances are in canvas units, times in
        /// seconds unless the name says otherwise.
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        pub struct EngineConfig {
            /// Chord corpus to train from; the bundled corpus is used when unset.
            pub corpus: Option<String>,
            /// Pre-trained model file; takes precedence over `corpus`.
            pub model: Option<String>,
            $( $(#[$doc])* pub $name: $ty, )*
        }

        impl Default for EngineConfig {
            fn default() -> Self {
                Self { corpus: None, model: None, $( $name: $default, )* }
            }
        }

        impl EngineConfig {
            fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
                match key {
                    "corpus" => self.corpus = Some(path_value(key, value)?),
                    "model" => self.model = Some(path_value(key, value)?),
                    $( stringify!($name) => {
                        self.$name = <$ty>::from_str(value)
                            .map_err(|_| format!("invalid value {value:?} for {key}"))?;
                    } )*
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            }

            /// Canonical text form: every key, sorted by declaration order.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                if let Some(c) = &self.corpus {
                    let _ = writeln!(out, "corpus = {c}");
                }
                if let Some(m) = &self.model {
                    let _ = writeln!(out, "model = {m}");
                }
                $( let _ = writeln!(out, "{} = {}", stringify!($name), self.$name); )*
                out
            }
        }
    };
}

engine_config! {
    tick_rate: u32 = 30,
    seed: u64 = 0,
    initial_chord: ChordSymbol = ChordSymbol::new(0, Quality::Maj),
    hit_radius: f64 = 0.02,
    close_epsilon: f64 = 0.03,
    min_stroke_length: f64 = 0.02,
    erase_radius: f64 = 0.03,
    stroke_fade_seconds: f64 = 1.5,
    fill_opacity: f64 = 0.4,
    proximity_radius: f64 = 0.05,
    cursor_speed: f64 = 0.25,
    /// Passes a cursor makes over a closed line before fading out.
    closed_loops: u32 = 3,
    octave_span: u8 = 3,
    base_midi: u8 = 48,
    dwell_epsilon: f64 = 0.015,
    dwell_seconds: f64 = 1.0,
    /// Screen distance (meters) mapped to the thickest line.
    near_distance: f64 = 0.5,
    /// Screen distance (meters) mapped to the thinnest line.
    far_distance: f64 = 2.5,
    max_thickness: f64 = 0.02,
    min_thickness: f64 = 0.004,
    explore_step: f64 = 0.08,
    evolution_mode: EvolutionMode = EvolutionMode::Interactable,
    auto_evolution_seconds: f64 = 30.0,
    evolution_cooldown_seconds: f64 = 5.0,
    background_lockout_seconds: f64 = 1.0,
    blob_count: u32 = 3,
    blob_radius: f64 = 0.06,
    blob_speed: f64 = 0.15,
    vibration_enabled: bool = true,
    idle_vibrate_seconds: f64 = 20.0,
    idle_light_seconds: f64 = 40.0,
    idle_hint_seconds: f64 = 60.0,
    isolation_window_seconds: f64 = 30.0,
    isolation_radius: f64 = 0.12,
    /// A pause in drawing longer than this starts a new isolation window.
    isolation_gap_seconds: f64 = 2.0,
    repetition_threshold: f64 = 0.8,
    repetition_history: u32 = 5,
    area_overuse_fraction: f64 = 0.6,
    /// Overuse is only reported once the scene holds this many objects.
    area_overuse_min_objects: u32 = 4,
    hint_size: f64 = 0.15,
    hint_lifetime_seconds: f64 = 30.0,
    hash_check_ticks: u64 = 300,
}

/// File names must survive a round trip through the text form.
fn path_value(key: &str, value: &str) -> Result<String, String> {
    if value.is_empty() || value.starts_with('#') || value.trim() != value || value.contains(['\n', '\r']) {
        return Err(format!("invalid value {value:?} for {key}"));
    }
    Ok(value.to_string())
}

impl EngineConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = EngineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = crate::chord::strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError { line: idx + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let value = crate::chord::strip_comment(value.trim_start());
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate().map_err(|message| ConfigError { line: 0, message })?;
        Ok(cfg)
    }

    /// Applies a single override, as used by scenario headers.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), String> {
        self.set(key, value)?;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("hit_radius", self.hit_radius),
            ("close_epsilon", self.close_epsilon),
            ("min_stroke_length", self.min_stroke_length),
            ("erase_radius", self.erase_radius),
            ("stroke_fade_seconds", self.stroke_fade_seconds),
            ("proximity_radius", self.proximity_radius),
            ("cursor_speed", self.cursor_speed),
            ("dwell_epsilon", self.dwell_epsilon),
            ("dwell_seconds", self.dwell_seconds),
            ("near_distance", self.near_distance),
            ("min_thickness", self.min_thickness),
            ("explore_step", self.explore_step),
            ("auto_evolution_seconds", self.auto_evolution_seconds),
            ("blob_radius", self.blob_radius),
            ("idle_vibrate_seconds", self.idle_vibrate_seconds),
            ("isolation_window_seconds", self.isolation_window_seconds),
            ("isolation_radius", self.isolation_radius),
            ("isolation_gap_seconds", self.isolation_gap_seconds),
            ("hint_size", self.hint_size),
            ("hint_lifetime_seconds", self.hint_lifetime_seconds),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        let non_negative = [
            ("evolution_cooldown_seconds", self.evolution_cooldown_seconds),
            ("background_lockout_seconds", self.background_lockout_seconds),
            ("blob_speed", self.blob_speed),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must not be negative"));
            }
        }
        if self.tick_rate == 0 {
            return Err("tick_rate must be positive".into());
        }
        if self.closed_loops == 0 {
            return Err("closed_loops must be at least 1".into());
        }
        if self.octave_span == 0 || self.base_midi as u16 + 12 * self.octave_span as u16 > 128 {
            return Err("pitch range exceeds MIDI".into());
        }
        if !(self.near_distance < self.far_distance) {
            return Err("near_distance must be below far_distance".into());
        }
        if !(self.min_thickness <= self.max_thickness) {
            return Err("min_thickness must not exceed max_thickness".into());
        }
        if !(self.idle_vibrate_seconds < self.idle_light_seconds && self.idle_light_seconds < self.idle_hint_seconds) {
            return Err("idle thresholds must be increasing".into());
        }
        for (name, v) in [
            ("fill_opacity", self.fill_opacity),
            ("repetition_threshold", self.repetition_threshold),
            ("area_overuse_fraction", self.area_overuse_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.hash_check_ticks == 0 {
            return Err("hash_check_ticks must be positive".into());
        }
        Ok(())
    }

    /// Duration of one tick in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate as f64
    }

    /// Whole ticks covering `seconds`, rounded to nearest.
    pub fn ticks(&self, seconds: f64) -> u64 {
        (seconds * self.tick_rate as f64).round() as u64
    }

    /// Hex digest of the canonical text form.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_text() {
        let cfg = EngineConfig::default();
        assert_eq!(EngineConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = EngineConfig::parse(
            "# room 2\nseed = 42\ntick_rate=60 # fast\ncorpus = songs.txt\nevolution_mode = automatic\ninitial_chord = F#m\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.tick_rate, 60);
        assert_eq!(cfg.corpus.as_deref(), Some("songs.txt"));
        assert_eq!(cfg.evolution_mode, EvolutionMode::Automatic);
        assert_eq!(cfg.initial_chord.to_string(), "F#m");
        assert_ne!(cfg.digest(), EngineConfig::default().digest());
    }

    #[test]
    fn errors_carry_line() {
        let e = EngineConfig::parse("seed = 1\nbogus = 2\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = EngineConfig::parse("hit_radius = wide\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(EngineConfig::parse("just words\n").is_err());
        assert!(EngineConfig::parse("hit_radius = -1\n").is_err());
        assert!(EngineConfig::parse("idle_light_seconds = 10\n").is_err());
    }

    #[test]
    fn file_names_round_trip() {
        assert!(EngineConfig::parse("corpus =\n").is_err());
        assert!(EngineConfig::parse("corpus =#songs.txt\n").is_err());
        let mut cfg = EngineConfig::default();
        assert!(cfg.apply_override("model", "#m").is_err());
        assert!(cfg.apply_override("model", "a\nb").is_err());
        cfg.apply_override("model", "rooms/a#1.model").unwrap();
        assert_eq!(EngineConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn tick_conversion() {
        let cfg = EngineConfig::default();
        assert_eq!(cfg.ticks(20.0), 600);
        assert_eq!(cfg.ticks(1.5), 45);
    }
}
