//! Scene model, composition rules and behavior detectors for a two-player
//! music and painting environment.
//!
//! All state lives in [`SceneState`] and is driven by [`Engine`] one tick at
//! a time. Given the same seed, configuration and input sequence, every run
//! produces the same scene and the same [`scene_hash`].

pub mod chord;
pub mod config;
pub mod control;
pub mod engine;
pub mod geometry;
pub mod hints;
pub mod interaction;
pub mod markov;
pub mod pitch;
pub mod playback;
pub mod rng;
pub mod scene;

pub use chord::{parse_chord_corpus, ChordSymbol, Corpus, ParseError, Quality};
pub use config::{ConfigError, EngineConfig};
pub use control::ControlCommand;
pub use engine::{ChordChange, Effects, Engine, EngineError};
pub use geometry::Vec2;
pub use hints::{Notification, NotificationKind};
pub use interaction::{DeviceCommand, EvolutionMode, InputEvent, InputKind};
pub use markov::{train_markov, ChordModel, ModelError};
pub use playback::{NoteEvent, NoteSource};
pub use scene::{scene_hash, ObjectId, PlayerId, SceneState};

/// Chord progressions used when no corpus or model is configured.
pub const DEFAULT_CORPUS: &str = include_str!("../data/default_corpus.txt");

/// Model trained on [`DEFAULT_CORPUS`].
pub fn default_model() -> ChordModel {
    let corpus = parse_chord_corpus(DEFAULT_CORPUS).expect("bundled corpus parses");
    train_markov(&corpus.sequences).expect("bundled corpus has transitions")
}
