//! Configuration loading and headless scenario execution.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use musictraces_core::interaction::InputEvent;
use musictraces_core::{default_model, parse_chord_corpus, train_markov, ChordModel, Engine, EngineConfig};
use musictraces_protocol::session::{Session, SessionError};

use crate::scenario::{Action, Scenario};
use crate::timeline::NoteTimeline;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    VerifyFailed = 1,
    Input = 2,
    Config = 3,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self {
            exit,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(Exit::Input, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Exit::Config, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// A config plus the directory its relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: EngineConfig,
    pub base_dir: PathBuf,
}

impl Default for LoadedConfig {
    fn default() -> Self {
        Self {
            config: EngineConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<LoadedConfig, CliError> {
    let Some(path) = path else {
        return Ok(LoadedConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let config = EngineConfig::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig { config, base_dir })
}

/// Model named by the config: a model file, else a corpus to train, else
/// the bundled corpus.
pub fn load_model(cfg: &EngineConfig, base_dir: &Path) -> Result<ChordModel, CliError> {
    let read = |p: &str| {
        let full = base_dir.join(p);
        fs::read_to_string(&full).map_err(|e| CliError::config(format!("cannot read {}: {e}", full.display())))
    };
    if let Some(m) = &cfg.model {
        return ChordModel::from_text(&read(m)?).map_err(|e| CliError::config(format!("model {m}: {e}")));
    }
    if let Some(c) = &cfg.corpus {
        let corpus = parse_chord_corpus(&read(c)?).map_err(|e| CliError::config(format!("corpus {c}: {e}")))?;
        return train_markov(&corpus.sequences).map_err(|e| CliError::config(format!("corpus {c}: {e}")));
    }
    Ok(default_model())
}

/// Applies scenario header values and an optional seed override on top of a
/// base config, then validates the result.
pub fn scenario_config(scn: &Scenario, base: &EngineConfig, seed: Option<u64>) -> Result<EngineConfig, CliError> {
    let mut cfg = base.clone();
    if let Some(s) = scn.seed {
        cfg.seed = s;
    }
    for (k, v) in &scn.overrides {
        cfg.apply_override(k, v).map_err(CliError::config)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

#[derive(Debug)]
pub struct RunOutput {
    pub final_hash: u64,
    pub end_tick: u64,
    pub timeline: NoteTimeline,
    pub log: String,
    pub engine: Engine,
}

/// Executes a scenario at unbounded speed against a recording session.
pub fn run_scenario(scn: &Scenario, cfg: EngineConfig, model: ChordModel) -> Result<RunOutput, CliError> {
    let tick_rate = cfg.tick_rate;
    let engine = Engine::new(cfg, model).map_err(|e| CliError::config(e.to_string()))?;
    let io = |e: std::io::Error| CliError::input(format!("log: {e}"));
    let mut session = Session::new(engine, 0, Vec::new()).map_err(io)?;
    let mut notes = Vec::new();
    for step in &scn.steps {
        let fx = match &step.action {
            Action::Input(kind) => session.input(&InputEvent {
                tick: step.tick,
                kind: kind.clone(),
            }),
            Action::Control(cmd) => match session.advance_to(step.tick) {
                Ok(mut fx) => session.control(cmd).map(|more| {
                    fx.extend(more);
                    fx
                }),
                Err(e) => Err(e.into()),
            },
        };
        match fx {
            Ok(fx) => notes.extend(fx.notes),
            Err(SessionError::Engine(e)) => return Err(CliError::input(format!("scenario line {}: {e}", step.line))),
            Err(SessionError::Io(e)) => return Err(io(e)),
        }
    }
    let end_tick = scn.end_tick();
    let tail = session.advance_to(end_tick).map_err(io)?;
    notes.extend(tail.notes);
    let (final_hash, engine, log) = session.finish(end_tick).map_err(io)?;
    Ok(RunOutput {
        final_hash,
        end_tick: engine.tick(),
        timeline: NoteTimeline::new(tick_rate, notes),
        log: String::from_utf8(log).expect("log is UTF-8"),
        engine,
    })
}
