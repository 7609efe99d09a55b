//! Recording sessions and replaying their logs.

use std::io::{self, Write};

use musictraces_core::control::ControlCommand;
use musictraces_core::interaction::InputEvent;
use musictraces_core::{ChordModel, Effects, Engine, EngineConfig, EngineError};

use crate::log::{LogError, LogHeader, LogLine, LogTrailer, SessionLog};
use crate::message::{Body, Digest, Message, PROTOCOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("log write failed: {0}")]
    Io(#[from] io::Error),
}

/// An engine whose applied inputs and commands are written to a log sink.
pub struct Session<W: Write> {
    engine: Engine,
    sink: W,
    seq: u64,
}

impl<W: Write> Session<W> {
    pub fn new(engine: Engine, started_unix_ms: u64, mut sink: W) -> io::Result<Self> {
        let cfg = engine.config();
        let header = LogHeader {
            version: PROTOCOL_VERSION,
            seed: cfg.seed,
            config_digest: cfg.digest(),
            config: cfg.to_text(),
            model: engine.model().to_text(),
            started_unix_ms,
        };
        sink.write_all(LogLine::Header(header).to_line().as_bytes())?;
        Ok(Self { engine, sink, seq: 0 })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn tick(&self) -> u64 {
        self.engine.tick()
    }

    fn record(&mut self, body: Body) -> io::Result<()> {
        self.seq += 1;
        let msg = Message::new(self.seq, self.engine.tick(), body);
        let line = LogLine::Record {
            tick: msg.tick,
            message: msg,
        };
        self.sink.write_all(line.to_line().as_bytes())
    }

    /// Steps the clock to `tick`, logging a hash check at every interval.
    pub fn advance_to(&mut self, tick: u64) -> io::Result<Effects> {
        let mut fx = Effects::default();
        while self.engine.tick() < tick {
            fx.extend(self.engine.step_tick());
            if self.engine.tick().is_multiple_of(self.engine.config().hash_check_ticks) {
                let hash = Digest(self.engine.hash());
                self.record(Body::HashCheck { hash })?;
                self.sink.flush()?;
            }
        }
        Ok(fx)
    }

    /// Applies a sensor event. Only events the engine absorbed are logged, so
    /// input ignored while paused leaves no record.
    pub fn input(&mut self, ev: &InputEvent) -> Result<Effects, SessionError> {
        if ev.tick < self.engine.tick() {
            return Err(EngineError::OutOfOrder {
                event: ev.tick,
                now: self.engine.tick(),
            }
            .into());
        }
        let mut fx = self.advance_to(ev.tick)?;
        let before = self.engine.scene().input_digest;
        fx.extend(self.engine.process_event(ev)?);
        if self.engine.scene().input_digest != before {
            self.record(Body::Input(ev.clone()))?;
        }
        Ok(fx)
    }

    /// Applies a caregiver command at the current tick.
    pub fn control(&mut self, cmd: &ControlCommand) -> Result<Effects, SessionError> {
        let fx = self.engine.apply_command(cmd)?;
        self.record(Body::Control(cmd.clone()))?;
        Ok(fx)
    }

    /// Advances to `end_tick`, writes the trailer and returns the final hash.
    pub fn finish(mut self, end_tick: u64) -> io::Result<(u64, Engine, W)> {
        self.advance_to(end_tick)?;
        let hash = self.engine.hash();
        let trailer = LogTrailer {
            end_tick: self.engine.tick(),
            final_hash: Digest(hash),
        };
        self.sink.write_all(LogLine::Trailer(trailer).to_line().as_bytes())?;
        self.sink.flush()?;
        Ok((hash, self.engine, self.sink))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("invalid config in log: {0}")]
    Config(String),
    #[error("config digest {found} does not match recorded {recorded}")]
    ConfigDigest { recorded: String, found: String },
    #[error("header seed {header} does not match config seed {config}")]
    Seed { header: u64, config: u64 },
    #[error("invalid model in log: {0}")]
    Model(String),
    #[error("record {seq} at tick {tick} rejected: {error}")]
    Rejected { seq: u64, tick: u64, error: EngineError },
    #[error("hash mismatch at tick {tick}: recorded {expected}, replayed {actual}")]
    HashMismatch {
        tick: u64,
        expected: Digest,
        actual: Digest,
    },
    #[error("log has no trailer")]
    MissingTrailer,
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub engine: Engine,
    pub final_hash: u64,
    pub hash_checks: usize,
}

/// Rebuilds the engine a log header describes.
pub fn engine_from_header(header: &LogHeader) -> Result<Engine, ReplayError> {
    let cfg = EngineConfig::parse(&header.config).map_err(|e| ReplayError::Config(e.to_string()))?;
    let found = cfg.digest();
    if found != header.config_digest {
        return Err(ReplayError::ConfigDigest {
            recorded: header.config_digest.clone(),
            found,
        });
    }
    if cfg.seed != header.seed {
        return Err(ReplayError::Seed {
            header: header.seed,
            config: cfg.seed,
        });
    }
    let model = ChordModel::from_text(&header.model).map_err(|e| ReplayError::Model(e.to_string()))?;
    Engine::new(cfg, model).map_err(|e| ReplayError::Config(e.to_string()))
}

/// Re-executes a log and verifies every hash check and the trailer.
pub fn replay(log: &SessionLog) -> Result<ReplayOutcome, ReplayError> {
    let trailer = log.trailer.as_ref().ok_or(ReplayError::MissingTrailer)?;
    let mut engine = engine_from_header(&log.header)?;
    let mut hash_checks = 0;
    let check = |engine: &Engine, tick: u64, expected: Digest| {
        let actual = Digest(engine.hash());
        if actual == expected {
            Ok(())
        } else {
            Err(ReplayError::HashMismatch { tick, expected, actual })
        }
    };
    for msg in &log.records {
        let rejected = |error| ReplayError::Rejected {
            seq: msg.seq,
            tick: msg.tick,
            error,
        };
        match &msg.body {
            Body::Input(ev) => {
                engine.process_event(ev).map_err(rejected)?;
            }
            Body::Control(cmd) => {
                engine.advance_to(msg.tick);
                engine.apply_command(cmd).map_err(rejected)?;
            }
            Body::HashCheck { hash } => {
                engine.advance_to(msg.tick);
                check(&engine, msg.tick, *hash)?;
                hash_checks += 1;
            }
            _ => unreachable!("parser admits only loggable kinds"),
        }
    }
    engine.advance_to(trailer.end_tick);
    check(&engine, trailer.end_tick, trailer.final_hash)?;
    Ok(ReplayOutcome {
        final_hash: engine.hash(),
        engine,
        hash_checks,
    })
}

/// Parses log text and replays it.
pub fn replay_text(text: &str) -> Result<ReplayOutcome, ReplayError> {
    replay(&SessionLog::parse(text)?)
}
