//! Session log: a header line, one line per applied input, command or hash
//! check, and a trailer. Every line is a JSON object.

use serde::{Deserialize, Serialize};

use crate::message::{Body, Digest, Message, PROTOCOL_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub seed: u64,
    pub config_digest: String,
    /// Canonical config text.
    pub config: String,
    /// Chord model text.
    pub model: String,
    /// Wall-clock start in Unix milliseconds; 0 for headless runs.
    pub started_unix_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogTrailer {
    pub end_tick: u64,
    pub final_hash: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LogLine {
    Header(LogHeader),
    Record { tick: u64, message: Message },
    Trailer(LogTrailer),
}

impl LogLine {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log lines serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<Message>,
    pub trailer: Option<LogTrailer>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("log line {line}: {reason}")]
pub struct LogError {
    pub line: usize,
    pub reason: String,
}

fn err(line: usize, reason: impl Into<String>) -> LogError {
    LogError {
        line,
        reason: reason.into(),
    }
}

impl SessionLog {
    pub fn to_text(&self) -> String {
        let mut out = LogLine::Header(self.header.clone()).to_line();
        for m in &self.records {
            out.push_str(
                &LogLine::Record {
                    tick: m.tick,
                    message: m.clone(),
                }
                .to_line(),
            );
        }
        if let Some(t) = &self.trailer {
            out.push_str(&LogLine::Trailer(t.clone()).to_line());
        }
        out
    }

    /// Parses and checks structure: header first, records numbered 1, 2, ...
    /// with non-decreasing ticks, at most one trailer and nothing after it.
    pub fn parse(text: &str) -> Result<Self, LogError> {
        let mut header = None;
        let mut records: Vec<Message> = Vec::new();
        let mut trailer: Option<LogTrailer> = None;
        let body = text.strip_suffix('\n').unwrap_or(text);
        for (i, raw) in body.split('\n').enumerate() {
            let line = i + 1;
            if trailer.is_some() {
                return Err(err(line, "content after trailer"));
            }
            let parsed: LogLine = serde_json::from_str(raw).map_err(|e| err(line, e.to_string()))?;
            match (parsed, &header) {
                (LogLine::Header(h), None) => {
                    if h.version != PROTOCOL_VERSION {
                        return Err(err(line, format!("unsupported log version {}", h.version)));
                    }
                    header = Some(h);
                }
                (_, None) => return Err(err(line, "missing header")),
                (LogLine::Header(_), Some(_)) => return Err(err(line, "duplicate header")),
                (LogLine::Record { tick, message }, Some(_)) => {
                    let expected_seq = records.len() as u64 + 1;
                    if message.seq != expected_seq {
                        return Err(err(
                            line,
                            format!("record seq {} where {expected_seq} expected", message.seq),
                        ));
                    }
                    if message.tick != tick || message.version != PROTOCOL_VERSION {
                        return Err(err(line, "record envelope does not match its message"));
                    }
                    if let Some(prev) = records.last() {
                        if tick < prev.tick {
                            return Err(err(line, "record ticks go backwards"));
                        }
                    }
                    if !matches!(message.body, Body::Input(_) | Body::Control(_) | Body::HashCheck { .. }) {
                        return Err(err(line, format!("{} messages are not logged", message.body.kind())));
                    }
                    if let Body::Input(ev) = &message.body {
                        if ev.tick != tick {
                            return Err(err(line, "input tick does not match its record"));
                        }
                    }
                    records.push(message);
                }
                (LogLine::Trailer(t), Some(_)) => {
                    if records.last().is_some_and(|m| m.tick > t.end_tick) {
                        return Err(err(line, "trailer ends before the last record"));
                    }
                    trailer = Some(t);
                }
            }
        }
        let header = header.ok_or_else(|| err(1, "empty log"))?;
        Ok(Self {
            header,
            records,
            trailer,
        })
    }
}
