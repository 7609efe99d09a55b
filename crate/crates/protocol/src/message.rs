//! Wire messages: one JSON object per line.

use std::fmt;
use std::str::FromStr;

use musictraces_core::control::ControlCommand;
use musictraces_core::hints::Notification;
use musictraces_core::interaction::{DeviceCommand, InputEvent};
use musictraces_core::playback::NoteEvent;
use musictraces_core::scene::SceneState;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::delta::StateDelta;

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on an encoded message, in bytes.
pub const MAX_MESSAGE_BYTES: usize = 8 << 20;

/// 64-bit digest carried as 16 hex digits, so that JavaScript clients keep
/// every bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub u64);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Digest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 {
            return Err(format!("digest {s:?} is not 16 hex digits"));
        }
        u64::from_str_radix(s, 16)
            .map(Digest)
            .map_err(|_| format!("digest {s:?} is not hexadecimal"))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sensor,
    Console,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Decode,
    UnsupportedVersion,
    RoleConflict,
    ConsoleLimit,
    HandshakeRequired,
    HandshakeTimeout,
    NotAllowed,
    OutOfSequence,
    InvalidInput,
    InvalidCommand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scene: SceneState,
    pub hash: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum Body {
    /// First message on every connection.
    Hello {
        role: Role,
    },
    Input(InputEvent),
    StateDelta(StateDelta),
    Snapshot(Snapshot),
    Notification(Notification),
    DeviceCommand(DeviceCommand),
    Control(ControlCommand),
    NoteEvent(NoteEvent),
    HashCheck {
        hash: Digest,
    },
    /// Acknowledges the peer's message `seq`.
    Ack {
        seq: u64,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Hello { .. } => "hello",
            Body::Input(_) => "input",
            Body::StateDelta(_) => "state_delta",
            Body::Snapshot(_) => "snapshot",
            Body::Notification(_) => "notification",
            Body::DeviceCommand(_) => "device_command",
            Body::Control(_) => "control",
            Body::NoteEvent(_) => "note_event",
            Body::HashCheck { .. } => "hash_check",
            Body::Ack { .. } => "ack",
            Body::Error { .. } => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Message {
    pub version: u32,
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub body: Body,
}

// Flattened fields are buffered by serde, which loses the integer keys of
// object maps, so the envelope is read by hand.
impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_map(MessageVisitor)
    }
}

struct MessageVisitor;

impl<'de> serde::de::Visitor<'de> for MessageVisitor {
    type Value = Message;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a message object")
    }

    fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<Message, A::Error> {
        use serde::de::Error;
        let mut version = None;
        let mut seq = None;
        let mut tick = None;
        let mut kind: Option<String> = None;
        let mut body: Option<serde_json::Value> = None;
        while let Some(key) = map.next_key::<String>()? {
            let dup = match key.as_str() {
                "version" => version.replace(map.next_value()?).is_some(),
                "seq" => seq.replace(map.next_value()?).is_some(),
                "tick" => tick.replace(map.next_value()?).is_some(),
                "kind" => kind.replace(map.next_value()?).is_some(),
                "body" => body.replace(map.next_value()?).is_some(),
                other => return Err(A::Error::unknown_field(other, FIELDS)),
            };
            if dup {
                return Err(A::Error::custom(format!("duplicate field `{key}`")));
            }
        }
        let kind = kind.ok_or_else(|| A::Error::missing_field("kind"))?;
        let body = body.ok_or_else(|| A::Error::missing_field("body"))?;
        let tagged = serde_json::json!({ "kind": kind, "body": body });
        Ok(Message {
            version: version.ok_or_else(|| A::Error::missing_field("version"))?,
            seq: seq.ok_or_else(|| A::Error::missing_field("seq"))?,
            tick: tick.ok_or_else(|| A::Error::missing_field("tick"))?,
            body: serde_json::from_value(tagged).map_err(A::Error::custom)?,
        })
    }
}

const FIELDS: &[&str] = &["version", "seq", "tick", "kind", "body"];

impl Message {
    pub fn new(seq: u64, tick: u64, body: Body) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            seq,
            tick,
            body,
        }
    }
}

/// Why bytes failed to decode. `position` is a byte offset into the input.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("decode error at byte {position}: {reason}")]
pub struct DecodeError {
    pub position: usize,
    pub reason: String,
}

/// Single-line JSON, without the trailing newline.
pub fn encode(msg: &Message) -> Vec<u8> {
    serde_json::to_vec(msg).expect("messages serialize")
}

/// Encoded line including the `\n` terminator.
pub fn encode_line(msg: &Message) -> String {
    let mut s = String::from_utf8(encode(msg)).expect("JSON is UTF-8");
    s.push('\n');
    s
}

/// Decodes one message. A single trailing `\n` or `\r\n` is accepted.
pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
    if bytes.len() > MAX_MESSAGE_BYTES {
        return Err(DecodeError {
            position: MAX_MESSAGE_BYTES,
            reason: "message too long".into(),
        });
    }
    let text = std::str::from_utf8(bytes).map_err(|e| DecodeError {
        position: e.valid_up_to(),
        reason: "invalid UTF-8".into(),
    })?;
    let text = text.strip_suffix('\n').unwrap_or(text);
    let text = text.strip_suffix('\r').unwrap_or(text);
    if let Some(pos) = text.find('\n') {
        return Err(DecodeError {
            position: pos,
            reason: "embedded newline".into(),
        });
    }
    serde_json::from_str(text).map_err(|e| DecodeError {
        position: byte_offset(text, e.line(), e.column()),
        reason: e.to_string(),
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}
