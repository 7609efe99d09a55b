//! Wire protocol, session logs and the live session server.

pub mod client;
pub mod delta;
pub mod log;
pub mod message;
pub mod server;
pub mod session;

pub use delta::StateDelta;
pub use log::{LogError, LogHeader, LogTrailer, SessionLog};
pub use message::{
    decode, encode, encode_line, Body, DecodeError, Digest, ErrorCode, Message, Role, Snapshot, PROTOCOL_VERSION,
};
pub use session::{replay, replay_text, ReplayError, ReplayOutcome, Session, SessionError};
