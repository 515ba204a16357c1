//! Messages exchanged with display clients. Each message is one JSON
//! document carried in one WebSocket text frame.

use rescuesim_core::display::{FrameState, TouchEvent};
use rescuesim_core::text::{SCREEN_HEIGHT, SCREEN_WIDTH};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on an encoded message; a full frame is a few kilobytes.
pub const MAX_MESSAGE_BYTES: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("message of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sequence number {got} does not follow {last}")]
    OutOfOrder { last: u64, got: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    pub width: u32,
    pub height: u32,
    pub server: String,
}

impl Default for Hello {
    fn default() -> Self {
        Hello {
            protocol: PROTOCOL_VERSION,
            width: SCREEN_WIDTH,
            height: SCREEN_HEIGHT,
            server: format!("rescuesim {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Body {
    Hello(Hello),
    Frame(FrameState),
    Touch(TouchEvent),
    Bye,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self.body {
            Body::Hello(_) => "hello",
            Body::Frame(_) => "frame",
            Body::Touch(_) => "touch",
            Body::Bye => "bye",
        }
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn decode(text: &str) -> Result<Self, WireError> {
        if text.len() > MAX_MESSAGE_BYTES {
            return Err(WireError::TooLarge(text.len()));
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Numbers outgoing messages 1, 2, 3, ... on one connection.
#[derive(Debug, Default)]
pub struct SeqCounter(u64);

impl SeqCounter {
    pub fn stamp(&mut self, body: Body) -> WireMessage {
        self.0 += 1;
        WireMessage { seq: self.0, body }
    }
}

/// Rejects incoming messages whose seq does not increase.
#[derive(Debug, Default)]
pub struct SeqCheck(u64);

impl SeqCheck {
    pub fn accept(&mut self, msg: &WireMessage) -> Result<(), WireError> {
        if msg.seq <= self.0 {
            return Err(WireError::OutOfOrder {
                last: self.0,
                got: msg.seq,
            });
        }
        self.0 = msg.seq;
        Ok(())
    }
}
