//! Wire protocol, pose prediction, network model and the cloud/client
//! window pipeline.
//!
//! Every message is an 18-byte header followed by the payload:
//!
//! ```text
//! magic "VOYG" | version u8 | type u8 | index u32 | payload length u32 | crc32 u32
//! ```
//!
//! The CRC is the IEEE CRC-32 of the payload. Over a byte stream each
//! message is preceded by its total length as a u32.

mod live;
mod network;
mod payload;
mod predict;
mod session;
mod sim;

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub use live::{run_client, serve_one, LiveClientReport, ServeReport};
pub use network::{measure_bandwidth, raw_image_baseline_mbps, Link, NetworkModel, BITS_PER_MEGABIT};
pub use payload::{decode_delta, decode_pose, delta_payload_len, encode_delta, encode_pose, SessionConfig};
pub use predict::{predict_pose, PoseHistory};
pub use session::{ClientEvent, ClientSession, CloudConfig, CloudSession, SearchMode, WindowReport};
pub use sim::{simulate, simulate_with, Direction, FrameSample, SimConfig, SimOutput, Transcript, TranscriptEntry, WindowTiming};

pub const MAGIC: &[u8; 4] = b"VOYG";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 18;
/// Upper bound on accepted payloads.
pub const MAX_PAYLOAD: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    Pose = 1,
    InitCut = 2,
    DeltaCut = 3,
    Config = 4,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => MsgType::Pose,
            2 => MsgType::InitCut,
            3 => MsgType::DeltaCut,
            4 => MsgType::Config,
            _ => return Err(Error::Protocol(format!("unknown message type {v}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MsgType,
    /// Frame index for poses, window index for cuts.
    pub index: u32,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(kind: MsgType, index: u32, payload: Vec<u8>) -> Self {
        Message { kind, index, payload }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend(MAGIC);
        out.push(VERSION);
        out.push(self.kind as u8);
        out.extend(self.index.to_le_bytes());
        out.extend((self.payload.len() as u32).to_le_bytes());
        out.extend(crc32fast::hash(&self.payload).to_le_bytes());
        out.extend(&self.payload);
        out
    }

    /// Decodes one message from the front of `buf`; returns it and the bytes
    /// consumed.
    pub fn decode(buf: &[u8]) -> Result<(Message, usize)> {
        if buf.len() < HEADER_BYTES {
            return Err(Error::format("truncated message header"));
        }
        if &buf[..4] != MAGIC {
            return Err(Error::Protocol("bad magic".into()));
        }
        if buf[4] != VERSION {
            return Err(Error::Protocol(format!("unsupported version {}", buf[4])));
        }
        let kind = MsgType::from_u8(buf[5])?;
        let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
        let index = word(6);
        let len = word(10) as usize;
        let expected = word(14);
        if len > MAX_PAYLOAD {
            return Err(Error::Protocol(format!("payload of {len} bytes exceeds limit")));
        }
        let payload = buf
            .get(HEADER_BYTES..HEADER_BYTES + len)
            .ok_or_else(|| Error::format("truncated message payload"))?;
        let actual = crc32fast::hash(payload);
        if actual != expected {
            return Err(Error::Crc { expected, actual });
        }
        Ok((Message::new(kind, index, payload.to_vec()), HEADER_BYTES + len))
    }

    /// Writes `length u32 | message bytes`.
    pub fn write_framed<W: Write>(&self, w: &mut W) -> Result<()> {
        let bytes = self.encode();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Reads one length-prefixed message; `None` on a clean end of stream.
    pub fn read_framed<R: Read>(r: &mut R) -> Result<Option<Message>> {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_le_bytes(len) as usize;
        if !(HEADER_BYTES..=HEADER_BYTES + MAX_PAYLOAD).contains(&len) {
            return Err(Error::Protocol(format!("frame length {len} out of range")));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let (msg, used) = Message::decode(&buf)?;
        if used != len {
            return Err(Error::Protocol("frame length disagrees with header".into()));
        }
        Ok(Some(msg))
    }
}

/// Tracks strictly increasing indices per message type.
#[derive(Debug, Clone, Default)]
pub(crate) struct IndexGuard {
    last: std::collections::BTreeMap<MsgType, u32>,
}

impl IndexGuard {
    pub fn check(&mut self, msg: &Message) -> Result<()> {
        // Cuts share one window sequence.
        let key = match msg.kind {
            MsgType::InitCut => MsgType::DeltaCut,
            k => k,
        };
        if let Some(&last) = self.last.get(&key) {
            if msg.index <= last {
                return Err(Error::Protocol(format!(
                    "{:?} index {} not after {last}",
                    msg.kind, msg.index
                )));
            }
        }
        self.last.insert(key, msg.index);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_and_round_trip() {
        let msg = Message::new(MsgType::DeltaCut, 7, vec![1, 2, 3]);
        let bytes = msg.encode();
        assert_eq!(bytes.len(), HEADER_BYTES + 3);
        assert_eq!(&bytes[..4], b"VOYG");
        assert_eq!(bytes[5], 3);
        assert_eq!(&bytes[6..10], &7u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &3u32.to_le_bytes());
        assert_eq!(Message::decode(&bytes).unwrap(), (msg, bytes.len()));
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = Message::new(MsgType::Pose, 1, vec![9; 28]).encode();
        bytes[HEADER_BYTES + 3] ^= 1;
        assert!(matches!(Message::decode(&bytes), Err(Error::Crc { .. })));
        let mut bad = Message::new(MsgType::Pose, 1, vec![]).encode();
        bad[0] = b'X';
        assert!(matches!(Message::decode(&bad), Err(Error::Protocol(_))));
    }

    #[test]
    fn framing_round_trip() {
        let msgs = [
            Message::new(MsgType::Config, 0, vec![5; 10]),
            Message::new(MsgType::InitCut, 0, vec![]),
        ];
        let mut stream = Vec::new();
        for m in &msgs {
            m.write_framed(&mut stream).unwrap();
        }
        let mut r = stream.as_slice();
        for m in &msgs {
            assert_eq!(Message::read_framed(&mut r).unwrap().as_ref(), Some(m));
        }
        assert_eq!(Message::read_framed(&mut r).unwrap(), None);
    }

    #[test]
    fn indices_must_increase() {
        let mut g = IndexGuard::default();
        g.check(&Message::new(MsgType::InitCut, 0, vec![])).unwrap();
        g.check(&Message::new(MsgType::DeltaCut, 1, vec![])).unwrap();
        assert!(g.check(&Message::new(MsgType::DeltaCut, 1, vec![])).is_err());
        g.check(&Message::new(MsgType::Pose, 0, vec![])).unwrap();
    }
}
