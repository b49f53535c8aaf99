//! Length-prefixed binary framing.
//!
//! ```text
//! 0x56 0x52 | version 0x01 | type u8 | payload length u32 LE | payload
//! ```
//!
//! Strings are a u16 LE byte length followed by UTF-8; reals are f32 LE.

use thiserror::Error;

use super::gesture::GestureKind;
use crate::effects::{EffectType, EventTrigger};
use crate::mapping::ResponsibilitySet;
use crate::runtime::eye::Eye;

pub const MAGIC: [u8; 2] = [0x56, 0x52];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
/// Largest accepted payload.
pub const MAX_PAYLOAD: usize = 1 << 20;

pub mod message_type {
    pub const HEARTBEAT: u8 = 0x00;
    pub const HELLO: u8 = 0x01;
    pub const LOAD_SCENE: u8 = 0x02;
    pub const SCENE_LOADED: u8 = 0x03;
    pub const VIEWPOINT_UPDATE: u8 = 0x04;
    pub const PICK: u8 = 0x05;
    pub const MODE_SWITCH: u8 = 0x06;
    pub const PLAY_ANIMATION: u8 = 0x07;
    pub const GESTURE: u8 = 0x08;
    // 0x09 is unassigned.
    pub const TICK: u8 = 0x0A;
    pub const EFFECT_FIRED: u8 = 0x0B;
    pub const ACK: u8 = 0x0C;
    pub const SELECTION: u8 = 0x0D;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Heartbeat,
    Hello {
        consumer_id: u8,
        responsibilities: ResponsibilitySet,
        eye: Eye,
    },
    LoadScene {
        scene_path: String,
        mapping_path: String,
    },
    SceneLoaded {
        status: LoadStatus,
        node_count: u32,
    },
    ViewpointUpdate {
        position: [f32; 3],
        rotation: [f32; 4],
    },
    Pick {
        origin: [f32; 3],
        direction: [f32; 3],
    },
    /// Raw mode byte; the consumer validates it and answers bad values with
    /// an error ack.
    ModeSwitch {
        mode: u8,
    },
    PlayAnimation {
        target_path: String,
        axis: [f32; 3],
        rad_per_tick: f32,
    },
    Gesture {
        gesture: GestureKind,
    },
    Tick {
        tick: u32,
    },
    EffectFired {
        effect_type: EffectType,
        trigger: EventTrigger,
        path: String,
        param: f32,
        tick: u32,
    },
    Ack {
        acked_type: u8,
        status: AckStatus,
        tick: u32,
    },
    /// Selection changed while resolving picks; empty path means cleared.
    Selection {
        path: String,
        tick: u32,
    },
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        use message_type::*;
        match self {
            Message::Heartbeat => HEARTBEAT,
            Message::Hello { .. } => HELLO,
            Message::LoadScene { .. } => LOAD_SCENE,
            Message::SceneLoaded { .. } => SCENE_LOADED,
            Message::ViewpointUpdate { .. } => VIEWPOINT_UPDATE,
            Message::Pick { .. } => PICK,
            Message::ModeSwitch { .. } => MODE_SWITCH,
            Message::PlayAnimation { .. } => PLAY_ANIMATION,
            Message::Gesture { .. } => GESTURE,
            Message::Tick { .. } => TICK,
            Message::EffectFired { .. } => EFFECT_FIRED,
            Message::Ack { .. } => ACK,
            Message::Selection { .. } => SELECTION,
        }
    }

    pub fn name(&self) -> &'static str {
        type_name(self.type_byte()).expect("every variant has a name")
    }
}

/// Snake-case name of a message type byte.
pub fn type_name(byte: u8) -> Option<&'static str> {
    use message_type::*;
    Some(match byte {
        HEARTBEAT => "heartbeat",
        HELLO => "hello",
        LOAD_SCENE => "load_scene",
        SCENE_LOADED => "scene_loaded",
        VIEWPOINT_UPDATE => "viewpoint_update",
        PICK => "pick",
        MODE_SWITCH => "mode_switch",
        PLAY_ANIMATION => "play_animation",
        GESTURE => "gesture",
        TICK => "tick",
        EFFECT_FIRED => "effect_fired",
        ACK => "ack",
        SELECTION => "selection",
        _ => return None,
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("string of {0} bytes exceeds the 65535-byte limit")]
    StringTooLong(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("payload length {0} exceeds the frame cap")]
    Oversized(usize),
    #[error("payload shorter than its message type requires")]
    Truncated,
    #[error("{0} trailing payload bytes")]
    TrailingBytes(usize),
    #[error("field `{field}` has out-of-range value {value}")]
    BadEnum { field: &'static str, value: u8 },
    #[error("string is not valid UTF-8")]
    BadUtf8,
    #[error("stream already failed; no further frames are decoded")]
    Poisoned,
}

pub fn encode_message(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    let mut payload = Writer::default();
    match msg {
        Message::Heartbeat => {}
        Message::Hello {
            consumer_id,
            responsibilities,
            eye,
        } => {
            payload.u8(*consumer_id);
            payload.u8(responsibilities.mask());
            payload.u8(eye.code());
        }
        Message::LoadScene {
            scene_path,
            mapping_path,
        } => {
            payload.string(scene_path)?;
            payload.string(mapping_path)?;
        }
        Message::SceneLoaded { status, node_count } => {
            payload.u8(match status {
                LoadStatus::Ok => 0,
                LoadStatus::Error => 1,
            });
            payload.u32(*node_count);
        }
        Message::ViewpointUpdate { position, rotation } => {
            payload.f32s(position);
            payload.f32s(rotation);
        }
        Message::Pick { origin, direction } => {
            payload.f32s(origin);
            payload.f32s(direction);
        }
        Message::ModeSwitch { mode } => payload.u8(*mode),
        Message::PlayAnimation {
            target_path,
            axis,
            rad_per_tick,
        } => {
            payload.string(target_path)?;
            payload.f32s(axis);
            payload.f32s(&[*rad_per_tick]);
        }
        Message::Gesture { gesture } => payload.u8(gesture.code()),
        Message::Tick { tick } => payload.u32(*tick),
        Message::EffectFired {
            effect_type,
            trigger,
            path,
            param,
            tick,
        } => {
            payload.u8(effect_type.code());
            payload.u8(trigger.code());
            payload.string(path)?;
            payload.f32s(&[*param]);
            payload.u32(*tick);
        }
        Message::Ack {
            acked_type,
            status,
            tick,
        } => {
            payload.u8(*acked_type);
            payload.u8(match status {
                AckStatus::Ok => 0,
                AckStatus::Error => 1,
            });
            payload.u32(*tick);
        }
        Message::Selection { path, tick } => {
            payload.string(path)?;
            payload.u32(*tick);
        }
    }
    let payload = payload.0;
    let mut frame = Vec::with_capacity(HEADER_LEN + payload.len());
    frame.extend_from_slice(&MAGIC);
    frame.push(VERSION);
    frame.push(msg.type_byte());
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Message(Message, usize),
    NeedMoreBytes,
}

/// Decodes one frame from the front of `buf`. Never reads beyond the
/// declared payload; header fields are checked as soon as they are present.
pub fn decode_message(buf: &[u8]) -> Result<Decoded, ProtocolError> {
    for (i, &b) in buf.iter().take(2).enumerate() {
        if b != MAGIC[i] {
            return Err(ProtocolError::BadMagic);
        }
    }
    if let Some(&v) = buf.get(2) {
        if v != VERSION {
            return Err(ProtocolError::BadVersion(v));
        }
    }
    if let Some(&t) = buf.get(3) {
        if !is_known_type(t) {
            return Err(ProtocolError::UnknownType(t));
        }
    }
    if buf.len() < HEADER_LEN {
        return Ok(Decoded::NeedMoreBytes);
    }
    let len = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes")) as usize;
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::Oversized(len));
    }
    if buf.len() < HEADER_LEN + len {
        return Ok(Decoded::NeedMoreBytes);
    }
    let mut r = Reader {
        buf: &buf[HEADER_LEN..HEADER_LEN + len],
        pos: 0,
    };
    let msg = decode_payload(buf[3], &mut r)?;
    if r.pos != len {
        return Err(ProtocolError::TrailingBytes(len - r.pos));
    }
    Ok(Decoded::Message(msg, HEADER_LEN + len))
}

fn is_known_type(t: u8) -> bool {
    matches!(t, 0x00..=0x08 | 0x0A..=0x0D)
}

fn decode_payload(t: u8, r: &mut Reader<'_>) -> Result<Message, ProtocolError> {
    use message_type::*;
    Ok(match t {
        HEARTBEAT => Message::Heartbeat,
        HELLO => {
            let consumer_id = r.u8()?;
            let mask = r.u8()?;
            let responsibilities =
                ResponsibilitySet::from_mask(mask).ok_or(ProtocolError::BadEnum {
                    field: "responsibilities",
                    value: mask,
                })?;
            let eye = r.u8()?;
            Message::Hello {
                consumer_id,
                responsibilities,
                eye: Eye::from_code(eye).ok_or(ProtocolError::BadEnum {
                    field: "eye",
                    value: eye,
                })?,
            }
        }
        LOAD_SCENE => Message::LoadScene {
            scene_path: r.string()?,
            mapping_path: r.string()?,
        },
        SCENE_LOADED => {
            let status = match r.u8()? {
                0 => LoadStatus::Ok,
                1 => LoadStatus::Error,
                value => {
                    return Err(ProtocolError::BadEnum {
                        field: "status",
                        value,
                    })
                }
            };
            Message::SceneLoaded {
                status,
                node_count: r.u32()?,
            }
        }
        VIEWPOINT_UPDATE => Message::ViewpointUpdate {
            position: r.f32s()?,
            rotation: r.f32s()?,
        },
        PICK => Message::Pick {
            origin: r.f32s()?,
            direction: r.f32s()?,
        },
        MODE_SWITCH => Message::ModeSwitch { mode: r.u8()? },
        PLAY_ANIMATION => Message::PlayAnimation {
            target_path: r.string()?,
            axis: r.f32s()?,
            rad_per_tick: r.f32s::<1>()?[0],
        },
        GESTURE => {
            let g = r.u8()?;
            Message::Gesture {
                gesture: GestureKind::from_code(g).ok_or(ProtocolError::BadEnum {
                    field: "gesture_id",
                    value: g,
                })?,
            }
        }
        TICK => Message::Tick { tick: r.u32()? },
        EFFECT_FIRED => {
            let et = r.u8()?;
            let effect_type = EffectType::from_code(et).ok_or(ProtocolError::BadEnum {
                field: "effect_type",
                value: et,
            })?;
            let tr = r.u8()?;
            let trigger = EventTrigger::from_code(tr).ok_or(ProtocolError::BadEnum {
                field: "trigger",
                value: tr,
            })?;
            Message::EffectFired {
                effect_type,
                trigger,
                path: r.string()?,
                param: r.f32s::<1>()?[0],
                tick: r.u32()?,
            }
        }
        ACK => {
            let acked_type = r.u8()?;
            let status = match r.u8()? {
                0 => AckStatus::Ok,
                1 => AckStatus::Error,
                value => {
                    return Err(ProtocolError::BadEnum {
                        field: "status",
                        value,
                    })
                }
            };
            Message::Ack {
                acked_type,
                status,
                tick: r.u32()?,
            }
        }
        SELECTION => Message::Selection {
            path: r.string()?,
            tick: r.u32()?,
        },
        other => return Err(ProtocolError::UnknownType(other)),
    })
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn string(&mut self, s: &str) -> Result<(), EncodeError> {
        let len = u16::try_from(s.len()).map_err(|_| EncodeError::StringTooLong(s.len()))?;
        self.0.extend_from_slice(&len.to_le_bytes());
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self.pos.checked_add(n).ok_or(ProtocolError::Truncated)?;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or(ProtocolError::Truncated)?;
        self.pos = end;
        Ok(bytes)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32s<const N: usize>(&mut self) -> Result<[f32; N], ProtocolError> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        }
        Ok(out)
    }

    fn string(&mut self) -> Result<String, ProtocolError> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ProtocolError::BadUtf8)
    }
}

/// Per-connection decoder. After the first protocol error the stream is
/// poisoned: no resynchronization is attempted.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    poisoned: bool,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if !self.poisoned {
            self.buf.extend_from_slice(bytes);
        }
    }

    /// Next complete message, or `None` when more bytes are needed.
    pub fn next_message(&mut self) -> Result<Option<Message>, ProtocolError> {
        if self.poisoned {
            return Err(ProtocolError::Poisoned);
        }
        match decode_message(&self.buf) {
            Ok(Decoded::Message(msg, used)) => {
                self.buf.drain(..used);
                Ok(Some(msg))
            }
            Ok(Decoded::NeedMoreBytes) => Ok(None),
            Err(e) => {
                self.poisoned = true;
                self.buf.clear();
                Err(e)
            }
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}
