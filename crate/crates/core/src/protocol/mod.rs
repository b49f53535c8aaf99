//! Producer/consumer wire protocol and tracking input.

mod codec;
pub mod gesture;
pub mod tracking;

pub use codec::{
    decode_message, encode_message, message_type, type_name, AckStatus, Decoded, EncodeError,
    LoadStatus, Message, ProtocolError, StreamDecoder, HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION,
};
pub use gesture::{recognize_gesture, GestureError, GestureKind, GestureTracker, TimedSample};
pub use tracking::{parse_tracking_datagram, TrackingError, TrackingFrame, TrackingSample};
