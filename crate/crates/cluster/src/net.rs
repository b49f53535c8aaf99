//! Frame transport over TCP.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::Sender;
use std::thread::JoinHandle;

use ivr_core::protocol::{encode_message, Message, StreamDecoder};

use crate::ClusterError;

pub fn send(stream: &mut impl Write, msg: &Message) -> Result<(), ClusterError> {
    let frame = encode_message(msg).map_err(|e| ClusterError::Encode(e.to_string()))?;
    stream.write_all(&frame)?;
    Ok(())
}

/// Blocking reader over one connection. `Ok(None)` is a clean end of stream.
pub struct FrameReader<R> {
    inner: R,
    decoder: StreamDecoder,
    buf: Vec<u8>,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            decoder: StreamDecoder::new(),
            buf: vec![0; 64 * 1024],
        }
    }

    pub fn next_message(&mut self) -> Result<Option<Message>, ClusterError> {
        loop {
            if let Some(msg) = self.decoder.next_message()? {
                return Ok(Some(msg));
            }
            let n = self.inner.read(&mut self.buf)?;
            if n == 0 {
                if self.decoder.buffered() > 0 {
                    return Err(ClusterError::Protocol(
                        ivr_core::protocol::ProtocolError::Truncated,
                    ));
                }
                return Ok(None);
            }
            self.decoder.push(&self.buf[..n]);
        }
    }
}

/// What a reader thread reports about its connection.
#[derive(Debug)]
pub enum Incoming {
    Message(Message),
    Closed,
    Failed(String),
}

/// Forwards every frame from `stream` to `tx`, tagged with `id`, preserving
/// connection order.
pub fn spawn_reader(id: u8, stream: TcpStream, tx: Sender<(u8, Incoming)>) -> JoinHandle<()> {
    std::thread::spawn(move || {
        let mut reader = FrameReader::new(stream);
        loop {
            let item = match reader.next_message() {
                Ok(Some(msg)) => Incoming::Message(msg),
                Ok(None) => Incoming::Closed,
                Err(e) => Incoming::Failed(e.to_string()),
            };
            let last = !matches!(item, Incoming::Message(_));
            if tx.send((id, item)).is_err() || last {
                return;
            }
        }
    })
}
