//! The consumer side of a session: dial the producer, replay its commands,
//! write the display log and report feedback.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::time::{Duration, Instant};

use ivr_core::config::{ClusterConfig, ConsumerConfig};
use ivr_core::eventlog::event_to_json;
use ivr_core::runtime::{ConsumerState, EyeGeometry};

use crate::net::{send, FrameReader};
use crate::ClusterError;

/// How long a consumer keeps retrying its first connection.
pub const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

pub fn log_file_name(consumer_id: u8) -> String {
    format!("{consumer_id}.events.jsonl")
}

pub fn consumer_state(
    config: &ClusterConfig,
    consumer: &ConsumerConfig,
    storage: &Path,
) -> ConsumerState {
    ConsumerState::new(
        consumer.id,
        consumer.responsibilities,
        consumer.eye,
        EyeGeometry { ipd: config.ipd },
        storage,
    )
}

fn connect(producer: SocketAddr) -> Result<TcpStream, ClusterError> {
    let deadline = Instant::now() + CONNECT_TIMEOUT;
    loop {
        match TcpStream::connect_timeout(&producer, CONNECT_TIMEOUT) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => {
                return Err(ClusterError::Connect {
                    address: producer.to_string(),
                    reason: e.to_string(),
                })
            }
            Err(_) => std::thread::sleep(Duration::from_millis(20)),
        }
    }
}

/// Runs one consumer until the producer closes the connection. Events are
/// appended to `log_path` in the order they fire.
pub fn run_consumer(
    mut state: ConsumerState,
    producer: SocketAddr,
    log_path: &Path,
) -> Result<(), ClusterError> {
    let stream = connect(producer)?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = FrameReader::new(stream);
    let mut log = BufWriter::new(File::create(log_path).map_err(|e| ClusterError::Log {
        path: log_path.to_path_buf(),
        reason: e.to_string(),
    })?);

    send(&mut writer, &state.hello())?;
    while let Some(msg) = reader.next_message()? {
        let out = state.handle(&msg)?;
        for e in &out.events {
            writeln!(log, "{}", event_to_json(e))?;
        }
        for f in &out.feedback {
            send(&mut writer, f)?;
        }
    }
    log.flush()?;
    log::debug!("consumer {}: session closed", state.consumer_id);
    Ok(())
}
