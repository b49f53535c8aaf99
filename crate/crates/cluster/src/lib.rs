//! Local cluster harness: a producer plus consumers over loopback TCP,
//! scripted sessions, and display log tooling.

pub mod consumer;
pub mod logs;
pub mod net;
pub mod session;

use std::path::PathBuf;

use thiserror::Error;

use ivr_core::config::ConfigError;
use ivr_core::eventlog::LogError;
use ivr_core::protocol::ProtocolError;
use ivr_core::runtime::{ConsumerError, ProducerError, ScriptError};

pub use consumer::{log_file_name, run_consumer};
pub use logs::{expand_log_paths, merge_files, read_log};
pub use session::{
    load_config, run_session, FeedbackSink, Launcher, Session, SessionOptions, SessionReport,
};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cannot read `{}`: {reason}", path.display())]
    Read { path: PathBuf, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("script: {0}")]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Producer(#[from] ProducerError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Consumer(#[from] ConsumerError),
    #[error("cannot encode frame: {0}")]
    Encode(String),
    #[error("cannot connect to producer at {address}: {reason}")]
    Connect { address: String, reason: String },
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("handshake: {0}")]
    Handshake(String),
    #[error("consumer {} disconnected: {reason}", consumer.map_or("?".to_string(), |c| c.to_string()))]
    Disconnected {
        consumer: Option<u8>,
        reason: String,
    },
    #[error("consumer {0} is not in the config")]
    UnknownConsumer(u8),
    #[error("consumers {consumers:?} failed to load scene `{}` with mapping `{}`", scene.display(), mapping.display())]
    LoadFailed {
        consumers: Vec<u8>,
        scene: PathBuf,
        mapping: PathBuf,
    },
    #[error("consumer {consumer} failed: {reason}")]
    WorkerFailed { consumer: u8, reason: String },
    #[error("cannot write log `{}`: {reason}", path.display())]
    Log { path: PathBuf, reason: String },
    #[error("log `{}`: {source}", path.display())]
    LogParse { path: PathBuf, source: LogError },
}
