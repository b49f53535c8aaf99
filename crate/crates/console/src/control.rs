//! Live cluster control: the console hosts the producer and relays consumer
//! feedback to any number of stream observers.

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};
use tokio::sync::broadcast;

use ivr_cluster::{
    load_config, ClusterError, FeedbackSink, Launcher, Session, SessionOptions, SessionReport,
};
use ivr_core::protocol::{type_name, AckStatus, LoadStatus, Message};
use ivr_core::runtime::{ProducerError, ScriptError};

use crate::ApiError;

/// Feedback messages buffered per observer before the slowest one lags.
pub const FEEDBACK_BUFFER: usize = 4096;

/// JSON body for one feedback message, in the event log's field names
/// where they overlap.
pub fn feedback_json(consumer: u8, msg: &Message) -> Value {
    match msg {
        Message::EffectFired {
            effect_type,
            trigger,
            path,
            param,
            tick,
        } => json!({
            "consumer": consumer,
            "tick": tick,
            "type": effect_type.as_str(),
            "trigger": trigger.as_str(),
            "path": path,
            "param": param,
        }),
        Message::Ack {
            acked_type,
            status,
            tick,
        } => json!({
            "consumer": consumer,
            "ack": type_name(*acked_type).map_or_else(|| format!("0x{acked_type:02x}"), str::to_string),
            "status": if *status == AckStatus::Ok { "ok" } else { "error" },
            "tick": tick,
        }),
        Message::Selection { path, tick } => {
            json!({"consumer": consumer, "selection": path, "tick": tick})
        }
        Message::SceneLoaded { status, node_count } => json!({
            "consumer": consumer,
            "scene_loaded": if *status == LoadStatus::Ok { "ok" } else { "error" },
            "node_count": node_count,
        }),
        other => json!({"consumer": consumer, "message": other.name()}),
    }
}

pub struct Control {
    session: Option<Session>,
    out_dir: PathBuf,
    storage: PathBuf,
    feedback: broadcast::Sender<String>,
}

impl Control {
    pub fn new(storage: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            session: None,
            out_dir: out_dir.into(),
            storage: storage.into(),
            feedback: broadcast::channel(FEEDBACK_BUFFER).0,
        }
    }

    /// The feedback channel. Subscribers see every message sent after they join.
    pub fn sender(&self) -> broadcast::Sender<String> {
        self.feedback.clone()
    }

    /// Starts the producer and every consumer of `config_file`, a path
    /// relative to the console's storage directory.
    pub fn attach(&mut self, config_file: &str) -> Result<Vec<u8>, ApiError> {
        if self.session.is_some() {
            return Err(ApiError::conflict(
                "already_attached",
                "a cluster session is already attached",
            ));
        }
        let (config, storage) =
            load_config(&self.storage.join(config_file)).map_err(|e| match e {
                ClusterError::Read { .. } => ApiError::not_found(e.to_string()),
                other => ApiError::unprocessable(other.to_string()),
            })?;
        let tx = self.feedback.clone();
        let sink: FeedbackSink = Arc::new(move |id, msg| {
            // No observers is fine: feedback is only ever logged or relayed.
            let _ = tx.send(feedback_json(id, msg).to_string());
        });
        let mut opts = SessionOptions::new(storage, &self.out_dir);
        opts.launcher = Launcher::Threads;
        opts.feedback = Some(sink);
        let session = Session::start(&config, opts).map_err(cluster_error)?;
        self.session = Some(session);
        Ok(config.consumers.iter().map(|c| c.id).collect())
    }

    /// Orders one script-grammar line and returns the names of the
    /// messages it broadcast.
    pub fn command(&mut self, line: &str) -> Result<Vec<&'static str>, ApiError> {
        let session = self
            .session
            .as_mut()
            .ok_or_else(|| ApiError::conflict("not_attached", "no cluster session is attached"))?;
        let sent = session.submit_line(line).map_err(cluster_error)?;
        Ok(sent.iter().map(Message::name).collect())
    }

    pub fn detach(&mut self) -> Result<SessionReport, ApiError> {
        let session = self
            .session
            .take()
            .ok_or_else(|| ApiError::conflict("not_attached", "no cluster session is attached"))?;
        session.finish().map_err(cluster_error)
    }
}

fn cluster_error(e: ClusterError) -> ApiError {
    match e {
        ClusterError::Producer(ProducerError::Script(ScriptError::UnknownVerb {
            verb, ..
        })) => ApiError::bad_request_code("bad_command", format!("unknown verb `{verb}`")),
        ClusterError::Producer(ProducerError::Script(ScriptError::BadArguments {
            message,
            ..
        })) => ApiError::bad_request_code("bad_command", message),
        ClusterError::Producer(p) => ApiError::conflict("producer", p.to_string()),
        ClusterError::Config(c) => ApiError::unprocessable(c.to_string()),
        e @ ClusterError::LoadFailed { .. } => ApiError::unprocessable(e.to_string()),
        other => ApiError::cluster(other.to_string()),
    }
}
