//! The producer side of a session: spawn consumers, collect their Hellos,
//! broadcast the totally ordered command stream and keep them in lockstep.

use std::collections::BTreeMap;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use ivr_core::config::{ClusterConfig, TrackingConfig};
use ivr_core::mapping::parse_mapping;
use ivr_core::protocol::{
    message_type, parse_tracking_datagram, LoadStatus, Message, TrackingFrame,
};
use ivr_core::runtime::{
    parse_script, ProducerInput, ProducerState, ScriptCommand, TrackingOptions,
};

use crate::consumer::{consumer_state, log_file_name, run_consumer, CONNECT_TIMEOUT};
use crate::net::{send, spawn_reader, Incoming};
use crate::ClusterError;

/// Receives every feedback message with the id of the consumer that sent it.
pub type FeedbackSink = Arc<dyn Fn(u8, &Message) + Send + Sync>;

/// How consumers are started.
#[derive(Debug, Clone)]
pub enum Launcher {
    /// In-process threads. Same code path over loopback TCP, minus process startup.
    Threads,
    /// Child processes of the `ivr` binary, each running `ivr consumer`.
    Processes { exe: PathBuf, config_path: PathBuf },
}

#[derive(Clone)]
pub struct SessionOptions {
    pub storage: PathBuf,
    pub out_dir: PathBuf,
    pub launcher: Launcher,
    /// Upper bound on waiting for acknowledgements after a broadcast.
    pub response_timeout: Duration,
    pub feedback: Option<FeedbackSink>,
}

impl SessionOptions {
    pub fn new(storage: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            storage: storage.into(),
            out_dir: out_dir.into(),
            launcher: Launcher::Threads,
            response_timeout: Duration::from_secs(30),
            feedback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    /// Display log of each consumer, ordered by consumer id.
    pub logs: Vec<(u8, PathBuf)>,
    pub ticks: u32,
    pub commands: usize,
}

enum Worker {
    Thread(u8, JoinHandle<Result<(), ClusterError>>),
    Child(u8, Child),
}

struct Connection {
    consumer_id: u8,
    stream: TcpStream,
}

pub struct Session {
    config: ClusterConfig,
    storage: PathBuf,
    producer: ProducerState,
    /// Keyed by connection index, which tags reader-thread traffic.
    connections: BTreeMap<u8, Connection>,
    incoming: Receiver<(u8, Incoming)>,
    /// Every accepted socket, registered or not, so teardown can unblock all readers.
    sockets: Vec<TcpStream>,
    readers: Vec<JoinHandle<()>>,
    workers: Vec<Worker>,
    logs: Vec<(u8, PathBuf)>,
    timeout: Duration,
    sink: Option<FeedbackSink>,
}

impl Session {
    /// Binds the producer, starts every configured consumer and waits for
    /// all Hellos.
    pub fn start(config: &ClusterConfig, opts: SessionOptions) -> Result<Self, ClusterError> {
        config.check()?;
        std::fs::create_dir_all(&opts.out_dir)?;
        let listener = TcpListener::bind(&config.producer.listen)?;
        let addr = listener.local_addr()?;
        let tracking = config
            .tracking
            .as_ref()
            .map(tracking_options)
            .unwrap_or_default();

        let mut session = Session {
            config: config.clone(),
            storage: opts.storage.clone(),
            producer: ProducerState::new(tracking),
            connections: BTreeMap::new(),
            incoming: mpsc::channel().1,
            sockets: Vec::new(),
            readers: Vec::new(),
            workers: Vec::new(),
            logs: Vec::new(),
            timeout: opts.response_timeout,
            sink: opts.feedback.clone(),
        };
        for c in &config.consumers {
            let log = opts.out_dir.join(log_file_name(c.id));
            session.logs.push((c.id, log.clone()));
            session
                .workers
                .push(spawn_worker(config, c.id, addr, &opts, log)?);
        }
        session.logs.sort();
        session.accept_all(&listener)?;
        Ok(session)
    }

    fn accept_all(&mut self, listener: &TcpListener) -> Result<(), ClusterError> {
        let expected = self.config.consumers.len();
        let deadline = Instant::now() + CONNECT_TIMEOUT;
        listener.set_nonblocking(true)?;
        let (tx, rx) = mpsc::channel();
        let mut streams = BTreeMap::new();
        while streams.len() < expected {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_nodelay(true)?;
                    let index = streams.len() as u8;
                    self.readers
                        .push(spawn_reader(index, stream.try_clone()?, tx.clone()));
                    self.sockets.push(stream.try_clone()?);
                    streams.insert(index, stream);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    self.check_workers()?;
                    if Instant::now() >= deadline {
                        return Err(ClusterError::Timeout(format!(
                            "{} of {expected} consumers connected within {CONNECT_TIMEOUT:?}",
                            streams.len()
                        )));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.incoming = rx;

        while self.connections.len() < expected {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let (index, item) = match self.incoming.recv_timeout(remaining) {
                Ok(x) => x,
                Err(_) => return Err(ClusterError::Timeout("waiting for consumer hellos".into())),
            };
            let msg = match item {
                Incoming::Message(m) => m,
                Incoming::Closed | Incoming::Failed(_) => {
                    return Err(ClusterError::Disconnected {
                        consumer: None,
                        reason: "connection closed before hello".into(),
                    })
                }
            };
            let Message::Hello { consumer_id, .. } = msg else {
                return Err(ClusterError::Handshake(format!(
                    "expected hello, got message type {:#04x}",
                    msg.type_byte()
                )));
            };
            if !self.config.consumers.iter().any(|c| c.id == consumer_id) {
                return Err(ClusterError::UnknownConsumer(consumer_id));
            }
            self.producer.register(&msg)?;
            let stream = streams
                .remove(&index)
                .expect("reader index matches a stream");
            self.connections.insert(
                index,
                Connection {
                    consumer_id,
                    stream,
                },
            );
            log::info!("consumer {consumer_id} connected");
        }
        Ok(())
    }

    /// Fails fast when a consumer exits before connecting.
    fn check_workers(&mut self) -> Result<(), ClusterError> {
        for w in &mut self.workers {
            match w {
                Worker::Thread(id, handle) if handle.is_finished() => {
                    return Err(ClusterError::WorkerFailed {
                        consumer: *id,
                        reason: "exited before connecting".into(),
                    })
                }
                Worker::Child(id, child) => {
                    if let Some(status) = child.try_wait()? {
                        return Err(ClusterError::WorkerFailed {
                            consumer: *id,
                            reason: format!("exited before connecting ({status})"),
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn producer(&self) -> &ProducerState {
        &self.producer
    }

    /// One script-grammar line, as typed at a console.
    pub fn submit_line(&mut self, line: &str) -> Result<Vec<Message>, ClusterError> {
        self.submit(ProducerInput::Console(line.to_string()))
    }

    /// Orders one input, broadcasts what it produces and waits until every
    /// consumer has finished with it.
    pub fn submit(&mut self, input: ProducerInput) -> Result<Vec<Message>, ClusterError> {
        self.drain()?;
        let messages = self.producer.dispatch(input)?;
        for msg in &messages {
            for conn in self.connections.values_mut() {
                send(&mut conn.stream, msg).map_err(|e| ClusterError::Disconnected {
                    consumer: Some(conn.consumer_id),
                    reason: e.to_string(),
                })?;
            }
            match msg {
                Message::Tick { tick } => {
                    let tick = *tick;
                    self.await_each(&format!("ack of tick {tick}"), |m| {
                        matches!(m, Message::Ack { acked_type: message_type::TICK, tick: t, .. } if *t == tick)
                    })?;
                }
                Message::LoadScene {
                    scene_path,
                    mapping_path,
                } => self.await_load(scene_path, mapping_path)?,
                _ => {}
            }
        }
        Ok(messages)
    }

    fn await_load(&mut self, scene: &str, mapping: &str) -> Result<(), ClusterError> {
        self.warn_uncovered(mapping);
        let mut failed = Vec::new();
        let replies =
            self.await_each("scene load", |m| matches!(m, Message::SceneLoaded { .. }))?;
        for (id, reply) in replies {
            if let Message::SceneLoaded {
                status: LoadStatus::Error,
                ..
            } = reply
            {
                failed.push(id);
            }
        }
        if !failed.is_empty() {
            return Err(ClusterError::LoadFailed {
                consumers: failed,
                scene: self.storage.join(scene),
                mapping: self.storage.join(mapping),
            });
        }
        Ok(())
    }

    fn warn_uncovered(&self, mapping: &str) {
        let Ok(text) = std::fs::read_to_string(self.storage.join(mapping)) else {
            return;
        };
        if let Ok(m) = parse_mapping(&text) {
            for t in self.config.uncovered(m.effect_types()) {
                log::warn!(
                    "no consumer is responsible for {} effects used by `{mapping}`",
                    t.as_str()
                );
            }
        }
    }

    /// Waits for one message matching `done` from every consumer, passing all
    /// traffic to the feedback sink.
    fn await_each(
        &mut self,
        what: &str,
        done: impl Fn(&Message) -> bool,
    ) -> Result<BTreeMap<u8, Message>, ClusterError> {
        let deadline = Instant::now() + self.timeout;
        let mut replies = BTreeMap::new();
        while replies.len() < self.connections.len() {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let (index, item) = match self.incoming.recv_timeout(remaining) {
                Ok(x) => x,
                Err(RecvTimeoutError::Timeout) => {
                    return Err(ClusterError::Timeout(format!(
                        "{what}: {} of {} replied",
                        replies.len(),
                        self.connections.len()
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(ClusterError::Disconnected {
                        consumer: None,
                        reason: "all readers stopped".into(),
                    })
                }
            };
            let msg = self.on_incoming(index, item)?;
            if done(&msg) {
                replies.insert(self.connections[&index].consumer_id, msg);
            }
        }
        Ok(replies)
    }

    fn on_incoming(&mut self, index: u8, item: Incoming) -> Result<Message, ClusterError> {
        let id = self.connections.get(&index).map(|c| c.consumer_id);
        let msg = match item {
            Incoming::Message(m) => m,
            Incoming::Closed => {
                return Err(ClusterError::Disconnected {
                    consumer: id,
                    reason: "connection closed mid-session".into(),
                })
            }
            Incoming::Failed(reason) => {
                return Err(ClusterError::Disconnected {
                    consumer: id,
                    reason,
                })
            }
        };
        let id = id.expect("registered connection");
        if let Message::Ack {
            status, acked_type, ..
        } = &msg
        {
            if *status != ivr_core::protocol::AckStatus::Ok {
                log::warn!("consumer {id} rejected message type {acked_type:#04x}");
            }
        }
        self.producer.record_feedback(id, &msg);
        if let Some(sink) = &self.sink {
            sink(id, &msg);
        }
        Ok(msg)
    }

    /// Handles feedback that arrived without being waited for.
    fn drain(&mut self) -> Result<(), ClusterError> {
        while let Ok((index, item)) = self.incoming.try_recv() {
            self.on_incoming(index, item)?;
        }
        Ok(())
    }

    /// Closes every connection, waits for the consumers to flush their logs
    /// and exit.
    pub fn finish(mut self) -> Result<SessionReport, ClusterError> {
        self.drain()?;
        for conn in self.connections.values() {
            let _ = conn.stream.shutdown(Shutdown::Write);
        }
        let mut open = self.connections.len();
        let deadline = Instant::now() + self.timeout;
        while open > 0 {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.incoming.recv_timeout(remaining) {
                Ok((_, Incoming::Closed)) => open -= 1,
                Ok((index, Incoming::Message(m))) => {
                    self.on_incoming(index, Incoming::Message(m))?;
                }
                Ok((index, Incoming::Failed(reason))) => {
                    return Err(ClusterError::Disconnected {
                        consumer: self.connections.get(&index).map(|c| c.consumer_id),
                        reason,
                    })
                }
                Err(_) => {
                    return Err(ClusterError::Timeout(
                        "waiting for consumers to close".into(),
                    ))
                }
            }
        }
        for worker in std::mem::take(&mut self.workers) {
            join_worker(worker)?;
        }
        for r in std::mem::take(&mut self.readers) {
            let _ = r.join();
        }
        Ok(SessionReport {
            logs: self.logs.clone(),
            ticks: self.producer.next_tick,
            commands: self.producer.command_log.len(),
        })
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        for socket in &self.sockets {
            let _ = socket.shutdown(Shutdown::Both);
        }
        for worker in &mut self.workers {
            if let Worker::Child(_, child) = worker {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

fn spawn_worker(
    config: &ClusterConfig,
    id: u8,
    producer: SocketAddr,
    opts: &SessionOptions,
    log: PathBuf,
) -> Result<Worker, ClusterError> {
    match &opts.launcher {
        Launcher::Threads => {
            let consumer = config
                .consumers
                .iter()
                .find(|c| c.id == id)
                .expect("configured consumer");
            let state = consumer_state(config, consumer, &opts.storage);
            let handle = std::thread::Builder::new()
                .name(format!("consumer-{id}"))
                .spawn(move || run_consumer(state, producer, &log))?;
            Ok(Worker::Thread(id, handle))
        }
        Launcher::Processes { exe, config_path } => {
            let child = Command::new(exe)
                .arg("consumer")
                .arg("--config")
                .arg(config_path)
                .arg("--id")
                .arg(id.to_string())
                .arg("--connect")
                .arg(producer.to_string())
                .arg("--storage")
                .arg(&opts.storage)
                .arg("--log")
                .arg(&log)
                .stdin(Stdio::null())
                .spawn()?;
            Ok(Worker::Child(id, child))
        }
    }
}

fn join_worker(worker: Worker) -> Result<(), ClusterError> {
    match worker {
        Worker::Thread(id, handle) => handle.join().map_err(|_| ClusterError::WorkerFailed {
            consumer: id,
            reason: "consumer thread panicked".into(),
        })?,
        Worker::Child(id, mut child) => {
            let status = child.wait()?;
            if status.success() {
                Ok(())
            } else {
                Err(ClusterError::WorkerFailed {
                    consumer: id,
                    reason: format!("consumer process {status}"),
                })
            }
        }
    }
}

fn tracking_options(t: &TrackingConfig) -> TrackingOptions {
    TrackingOptions {
        frame_rate_hz: t.frame_rate_hz,
        head_body: t.head_body,
        hand_body: t.hand_body,
    }
}

/// Receives tracking datagrams until dropped. Malformed datagrams are logged
/// and skipped.
pub struct TrackingReceiver {
    frames: Receiver<TrackingFrame>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl TrackingReceiver {
    pub fn bind(port: u16) -> Result<Self, ClusterError> {
        let socket = std::net::UdpSocket::bind(("0.0.0.0", port))?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let (tx, frames) = mpsc::channel();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            let mut buf = vec![0u8; 64 * 1024];
            while !flag.load(Ordering::Relaxed) {
                let Ok(n) = socket.recv(&mut buf) else {
                    continue;
                };
                match std::str::from_utf8(&buf[..n])
                    .map_err(|e| e.to_string())
                    .and_then(|text| parse_tracking_datagram(text).map_err(|e| e.to_string()))
                {
                    Ok(frame) => {
                        if tx.send(frame).is_err() {
                            return;
                        }
                    }
                    Err(e) => log::warn!("dropping tracking datagram: {e}"),
                }
            }
        });
        Ok(Self {
            frames,
            stop,
            handle: Some(handle),
        })
    }

    pub fn pending(&self) -> Vec<TrackingFrame> {
        self.frames.try_iter().collect()
    }
}

impl Drop for TrackingReceiver {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Runs a whole scripted session. Tracking frames received while the script
/// runs are ordered in before the next script command.
pub fn run_session(
    config: &ClusterConfig,
    script: &str,
    opts: SessionOptions,
) -> Result<SessionReport, ClusterError> {
    let commands: Vec<ScriptCommand> = parse_script(script)?;
    let tracking = match &config.tracking {
        Some(t) => Some(TrackingReceiver::bind(t.udp_port)?),
        None => None,
    };
    let mut session = Session::start(config, opts)?;
    for cmd in commands {
        if let Some(rx) = &tracking {
            for frame in rx.pending() {
                session.submit(ProducerInput::Tracking(frame))?;
            }
        }
        session.submit(ProducerInput::Script(cmd))?;
    }
    session.finish()
}

/// Config and script paths resolved the way the CLI resolves them.
pub fn load_config(path: &Path) -> Result<(ClusterConfig, PathBuf), ClusterError> {
    let text = std::fs::read_to_string(path).map_err(|e| ClusterError::Read {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let config = ivr_core::config::parse_config(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let storage = config.storage_dir(dir);
    Ok((config, storage))
}
