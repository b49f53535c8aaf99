use glam::{DMat3, DQuat};
use thiserror::Error;

use super::eye::Eye;
use super::script::{parse_script_line, ScriptCommand, ScriptError};
use crate::mapping::ResponsibilitySet;
use crate::protocol::{GestureKind, GestureTracker, Message, TrackingFrame};

#[derive(Debug, Clone, PartialEq)]
pub enum ProducerInput {
    Script(ScriptCommand),
    /// One parsed tracking datagram.
    Tracking(TrackingFrame),
    /// A gesture recognized elsewhere.
    Gesture(GestureKind),
    /// A raw command line typed into the console.
    Console(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub consumer_id: u8,
    pub responsibilities: ResponsibilitySet,
    pub eye: Eye,
    pub last_ack_tick: Option<u32>,
}

/// How tracking samples turn into commands.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingOptions {
    pub frame_rate_hz: f64,
    /// Body whose pose drives the viewpoint.
    pub head_body: Option<u32>,
    /// Body watched for gestures; `None` watches every non-head body.
    pub hand_body: Option<u32>,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            frame_rate_hz: 60.0,
            head_body: None,
            hand_body: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProducerError {
    #[error("no consumers connected; command refused")]
    NoConsumers,
    #[error("consumer {0} is already registered")]
    DuplicateConsumer(u8),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

/// Serializes every input into one totally ordered command log.
#[derive(Debug, Clone, Default)]
pub struct ProducerState {
    pub sessions: Vec<SessionRecord>,
    pub command_log: Vec<Message>,
    pub next_tick: u32,
    pub tracking: TrackingOptions,
    gestures: GestureTracker,
}

impl ProducerState {
    pub fn new(tracking: TrackingOptions) -> Self {
        Self {
            tracking,
            ..Self::default()
        }
    }

    /// Registers a consumer from its Hello.
    pub fn register(&mut self, hello: &Message) -> Result<(), ProducerError> {
        if let Message::Hello {
            consumer_id,
            responsibilities,
            eye,
        } = *hello
        {
            if self.sessions.iter().any(|s| s.consumer_id == consumer_id) {
                return Err(ProducerError::DuplicateConsumer(consumer_id));
            }
            self.sessions.push(SessionRecord {
                consumer_id,
                responsibilities,
                eye,
                last_ack_tick: None,
            });
        }
        Ok(())
    }

    /// Tracks feedback from a consumer. Feedback is recorded only.
    pub fn record_feedback(&mut self, consumer_id: u8, msg: &Message) {
        if let Message::Ack {
            acked_type: crate::protocol::message_type::TICK,
            tick,
            ..
        } = *msg
        {
            if let Some(s) = self
                .sessions
                .iter_mut()
                .find(|s| s.consumer_id == consumer_id)
            {
                s.last_ack_tick = Some(tick);
            }
        }
    }

    /// Translates one input into broadcast messages, appending them to the log.
    pub fn dispatch(&mut self, input: ProducerInput) -> Result<Vec<Message>, ProducerError> {
        if self.sessions.is_empty() {
            return Err(ProducerError::NoConsumers);
        }
        let messages = match input {
            ProducerInput::Script(cmd) => vec![self.translate(cmd)],
            ProducerInput::Console(line) => match parse_script_line(&line)? {
                Some(cmd) => vec![self.translate(cmd)],
                None => Vec::new(),
            },
            ProducerInput::Gesture(gesture) => vec![Message::Gesture { gesture }],
            ProducerInput::Tracking(frame) => self.tracking_messages(frame),
        };
        self.command_log.extend(messages.iter().cloned());
        Ok(messages)
    }

    fn translate(&mut self, cmd: ScriptCommand) -> Message {
        match cmd {
            ScriptCommand::Load { scene, mapping } => Message::LoadScene {
                scene_path: scene,
                mapping_path: mapping,
            },
            ScriptCommand::Viewpoint { position, rotation } => {
                Message::ViewpointUpdate { position, rotation }
            }
            ScriptCommand::Pick { origin, direction } => Message::Pick { origin, direction },
            ScriptCommand::Mode(mode) => Message::ModeSwitch { mode },
            ScriptCommand::Animate {
                target,
                axis,
                rad_per_tick,
            } => Message::PlayAnimation {
                target_path: target.to_string(),
                axis,
                rad_per_tick,
            },
            ScriptCommand::Gesture(gesture) => Message::Gesture { gesture },
            ScriptCommand::Tick => {
                let tick = self.next_tick;
                self.next_tick += 1;
                Message::Tick { tick }
            }
        }
    }

    fn tracking_messages(&mut self, frame: TrackingFrame) -> Vec<Message> {
        let t_ms = frame.frame as f64 * 1000.0 / self.tracking.frame_rate_hz;
        let mut out = Vec::new();
        for sample in frame.samples {
            if Some(sample.body_id) == self.tracking.head_body {
                if sample.is_visible() {
                    let p = sample.position_mm / 1000.0;
                    let q = DQuat::from_mat3(&orthonormalized(sample.rotation_matrix()));
                    out.push(Message::ViewpointUpdate {
                        position: [p.x as f32, p.y as f32, p.z as f32],
                        rotation: [q.x as f32, q.y as f32, q.z as f32, q.w as f32],
                    });
                }
                continue;
            }
            if self
                .tracking
                .hand_body
                .is_some_and(|hand| hand != sample.body_id)
            {
                continue;
            }
            if let Some(gesture) = self.gestures.push(t_ms, sample) {
                out.push(Message::Gesture { gesture });
            }
        }
        out
    }
}

/// Removes the small drift tracked rotations carry before quaternion conversion.
fn orthonormalized(m: DMat3) -> DMat3 {
    let x = m.x_axis.normalize();
    let y = (m.y_axis - x * x.dot(m.y_axis)).normalize();
    DMat3::from_cols(x, y, x.cross(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_tracking_datagram;

    fn producer() -> ProducerState {
        let mut p = ProducerState::default();
        p.register(&Message::Hello {
            consumer_id: 1,
            responsibilities: ResponsibilitySet::ALL,
            eye: Eye::Mono,
        })
        .unwrap();
        p
    }

    #[test]
    fn pick_translates_directly() {
        let mut p = producer();
        let out = p
            .dispatch(ProducerInput::Console("pick 0 0 5 0 0 -1".into()))
            .unwrap();
        assert_eq!(
            out,
            vec![Message::Pick {
                origin: [0.0, 0.0, 5.0],
                direction: [0.0, 0.0, -1.0]
            }]
        );
    }

    #[test]
    fn ticks_count_up() {
        let mut p = producer();
        let a = p
            .dispatch(ProducerInput::Script(ScriptCommand::Tick))
            .unwrap();
        let b = p
            .dispatch(ProducerInput::Script(ScriptCommand::Tick))
            .unwrap();
        assert_eq!(a, vec![Message::Tick { tick: 0 }]);
        assert_eq!(b, vec![Message::Tick { tick: 1 }]);
        assert_eq!(p.command_log.len(), 2);
    }

    #[test]
    fn refuses_without_consumers() {
        let mut p = ProducerState::default();
        assert_eq!(
            p.dispatch(ProducerInput::Script(ScriptCommand::Tick)),
            Err(ProducerError::NoConsumers)
        );
        assert_eq!(p.next_tick, 0);
    }

    #[test]
    fn unknown_console_verb() {
        let mut p = producer();
        assert!(matches!(
            p.dispatch(ProducerInput::Console("fly 1 2".into())),
            Err(ProducerError::Script(ScriptError::UnknownVerb { .. }))
        ));
    }

    #[test]
    fn still_hand_becomes_point() {
        let mut p = producer();
        let mut gestures = Vec::new();
        // 60 Hz frames, 2 mm of drift over 0.6 s.
        for frame in 0..=36 {
            let x = frame as f64 * 2.0 / 36.0;
            let text = format!("fr {frame}\n6d 1 [3 1.0][{x} 0 0][1 0 0 0 1 0 0 0 1]");
            let msgs = p
                .dispatch(ProducerInput::Tracking(
                    parse_tracking_datagram(&text).unwrap(),
                ))
                .unwrap();
            gestures.extend(msgs);
        }
        assert_eq!(
            gestures,
            vec![Message::Gesture {
                gesture: GestureKind::Point
            }]
        );
    }

    #[test]
    fn head_body_drives_viewpoint() {
        let mut p = producer();
        p.tracking.head_body = Some(0);
        let frame =
            parse_tracking_datagram("fr 1\n6d 1 [0 1.0][100 200 300][1 0 0 0 1 0 0 0 1]").unwrap();
        let out = p.dispatch(ProducerInput::Tracking(frame)).unwrap();
        assert_eq!(
            out,
            vec![Message::ViewpointUpdate {
                position: [0.1, 0.2, 0.3],
                rotation: [0.0, 0.0, 0.0, 1.0]
            }]
        );
    }

    #[test]
    fn acks_update_sessions() {
        let mut p = producer();
        p.record_feedback(
            1,
            &Message::Ack {
                acked_type: crate::protocol::message_type::TICK,
                status: crate::protocol::AckStatus::Ok,
                tick: 4,
            },
        );
        assert_eq!(p.sessions[0].last_ack_tick, Some(4));
    }
}
