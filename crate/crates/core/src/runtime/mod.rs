//! Producer and consumer logic, independent of any transport.

mod consumer;
pub mod eye;
mod producer;
mod script;

pub use consumer::{Animation, ConsumerError, ConsumerState, LoadError, Mode, StepOutput};
pub use eye::{eye_view, Eye, EyeGeometry, Pose, DEFAULT_IPD};
pub use producer::{ProducerError, ProducerInput, ProducerState, SessionRecord, TrackingOptions};
pub use script::{parse_script, parse_script_line, ScriptCommand, ScriptError};

#[cfg(test)]
mod tests;
