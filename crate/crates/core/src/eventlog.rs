//! JSON-lines display logs, and the merge/compare tooling used to check that
//! different consumer topologies present the same effects.

use std::cmp::Ordering;
use std::fmt::Write as _;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{EffectEvent, EffectType, EventTrigger, Rgb};
use crate::runtime::eye::Eye;

/// Tolerance on `param` and color channels when comparing logs.
pub const PARAM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("log line {line}: {message}")]
pub struct LogError {
    pub line: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    tick: u32,
    #[serde(rename = "type")]
    effect_type: EffectType,
    trigger: EventTrigger,
    path: String,
    param: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<Rgb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eye: Option<Eye>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    view: Option<[f64; 3]>,
}

impl From<&EffectEvent> for Record {
    fn from(e: &EffectEvent) -> Self {
        Record {
            tick: e.tick,
            effect_type: e.effect_type,
            trigger: e.trigger,
            path: e.path.clone(),
            param: e.param,
            color: e.color,
            eye: e.eye,
            view: e.view.map(|v| v.to_array()),
        }
    }
}

impl From<Record> for EffectEvent {
    fn from(r: Record) -> Self {
        EffectEvent {
            tick: r.tick,
            effect_type: r.effect_type,
            trigger: r.trigger,
            path: r.path,
            param: r.param,
            color: r.color,
            eye: r.eye,
            view: r.view.map(DVec3::from_array),
        }
    }
}

pub fn event_to_json(e: &EffectEvent) -> String {
    serde_json::to_string(&Record::from(e)).expect("records always serialize")
}

pub fn event_from_json(line: &str) -> Result<EffectEvent, serde_json::Error> {
    serde_json::from_str::<Record>(line).map(Into::into)
}

/// One event per line, each terminated by a newline.
pub fn write_log(events: &[EffectEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{}", event_to_json(e));
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<EffectEvent>, LogError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            event_from_json(l).map_err(|e| LogError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn canonical_order(a: &EffectEvent, b: &EffectEvent) -> Ordering {
    a.tick
        .cmp(&b.tick)
        .then_with(|| a.path.cmp(&b.path))
        .then_with(|| a.effect_type.as_str().cmp(b.effect_type.as_str()))
        .then_with(|| a.trigger.as_str().cmp(b.trigger.as_str()))
        .then_with(|| a.param.total_cmp(&b.param))
        .then_with(|| {
            let key = |c: &Option<Rgb>| c.map(|c| c.map(f64::to_bits));
            key(&a.color).cmp(&key(&b.color))
        })
}

/// Concatenates logs into canonical order. Frame events lose their eye and
/// viewpoint, and identical frame events collapse into one: two eyes render
/// the same frame.
pub fn merge_logs(logs: &[Vec<EffectEvent>]) -> Vec<EffectEvent> {
    let mut all: Vec<EffectEvent> = logs
        .iter()
        .flatten()
        .cloned()
        .map(|mut e| {
            e.eye = None;
            e.view = None;
            e
        })
        .collect();
    all.sort_by(canonical_order);
    all.dedup_by(|b, a| a.trigger == EventTrigger::Frame && a == b);
    all
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub index: usize,
    pub left: Option<EffectEvent>,
    pub right: Option<EffectEvent>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |e: &Option<EffectEvent>| {
            e.as_ref()
                .map(event_to_json)
                .unwrap_or_else(|| "<end of log>".into())
        };
        write!(
            f,
            "first divergence at index {}:\n  a: {}\n  b: {}",
            self.index,
            show(&self.left),
            show(&self.right)
        )
    }
}

pub fn events_match(a: &EffectEvent, b: &EffectEvent) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= PARAM_TOLERANCE;
    a.tick == b.tick
        && a.effect_type == b.effect_type
        && a.trigger == b.trigger
        && a.path == b.path
        && a.eye == b.eye
        && close(a.param, b.param)
        && match (a.color, b.color) {
            (None, None) => true,
            (Some(x), Some(y)) => x.iter().zip(&y).all(|(p, q)| close(*p, *q)),
            _ => false,
        }
        && match (a.view, b.view) {
            (None, None) => true,
            (Some(x), Some(y)) => x.abs_diff_eq(y, PARAM_TOLERANCE),
            _ => false,
        }
}

/// `None` when the lists agree element-wise within tolerance.
pub fn compare_logs(a: &[EffectEvent], b: &[EffectEvent]) -> Option<Divergence> {
    for i in 0..a.len().max(b.len()) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if events_match(x, y) => continue,
            (x, y) => {
                return Some(Divergence {
                    index: i,
                    left: x.cloned(),
                    right: y.cloned(),
                })
            }
        }
    }
    None
}
