//! Threshold gesture recognition over windows of tracked hand samples.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tracking::TrackingSample;

pub const POINT_MIN_SPAN_MS: f64 = 500.0;
pub const POINT_MAX_SPEED_MM_S: f64 = 50.0;
pub const SWIPE_MIN_DISPLACEMENT_MM: f64 = 300.0;
pub const SWIPE_MAX_SPAN_MS: f64 = 400.0;

/// Samples older than this relative to the newest are discarded by the tracker.
const HISTORY_MS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureKind {
    Point,
    Swipe,
}

impl GestureKind {
    pub fn code(self) -> u8 {
        match self {
            GestureKind::Point => 0,
            GestureKind::Swipe => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GestureKind::Point),
            1 => Some(GestureKind::Swipe),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GestureKind::Point => "point",
            GestureKind::Swipe => "swipe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedSample {
    pub t_ms: f64,
    pub sample: TrackingSample,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GestureError {
    #[error("gesture window needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("gesture window is not time-ordered at sample {0}")]
    Unordered(usize),
    #[error("gesture window contains an invisible sample at {0}")]
    Invisible(usize),
}

pub fn recognize_gesture(window: &[TimedSample]) -> Result<Option<GestureKind>, GestureError> {
    if window.len() < 2 {
        return Err(GestureError::TooShort(window.len()));
    }
    for (i, s) in window.iter().enumerate() {
        if !s.sample.is_visible() {
            return Err(GestureError::Invisible(i));
        }
        if i > 0 && s.t_ms.partial_cmp(&window[i - 1].t_ms) != Some(std::cmp::Ordering::Greater) {
            return Err(GestureError::Unordered(i));
        }
    }
    let first = &window[0];
    let last = &window[window.len() - 1];
    let span = last.t_ms - first.t_ms;

    let still = window.windows(2).all(|w| {
        let dt_s = (w[1].t_ms - w[0].t_ms) / 1000.0;
        w[0].sample.position_mm.distance(w[1].sample.position_mm) / dt_s < POINT_MAX_SPEED_MM_S
    });
    if span >= POINT_MIN_SPAN_MS && still {
        return Ok(Some(GestureKind::Point));
    }
    let displacement = first.sample.position_mm.distance(last.sample.position_mm);
    if displacement >= SWIPE_MIN_DISPLACEMENT_MM && span <= SWIPE_MAX_SPAN_MS {
        return Ok(Some(GestureKind::Swipe));
    }
    Ok(None)
}

/// Streaming recognizer. Keeps a short history per body and tests two
/// candidate windows on each new sample: the shortest suffix long enough for
/// a point, and the longest suffix short enough for a swipe. A recognized
/// gesture clears the body's history so it fires once.
#[derive(Debug, Clone, Default)]
pub struct GestureTracker {
    history: BTreeMap<u32, VecDeque<TimedSample>>,
}

impl GestureTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t_ms: f64, sample: TrackingSample) -> Option<GestureKind> {
        let body = sample.body_id;
        let buf = self.history.entry(body).or_default();
        if !sample.is_visible() || buf.back().is_some_and(|b| b.t_ms >= t_ms) {
            buf.clear();
            if !sample.is_visible() {
                return None;
            }
        }
        buf.push_back(TimedSample { t_ms, sample });
        while buf.front().is_some_and(|f| t_ms - f.t_ms > HISTORY_MS) {
            buf.pop_front();
        }
        let samples: Vec<TimedSample> = buf.iter().cloned().collect();

        let point_start = samples
            .iter()
            .rposition(|s| t_ms - s.t_ms >= POINT_MIN_SPAN_MS);
        let swipe_start = samples
            .iter()
            .position(|s| t_ms - s.t_ms <= SWIPE_MAX_SPAN_MS);
        let candidates = [
            (point_start, GestureKind::Point),
            (swipe_start, GestureKind::Swipe),
        ];
        for (start, kind) in candidates {
            let Some(start) = start else { continue };
            if samples.len() - start < 2 {
                continue;
            }
            if recognize_gesture(&samples[start..]) == Ok(Some(kind)) {
                buf.clear();
                return Some(kind);
            }
        }
        None
    }
}
