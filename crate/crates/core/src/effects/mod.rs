//! Effects standing in for implicit object features, and the event records
//! that the headless displays emit when effects play.

mod registry;

use std::fmt;
use std::path::PathBuf;

use glam::{DAffine3, DVec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::eye::{Eye, Pose};
use crate::scene::Mesh;

pub use registry::{AudioRegistry, AudioSource};

pub type Rgb = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectError {
    #[error("audio effect has no buffer/source ids; call set_audio_data first")]
    Uninitialized,
    #[error("triangle {index} out of range for a field of {len} values")]
    TriangleOutOfRange { index: usize, len: usize },
    #[error("cannot read audio file `{path}`: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error("empty sample block")]
    EmptySamples,
    #[error("visual effect needs the target mesh to summarize its colors")]
    MissingMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectType {
    Audio,
    Visual,
    Haptic,
}

impl EffectType {
    pub const ALL: [EffectType; 3] = [EffectType::Visual, EffectType::Audio, EffectType::Haptic];

    pub fn as_str(self) -> &'static str {
        match self {
            EffectType::Audio => "audio",
            EffectType::Visual => "visual",
            EffectType::Haptic => "haptic",
        }
    }

    /// Wire byte; also the responsibility bit index.
    pub fn code(self) -> u8 {
        match self {
            EffectType::Visual => 0,
            EffectType::Audio => 1,
            EffectType::Haptic => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EffectType::Visual),
            1 => Some(EffectType::Audio),
            2 => Some(EffectType::Haptic),
            _ => None,
        }
    }
}

impl fmt::Display for EffectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioTrigger {
    Continuous,
    OnTouch,
}

/// Why an event fired. `Frame` marks per-frame visual output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTrigger {
    Continuous,
    OnTouch,
    Frame,
}

impl EventTrigger {
    pub fn as_str(self) -> &'static str {
        match self {
            EventTrigger::Continuous => "continuous",
            EventTrigger::OnTouch => "on_touch",
            EventTrigger::Frame => "frame",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            EventTrigger::Continuous => 0,
            EventTrigger::OnTouch => 1,
            EventTrigger::Frame => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EventTrigger::Continuous),
            1 => Some(EventTrigger::OnTouch),
            2 => Some(EventTrigger::Frame),
            _ => None,
        }
    }
}

impl From<AudioTrigger> for EventTrigger {
    fn from(t: AudioTrigger) -> Self {
        match t {
            AudioTrigger::Continuous => EventTrigger::Continuous,
            AudioTrigger::OnTouch => EventTrigger::OnTouch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    File(PathBuf),
    Sine {
        freq_hz: f64,
        amp: f64,
        duration_s: f64,
    },
}

/// Sample rate used for generated waveforms.
pub const SYNTH_SAMPLE_RATE: f64 = 8000.0;

impl Waveform {
    /// Generated sample block for a sine waveform; `None` for files.
    pub fn synthesize(&self) -> Option<Vec<f32>> {
        match *self {
            Waveform::File(_) => None,
            Waveform::Sine {
                freq_hz,
                amp,
                duration_s,
            } => {
                let n = (duration_s * SYNTH_SAMPLE_RATE).round() as usize;
                Some(
                    (0..n)
                        .map(|i| {
                            let t = i as f64 / SYNTH_SAMPLE_RATE;
                            (amp * (std::f64::consts::TAU * freq_hz * t).sin()) as f32
                        })
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioEffect {
    /// Registered audio data; 0 until [`AudioRegistry::set_audio_data`] succeeds.
    pub buffer_id: u32,
    /// Playback instance; 0 until initialized.
    pub source_id: u32,
    pub trigger: AudioTrigger,
    pub waveform: Waveform,
    pub ref_distance: f64,
    pub rolloff: f64,
    pub max_distance: f64,
}

impl AudioEffect {
    pub fn new(
        trigger: AudioTrigger,
        waveform: Waveform,
        ref_distance: f64,
        rolloff: f64,
        max_distance: f64,
    ) -> Self {
        Self {
            buffer_id: 0,
            source_id: 0,
            trigger,
            waveform,
            ref_distance,
            rolloff,
            max_distance,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.buffer_id > 0 && self.source_id > 0
    }

    pub fn gain_at(&self, distance: f64) -> f64 {
        audio_gain(distance, self.ref_distance, self.rolloff, self.max_distance)
    }
}

/// Inverse-distance attenuation with the distance clamped to
/// `[ref_distance, max_distance]`.
pub fn audio_gain(distance: f64, ref_distance: f64, rolloff: f64, max_distance: f64) -> f64 {
    let d = distance.clamp(ref_distance, max_distance);
    ref_distance / (ref_distance + rolloff * (d - ref_distance))
}

/// Per-triangle scalar values of an implicit feature (temperature, roughness...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub field_name: String,
    pub unit: String,
    pub values: Vec<f64>,
    pub value_min: f64,
    pub value_max: f64,
}

impl ScalarField {
    /// The value at `triangle` clamped into range and mapped to [0, 1].
    pub fn normalized(&self, triangle: usize) -> Result<f64, EffectError> {
        let value = *self
            .values
            .get(triangle)
            .ok_or(EffectError::TriangleOutOfRange {
                index: triangle,
                len: self.values.len(),
            })?;
        Ok(
            (value.clamp(self.value_min, self.value_max) - self.value_min)
                / (self.value_max - self.value_min),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HapticEffect {
    pub field: ScalarField,
    pub force_min: f64,
    pub force_max: f64,
}

impl HapticEffect {
    pub fn sample(&self, triangle: usize) -> Result<f64, EffectError> {
        let s = self.field.normalized(triangle)?;
        Ok(self.force_min + s * (self.force_max - self.force_min))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualEffect {
    pub field: ScalarField,
    pub color_cold: Rgb,
    pub color_hot: Rgb,
}

impl VisualEffect {
    pub fn color(&self, triangle: usize) -> Result<Rgb, EffectError> {
        Ok(self.blend(self.field.normalized(triangle)?))
    }

    fn blend(&self, s: f64) -> Rgb {
        std::array::from_fn(|i| self.color_cold[i] + s * (self.color_hot[i] - self.color_cold[i]))
    }

    /// Area-weighted mean of the normalized field (and hence of the triangle
    /// colors, the ramp being linear). Zero total area falls back to equal weights.
    pub fn summary(&self, areas: &[f64]) -> Result<(f64, Rgb), EffectError> {
        let total: f64 = areas.iter().sum();
        let mut mean = 0.0;
        for (i, area) in areas.iter().enumerate() {
            let w = if total > 0.0 {
                area / total
            } else {
                1.0 / areas.len() as f64
            };
            mean += w * self.field.normalized(i)?;
        }
        let mean = mean.clamp(0.0, 1.0);
        Ok((mean, self.blend(mean)))
    }
}

pub fn haptic_sample(effect: &HapticEffect, triangle: usize) -> Result<f64, EffectError> {
    effect.sample(triangle)
}

pub fn visual_color(effect: &VisualEffect, triangle: usize) -> Result<Rgb, EffectError> {
    effect.color(triangle)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Audio(AudioEffect),
    Visual(VisualEffect),
    Haptic(HapticEffect),
}

impl Effect {
    /// True for effects that only fire on user interaction.
    pub fn is_touch_triggered(&self) -> bool {
        match self {
            Effect::Audio(a) => a.trigger == AudioTrigger::OnTouch,
            Effect::Haptic(_) => true,
            Effect::Visual(_) => false,
        }
    }

    pub fn field(&self) -> Option<&ScalarField> {
        match self {
            Effect::Audio(_) => None,
            Effect::Visual(v) => Some(&v.field),
            Effect::Haptic(h) => Some(&h.field),
        }
    }
}

/// The surface element a user pointed at on the node being played.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickContext {
    pub triangle: usize,
    pub barycentric: [f64; 3],
    pub point: DVec3,
}

#[derive(Debug, Clone)]
pub struct PlayContext<'a> {
    pub tick: u32,
    pub path: String,
    /// World transform of the node instance being played.
    pub world: DAffine3,
    pub listener: Pose,
    pub pick: Option<PickContext>,
    pub mesh: Option<&'a Mesh>,
}

/// Headless display output: one record per effect firing.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEvent {
    pub tick: u32,
    pub effect_type: EffectType,
    pub trigger: EventTrigger,
    pub path: String,
    pub param: f64,
    pub color: Option<Rgb>,
    /// Set on frame events by the consumer that rendered them.
    pub eye: Option<Eye>,
    pub view: Option<DVec3>,
}

impl EffectEvent {
    fn new(
        ctx: &PlayContext<'_>,
        effect_type: EffectType,
        trigger: EventTrigger,
        param: f64,
    ) -> Self {
        Self {
            tick: ctx.tick,
            effect_type,
            trigger,
            path: ctx.path.clone(),
            param,
            color: None,
            eye: None,
            view: None,
        }
    }
}

/// Common play contract of every effect kind.
pub trait EffectPlayback {
    fn effect_type(&self) -> EffectType;
    fn play(&self, ctx: &PlayContext<'_>) -> Result<Vec<EffectEvent>, EffectError>;
}

impl EffectPlayback for AudioEffect {
    fn effect_type(&self) -> EffectType {
        EffectType::Audio
    }

    fn play(&self, ctx: &PlayContext<'_>) -> Result<Vec<EffectEvent>, EffectError> {
        if !self.is_initialized() {
            return Err(EffectError::Uninitialized);
        }
        let source = match (self.trigger, ctx.pick) {
            (AudioTrigger::Continuous, _) => ctx.world.translation,
            (AudioTrigger::OnTouch, Some(pick)) => pick.point,
            (AudioTrigger::OnTouch, None) => return Ok(Vec::new()),
        };
        let gain = self.gain_at(ctx.listener.position.distance(source));
        Ok(vec![EffectEvent::new(
            ctx,
            EffectType::Audio,
            self.trigger.into(),
            gain,
        )])
    }
}

impl EffectPlayback for HapticEffect {
    fn effect_type(&self) -> EffectType {
        EffectType::Haptic
    }

    fn play(&self, ctx: &PlayContext<'_>) -> Result<Vec<EffectEvent>, EffectError> {
        let Some(pick) = ctx.pick else {
            return Ok(Vec::new());
        };
        let force = self.sample(pick.triangle)?;
        Ok(vec![EffectEvent::new(
            ctx,
            EffectType::Haptic,
            EventTrigger::OnTouch,
            force,
        )])
    }
}

impl EffectPlayback for VisualEffect {
    fn effect_type(&self) -> EffectType {
        EffectType::Visual
    }

    fn play(&self, ctx: &PlayContext<'_>) -> Result<Vec<EffectEvent>, EffectError> {
        let mesh = ctx.mesh.ok_or(EffectError::MissingMesh)?;
        let (param, color) = self.summary(&mesh.world_areas(&ctx.world))?;
        let mut event = EffectEvent::new(ctx, EffectType::Visual, EventTrigger::Frame, param);
        event.color = Some(color);
        Ok(vec![event])
    }
}

impl EffectPlayback for Effect {
    fn effect_type(&self) -> EffectType {
        match self {
            Effect::Audio(e) => e.effect_type(),
            Effect::Visual(e) => e.effect_type(),
            Effect::Haptic(e) => e.effect_type(),
        }
    }

    fn play(&self, ctx: &PlayContext<'_>) -> Result<Vec<EffectEvent>, EffectError> {
        match self {
            Effect::Audio(e) => e.play(ctx),
            Effect::Visual(e) => e.play(ctx),
            Effect::Haptic(e) => e.play(ctx),
        }
    }
}

pub fn effect_type(effect: &dyn EffectPlayback) -> EffectType {
    effect.effect_type()
}

#[cfg(test)]
mod tests;
