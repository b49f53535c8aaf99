//! JSON form of mapping descriptions. Serialization is canonical: keys sorted,
//! two-space indentation, trailing newline.

use serde_json::{json, Map, Value};

use super::{MappingDescription, MappingEntry, MappingError};
use crate::effects::{
    AudioEffect, AudioTrigger, Effect, HapticEffect, Rgb, ScalarField, VisualEffect, Waveform,
};

pub fn parse_mapping(text: &str) -> Result<MappingDescription, MappingError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| MappingError::Json(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| MappingError::Json("top level must be an object".into()))?;
    if let Some(key) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "scene" | "entries"))
    {
        return Err(MappingError::Json(format!("unknown field `{key}`")));
    }
    let scene = match obj.get("scene") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(MappingError::Json("`scene` must be a string".into())),
        None => return Err(MappingError::Json("missing field `scene`".into())),
    };
    let entries = match obj.get("entries") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| entry_from_json(v, i))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(MappingError::Json("`entries` must be an array".into())),
        None => return Err(MappingError::Json("missing field `entries`".into())),
    };
    Ok(MappingDescription { scene, entries })
}

pub fn serialize_mapping(m: &MappingDescription) -> String {
    let doc = json!({
        "scene": m.scene,
        "entries": m.entries.iter().map(entry_to_json).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&canonical(doc)).expect("values always serialize");
    text.push('\n');
    text
}

/// Rebuilds every object with sorted keys, whatever map type serde_json uses.
fn canonical(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut pairs: Vec<(String, Value)> = map.into_iter().collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(pairs.into_iter().map(|(k, v)| (k, canonical(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

pub fn entry_to_json(entry: &MappingEntry) -> Value {
    json!({
        "target": entry.target.to_string(),
        "effect": effect_to_json(&entry.effect),
    })
}

pub fn entry_from_json(value: &Value, index: usize) -> Result<MappingEntry, MappingError> {
    let fields = Fields::new(value, index, &["target", "effect"])?;
    let target_text = fields.string("target")?;
    let target = target_text
        .parse()
        .map_err(|_| MappingError::InvalidEntry {
            index,
            message: format!("invalid target path `{target_text}`"),
        })?;
    let effect = effect_from_json(fields.required("effect")?, index)?;
    Ok(MappingEntry { target, effect })
}

pub fn effect_to_json(effect: &Effect) -> Value {
    match effect {
        Effect::Audio(a) => json!({
            "type": "audio",
            "trigger": match a.trigger {
                AudioTrigger::Continuous => "continuous",
                AudioTrigger::OnTouch => "on_touch",
            },
            "waveform": match &a.waveform {
                Waveform::File(path) => json!({ "file": path.to_string_lossy() }),
                Waveform::Sine { freq_hz, amp, duration_s } => json!({
                    "sine": { "freq_hz": freq_hz, "amp": amp, "duration_s": duration_s }
                }),
            },
            "ref_distance": a.ref_distance,
            "rolloff": a.rolloff,
            "max_distance": a.max_distance,
        }),
        Effect::Haptic(h) => {
            let mut obj = field_json(&h.field);
            obj.insert("type".into(), json!("haptic"));
            obj.insert("force_min".into(), json!(h.force_min));
            obj.insert("force_max".into(), json!(h.force_max));
            Value::Object(obj)
        }
        Effect::Visual(v) => {
            let mut obj = field_json(&v.field);
            obj.insert("type".into(), json!("visual"));
            obj.insert("color_cold".into(), json!(v.color_cold));
            obj.insert("color_hot".into(), json!(v.color_hot));
            Value::Object(obj)
        }
    }
}

fn field_json(f: &ScalarField) -> Map<String, Value> {
    let mut obj = Map::new();
    obj.insert("field_name".into(), json!(f.field_name));
    obj.insert("unit".into(), json!(f.unit));
    obj.insert("values".into(), json!(f.values));
    obj.insert("value_min".into(), json!(f.value_min));
    obj.insert("value_max".into(), json!(f.value_max));
    obj
}

const AUDIO_KEYS: &[&str] = &[
    "type",
    "trigger",
    "waveform",
    "ref_distance",
    "rolloff",
    "max_distance",
];
const FIELD_KEYS: &[&str] = &[
    "type",
    "field_name",
    "unit",
    "values",
    "value_min",
    "value_max",
];

/// Parses one effect specification; structural constraints are checked here,
/// scene-dependent ones by `validate_mapping`.
pub fn effect_from_json(value: &Value, index: usize) -> Result<Effect, MappingError> {
    let kind = match value.get("type") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => {
            return Err(MappingError::InvalidEntry {
                index,
                message: "`type` must be a string".into(),
            })
        }
        None => {
            return Err(MappingError::MissingField {
                index,
                field: "effect.type".into(),
            })
        }
    };
    let invalid = |message: String| MappingError::InvalidEntry { index, message };
    match kind {
        "audio" => {
            let f = Fields::new(value, index, AUDIO_KEYS)?;
            let trigger = match f.string("trigger")? {
                "continuous" => AudioTrigger::Continuous,
                "on_touch" => AudioTrigger::OnTouch,
                other => return Err(invalid(format!("unknown trigger `{other}`"))),
            };
            let waveform = parse_waveform(f.required("waveform")?, index)?;
            let ref_distance = f.number("ref_distance")?;
            let rolloff = f.number("rolloff")?;
            let max_distance = f.number("max_distance")?;
            if ref_distance <= 0.0 {
                return Err(invalid("ref_distance must be > 0".into()));
            }
            if rolloff < 0.0 {
                return Err(invalid("rolloff must be >= 0".into()));
            }
            if max_distance < ref_distance {
                return Err(invalid("max_distance must be >= ref_distance".into()));
            }
            Ok(Effect::Audio(AudioEffect::new(
                trigger,
                waveform,
                ref_distance,
                rolloff,
                max_distance,
            )))
        }
        "haptic" => {
            let keys = [FIELD_KEYS, &["force_min", "force_max"]].concat();
            let f = Fields::new(value, index, &keys)?;
            let field = parse_field(&f)?;
            let force_min = f.number("force_min")?;
            let force_max = f.number("force_max")?;
            if !(0.0..=1.0).contains(&force_min)
                || !(0.0..=1.0).contains(&force_max)
                || force_min > force_max
            {
                return Err(invalid(
                    "forces must satisfy 0 <= force_min <= force_max <= 1".into(),
                ));
            }
            Ok(Effect::Haptic(HapticEffect {
                field,
                force_min,
                force_max,
            }))
        }
        "visual" => {
            let keys = [FIELD_KEYS, &["color_cold", "color_hot"]].concat();
            let f = Fields::new(value, index, &keys)?;
            let field = parse_field(&f)?;
            Ok(Effect::Visual(VisualEffect {
                field,
                color_cold: f.color("color_cold")?,
                color_hot: f.color("color_hot")?,
            }))
        }
        other => Err(MappingError::UnknownEffectType {
            index,
            effect_type: other.to_string(),
        }),
    }
}

fn parse_waveform(value: &Value, index: usize) -> Result<Waveform, MappingError> {
    let invalid = |message: &str| MappingError::InvalidEntry {
        index,
        message: message.to_string(),
    };
    let obj = value
        .as_object()
        .filter(|o| o.len() == 1)
        .ok_or_else(|| invalid("waveform must be {\"file\": ...} or {\"sine\": {...}}"))?;
    if let Some(path) = obj.get("file") {
        let path = path
            .as_str()
            .ok_or_else(|| invalid("waveform file must be a string"))?;
        if path.is_empty() {
            return Err(invalid("waveform file is empty"));
        }
        return Ok(Waveform::File(path.into()));
    }
    let sine = obj
        .get("sine")
        .ok_or_else(|| invalid("waveform must be {\"file\": ...} or {\"sine\": {...}}"))?;
    let f = Fields::new(sine, index, &["freq_hz", "amp", "duration_s"])?
        .prefixed("effect.waveform.sine.");
    let freq_hz = f.number("freq_hz")?;
    let amp = f.number("amp")?;
    let duration_s = f.number("duration_s")?;
    if freq_hz <= 0.0 || duration_s <= 0.0 || !(0.0..=1.0).contains(&amp) {
        return Err(invalid(
            "sine needs freq_hz > 0, duration_s > 0 and amp in [0, 1]",
        ));
    }
    Ok(Waveform::Sine {
        freq_hz,
        amp,
        duration_s,
    })
}

fn parse_field(f: &Fields<'_>) -> Result<ScalarField, MappingError> {
    let values = match f.required("values")? {
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_f64().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| f.invalid("values must be finite numbers"))?,
        _ => return Err(f.invalid("values must be an array")),
    };
    let value_min = f.number("value_min")?;
    let value_max = f.number("value_max")?;
    if value_min >= value_max {
        return Err(f.invalid("value_min must be < value_max"));
    }
    Ok(ScalarField {
        field_name: f.string("field_name")?.to_string(),
        unit: f.string("unit")?.to_string(),
        values,
        value_min,
        value_max,
    })
}

/// Field access on one JSON object with entry-indexed errors.
struct Fields<'a> {
    obj: &'a Map<String, Value>,
    index: usize,
    prefix: &'static str,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, index: usize, allowed: &[&str]) -> Result<Self, MappingError> {
        let obj = value.as_object().ok_or(MappingError::InvalidEntry {
            index,
            message: "expected an object".into(),
        })?;
        if let Some(key) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(MappingError::InvalidEntry {
                index,
                message: format!("unknown field `{key}`"),
            });
        }
        Ok(Self {
            obj,
            index,
            prefix: if allowed.contains(&"target") {
                ""
            } else {
                "effect."
            },
        })
    }

    fn prefixed(mut self, prefix: &'static str) -> Self {
        self.prefix = prefix;
        self
    }

    fn invalid(&self, message: &str) -> MappingError {
        MappingError::InvalidEntry {
            index: self.index,
            message: message.to_string(),
        }
    }

    fn required(&self, key: &str) -> Result<&'a Value, MappingError> {
        self.obj.get(key).ok_or_else(|| MappingError::MissingField {
            index: self.index,
            field: format!("{}{key}", self.prefix),
        })
    }

    fn string(&self, key: &str) -> Result<&'a str, MappingError> {
        self.required(key)?
            .as_str()
            .ok_or_else(|| self.invalid(&format!("`{key}` must be a string")))
    }

    fn number(&self, key: &str) -> Result<f64, MappingError> {
        self.required(key)?
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.invalid(&format!("`{key}` must be a finite number")))
    }

    fn color(&self, key: &str) -> Result<Rgb, MappingError> {
        let bad = || self.invalid(&format!("`{key}` must be three numbers in [0, 1]"));
        let items = self.required(key)?.as_array().ok_or_else(bad)?;
        if items.len() != 3 {
            return Err(bad());
        }
        let mut rgb = [0.0; 3];
        for (slot, item) in rgb.iter_mut().zip(items) {
            *slot = item
                .as_f64()
                .filter(|c| (0.0..=1.0).contains(c))
                .ok_or_else(bad)?;
        }
        Ok(rgb)
    }
}
