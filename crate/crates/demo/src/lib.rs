//! Browser demo over the lab fixture: the audio gain curve, a top-down pick
//! that reads haptic force and visual color off the touched triangle, and
//! the mapping rewrite for any consumer responsibility set.

use glam::DVec3;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ivr_core::effects::{audio_gain, Effect, EffectPlayback, EffectType, EventTrigger};
use ivr_core::mapping::{apply_mapping, parse_mapping, MappingDescription, ResponsibilitySet};
use ivr_core::scene::{load_scene, NodeKind, Ray, SceneGraph};

const LAB_SCENE: &str = include_str!("../../../fixtures/lab_scene.json");
const LAB_MAPPING: &str = include_str!("../../../fixtures/lab_mapping.json");

/// Height the top-down pick rays start from.
const EYE_HEIGHT: f64 = 50.0;
const UNMAPPED_GRAY: [f64; 3] = [0.55, 0.57, 0.6];

/// `samples` gains evenly spaced over distances `[0, until]`.
#[wasm_bindgen]
pub fn gain_curve(
    ref_distance: f64,
    rolloff: f64,
    max_distance: f64,
    until: f64,
    samples: usize,
) -> Vec<f64> {
    let step = if samples > 1 {
        until / (samples - 1) as f64
    } else {
        0.0
    };
    (0..samples)
        .map(|i| audio_gain(i as f64 * step, ref_distance, rolloff, max_distance))
        .collect()
}

#[wasm_bindgen]
pub struct Lab {
    base: SceneGraph,
    mapping: MappingDescription,
    /// The base graph rewritten for a consumer responsible for everything.
    full: SceneGraph,
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Lab, String> {
        Lab::load()
    }

    /// Flat list of world triangles as seen from above, far to near:
    /// `x0 z0 x1 z1 x2 z2 r g b` per triangle.
    pub fn top_view(&self) -> Vec<f64> {
        let mut tris: Vec<(f64, [f64; 9])> = Vec::new();
        for v in self.full.visits() {
            let Some(mesh_id) = v.node.kind.mesh() else {
                continue;
            };
            let mesh = self.full.mesh(mesh_id).expect("validated graph");
            let visual = match &v.node.kind {
                NodeKind::EffectGeo { effects, .. } => effects.iter().find_map(|e| match e {
                    Effect::Visual(vis) => Some(vis),
                    _ => None,
                }),
                _ => None,
            };
            for t in 0..mesh.triangle_count() {
                let [a, b, c] = mesh.triangle(t).map(|p| v.world.transform_point3(p));
                // Vertical faces are invisible from above.
                if (b - a).cross(c - a).y.abs() < 1e-9 {
                    continue;
                }
                let rgb = visual
                    .and_then(|vis| vis.color(t).ok())
                    .unwrap_or(UNMAPPED_GRAY);
                let height = a.y.max(b.y).max(c.y);
                tris.push((
                    height,
                    [a.x, a.z, b.x, b.z, c.x, c.z, rgb[0], rgb[1], rgb[2]],
                ));
            }
        }
        tris.sort_by(|p, q| p.0.total_cmp(&q.0));
        tris.into_iter().flat_map(|(_, t)| t).collect()
    }

    /// Casts a ray straight down at `(x, z)`; JSON of the hit, or `null`.
    pub fn pick(&self, x: f64, z: f64) -> String {
        self.pick_at(x, z).to_string()
    }

    /// Rewrites the lab for a consumer with the given responsibilities.
    pub fn rewrite(&self, visual: bool, audio: bool, haptic: bool) -> Result<String, String> {
        let types = [
            (visual, EffectType::Visual),
            (audio, EffectType::Audio),
            (haptic, EffectType::Haptic),
        ];
        let resp =
            ResponsibilitySet::from_types(types.into_iter().filter(|(on, _)| *on).map(|(_, t)| t));
        self.rewrite_for(resp).map(|v| v.to_string())
    }
}

impl Lab {
    pub fn load() -> Result<Lab, String> {
        let base = load_scene(LAB_SCENE).map_err(|e| e.to_string())?;
        let mapping = parse_mapping(LAB_MAPPING).map_err(|e| e.to_string())?;
        let full =
            apply_mapping(&base, &mapping, ResponsibilitySet::ALL).map_err(|e| e.to_string())?;
        Ok(Lab {
            base,
            mapping,
            full,
        })
    }

    pub fn pick_at(&self, x: f64, z: f64) -> Value {
        let ray = Ray::new(DVec3::new(x, EYE_HEIGHT, z), DVec3::NEG_Y).expect("unit direction");
        let Some(hit) = self.full.ray_pick(&ray) else {
            return Value::Null;
        };
        let node = self.full.resolve(&hit.path).expect("picked paths resolve");
        let mut effects = Vec::new();
        if let NodeKind::EffectGeo { effects: list, .. } = &node.kind {
            for e in list {
                effects.push(match e {
                    Effect::Haptic(h) => json!({"type": "haptic", "field": h.field.field_name, "unit": h.field.unit,
                        "value": h.field.values[hit.triangle], "force": h.sample(hit.triangle).ok()}),
                    Effect::Visual(v) => json!({"type": "visual", "field": v.field.field_name, "unit": v.field.unit,
                        "value": v.field.values[hit.triangle], "color": v.color(hit.triangle).ok()}),
                    Effect::Audio(a) => json!({"type": "audio", "trigger": EventTrigger::from(a.trigger).as_str()}),
                });
            }
        }
        json!({
            "path": hit.path.to_string(),
            "kind": node.kind.name(),
            "triangle": hit.triangle,
            "distance": hit.distance,
            "point": hit.point.to_array(),
            "effects": effects,
        })
    }

    pub fn rewrite_for(&self, resp: ResponsibilitySet) -> Result<Value, String> {
        let out = apply_mapping(&self.base, &self.mapping, resp).map_err(|e| e.to_string())?;
        let mut mapped = Vec::new();
        for v in out.visits() {
            let types: Vec<&str> = match &v.node.kind {
                NodeKind::EffectGeo { effects, .. } => {
                    effects.iter().map(|e| e.effect_type().as_str()).collect()
                }
                NodeKind::Audio { .. } => vec!["audio"],
                _ => continue,
            };
            mapped.push(
                json!({"path": v.path.to_string(), "kind": v.node.kind.name(), "effects": types}),
            );
        }
        Ok(json!({
            "nodes": out.node_count(),
            "base_nodes": self.base.node_count(),
            "instances": out.paths().len(),
            "mapped": mapped,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_curve_samples_the_model() {
        let g = gain_curve(1.0, 1.0, 10.0, 20.0, 21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 1.0, "inside the reference distance");
        assert_eq!(g[1], 1.0);
        assert_eq!(g[4], 0.25);
        assert_eq!(g[10], g[20], "flat beyond max distance");
        assert!(g.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(gain_curve(1.0, 1.0, 10.0, 5.0, 1), vec![1.0]);
        assert!(gain_curve(1.0, 1.0, 10.0, 5.0, 0).is_empty());
    }

    #[test]
    fn picking_the_mapped_magnet_reads_its_fields() {
        let lab = Lab::load().unwrap();
        // Bench 1 sits at x = -5.25, z = -3; its magnet carries one effect of each type.
        let hit = lab.pick_at(-5.25, -3.0);
        assert!(
            hit["path"]
                .as_str()
                .unwrap()
                .starts_with("/lab/bench1/magnet1_tr/magnet1"),
            "{hit}"
        );
        let types: Vec<&str> = hit["effects"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["type"].as_str().unwrap())
            .collect();
        assert_eq!(types, ["audio", "haptic", "visual"]);
        assert_eq!(hit["effects"][0]["trigger"], "on_touch");
        let force = hit["effects"][1]["force"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&force));
        assert_eq!(lab.pick_at(100.0, 100.0), Value::Null);
    }

    #[test]
    fn top_view_is_painted_far_to_near() {
        let lab = Lab::load().unwrap();
        let flat = lab.top_view();
        assert_eq!(flat.len() % 9, 0);
        assert!(flat.len() / 9 > 20);
        assert!(flat
            .chunks(9)
            .all(|t| t[6..].iter().all(|c| (0.0..=1.0).contains(c))));
    }

    #[test]
    fn rewrite_respects_responsibilities() {
        let lab = Lab::load().unwrap();
        let none = lab.rewrite_for(ResponsibilitySet::default()).unwrap();
        // Shared geometry is copied whatever the responsibilities, so every
        // consumer sees the same instance paths.
        assert_eq!(none["nodes"], 52);
        assert_eq!(none["base_nodes"], 50);
        assert_eq!(none["mapped"], json!([]));
        let audio = lab
            .rewrite_for(ResponsibilitySet::only(EffectType::Audio))
            .unwrap();
        let mapped = audio["mapped"].as_array().unwrap();
        assert!(!mapped.is_empty());
        assert!(mapped.iter().all(|m| m["effects"] == json!(["audio"])));
        let all = lab.rewrite_for(ResponsibilitySet::ALL).unwrap();
        assert!(all["instances"].as_u64() > none["instances"].as_u64());
    }
}
