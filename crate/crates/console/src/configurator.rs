//! The authoring half of the console: one loaded scene and one working
//! mapping description.

use std::path::PathBuf;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ivr_core::effects::{
    AudioRegistry, AudioTrigger, Effect, EffectEvent, EffectPlayback, PickContext, PlayContext,
};
use ivr_core::mapping::{
    entry_from_json, parse_mapping, serialize_mapping, validate_entry, validate_mapping,
    MappingDescription, MappingEntry, MappingError,
};
use ivr_core::runtime::Pose;
use ivr_core::scene::{intersect_triangle, load_scene, NodePath, Ray, SceneGraph};

use crate::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub path: String,
    pub kind: &'static str,
    pub children: Vec<TreeNode>,
    /// Indices of working mapping entries that target this path.
    pub mapped_effects: Vec<usize>,
}

/// One preview step: where the listener stands, or a pick ray.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PreviewStep {
    Listener([f64; 3]),
    Ray {
        origin: [f64; 3],
        direction: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PreviewRequest {
    pub target: String,
    pub effect: Value,
    pub trajectory: Vec<PreviewStep>,
    pub ticks: usize,
}

#[derive(Debug, Clone)]
pub struct Configurator {
    storage: PathBuf,
    scene: Option<SceneGraph>,
    mapping: MappingDescription,
}

impl Configurator {
    pub fn new(storage: impl Into<PathBuf>) -> Self {
        Self {
            storage: storage.into(),
            scene: None,
            mapping: MappingDescription::default(),
        }
    }

    fn read(&self, file: &str) -> Result<String, ApiError> {
        let path = self.storage.join(file);
        std::fs::read_to_string(&path)
            .map_err(|e| ApiError::not_found(format!("cannot read `{}`: {e}", path.display())))
    }

    fn graph(&self) -> Result<&SceneGraph, ApiError> {
        self.scene
            .as_ref()
            .ok_or_else(|| ApiError::conflict("no_scene", "no scene is loaded"))
    }

    /// Loads a scene, and optionally a mapping to edit. Without one the
    /// working description starts empty.
    pub fn load(
        &mut self,
        scene_file: &str,
        mapping_file: Option<&str>,
    ) -> Result<usize, ApiError> {
        let graph = load_scene(&self.read(scene_file)?)
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let mapping = match mapping_file {
            Some(f) => {
                let m = parse_mapping(&self.read(f)?).map_err(ApiError::from)?;
                check(validate_mapping(&graph, &m))?;
                m
            }
            None => MappingDescription {
                scene: scene_file.to_string(),
                entries: Vec::new(),
            },
        };
        let count = graph.paths().len();
        self.scene = Some(graph);
        self.mapping = mapping;
        Ok(count)
    }

    pub fn tree(&self) -> Result<TreeNode, ApiError> {
        let graph = self.graph()?;
        Ok(self.subtree(graph, graph.root_path()))
    }

    fn subtree(&self, graph: &SceneGraph, path: NodePath) -> TreeNode {
        let node = graph.resolve(&path).expect("paths come from the graph");
        let mapped_effects = self
            .mapping
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.target == path)
            .map(|(i, _)| i)
            .collect();
        TreeNode {
            path: path.to_string(),
            kind: node.kind.name(),
            children: node
                .kind
                .children()
                .iter()
                .map(|c| self.subtree(graph, path.child(c.as_str())))
                .collect(),
            mapped_effects,
        }
    }

    pub fn mapping(&self) -> &MappingDescription {
        &self.mapping
    }

    pub fn mapping_text(&self) -> String {
        serialize_mapping(&self.mapping)
    }

    pub fn replace_mapping(&mut self, document: &str) -> Result<(), ApiError> {
        let m = parse_mapping(document).map_err(ApiError::from)?;
        check(validate_mapping(self.graph()?, &m))?;
        self.mapping = m;
        Ok(())
    }

    pub fn add_entry(&mut self, body: &Value) -> Result<usize, ApiError> {
        let index = self.mapping.entries.len();
        let entry = entry_from_json(body, index).map_err(ApiError::from)?;
        check(
            validate_entry(self.graph()?, index, &entry)
                .into_iter()
                .collect(),
        )?;
        self.mapping.entries.push(entry);
        Ok(index)
    }

    pub fn delete_entry(&mut self, index: usize) -> Result<MappingEntry, ApiError> {
        if index >= self.mapping.entries.len() {
            return Err(ApiError::not_found(format!(
                "no entry {index}; the mapping has {}",
                self.mapping.entries.len()
            )));
        }
        Ok(self.mapping.entries.remove(index))
    }

    pub fn save(&self, file: &str) -> Result<usize, ApiError> {
        let text = self.mapping_text();
        let path = self.storage.join(file);
        std::fs::write(&path, &text)
            .map_err(|e| ApiError::internal(format!("cannot write `{}`: {e}", path.display())))?;
        Ok(text.len())
    }

    /// Plays the effect once per step against the loaded scene without
    /// touching the working description.
    pub fn preview(&self, req: &PreviewRequest) -> Result<Vec<EffectEvent>, ApiError> {
        if req.ticks != req.trajectory.len() {
            return Err(ApiError::bad_request(format!(
                "ticks is {} but the trajectory has {} steps",
                req.ticks,
                req.trajectory.len()
            )));
        }
        let graph = self.graph()?;
        let mut entry = entry_from_json(
            &serde_json::json!({"target": req.target, "effect": req.effect}),
            0,
        )
        .map_err(ApiError::from)?;
        check(validate_entry(graph, 0, &entry).into_iter().collect())?;
        if let Effect::Audio(a) = &entry.effect {
            // A private registry, so previews never share ids with anything else.
            let ready = AudioRegistry::new()
                .initialize(a, &self.storage)
                .map_err(|e| ApiError::unprocessable(e.to_string()))?;
            entry.effect = Effect::Audio(ready);
        }

        let world = graph
            .world_transform(&entry.target)
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let node = graph
            .resolve(&entry.target)
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let mesh = node
            .kind
            .mesh()
            .and_then(|m| graph.mesh(m))
            .map(|m| m.as_ref());
        // Visual frames depend on neither, so they take either kind of step.
        let wants_rays = match &entry.effect {
            Effect::Audio(a) => Some(a.trigger == AudioTrigger::OnTouch),
            Effect::Haptic(_) => Some(true),
            Effect::Visual(_) => None,
        };

        let mut events = Vec::new();
        for (tick, step) in req.trajectory.iter().enumerate() {
            let (listener, pick) = match (step, wants_rays) {
                (PreviewStep::Listener(p), Some(false) | None) => (DVec3::from_array(*p), None),
                (PreviewStep::Ray { origin, direction }, Some(true) | None) => {
                    let ray = Ray::new(DVec3::from_array(*origin), DVec3::from_array(*direction))
                        .map_err(|e| ApiError::bad_request(format!("step {tick}: {e}")))?;
                    let pick = mesh.and_then(|m| {
                        (0..m.triangle_count())
                            .filter_map(|t| {
                                let corners = m.triangle(t).map(|v| world.transform_point3(v));
                                intersect_triangle(&ray, corners).map(|h| (t, h))
                            })
                            .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))
                            .map(|(triangle, h)| PickContext {
                                triangle,
                                barycentric: h.barycentric,
                                point: ray.at(h.distance),
                            })
                    });
                    (ray.origin, pick)
                }
                (PreviewStep::Listener(_), _) => {
                    return Err(ApiError::bad_request(format!(
                        "step {tick}: this effect needs pick rays"
                    )))
                }
                (PreviewStep::Ray { .. }, _) => {
                    return Err(ApiError::bad_request(format!(
                        "step {tick}: this effect needs listener positions"
                    )))
                }
            };
            let ctx = PlayContext {
                tick: tick as u32,
                path: req.target.clone(),
                world,
                listener: Pose {
                    position: listener,
                    ..Pose::IDENTITY
                },
                pick,
                mesh,
            };
            events.extend(
                entry
                    .effect
                    .play(&ctx)
                    .map_err(|e| ApiError::unprocessable(e.to_string()))?,
            );
        }
        Ok(events)
    }
}

fn check(violations: Vec<ivr_core::mapping::Violation>) -> Result<(), ApiError> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(MappingError::Violations(violations).into())
    }
}
