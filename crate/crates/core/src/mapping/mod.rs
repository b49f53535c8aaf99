//! Object-to-implicit-feature mapping: the description file, its validation
//! against a base scene, and the rewrite that produces the effect-bearing graph.

mod codec;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::{AudioTrigger, Effect, EffectPlayback, EffectType};
use crate::scene::{Node, NodeKind, NodePath, SceneError, SceneGraph};

pub use codec::{
    effect_from_json, effect_to_json, entry_from_json, entry_to_json, parse_mapping,
    serialize_mapping,
};

/// Which effect types a consumer presents. Wire form: bit0 visual, bit1
/// audio, bit2 haptic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ResponsibilitySet {
    pub visual: bool,
    pub audio: bool,
    pub haptic: bool,
}

impl ResponsibilitySet {
    pub const ALL: Self = Self {
        visual: true,
        audio: true,
        haptic: true,
    };

    pub fn only(t: EffectType) -> Self {
        let mut set = Self::default();
        set.insert(t);
        set
    }

    pub fn from_types(types: impl IntoIterator<Item = EffectType>) -> Self {
        let mut set = Self::default();
        for t in types {
            set.insert(t);
        }
        set
    }

    pub fn insert(&mut self, t: EffectType) {
        match t {
            EffectType::Visual => self.visual = true,
            EffectType::Audio => self.audio = true,
            EffectType::Haptic => self.haptic = true,
        }
    }

    pub fn contains(&self, t: EffectType) -> bool {
        match t {
            EffectType::Visual => self.visual,
            EffectType::Audio => self.audio,
            EffectType::Haptic => self.haptic,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.visual || self.audio || self.haptic)
    }

    pub fn types(&self) -> impl Iterator<Item = EffectType> + '_ {
        EffectType::ALL.into_iter().filter(|t| self.contains(*t))
    }

    pub fn mask(&self) -> u8 {
        self.types().fold(0, |m, t| m | (1 << t.code()))
    }

    pub fn from_mask(mask: u8) -> Option<Self> {
        if mask & !0b111 != 0 {
            return None;
        }
        Some(Self::from_types(
            EffectType::ALL
                .into_iter()
                .filter(|t| mask & (1 << t.code()) != 0),
        ))
    }

    pub fn union(self, other: Self) -> Self {
        Self {
            visual: self.visual || other.visual,
            audio: self.audio || other.audio,
            haptic: self.haptic || other.haptic,
        }
    }

    /// Every non-empty subset, ordered by mask.
    pub fn non_empty_subsets() -> impl Iterator<Item = Self> {
        (1u8..8).map(|m| Self::from_mask(m).expect("3-bit mask"))
    }
}

impl Serialize for ResponsibilitySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.types().map(EffectType::as_str))
    }
}

impl<'de> Deserialize<'de> for ResponsibilitySet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self::from_types(Vec::<EffectType>::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingEntry {
    pub target: NodePath,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MappingDescription {
    /// Scene file the mapping was authored against.
    pub scene: String,
    /// Order is significant: it fixes the effect order on each effect node.
    pub entries: Vec<MappingEntry>,
}

impl MappingDescription {
    pub fn effect_types(&self) -> ResponsibilitySet {
        ResponsibilitySet::from_types(self.entries.iter().map(|e| e.effect.effect_type()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    PathNotFound,
    KindMismatch,
    FieldLength,
    TriggerMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entry: usize,
    /// Location of the offending value, e.g. `entries[2].effect.values`.
    pub field: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("malformed mapping document: {0}")]
    Json(String),
    #[error("entry {index}: unknown effect type `{effect_type}`")]
    UnknownEffectType { index: usize, effect_type: String },
    #[error("entry {index}: missing required field `{field}`")]
    MissingField { index: usize, field: String },
    #[error("entry {index}: {message}")]
    InvalidEntry { index: usize, message: String },
    #[error("mapping does not fit the scene: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Violations(Vec<Violation>),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Graph-dependent checks: targets exist, kinds fit and fields match meshes.
pub fn validate_mapping(graph: &SceneGraph, m: &MappingDescription) -> Vec<Violation> {
    m.entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| validate_entry(graph, i, e))
        .collect()
}

pub fn validate_entry(graph: &SceneGraph, index: usize, entry: &MappingEntry) -> Option<Violation> {
    let violation = |field: &str, kind, message: String| {
        Some(Violation {
            entry: index,
            field: format!("entries[{index}].{field}"),
            kind,
            message,
        })
    };
    let node = match graph.resolve(&entry.target) {
        Ok(node) => node,
        Err(_) => {
            return violation(
                "target",
                ViolationKind::PathNotFound,
                format!("path not found: {}", entry.target),
            )
        }
    };
    let is_geo = matches!(node.kind, NodeKind::Geo { .. } | NodeKind::EffectGeo { .. });
    let is_transform = matches!(node.kind, NodeKind::Transform { .. });
    match &entry.effect {
        Effect::Audio(a) => {
            if !is_geo && !is_transform {
                return violation(
                    "target",
                    ViolationKind::KindMismatch,
                    format!(
                        "kind mismatch: audio needs a transform or geo target, found {}",
                        node.kind.name()
                    ),
                );
            }
            let expected = if is_transform {
                AudioTrigger::Continuous
            } else {
                AudioTrigger::OnTouch
            };
            if a.trigger != expected {
                return violation(
                    "effect.trigger",
                    ViolationKind::TriggerMismatch,
                    format!(
                        "trigger mismatch: audio on a {} must be {}",
                        node.kind.name(),
                        if is_transform {
                            "continuous"
                        } else {
                            "on_touch"
                        }
                    ),
                );
            }
            None
        }
        Effect::Visual(_) | Effect::Haptic(_) => {
            let kind_name = entry.effect.effect_type();
            let mesh_id = match node.kind.mesh() {
                Some(mesh) if is_geo => mesh,
                _ => {
                    return violation(
                        "target",
                        ViolationKind::KindMismatch,
                        format!(
                            "kind mismatch: {kind_name} needs a geo target, found {}",
                            node.kind.name()
                        ),
                    )
                }
            };
            let triangles = graph.mesh(mesh_id).map(|m| m.triangle_count()).unwrap_or(0);
            let len = entry.effect.field().map(|f| f.values.len()).unwrap_or(0);
            (len != triangles).then(|| Violation {
                entry: index,
                field: format!("entries[{index}].effect.values"),
                kind: ViolationKind::FieldLength,
                message: format!(
                    "field length {len} does not match {triangles} triangles of mesh `{mesh_id}`"
                ),
            })
        }
    }
}

/// Rewrites `base` into the effect-bearing graph seen by a consumer with
/// responsibilities `resp`.
///
/// Every entry is first applied to an unfiltered working graph, so instance
/// paths (including ids minted when shared instances are copied) are the same
/// for all consumers of one mapping. Effects outside `resp` are then dropped:
/// their audio nodes are removed and effect nodes left without effects revert
/// to plain geometry nodes.
pub fn apply_mapping(
    base: &SceneGraph,
    m: &MappingDescription,
    resp: ResponsibilitySet,
) -> Result<SceneGraph, MappingError> {
    let violations = validate_mapping(base, m);
    if !violations.is_empty() {
        return Err(MappingError::Violations(violations));
    }

    let mut graph = base.clone();
    let mut targets: Vec<NodePath> = m.entries.iter().map(|e| e.target.clone()).collect();

    for (i, entry) in m.entries.iter().enumerate() {
        let path = targets[i].clone();
        let node = graph.resolve(&path)?.clone();
        let (next, relocation) = match (&node.kind, &entry.effect) {
            (NodeKind::Transform { .. }, Effect::Audio(audio)) => {
                let id = unused_id(&graph, &format!("{}.audio{i}", node.id));
                let audio = Node::new(
                    id,
                    NodeKind::Audio {
                        effect: audio.clone(),
                    },
                );
                graph.add_child_at(&path, audio)?
            }
            (NodeKind::Geo { mesh }, effect) => {
                let replacement = Node::new(
                    node.id.clone(),
                    NodeKind::EffectGeo {
                        mesh: mesh.clone(),
                        effects: vec![effect.clone()],
                    },
                );
                graph.replace_node_at(&path, replacement)?
            }
            (NodeKind::EffectGeo { mesh, effects }, effect) => {
                let mut effects = effects.clone();
                effects.push(effect.clone());
                let replacement = Node::new(
                    node.id.clone(),
                    NodeKind::EffectGeo {
                        mesh: mesh.clone(),
                        effects,
                    },
                );
                graph.replace_node_at(&path, replacement)?
            }
            _ => unreachable!("validated above"),
        };
        graph = next;
        for t in targets.iter_mut().skip(i + 1) {
            *t = relocation.apply(t);
        }
    }

    filter_effects(&graph, resp)
}

fn unused_id(graph: &SceneGraph, base: &str) -> String {
    if !graph.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|k| format!("{base}#{k}"))
        .find(|id| !graph.contains(id))
        .expect("unbounded search")
}

fn filter_effects(graph: &SceneGraph, resp: ResponsibilitySet) -> Result<SceneGraph, MappingError> {
    let mut replacements = Vec::new();
    let mut dropped_audio = HashSet::new();
    for node in graph.nodes() {
        match &node.kind {
            NodeKind::Audio { .. } if !resp.audio => {
                dropped_audio.insert(node.id.clone());
            }
            NodeKind::EffectGeo { mesh, effects } => {
                let kept: Vec<Effect> = effects
                    .iter()
                    .filter(|e| resp.contains(e.effect_type()))
                    .cloned()
                    .collect();
                if kept.len() == effects.len() {
                    continue;
                }
                let kind = if kept.is_empty() {
                    NodeKind::Geo { mesh: mesh.clone() }
                } else {
                    NodeKind::EffectGeo {
                        mesh: mesh.clone(),
                        effects: kept,
                    }
                };
                replacements.push(Node::new(node.id.clone(), kind));
            }
            _ => {}
        }
    }
    Ok(graph
        .with_nodes_replaced(replacements)?
        .without_leaves(&dropped_audio)?)
}
