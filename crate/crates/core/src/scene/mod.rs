//! Scene graph: a rooted DAG of group, transform, geometry and effect nodes.
//!
//! Node instances are addressed by [`NodePath`] because geometry may be shared
//! between several parents, which makes a bare node id ambiguous.
//!
//! Graphs are values. Every editing operation returns a new graph; node and
//! mesh payloads are reference counted so unchanged parts are shared.

mod edit;
mod load;
mod path;
mod pick;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use glam::{DAffine3, DQuat, DVec3};
use thiserror::Error;

use crate::effects::{AudioEffect, Effect};

pub use edit::Relocation;
pub use load::load_scene;
pub use path::NodePath;
pub use pick::{intersect_triangle, PickResult, Ray, TriangleHit};

pub type NodeId = String;
pub type MeshId = String;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Malformed(String),
    #[error("node `{node}` references unknown {what} `{reference}`")]
    DanglingReference {
        node: String,
        what: &'static str,
        reference: String,
    },
    #[error("geo node `{node}`: mesh `{mesh}` triangle {triangle} uses vertex {index} but only {vertex_count} vertices exist")]
    TriangleIndexOutOfRange {
        node: String,
        mesh: String,
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("mesh `{0}` has no triangles")]
    EmptyMesh(String),
    #[error("mesh `{0}` has a non-finite vertex")]
    NonFiniteVertex(String),
    #[error("cycle detected through node `{0}`")]
    Cycle(String),
    #[error("node `{node}`: invalid transform ({reason})")]
    InvalidTransform { node: String, reason: String },
    #[error("node `{node}` cannot be placed under `{parent}`: {reason}")]
    KindViolation {
        node: String,
        parent: String,
        reason: String,
    },
    #[error("node `{0}` lists the same child twice")]
    DuplicateChild(String),
    #[error("node id `{0}` already exists")]
    DuplicateId(String),
    #[error("effect geo node `{0}` has an empty effect list")]
    EmptyEffectList(String),
    #[error("path `{0}` does not exist in the graph")]
    PathNotFound(String),
    #[error("invalid node path `{0}`")]
    InvalidPath(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
}

/// Local node transform, composed as translation * rotation * scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub translation: DVec3,
    pub rotation: DQuat,
    pub scale: DVec3,
}

impl Transform {
    pub const IDENTITY: Self = Self {
        translation: DVec3::ZERO,
        rotation: DQuat::IDENTITY,
        scale: DVec3::ONE,
    };

    pub fn from_translation(translation: DVec3) -> Self {
        Self {
            translation,
            ..Self::IDENTITY
        }
    }

    pub fn from_scale(scale: DVec3) -> Self {
        Self {
            scale,
            ..Self::IDENTITY
        }
    }

    /// Checks finiteness, unit rotation (1e-6) and strictly positive scale.
    pub fn check(&self) -> Result<(), String> {
        if !(self.translation.is_finite() && self.rotation.is_finite() && self.scale.is_finite()) {
            return Err("non-finite component".into());
        }
        if (self.rotation.length() - 1.0).abs() > 1e-6 {
            return Err(format!("rotation norm {} is not 1", self.rotation.length()));
        }
        if self.scale.min_element() <= 0.0 {
            return Err("scale components must be strictly positive".into());
        }
        Ok(())
    }

    pub fn to_affine(&self) -> DAffine3 {
        DAffine3::from_scale_rotation_translation(self.scale, self.rotation, self.translation)
    }
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<DVec3>,
    triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<DVec3>, triangles: Vec<[u32; 3]>) -> Result<Self, SceneError> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.check("<mesh>", None)?;
        Ok(mesh)
    }

    pub(crate) fn new_unchecked(vertices: Vec<DVec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    fn check(&self, mesh_id: &str, referencing_node: Option<&str>) -> Result<(), SceneError> {
        if self.triangles.is_empty() {
            return Err(SceneError::EmptyMesh(mesh_id.to_string()));
        }
        if self.vertices.iter().any(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteVertex(mesh_id.to_string()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= self.vertices.len()) {
                return Err(SceneError::TriangleIndexOutOfRange {
                    node: referencing_node.unwrap_or(mesh_id).to_string(),
                    mesh: mesh_id.to_string(),
                    triangle: t,
                    index,
                    vertex_count: self.vertices.len(),
                });
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[DVec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, index: usize) -> [DVec3; 3] {
        let [a, b, c] = self.triangles[index];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Triangle areas after applying `world` to the vertices.
    pub fn world_areas(&self, world: &DAffine3) -> Vec<f64> {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i).map(|v| world.transform_point3(v));
                0.5 * (b - a).cross(c - a).length()
            })
            .collect()
    }
}

/// Inert scene content (cameras, lights). Parameters are retained verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertKind {
    Camera,
    Light,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Group {
        children: Vec<NodeId>,
    },
    Transform {
        transform: Transform,
        children: Vec<NodeId>,
    },
    Geo {
        mesh: MeshId,
    },
    Audio {
        effect: AudioEffect,
    },
    EffectGeo {
        mesh: MeshId,
        effects: Vec<Effect>,
    },
    Inert {
        kind: InertKind,
        params: serde_json::Value,
    },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Group { .. } => "group",
            NodeKind::Transform { .. } => "transform",
            NodeKind::Geo { .. } => "geo",
            NodeKind::Audio { .. } => "audio",
            NodeKind::EffectGeo { .. } => "effect_geo",
            NodeKind::Inert {
                kind: InertKind::Camera,
                ..
            } => "camera",
            NodeKind::Inert {
                kind: InertKind::Light,
                ..
            } => "light",
        }
    }

    pub fn children(&self) -> &[NodeId] {
        match self {
            NodeKind::Group { children } | NodeKind::Transform { children, .. } => children,
            _ => &[],
        }
    }

    pub(crate) fn children_mut(&mut self) -> Option<&mut Vec<NodeId>> {
        match self {
            NodeKind::Group { children } | NodeKind::Transform { children, .. } => Some(children),
            _ => None,
        }
    }

    pub fn is_container(&self) -> bool {
        matches!(self, NodeKind::Group { .. } | NodeKind::Transform { .. })
    }

    pub fn mesh(&self) -> Option<&str> {
        match self {
            NodeKind::Geo { mesh } | NodeKind::EffectGeo { mesh, .. } => Some(mesh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            kind,
        }
    }

    pub fn group(id: impl Into<String>, children: &[&str]) -> Self {
        Self::new(
            id,
            NodeKind::Group {
                children: children.iter().map(|c| c.to_string()).collect(),
            },
        )
    }

    pub fn transform(id: impl Into<String>, transform: Transform, children: &[&str]) -> Self {
        Self::new(
            id,
            NodeKind::Transform {
                transform,
                children: children.iter().map(|c| c.to_string()).collect(),
            },
        )
    }

    pub fn geo(id: impl Into<String>, mesh: impl Into<String>) -> Self {
        Self::new(id, NodeKind::Geo { mesh: mesh.into() })
    }
}

/// One step of a traversal: a node instance with its accumulated world transform.
#[derive(Debug, Clone)]
pub struct Visit<'g> {
    pub path: NodePath,
    pub world: DAffine3,
    pub node: &'g Node,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    nodes: BTreeMap<NodeId, Arc<Node>>,
    meshes: BTreeMap<MeshId, Arc<Mesh>>,
    root: NodeId,
}

impl SceneGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(
        root: impl Into<String>,
        nodes: impl IntoIterator<Item = Node>,
        meshes: impl IntoIterator<Item = (MeshId, Mesh)>,
    ) -> Result<Self, SceneError> {
        let mut table = BTreeMap::new();
        for node in nodes {
            if table.contains_key(&node.id) {
                return Err(SceneError::DuplicateId(node.id));
            }
            table.insert(node.id.clone(), Arc::new(node));
        }
        let graph = Self {
            nodes: table,
            meshes: meshes
                .into_iter()
                .map(|(id, mesh)| (id, Arc::new(mesh)))
                .collect(),
            root: root.into(),
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn root_path(&self) -> NodePath {
        NodePath::root(self.root.clone())
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id).map(|n| n.as_ref())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().map(|n| n.as_ref())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn mesh(&self, id: &str) -> Option<&Arc<Mesh>> {
        self.meshes.get(id)
    }

    pub fn meshes(&self) -> impl Iterator<Item = (&str, &Arc<Mesh>)> {
        self.meshes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    /// Checks every graph invariant: references resolve, kinds are legal under
    /// their parents, meshes are well formed and the graph is acyclic.
    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.nodes.contains_key(&self.root) {
            return Err(SceneError::DanglingReference {
                node: "<root>".into(),
                what: "node",
                reference: self.root.clone(),
            });
        }
        let mut referencing: HashMap<&str, &str> = HashMap::new();
        for node in self.nodes.values() {
            match &node.kind {
                NodeKind::Geo { mesh } | NodeKind::EffectGeo { mesh, .. } => {
                    if !self.meshes.contains_key(mesh) {
                        return Err(SceneError::DanglingReference {
                            node: node.id.clone(),
                            what: "mesh",
                            reference: mesh.clone(),
                        });
                    }
                    referencing.entry(mesh.as_str()).or_insert(node.id.as_str());
                }
                NodeKind::Transform { transform, .. } => {
                    transform
                        .check()
                        .map_err(|reason| SceneError::InvalidTransform {
                            node: node.id.clone(),
                            reason,
                        })?;
                }
                _ => {}
            }
            if let NodeKind::EffectGeo { effects, .. } = &node.kind {
                if effects.is_empty() {
                    return Err(SceneError::EmptyEffectList(node.id.clone()));
                }
            }
            let children = node.kind.children();
            for (i, child) in children.iter().enumerate() {
                let Some(child_node) = self.nodes.get(child) else {
                    return Err(SceneError::DanglingReference {
                        node: node.id.clone(),
                        what: "node",
                        reference: child.clone(),
                    });
                };
                if children[..i].contains(child) {
                    return Err(SceneError::DuplicateChild(node.id.clone()));
                }
                check_placement(&node.kind, &node.id, child_node)?;
            }
        }
        for (id, mesh) in &self.meshes {
            mesh.check(id, referencing.get(id.as_str()).copied())?;
        }
        if matches!(self.nodes[&self.root].kind, NodeKind::Audio { .. }) {
            return Err(SceneError::KindViolation {
                node: self.root.clone(),
                parent: "<root>".into(),
                reason: "an audio node must hang under a transform".into(),
            });
        }
        self.check_acyclic()
    }

    fn check_acyclic(&self) -> Result<(), SceneError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        for start in self.nodes.keys() {
            if state.get(start.as_str()).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
            state.insert(start, 1);
            while let Some((id, next)) = stack.last_mut() {
                let children = self.nodes[*id].kind.children();
                if *next < children.len() {
                    let child = children[*next].as_str();
                    *next += 1;
                    match state.get(child).copied().unwrap_or(0) {
                        0 => {
                            state.insert(child, 1);
                            stack.push((child, 0));
                        }
                        1 => return Err(SceneError::Cycle(child.to_string())),
                        _ => {}
                    }
                } else {
                    state.insert(id, 2);
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    /// Depth-first pre-order traversal in declared child order. A node shared
    /// under k root paths is visited k times.
    pub fn traverse<'g, F>(&'g self, mut visitor: F)
    where
        F: FnMut(&Visit<'g>),
    {
        let root = &self.nodes[&self.root];
        let mut stack = vec![(
            NodePath::root(self.root.clone()),
            DAffine3::IDENTITY,
            root.as_ref(),
        )];
        while let Some((path, parent_world, node)) = stack.pop() {
            let world = match &node.kind {
                NodeKind::Transform { transform, .. } => parent_world * transform.to_affine(),
                _ => parent_world,
            };
            for child in node.kind.children().iter().rev() {
                stack.push((path.child(child.clone()), world, &self.nodes[child]));
            }
            visitor(&Visit { path, world, node });
        }
    }

    pub fn visits(&self) -> Vec<Visit<'_>> {
        let mut out = Vec::new();
        self.traverse(|v| out.push(v.clone()));
        out
    }

    /// Resolves a path to its node, checking every parent-to-child edge.
    pub fn resolve(&self, path: &NodePath) -> Result<&Node, SceneError> {
        let ids = path.segments();
        if ids.first().map(String::as_str) != Some(self.root.as_str()) {
            return Err(SceneError::PathNotFound(path.to_string()));
        }
        let mut node = self.nodes[&self.root].as_ref();
        for id in &ids[1..] {
            if !node.kind.children().contains(id) {
                return Err(SceneError::PathNotFound(path.to_string()));
            }
            node = &self.nodes[id];
        }
        Ok(node)
    }

    pub fn world_transform(&self, path: &NodePath) -> Result<DAffine3, SceneError> {
        self.resolve(path)?;
        let mut world = DAffine3::IDENTITY;
        for id in path.segments() {
            if let NodeKind::Transform { transform, .. } = &self.nodes[id].kind {
                world *= transform.to_affine();
            }
        }
        Ok(world)
    }

    /// Number of distinct root paths reaching each reachable node.
    pub fn path_counts(&self) -> HashMap<&str, u64> {
        // Post-order from the root gives a reverse topological order.
        let mut order: Vec<&str> = Vec::new();
        let mut seen: HashMap<&str, bool> = HashMap::new();
        let mut stack: Vec<(&str, usize)> = vec![(self.root.as_str(), 0)];
        seen.insert(&self.root, true);
        while let Some((id, next)) = stack.last_mut() {
            let children = self.nodes[*id].kind.children();
            if *next < children.len() {
                let child = children[*next].as_str();
                *next += 1;
                if seen.insert(child, true).is_none() {
                    stack.push((child, 0));
                }
            } else {
                order.push(id);
                stack.pop();
            }
        }
        let mut counts: HashMap<&str, u64> = order.iter().map(|id| (*id, 0)).collect();
        counts.insert(&self.root, 1);
        for id in order.iter().rev() {
            let c = counts[id];
            for child in self.nodes[*id].kind.children() {
                *counts.get_mut(child.as_str()).unwrap() += c;
            }
        }
        counts
    }

    /// All root paths in traversal order.
    pub fn paths(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        self.traverse(|v| out.push(v.path.clone()));
        out
    }
}

pub(crate) fn check_placement(
    parent: &NodeKind,
    parent_id: &str,
    child: &Node,
) -> Result<(), SceneError> {
    if !parent.is_container() {
        return Err(SceneError::KindViolation {
            node: child.id.clone(),
            parent: parent_id.to_string(),
            reason: format!("a {} node cannot hold children", parent.name()),
        });
    }
    if matches!(child.kind, NodeKind::Audio { .. }) && !matches!(parent, NodeKind::Transform { .. })
    {
        return Err(SceneError::KindViolation {
            node: child.id.clone(),
            parent: parent_id.to_string(),
            reason: "an audio node must hang under a transform".into(),
        });
    }
    Ok(())
}
