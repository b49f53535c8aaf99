//! Graph edits used by the mapping rewrite and the runtime.
//!
//! Edits are per instance: when a node on the edited path is reachable through
//! more than one root path, the path from that node down is copied under fresh
//! ids (`<id>#<k>`) so the other instances keep seeing the original nodes.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::{check_placement, Node, NodeId, NodeKind, NodePath, SceneError, SceneGraph, Transform};

/// Where an edited instance lives after an edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relocation {
    pub old: NodePath,
    pub new: NodePath,
}

impl Relocation {
    pub fn apply(&self, path: &NodePath) -> NodePath {
        path.relocate(&self.old, &self.new)
    }
}

impl SceneGraph {
    /// Appends `node` as the last child of the instance at `parent`.
    pub fn add_child(&self, parent: &NodePath, node: Node) -> Result<SceneGraph, SceneError> {
        self.add_child_at(parent, node).map(|(g, _)| g)
    }

    /// Like [`SceneGraph::add_child`], also reporting where the parent instance moved.
    pub fn add_child_at(
        &self,
        parent: &NodePath,
        node: Node,
    ) -> Result<(SceneGraph, Relocation), SceneError> {
        let parent_node = self.resolve(parent)?;
        check_placement(&parent_node.kind, &parent_node.id, &node)?;
        if self.nodes.contains_key(&node.id) {
            return Err(SceneError::DuplicateId(node.id));
        }
        let mut graph = self.clone();
        let relocated = graph.unshare(parent, parent.len() - 1);
        let parent_id = relocated.leaf().to_string();
        let slot = Arc::make_mut(graph.nodes.get_mut(&parent_id).expect("resolved above"));
        slot.kind
            .children_mut()
            .expect("placement checked")
            .push(node.id.clone());
        graph.nodes.insert(node.id.clone(), Arc::new(node));
        graph.validate()?;
        Ok((
            graph,
            Relocation {
                old: parent.clone(),
                new: relocated,
            },
        ))
    }

    /// Puts `node` into the child slot occupied by the instance at `path`.
    pub fn replace_node(&self, path: &NodePath, node: Node) -> Result<SceneGraph, SceneError> {
        self.replace_node_at(path, node).map(|(g, _)| g)
    }

    /// Like [`SceneGraph::replace_node`], also reporting the replacement's path.
    ///
    /// Keeping the old id overwrites the node in place when the instance is
    /// unshared; for a shared instance the replacement gets a fresh id.
    pub fn replace_node_at(
        &self,
        path: &NodePath,
        mut node: Node,
    ) -> Result<(SceneGraph, Relocation), SceneError> {
        let old = self.resolve(path)?;
        let old_id = old.id.clone();
        let reachable_before = self.reachable();

        let mut graph = self.clone();
        if path.len() == 1 {
            if !node.kind.is_container() {
                return Err(SceneError::KindViolation {
                    node: node.id,
                    parent: "<root>".into(),
                    reason: "the root must be a group or transform".into(),
                });
            }
            if node.id != old_id && graph.nodes.contains_key(&node.id) {
                return Err(SceneError::DuplicateId(node.id));
            }
            graph.root = node.id.clone();
            let new_path = NodePath::root(node.id.clone());
            graph.nodes.insert(node.id.clone(), Arc::new(node));
            graph.drop_unreachable(&reachable_before);
            graph.validate()?;
            return Ok((
                graph,
                Relocation {
                    old: path.clone(),
                    new: new_path,
                },
            ));
        }

        let parent_path = path.parent().expect("len > 1");
        let parent = self.resolve(&parent_path)?;
        check_placement(&parent.kind, &parent.id, &node)?;

        let relocated = graph.unshare(path, path.len() - 2);
        let target_shared = graph
            .path_counts()
            .get(old_id.as_str())
            .copied()
            .unwrap_or(0)
            > 1;
        if node.id == old_id {
            if target_shared {
                node.id = graph.fresh_id(&old_id, &HashSet::new());
            }
        } else if graph.nodes.contains_key(&node.id) {
            return Err(SceneError::DuplicateId(node.id));
        }

        let new_id = node.id.clone();
        if new_id != old_id {
            let parent_id = &relocated.segments()[path.len() - 2];
            graph.redirect(parent_id, &old_id, &new_id);
        }
        graph.nodes.insert(new_id.clone(), Arc::new(node));
        graph.drop_unreachable(&reachable_before);
        graph.validate()?;

        let mut segments = relocated.segments().to_vec();
        *segments.last_mut().expect("non-empty") = new_id;
        Ok((
            graph,
            Relocation {
                old: path.clone(),
                new: NodePath::from_segments(segments)?,
            },
        ))
    }

    /// Applies `f` to the transform node reached by `path`. The node itself is
    /// updated, so every instance sharing it moves.
    pub fn update_transform(
        &self,
        path: &NodePath,
        f: impl FnOnce(&mut Transform),
    ) -> Result<SceneGraph, SceneError> {
        let node = self.resolve(path)?;
        if !matches!(node.kind, NodeKind::Transform { .. }) {
            return Err(SceneError::KindViolation {
                node: node.id.clone(),
                parent: path
                    .parent()
                    .map(|p| p.leaf().to_string())
                    .unwrap_or_default(),
                reason: "not a transform node".into(),
            });
        }
        let id = node.id.clone();
        let mut graph = self.clone();
        let slot = Arc::make_mut(graph.nodes.get_mut(&id).expect("resolved"));
        if let NodeKind::Transform { transform, .. } = &mut slot.kind {
            f(transform);
            transform
                .check()
                .map_err(|reason| SceneError::InvalidTransform {
                    node: id.clone(),
                    reason,
                })?;
        }
        Ok(graph)
    }

    /// Nearest strict ancestor of `path` that is a transform node.
    pub fn nearest_transform_ancestor(&self, path: &NodePath) -> Option<NodePath> {
        let mut cursor = path.parent();
        while let Some(p) = cursor {
            if matches!(self.node(p.leaf())?.kind, NodeKind::Transform { .. }) {
                return Some(p);
            }
            cursor = p.parent();
        }
        None
    }

    /// Replaces node payloads by id without touching structure. Children of
    /// container nodes must not change.
    pub(crate) fn with_nodes_replaced(
        &self,
        replacements: Vec<Node>,
    ) -> Result<SceneGraph, SceneError> {
        let mut graph = self.clone();
        for node in replacements {
            debug_assert_eq!(
                graph
                    .nodes
                    .get(&node.id)
                    .map(|n| n.kind.children().to_vec()),
                Some(node.kind.children().to_vec())
            );
            graph.nodes.insert(node.id.clone(), Arc::new(node));
        }
        graph.validate()?;
        Ok(graph)
    }

    /// Removes the given leaf nodes and every edge pointing at them.
    pub(crate) fn without_leaves(
        &self,
        leaves: &HashSet<NodeId>,
    ) -> Result<SceneGraph, SceneError> {
        if leaves.is_empty() {
            return Ok(self.clone());
        }
        let mut graph = self.clone();
        let parents: Vec<NodeId> = graph
            .nodes
            .values()
            .filter(|n| n.kind.children().iter().any(|c| leaves.contains(c)))
            .map(|n| n.id.clone())
            .collect();
        for id in parents {
            let node = Arc::make_mut(graph.nodes.get_mut(&id).expect("listed above"));
            if let Some(children) = node.kind.children_mut() {
                children.retain(|c| !leaves.contains(c));
            }
        }
        for id in leaves {
            debug_assert!(graph
                .nodes
                .get(id)
                .is_none_or(|n| n.kind.children().is_empty()));
            graph.nodes.remove(id);
        }
        graph.validate()?;
        Ok(graph)
    }

    /// Copies the nodes at positions `first_shared..=upto` of `path` under
    /// fresh ids, starting at the first node with more than one root path.
    /// Returns the path of the (possibly copied) instance.
    fn unshare(&mut self, path: &NodePath, upto: usize) -> NodePath {
        let counts: HashMap<String, u64> = self
            .path_counts()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let segments = path.segments();
        let Some(first) = (1..=upto).find(|&i| counts[&segments[i]] > 1) else {
            return path.clone();
        };

        let mut new_segments = segments.to_vec();
        let mut taken = HashSet::new();
        for seg in new_segments.iter_mut().take(upto + 1).skip(first) {
            let id = self.fresh_id(seg, &taken);
            taken.insert(id.clone());
            *seg = id;
        }
        for i in first..=upto {
            let mut copy = (*self.nodes[&segments[i]]).clone();
            copy.id = new_segments[i].clone();
            if i < upto {
                replace_child(&mut copy, &segments[i + 1], &new_segments[i + 1]);
            }
            self.nodes.insert(copy.id.clone(), Arc::new(copy));
        }
        self.redirect(&segments[first - 1], &segments[first], &new_segments[first]);
        NodePath::from_segments(new_segments).expect("segments come from a valid path")
    }

    fn redirect(&mut self, parent: &str, from: &str, to: &str) {
        let node = Arc::make_mut(self.nodes.get_mut(parent).expect("parent exists"));
        replace_child(node, from, to);
    }

    fn fresh_id(&self, base: &str, taken: &HashSet<String>) -> NodeId {
        (1..)
            .map(|k| format!("{base}#{k}"))
            .find(|id| !self.nodes.contains_key(id) && !taken.contains(id))
            .expect("unbounded search")
    }

    fn reachable(&self) -> HashSet<NodeId> {
        let mut seen = HashSet::new();
        let mut stack = vec![self.root.clone()];
        while let Some(id) = stack.pop() {
            if seen.insert(id.clone()) {
                if let Some(node) = self.nodes.get(&id) {
                    stack.extend(node.kind.children().iter().cloned());
                }
            }
        }
        seen
    }

    /// Removes nodes an edit disconnected. Orphans that were never reachable
    /// stay untouched.
    fn drop_unreachable(&mut self, before: &HashSet<NodeId>) {
        let after = self.reachable();
        for id in before.difference(&after) {
            self.nodes.remove(id);
        }
    }
}

fn replace_child(node: &mut Node, from: &str, to: &str) {
    if let Some(children) = node.kind.children_mut() {
        for child in children.iter_mut().filter(|c| c.as_str() == from) {
            *child = to.to_string();
        }
    }
}
