use std::collections::BTreeMap;

use glam::{DQuat, DVec3};
use serde::Deserialize;

use super::{InertKind, Mesh, Node, NodeKind, SceneError, SceneGraph, Transform};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    #[serde(default)]
    meshes: BTreeMap<String, MeshDoc>,
    nodes: BTreeMap<String, NodeDoc>,
    root: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshDoc {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    kind: String,
    children: Option<Vec<String>>,
    transform: Option<TransformDoc>,
    mesh: Option<String>,
    params: Option<serde_json::Value>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TransformDoc {
    translation: Option<[f64; 3]>,
    rotation_quat: Option<[f64; 4]>,
    scale: Option<[f64; 3]>,
}

impl TransformDoc {
    fn into_transform(self) -> Transform {
        let d = Transform::IDENTITY;
        Transform {
            translation: self
                .translation
                .map(DVec3::from_array)
                .unwrap_or(d.translation),
            rotation: self
                .rotation_quat
                .map(DQuat::from_array)
                .unwrap_or(d.rotation),
            scale: self.scale.map(DVec3::from_array).unwrap_or(d.scale),
        }
    }
}

/// Parses a scene document and checks every graph invariant.
pub fn load_scene(document: &str) -> Result<SceneGraph, SceneError> {
    let doc: SceneDoc =
        serde_json::from_str(document).map_err(|e| SceneError::Malformed(e.to_string()))?;

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (id, n) in doc.nodes {
        let malformed = |msg: &str| SceneError::Malformed(format!("node `{id}`: {msg}"));
        let leaf = n.children.is_none();
        if n.kind != "transform" && n.transform.is_some() {
            return Err(malformed("`transform` is only allowed on transform nodes"));
        }
        if n.kind != "geo" && n.mesh.is_some() {
            return Err(malformed("`mesh` is only allowed on geo nodes"));
        }
        let kind = match n.kind.as_str() {
            "group" => NodeKind::Group {
                children: n.children.unwrap_or_default(),
            },
            "transform" => NodeKind::Transform {
                transform: n.transform.unwrap_or_default().into_transform(),
                children: n.children.unwrap_or_default(),
            },
            "geo" => {
                if !leaf {
                    return Err(malformed("geo nodes cannot have children"));
                }
                NodeKind::Geo {
                    mesh: n
                        .mesh
                        .ok_or_else(|| malformed("geo node requires `mesh`"))?,
                }
            }
            "camera" | "light" => {
                if !leaf {
                    return Err(malformed("camera and light nodes cannot have children"));
                }
                NodeKind::Inert {
                    kind: if n.kind == "camera" {
                        InertKind::Camera
                    } else {
                        InertKind::Light
                    },
                    params: n.params.unwrap_or(serde_json::Value::Null),
                }
            }
            other => return Err(malformed(&format!("unknown kind `{other}`"))),
        };
        nodes.push(Node { id, kind });
    }
    let meshes = doc.meshes.into_iter().map(|(id, m)| {
        (
            id,
            Mesh::new_unchecked(
                m.vertices.into_iter().map(DVec3::from_array).collect(),
                m.triangles,
            ),
        )
    });
    SceneGraph::new(doc.root, nodes, meshes)
}
