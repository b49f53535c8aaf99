//! Mapping rewrites over random DAGs and random valid mappings.

use std::collections::BTreeMap;

use glam::{DQuat, DVec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivr_core::effects::{
    AudioEffect, AudioTrigger, Effect, EffectPlayback, EffectType, HapticEffect, ScalarField,
    VisualEffect, Waveform,
};
use ivr_core::mapping::{
    apply_mapping, MappingDescription, MappingEntry, MappingError, ResponsibilitySet, ViolationKind,
};
use ivr_core::scene::{Mesh, Node, NodeKind, NodePath, SceneGraph, Transform};

/// Containers in layers; every other node hangs under one or two earlier
/// containers, so shared instances are common.
fn random_scene(rng: &mut ChaCha8Rng) -> SceneGraph {
    let mesh_count = rng.gen_range(1..=3);
    let meshes: Vec<(String, Mesh)> = (0..mesh_count)
        .map(|i| {
            let tris = rng.gen_range(1..=5);
            let vertices = (0..tris * 3)
                .map(|_| {
                    DVec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect();
            let triangles = (0..tris as u32)
                .map(|t| [3 * t, 3 * t + 1, 3 * t + 2])
                .collect();
            (format!("m{i}"), Mesh::new(vertices, triangles).unwrap())
        })
        .collect();

    let containers = rng.gen_range(1..=6);
    let geos = rng.gen_range(1..=5);
    let mut children: Vec<Vec<String>> = vec![Vec::new(); containers];
    let mut nodes = Vec::new();
    let mut link = |rng: &mut ChaCha8Rng, id: String, upto: usize| {
        let first = rng.gen_range(0..upto);
        children[first].push(id.clone());
        if upto > 1 && rng.gen_bool(0.4) {
            let second = rng.gen_range(0..upto);
            if second != first {
                children[second].push(id);
            }
        }
    };
    for c in 1..containers {
        link(rng, format!("c{c}"), c);
    }
    for g in 0..geos {
        link(rng, format!("g{g}"), containers);
        nodes.push(Node::geo(
            format!("g{g}"),
            format!("m{}", rng.gen_range(0..mesh_count)),
        ));
    }
    for (c, kids) in children.into_iter().enumerate() {
        let kind = if rng.gen_bool(0.6) {
            NodeKind::Transform {
                transform: Transform {
                    translation: DVec3::new(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                        0.0,
                    ),
                    rotation: DQuat::from_rotation_y(rng.gen_range(-3.0..3.0)),
                    scale: DVec3::splat(rng.gen_range(0.5..2.0)),
                },
                children: kids,
            }
        } else {
            NodeKind::Group { children: kids }
        };
        nodes.push(Node::new(format!("c{c}"), kind));
    }
    SceneGraph::new("c0", nodes, meshes).unwrap()
}

fn field(rng: &mut ChaCha8Rng, len: usize) -> ScalarField {
    ScalarField {
        field_name: "f".into(),
        unit: "u".into(),
        values: (0..len).map(|_| rng.gen_range(0.0..10.0)).collect(),
        value_min: 0.0,
        value_max: 10.0,
    }
}

fn audio(trigger: AudioTrigger, rng: &mut ChaCha8Rng) -> Effect {
    let waveform = Waveform::Sine {
        freq_hz: rng.gen_range(100.0..1000.0),
        amp: 0.5,
        duration_s: 0.1,
    };
    Effect::Audio(AudioEffect::new(trigger, waveform, 1.0, 1.0, 10.0))
}

/// Entries on random instances, each fitting its target's kind and mesh.
fn random_mapping(rng: &mut ChaCha8Rng, graph: &SceneGraph) -> MappingDescription {
    let candidates: Vec<_> = graph
        .visits()
        .into_iter()
        .filter(|v| !matches!(v.node.kind, NodeKind::Group { .. }))
        .map(|v| (v.path, v.node.clone()))
        .collect();
    let entries = (0..rng.gen_range(0..=8))
        .map(|_| {
            let (target, node) = candidates[rng.gen_range(0..candidates.len())].clone();
            let effect = match &node.kind {
                NodeKind::Transform { .. } => audio(AudioTrigger::Continuous, rng),
                NodeKind::Geo { mesh } => {
                    let len = graph.mesh(mesh).unwrap().triangle_count();
                    match rng.gen_range(0..3) {
                        0 => audio(AudioTrigger::OnTouch, rng),
                        1 => Effect::Haptic(HapticEffect {
                            field: field(rng, len),
                            force_min: 0.1,
                            force_max: 0.9,
                        }),
                        _ => Effect::Visual(VisualEffect {
                            field: field(rng, len),
                            color_cold: [0.0, 0.0, 1.0],
                            color_hot: [1.0, 0.0, 0.0],
                        }),
                    }
                }
                other => unreachable!("{}", other.name()),
            };
            MappingEntry { target, effect }
        })
        .collect();
    MappingDescription {
        scene: "random.json".into(),
        entries,
    }
}

fn resp_strategy() -> impl Strategy<Value = ResponsibilitySet> {
    (0u8..8).prop_map(|m| ResponsibilitySet::from_mask(m).unwrap())
}

/// Base id of a node: copies carry a `#k` suffix.
fn base_id(id: &str) -> &str {
    id.split('#').next().unwrap()
}

fn base_path(path: &NodePath) -> NodePath {
    NodePath::from_segments(
        path.segments()
            .iter()
            .map(|s| base_id(s).to_string())
            .collect(),
    )
    .unwrap()
}

fn scenario(seed: u64) -> (SceneGraph, MappingDescription) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_scene(&mut rng);
    let mapping = random_mapping(&mut rng, &base);
    (base, mapping)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn empty_mapping_is_identity(seed in any::<u64>(), resp in resp_strategy()) {
        let (base, _) = scenario(seed);
        let out = apply_mapping(&base, &MappingDescription::default(), resp).unwrap();
        prop_assert_eq!(out, base);
    }

    #[test]
    fn geometry_is_preserved(seed in any::<u64>(), resp in resp_strategy()) {
        let (base, mapping) = scenario(seed);
        let out = apply_mapping(&base, &mapping, resp).unwrap();
        prop_assert!(out.validate().is_ok());

        let base_world: BTreeMap<NodePath, _> = base.visits().into_iter().map(|v| (v.path, (v.world, v.node.kind.mesh().map(String::from)))).collect();
        let mut seen = Vec::new();
        for v in out.visits() {
            if matches!(v.node.kind, NodeKind::Audio { .. }) {
                continue;
            }
            let original = base_path(&v.path);
            let (world, mesh) = &base_world[&original];
            prop_assert!(v.world.abs_diff_eq(*world, 1e-12), "{} moved", v.path);
            prop_assert_eq!(v.node.kind.mesh(), mesh.as_deref());
            seen.push(original);
        }
        seen.sort();
        prop_assert_eq!(seen, base_world.into_keys().collect::<Vec<_>>());
    }

    #[test]
    fn entries_land_in_order_and_nothing_else_changes(seed in any::<u64>()) {
        let (base, mapping) = scenario(seed);
        let out = apply_mapping(&base, &mapping, ResponsibilitySet::ALL).unwrap();
        for v in out.visits() {
            if matches!(v.node.kind, NodeKind::Audio { .. }) {
                continue;
            }
            let original = base_path(&v.path);
            let expected: Vec<&Effect> = mapping.entries.iter().filter(|e| e.target == original).map(|e| &e.effect).collect();
            let base_node = base.resolve(&original).unwrap();
            match (&base_node.kind, &v.node.kind) {
                (NodeKind::Geo { .. }, NodeKind::Geo { .. }) => prop_assert!(expected.is_empty()),
                (NodeKind::Geo { .. }, NodeKind::EffectGeo { effects, .. }) => {
                    prop_assert_eq!(effects.iter().collect::<Vec<_>>(), expected);
                }
                (NodeKind::Group { children: before }, NodeKind::Group { children: after }) => {
                    prop_assert_eq!(before.len(), after.len());
                }
                (NodeKind::Transform { transform: t0, children: before }, NodeKind::Transform { transform: t1, children: after }) => {
                    prop_assert_eq!(t0, t1);
                    let mut appended = Vec::new();
                    for id in &after[before.len()..] {
                        match &out.node(id).unwrap().kind {
                            NodeKind::Audio { effect } => appended.push(Effect::Audio(effect.clone())),
                            other => prop_assert!(false, "{} appended under {}", other.name(), v.path),
                        }
                    }
                    prop_assert_eq!(appended.iter().collect::<Vec<_>>(), expected);
                }
                (b, a) => prop_assert!(false, "{} turned from {} into {}", v.path, b.name(), a.name()),
            }
        }
    }

    #[test]
    fn filtering_is_sound_and_complete(seed in any::<u64>(), resp in resp_strategy()) {
        let (base, mapping) = scenario(seed);
        let all = apply_mapping(&base, &mapping, ResponsibilitySet::ALL).unwrap();
        let out = apply_mapping(&base, &mapping, resp).unwrap();

        // Derive the filtered view from the full one, instance by instance.
        let mut expected = Vec::new();
        for v in all.visits() {
            let kind = match &v.node.kind {
                NodeKind::Audio { .. } if !resp.contains(EffectType::Audio) => continue,
                NodeKind::EffectGeo { mesh, effects } => {
                    let kept: Vec<Effect> = effects.iter().filter(|e| resp.contains(e.effect_type())).cloned().collect();
                    if kept.is_empty() {
                        NodeKind::Geo { mesh: mesh.clone() }
                    } else {
                        NodeKind::EffectGeo { mesh: mesh.clone(), effects: kept }
                    }
                }
                NodeKind::Group { .. } | NodeKind::Transform { .. } => NodeKind::Group { children: Vec::new() },
                other => other.clone(),
            };
            expected.push((v.path, kind));
        }
        let got: Vec<_> = out
            .visits()
            .into_iter()
            .map(|v| {
                let kind = match &v.node.kind {
                    NodeKind::Group { .. } | NodeKind::Transform { .. } => NodeKind::Group { children: Vec::new() },
                    other => other.clone(),
                };
                (v.path, kind)
            })
            .collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn bad_targets_are_refused(seed in any::<u64>(), resp in resp_strategy()) {
        let (base, mut mapping) = scenario(seed);
        let missing = base.root_path().child("nowhere");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mapping.entries.push(MappingEntry { target: missing, effect: audio(AudioTrigger::OnTouch, &mut rng) });
        let last = mapping.entries.len() - 1;
        match apply_mapping(&base, &mapping, resp) {
            Err(MappingError::Violations(v)) => {
                prop_assert_eq!(v.len(), 1);
                prop_assert_eq!(v[0].entry, last);
                prop_assert_eq!(v[0].kind, ViolationKind::PathNotFound);
            }
            other => prop_assert!(false, "{:?}", other.map(|g| g.node_count())),
        }
    }
}
