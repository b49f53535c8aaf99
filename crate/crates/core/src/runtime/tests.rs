use std::f32::consts::FRAC_PI_2;

use glam::DVec3;
use tempfile::TempDir;

use super::*;
use crate::effects::{EffectEvent, EffectType, EventTrigger};
use crate::mapping::ResponsibilitySet;
use crate::protocol::{message_type, AckStatus, GestureKind, LoadStatus, Message};
use crate::scene::NodePath;

const SCENE: &str = r#"{
  "root": "root",
  "meshes": {"sq": {"vertices": [[-1, -1, 0], [1, -1, 0], [1, 1, 0], [-1, 1, 0]], "triangles": [[0, 1, 2], [0, 2, 3]]}},
  "nodes": {
    "root": {"kind": "group", "children": ["tr"]},
    "tr": {"kind": "transform", "transform": {"translation": [0, 0, -5]}, "children": ["g"]},
    "g": {"kind": "geo", "mesh": "sq"}
  }
}"#;

const SINE: &str = r#"{"sine": {"freq_hz": 440, "amp": 0.5, "duration_s": 0.1}}"#;

fn mapping_doc() -> String {
    format!(
        r#"{{"scene": "scene.json", "entries": [
  {{"target": "/root/tr", "effect": {{"type": "audio", "trigger": "continuous", "waveform": {SINE}, "ref_distance": 1, "rolloff": 1, "max_distance": 50}}}},
  {{"target": "/root/tr/g", "effect": {{"type": "audio", "trigger": "on_touch", "waveform": {SINE}, "ref_distance": 1, "rolloff": 1, "max_distance": 50}}}},
  {{"target": "/root/tr/g", "effect": {{"type": "haptic", "field_name": "t", "unit": "C", "values": [10, 90], "value_min": 0, "value_max": 100, "force_min": 0, "force_max": 1}}}}
]}}"#
    )
}

fn storage() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scene.json"), SCENE).unwrap();
    std::fs::write(dir.path().join("mapping.json"), mapping_doc()).unwrap();
    dir
}

fn consumer(dir: &TempDir, resp: ResponsibilitySet, eye: Eye) -> ConsumerState {
    let mut c = ConsumerState::new(1, resp, eye, EyeGeometry::default(), dir.path());
    let loaded = c.load("scene.json", "mapping.json");
    let node_count = if resp.audio { 4 } else { 3 };
    assert_eq!(
        loaded,
        Message::SceneLoaded {
            status: LoadStatus::Ok,
            node_count
        }
    );
    c
}

fn tick(c: &mut ConsumerState, t: u32) -> StepOutput {
    c.handle(&Message::Tick { tick: t }).unwrap()
}

fn of_type(events: &[EffectEvent], t: EffectType) -> Vec<&EffectEvent> {
    events.iter().filter(|e| e.effect_type == t).collect()
}

const CENTER_PICK: Message = Message::Pick {
    origin: [0.5, -0.5, 0.0],
    direction: [0.0, 0.0, -1.0],
};

#[test]
fn continuous_audio_plays_every_tick() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    for t in 1..=3 {
        let out = tick(&mut c, t);
        let audio = of_type(&out.events, EffectType::Audio);
        assert_eq!(audio.len(), 1);
        assert_eq!(audio[0].trigger, EventTrigger::Continuous);
        assert_eq!(audio[0].path, "/root/tr/tr.audio0");
        assert_eq!(audio[0].tick, t);
        // Listener at the origin, source 5 m away: 1 / (1 + 4).
        assert!((audio[0].param - 0.2).abs() < 1e-12);
    }
}

#[test]
fn pick_fires_touch_effects_once() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    c.handle(&CENTER_PICK).unwrap();
    let out = tick(&mut c, 1);
    let touch: Vec<_> = out
        .events
        .iter()
        .filter(|e| e.trigger == EventTrigger::OnTouch)
        .collect();
    assert_eq!(touch.len(), 2);
    assert_eq!(touch[0].effect_type, EffectType::Audio);
    assert_eq!(touch[1].effect_type, EffectType::Haptic);
    assert!(touch.iter().all(|e| e.path == "/root/tr/g"));
    // (0.5, -0.5) lies in triangle 0, value 10 of [0, 100].
    assert!((touch[1].param - 0.1).abs() < 1e-12);

    let next = tick(&mut c, 2);
    assert!(next
        .events
        .iter()
        .all(|e| e.trigger != EventTrigger::OnTouch));
}

#[test]
fn feedback_reports_every_event_then_acks() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    c.handle(&CENTER_PICK).unwrap();
    let out = tick(&mut c, 9);
    assert_eq!(out.feedback.len(), out.events.len() + 1);
    assert_eq!(
        out.feedback.last(),
        Some(&Message::Ack {
            acked_type: message_type::TICK,
            status: AckStatus::Ok,
            tick: 9
        })
    );
    for (e, m) in out.events.iter().zip(&out.feedback) {
        match m {
            Message::EffectFired {
                effect_type,
                path,
                tick,
                ..
            } => {
                assert_eq!(
                    (*effect_type, path.as_str(), *tick),
                    (e.effect_type, e.path.as_str(), 9)
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn responsibilities_filter_events() {
    let dir = storage();
    let mut visual = consumer(&dir, ResponsibilitySet::only(EffectType::Visual), Eye::Mono);
    visual.handle(&CENTER_PICK).unwrap();
    let out = tick(&mut visual, 1);
    assert!(of_type(&out.events, EffectType::Audio).is_empty());
    assert!(of_type(&out.events, EffectType::Haptic).is_empty());
    let frames: Vec<_> = out
        .events
        .iter()
        .filter(|e| e.trigger == EventTrigger::Frame)
        .collect();
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].param, 0.0);
    assert_eq!(frames[0].color, None);

    let mut audio = consumer(&dir, ResponsibilitySet::only(EffectType::Audio), Eye::Mono);
    audio.handle(&CENTER_PICK).unwrap();
    let out = tick(&mut audio, 1);
    assert_eq!(out.events.len(), 2);
    assert!(out
        .events
        .iter()
        .all(|e| e.effect_type == EffectType::Audio));
}

#[test]
fn load_failures_leave_state_alone() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    let before = c.graph.clone();
    assert_eq!(
        c.load("scene.json", "missing.json"),
        Message::SceneLoaded {
            status: LoadStatus::Error,
            node_count: 0
        }
    );
    assert_eq!(c.graph, before);
    assert!(matches!(
        c.build_graph("scene.json", "missing.json"),
        Err(LoadError::Read { path, .. }) if path.ends_with("missing.json")
    ));

    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"scene": "scene.json", "entries": [{"target": "/root", "effect": {"type": "smell"}}]}"#,
    )
    .unwrap();
    assert!(matches!(
        c.build_graph("scene.json", "bad.json"),
        Err(LoadError::Mapping { .. })
    ));

    let mut fresh = ConsumerState::new(
        2,
        ResponsibilitySet::ALL,
        Eye::Mono,
        EyeGeometry::default(),
        dir.path(),
    );
    assert!(matches!(
        fresh.load("nope.json", "mapping.json"),
        Message::SceneLoaded {
            status: LoadStatus::Error,
            ..
        }
    ));
    assert!(fresh.graph.is_none());
    // Without a scene, ticks still ack.
    assert_eq!(tick(&mut fresh, 1).feedback.len(), 1);
}

#[test]
fn node_count_drops_unheld_audio() {
    let dir = storage();
    let mut c = ConsumerState::new(
        1,
        ResponsibilitySet::only(EffectType::Haptic),
        Eye::Mono,
        EyeGeometry::default(),
        dir.path(),
    );
    assert_eq!(
        c.load("scene.json", "mapping.json"),
        Message::SceneLoaded {
            status: LoadStatus::Ok,
            node_count: 3
        }
    );
}

#[test]
fn selection_mode_reports_selection() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    c.handle(&CENTER_PICK).unwrap();
    let out = tick(&mut c, 1);
    assert!(!out
        .feedback
        .iter()
        .any(|m| matches!(m, Message::Selection { .. })));
    assert_eq!(c.selected, None);

    c.handle(&Message::ModeSwitch { mode: 1 }).unwrap();
    c.handle(&CENTER_PICK).unwrap();
    let out = tick(&mut c, 2);
    assert_eq!(
        out.feedback[0],
        Message::Selection {
            path: "/root/tr/g".into(),
            tick: 2
        }
    );
    assert_eq!(c.selected, Some("/root/tr/g".parse().unwrap()));

    // A miss clears the selection.
    c.handle(&Message::Pick {
        origin: [10.0, 0.0, 0.0],
        direction: [0.0, 0.0, -1.0],
    })
    .unwrap();
    let out = tick(&mut c, 3);
    assert_eq!(
        out.feedback[0],
        Message::Selection {
            path: String::new(),
            tick: 3
        }
    );
    assert_eq!(c.selected, None);
}

#[test]
fn point_gesture_picks_along_view() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    c.handle(&Message::Gesture {
        gesture: GestureKind::Point,
    })
    .unwrap();
    assert!(c.pending_picks.is_empty());
    c.handle(&Message::ModeSwitch { mode: 1 }).unwrap();
    c.handle(&Message::Gesture {
        gesture: GestureKind::Point,
    })
    .unwrap();
    tick(&mut c, 1);
    assert_eq!(c.selected, Some("/root/tr/g".parse().unwrap()));
}

#[test]
fn editing_moves_the_selected_object() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    c.handle(&Message::ModeSwitch { mode: 1 }).unwrap();
    c.handle(&CENTER_PICK).unwrap();
    tick(&mut c, 1);
    c.handle(&Message::ModeSwitch { mode: 2 }).unwrap();
    c.handle(&Message::ViewpointUpdate {
        position: [0.5, 0.0, 0.25],
        rotation: [0.0, 0.0, 0.0, 1.0],
    })
    .unwrap();
    let graph = c.graph.as_ref().unwrap();
    let world = graph
        .world_transform(&"/root/tr".parse::<NodePath>().unwrap())
        .unwrap();
    assert!((world.translation - DVec3::new(0.5, 0.0, -4.75)).length() < 1e-12);
    // The viewpoint itself stays put while editing.
    assert_eq!(c.pose, Pose::IDENTITY);

    c.handle(&Message::ModeSwitch { mode: 0 }).unwrap();
    assert_eq!(c.selected, None);
}

#[test]
fn bad_mode_byte_is_rejected() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    tick(&mut c, 4);
    let out = c.handle(&Message::ModeSwitch { mode: 7 }).unwrap();
    assert_eq!(
        out.feedback,
        [Message::Ack {
            acked_type: message_type::MODE_SWITCH,
            status: AckStatus::Error,
            tick: 4
        }]
    );
    assert_eq!(c.mode, Mode::Exploration);
}

#[test]
fn ticks_must_increase() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    tick(&mut c, 5);
    assert_eq!(
        c.handle(&Message::Tick { tick: 5 }),
        Err(ConsumerError::NonMonotonicTick { last: 5, got: 5 })
    );
    assert_eq!(c.tick, Some(5));
    tick(&mut c, 7);
}

#[test]
fn animation_rotates_each_tick() {
    let dir = storage();
    let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Mono);
    c.handle(&Message::PlayAnimation {
        target_path: "/root/tr".into(),
        axis: [0.0, 1.0, 0.0],
        rad_per_tick: FRAC_PI_2,
    })
    .unwrap();
    // Geometry and non-transform targets are ignored.
    c.handle(&Message::PlayAnimation {
        target_path: "/root/tr/g".into(),
        axis: [0.0, 1.0, 0.0],
        rad_per_tick: 1.0,
    })
    .unwrap();
    assert_eq!(c.animations.len(), 1);
    tick(&mut c, 1);
    tick(&mut c, 2);
    let world = c
        .graph
        .as_ref()
        .unwrap()
        .world_transform(&"/root/tr".parse::<NodePath>().unwrap())
        .unwrap();
    // Two quarter turns about Y flip X.
    assert!((world.transform_vector3(DVec3::X) - DVec3::NEG_X).length() < 1e-6);
    assert!((world.translation - DVec3::new(0.0, 0.0, -5.0)).length() < 1e-12);
}

#[test]
fn frame_events_carry_the_eye_view() {
    let dir = storage();
    let mut left = consumer(&dir, ResponsibilitySet::only(EffectType::Visual), Eye::Left);
    let mut right = consumer(
        &dir,
        ResponsibilitySet::only(EffectType::Visual),
        Eye::Right,
    );
    let l = tick(&mut left, 1).events;
    let r = tick(&mut right, 1).events;
    assert_eq!(l[0].eye, Some(Eye::Left));
    let (lv, rv) = (l[0].view.unwrap(), r[0].view.unwrap());
    assert!((lv - DVec3::new(-0.032, 0.0, 0.0)).length() < 1e-12);
    assert!(((rv - lv).length() - DEFAULT_IPD).abs() < 1e-12);
}

#[test]
fn replay_is_deterministic() {
    let dir = storage();
    let inbox = [
        Message::ViewpointUpdate {
            position: [0.1, 0.2, 0.3],
            rotation: [0.0, 0.0, 0.0, 1.0],
        },
        CENTER_PICK,
        Message::PlayAnimation {
            target_path: "/root/tr".into(),
            axis: [1.0, 1.0, 0.0],
            rad_per_tick: 0.1,
        },
        Message::Tick { tick: 1 },
        CENTER_PICK,
        Message::Tick { tick: 2 },
    ];
    let run = || {
        let mut c = consumer(&dir, ResponsibilitySet::ALL, Eye::Right);
        c.step(&inbox).unwrap()
    };
    let first = run();
    assert!(!first.events.is_empty());
    assert_eq!(first, run());
}
