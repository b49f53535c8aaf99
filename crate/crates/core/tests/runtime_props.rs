//! Random sessions over the lab fixture, driven through the producer into
//! in-process consumers.

use std::path::PathBuf;

use proptest::prelude::*;

use ivr_core::effects::{EffectEvent, EffectType, EventTrigger};
use ivr_core::eventlog::merge_logs;
use ivr_core::mapping::ResponsibilitySet;
use ivr_core::protocol::{GestureKind, LoadStatus, Message};
use ivr_core::runtime::{
    ConsumerState, Eye, EyeGeometry, ProducerInput, ProducerState, ScriptCommand, TrackingOptions,
};
use ivr_core::scene::NodeKind;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

const SPINNERS: [&str; 3] = [
    "/lab/bench3/magnet3_tr",
    "/lab/bench0/magnet0_tr",
    "/lab/bench1/magnet1_tr",
];

fn command() -> impl Strategy<Value = ScriptCommand> {
    let viewpoint =
        ([-7.0f32..7.0, 0.2f32..2.0, -4.0f32..4.0], -1.5f32..1.5).prop_map(|(position, yaw)| {
            let (s, c) = (yaw / 2.0).sin_cos();
            ScriptCommand::Viewpoint {
                position,
                rotation: [0.0, s, 0.0, c],
            }
        });
    // Mostly straight into the benches, sometimes anywhere.
    let pick = prop_oneof![
        3 => (-7.0f32..7.0, 0.0f32..1.5).prop_map(|(x, y)| ScriptCommand::Pick {
            origin: [x, y, 2.0],
            direction: [0.0, 0.0, -1.0],
        }),
        1 => ([-7.0f32..7.0, 0.0f32..3.0, -4.0f32..4.0], [-1.0f32..1.0, -1.0f32..1.0, -1.0f32..1.0]).prop_map(|(origin, d)| {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-3);
            ScriptCommand::Pick {
                origin,
                direction: [d[0] / n, d[1] / n, d[2] / n],
            }
        }),
    ];
    let animate =
        (0..SPINNERS.len(), -0.2f32..0.2).prop_map(|(i, rad_per_tick)| ScriptCommand::Animate {
            target: SPINNERS[i].parse().unwrap(),
            axis: [0.0, 1.0, 0.0],
            rad_per_tick,
        });
    prop_oneof![
        6 => Just(ScriptCommand::Tick),
        2 => viewpoint,
        3 => pick,
        1 => (0u8..4).prop_map(ScriptCommand::Mode),
        1 => animate,
        1 => prop_oneof![Just(GestureKind::Point), Just(GestureKind::Swipe)].prop_map(ScriptCommand::Gesture),
    ]
}

fn script() -> impl Strategy<Value = Vec<ScriptCommand>> {
    prop::collection::vec(command(), 1..40).prop_map(|mut cmds| {
        cmds.insert(
            0,
            ScriptCommand::Load {
                scene: "lab_scene.json".into(),
                mapping: "lab_mapping.json".into(),
            },
        );
        cmds.push(ScriptCommand::Tick);
        cmds
    })
}

fn resp(types: &[EffectType]) -> ResponsibilitySet {
    ResponsibilitySet::from_types(types.iter().copied())
}

/// Runs the script against one consumer per responsibility set and returns
/// each consumer's event log, checking per-tick invariants on the way.
fn run(
    script: &[ScriptCommand],
    sets: &[ResponsibilitySet],
) -> Result<Vec<Vec<EffectEvent>>, TestCaseError> {
    let mut consumers: Vec<ConsumerState> = sets
        .iter()
        .enumerate()
        .map(|(i, r)| {
            ConsumerState::new(
                i as u8 + 1,
                *r,
                Eye::Mono,
                EyeGeometry::default(),
                fixtures(),
            )
        })
        .collect();
    let mut producer = ProducerState::new(TrackingOptions::default());
    for c in &consumers {
        producer.register(&c.hello()).unwrap();
    }
    let mut logs = vec![Vec::new(); consumers.len()];
    for cmd in script {
        for msg in producer
            .dispatch(ProducerInput::Script(cmd.clone()))
            .unwrap()
        {
            for (c, log) in consumers.iter_mut().zip(&mut logs) {
                let picks_pending = !c.pending_picks.is_empty();
                let out = c.handle(&msg).unwrap();
                if let Message::LoadScene { .. } = msg {
                    let loaded = matches!(
                        out.feedback[..],
                        [Message::SceneLoaded {
                            status: LoadStatus::Ok,
                            ..
                        }]
                    );
                    prop_assert!(loaded, "load failed: {:?}", out.feedback);
                }
                let Message::Tick { tick } = msg else {
                    prop_assert!(out.events.is_empty());
                    continue;
                };
                // Everything a tick plays is stamped with that tick.
                prop_assert!(out.events.iter().all(|e| e.tick == tick));
                if !picks_pending {
                    prop_assert!(out
                        .events
                        .iter()
                        .all(|e| e.trigger != EventTrigger::OnTouch));
                }
                // Each reachable audio node instance plays exactly once.
                let graph = c.graph.as_ref().unwrap();
                let mut sources: Vec<String> = graph
                    .visits()
                    .into_iter()
                    .filter(|v| matches!(v.node.kind, NodeKind::Audio { .. }))
                    .map(|v| v.path.to_string())
                    .collect();
                let mut played: Vec<String> = out
                    .events
                    .iter()
                    .filter(|e| e.trigger == EventTrigger::Continuous)
                    .map(|e| e.path.clone())
                    .collect();
                sources.sort();
                played.sort();
                prop_assert_eq!(played, sources);
                prop_assert!(out
                    .events
                    .iter()
                    .all(|e| c.responsibilities.contains(e.effect_type)));
                log.extend(out.events);
            }
        }
    }
    Ok(logs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sessions_are_deterministic(script in script()) {
        let sets = [ResponsibilitySet::ALL, resp(&[EffectType::Audio, EffectType::Haptic])];
        let first = run(&script, &sets)?;
        let second = run(&script, &sets)?;
        prop_assert_eq!(first, second);
    }

    #[test]
    fn disjoint_consumers_add_up_to_one(script in script()) {
        let split = [
            resp(&[EffectType::Visual]),
            resp(&[EffectType::Audio]),
            resp(&[EffectType::Haptic]),
        ];
        let parts = run(&script, &split)?;
        let whole = run(&script, &[ResponsibilitySet::ALL])?;
        prop_assert_eq!(merge_logs(&parts), merge_logs(&whole));
    }

    #[test]
    fn ticks_never_go_back(script in script()) {
        let logs = run(&script, &[ResponsibilitySet::ALL])?;
        prop_assert!(logs[0].windows(2).all(|w| w[0].tick <= w[1].tick));
    }
}
