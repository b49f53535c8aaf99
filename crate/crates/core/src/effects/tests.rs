use glam::{DAffine3, DVec3};
use proptest::prelude::*;

use super::*;
use crate::runtime::eye::Pose;

fn field(values: Vec<f64>, min: f64, max: f64) -> ScalarField {
    ScalarField {
        field_name: "temperature".into(),
        unit: "C".into(),
        values,
        value_min: min,
        value_max: max,
    }
}

fn haptic(values: Vec<f64>) -> HapticEffect {
    HapticEffect {
        field: field(values, 0.0, 100.0),
        force_min: 0.0,
        force_max: 1.0,
    }
}

fn visual(values: Vec<f64>) -> VisualEffect {
    VisualEffect {
        field: field(values, 0.0, 100.0),
        color_cold: [0.0, 0.0, 1.0],
        color_hot: [1.0, 0.0, 0.0],
    }
}

fn initialized_audio(trigger: AudioTrigger) -> AudioEffect {
    let mut a = AudioEffect::new(trigger, Waveform::File("a.wav".into()), 1.0, 1.0, 20.0);
    a.buffer_id = 1;
    a.source_id = 1;
    a
}

fn ctx_at(listener: DVec3, pick: Option<PickContext>) -> PlayContext<'static> {
    PlayContext {
        tick: 4,
        path: "/root/t/a".into(),
        world: DAffine3::IDENTITY,
        listener: Pose::new(listener, Default::default()),
        pick,
        mesh: None,
    }
}

const PICK: PickContext = PickContext {
    triangle: 1,
    barycentric: [1.0, 0.0, 0.0],
    point: DVec3::new(0.0, 0.0, 0.0),
};

#[test]
fn effect_types() {
    assert_eq!(
        effect_type(&initialized_audio(AudioTrigger::Continuous)),
        EffectType::Audio
    );
    assert_eq!(effect_type(&haptic(vec![0.0])), EffectType::Haptic);
    assert_eq!(effect_type(&visual(vec![0.0])), EffectType::Visual);
}

#[test]
fn gain_examples() {
    assert_eq!(audio_gain(1.0, 1.0, 1.0, 20.0), 1.0);
    assert_eq!(audio_gain(2.0, 1.0, 1.0, 20.0), 0.5);
    assert_eq!(audio_gain(100.0, 1.0, 1.0, 20.0), 0.05);
    // Inside the reference distance the gain stays at 1.
    assert_eq!(audio_gain(0.0, 1.0, 1.0, 20.0), 1.0);
    assert_eq!(audio_gain(5.0, 1.0, 0.0, 20.0), 1.0);
}

#[test]
fn haptic_examples() {
    let h = haptic(vec![0.0, 100.0, 50.0, -40.0, 400.0]);
    assert_eq!(haptic_sample(&h, 0), Ok(0.0));
    assert_eq!(haptic_sample(&h, 1), Ok(1.0));
    assert_eq!(haptic_sample(&h, 2), Ok(0.5));
    assert_eq!(haptic_sample(&h, 3), Ok(0.0));
    assert_eq!(haptic_sample(&h, 4), Ok(1.0));
    assert_eq!(
        haptic_sample(&h, 5),
        Err(EffectError::TriangleOutOfRange { index: 5, len: 5 })
    );
}

#[test]
fn visual_examples() {
    let v = visual(vec![0.0, 100.0, 50.0]);
    assert_eq!(visual_color(&v, 0), Ok([0.0, 0.0, 1.0]));
    assert_eq!(visual_color(&v, 1), Ok([1.0, 0.0, 0.0]));
    assert_eq!(visual_color(&v, 2), Ok([0.5, 0.0, 0.5]));
}

#[test]
fn visual_summary_is_area_weighted() {
    let v = visual(vec![0.0, 100.0]);
    let (param, color) = v.summary(&[3.0, 1.0]).unwrap();
    assert!((param - 0.25).abs() < 1e-15);
    assert!((color[0] - 0.25).abs() < 1e-15 && (color[2] - 0.75).abs() < 1e-15);
    let (param, _) = v.summary(&[0.0, 0.0]).unwrap();
    assert_eq!(param, 0.5);
}

#[test]
fn visual_play_needs_mesh() {
    let v = visual(vec![0.0]);
    assert_eq!(
        v.play(&ctx_at(DVec3::ZERO, None)),
        Err(EffectError::MissingMesh)
    );
    let mesh = Mesh::new(vec![DVec3::ZERO, DVec3::X, DVec3::Y], vec![[0, 1, 2]]).unwrap();
    let mut ctx = ctx_at(DVec3::ZERO, None);
    ctx.mesh = Some(&mesh);
    let events = v.play(&ctx).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].trigger, EventTrigger::Frame);
    assert_eq!(events[0].color, Some([0.0, 0.0, 1.0]));
}

#[test]
fn audio_play_examples() {
    let cont = initialized_audio(AudioTrigger::Continuous);
    let at_source = cont.play(&ctx_at(DVec3::ZERO, None)).unwrap();
    assert_eq!(at_source.len(), 1);
    assert_eq!(at_source[0].param, 1.0);
    assert_eq!(at_source[0].trigger, EventTrigger::Continuous);
    assert_eq!(at_source[0].tick, 4);
    assert_eq!(
        cont.play(&ctx_at(DVec3::new(0.0, 2.0, 0.0), None)).unwrap()[0].param,
        0.5
    );

    let touch = initialized_audio(AudioTrigger::OnTouch);
    assert!(touch.play(&ctx_at(DVec3::ZERO, None)).unwrap().is_empty());
    let fired = touch
        .play(&ctx_at(DVec3::new(2.0, 0.0, 0.0), Some(PICK)))
        .unwrap();
    assert_eq!(fired.len(), 1);
    assert_eq!(fired[0].trigger, EventTrigger::OnTouch);
    assert_eq!(fired[0].param, 0.5);

    let raw = AudioEffect::new(
        AudioTrigger::Continuous,
        Waveform::File("a.wav".into()),
        1.0,
        1.0,
        2.0,
    );
    assert_eq!(
        raw.play(&ctx_at(DVec3::ZERO, None)),
        Err(EffectError::Uninitialized)
    );
}

#[test]
fn haptic_play_needs_pick() {
    let h = haptic(vec![0.0, 75.0]);
    assert!(h.play(&ctx_at(DVec3::ZERO, None)).unwrap().is_empty());
    let e = h.play(&ctx_at(DVec3::ZERO, Some(PICK))).unwrap();
    assert_eq!(e.len(), 1);
    assert_eq!(e[0].param, 0.75);
    assert_eq!(e[0].effect_type, EffectType::Haptic);
}

#[test]
fn touch_triggered() {
    assert!(Effect::Haptic(haptic(vec![1.0])).is_touch_triggered());
    assert!(Effect::Audio(initialized_audio(AudioTrigger::OnTouch)).is_touch_triggered());
    assert!(!Effect::Audio(initialized_audio(AudioTrigger::Continuous)).is_touch_triggered());
    assert!(!Effect::Visual(visual(vec![1.0])).is_touch_triggered());
}

fn gain_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.01f64..10.0, 0.0f64..5.0, 0.0f64..100.0).prop_map(|(r, roll, extra)| (r, roll, r + extra))
}

proptest! {
    #[test]
    fn gain_is_one_at_ref((r, roll, max) in gain_params()) {
        prop_assert_eq!(audio_gain(r, r, roll, max), 1.0);
    }

    #[test]
    fn gain_non_increasing((r, roll, max) in gain_params(), a in 0.0f64..200.0, b in 0.0f64..200.0) {
        let (d1, d2) = if a <= b { (a, b) } else { (b, a) };
        let (g1, g2) = (audio_gain(d1, r, roll, max), audio_gain(d2, r, roll, max));
        prop_assert!(g1 >= g2);
        prop_assert!(g2 > 0.0 && g1 <= 1.0);
    }

    #[test]
    fn gain_constant_beyond_max((r, roll, max) in gain_params(), beyond in 0.0f64..1e6) {
        prop_assert_eq!(audio_gain(max + beyond, r, roll, max), audio_gain(max, r, roll, max));
    }

    #[test]
    fn samples_stay_in_range(
        value in -1e4f64..1e4,
        lo in -100.0f64..100.0,
        span in 0.001f64..100.0,
        fmin in 0.0f64..1.0,
        fspan in 0.0f64..1.0,
    ) {
        let fmax = (fmin + fspan).min(1.0);
        let h = HapticEffect { field: field(vec![value], lo, lo + span), force_min: fmin, force_max: fmax };
        let f = haptic_sample(&h, 0).unwrap();
        prop_assert!(f >= fmin - 1e-12 && f <= fmax + 1e-12);
        let v = VisualEffect { field: field(vec![value], lo, lo + span), color_cold: [0.2, 0.9, 0.0], color_hot: [0.8, 0.1, 1.0] };
        let c = visual_color(&v, 0).unwrap();
        for ((x, cold), hot) in c.iter().zip(v.color_cold).zip(v.color_hot) {
            prop_assert!(*x >= cold.min(hot) - 1e-12 && *x <= cold.max(hot) + 1e-12);
        }
    }

    #[test]
    fn continuous_play_is_deterministic(x in -50.0f64..50.0, y in -50.0f64..50.0, picked in any::<bool>()) {
        let a = initialized_audio(AudioTrigger::Continuous);
        let ctx = ctx_at(DVec3::new(x, y, 0.0), picked.then_some(PICK));
        let first = a.play(&ctx).unwrap();
        prop_assert_eq!(first.len(), 1);
        prop_assert_eq!(first, a.play(&ctx).unwrap());
    }
}
