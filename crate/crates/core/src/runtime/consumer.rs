use std::path::{Path, PathBuf};
use std::str::FromStr;

use glam::{DAffine3, DQuat, DVec3};
use thiserror::Error;

use super::eye::{eye_view, Eye, EyeGeometry, Pose};
use crate::effects::{
    AudioRegistry, Effect, EffectError, EffectEvent, EffectPlayback, EffectType, EventTrigger,
    PickContext, PlayContext,
};
use crate::mapping::{apply_mapping, parse_mapping, MappingError, ResponsibilitySet};
use crate::protocol::{message_type, AckStatus, GestureKind, LoadStatus, Message};
use crate::scene::{load_scene, Node, NodeKind, NodePath, PickResult, Ray, SceneError, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Exploration,
    Selection,
    Editing,
}

impl Mode {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Mode::Exploration),
            1 => Some(Mode::Selection),
            2 => Some(Mode::Editing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Animation {
    pub target: NodePath,
    pub axis: DVec3,
    pub rad_per_tick: f64,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read `{path}`: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("scene `{path}`: {source}")]
    Scene { path: PathBuf, source: SceneError },
    #[error("mapping `{path}`: {source}")]
    Mapping { path: PathBuf, source: MappingError },
    #[error("audio data: {0}")]
    Audio(#[from] EffectError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsumerError {
    #[error("tick {got} does not follow tick {last}")]
    NonMonotonicTick { last: u32, got: u32 },
    #[error("effect playback failed at `{path}`: {source}")]
    Playback { path: String, source: EffectError },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub events: Vec<EffectEvent>,
    pub feedback: Vec<Message>,
}

impl StepOutput {
    fn extend(&mut self, other: StepOutput) {
        self.events.extend(other.events);
        self.feedback.extend(other.feedback);
    }
}

/// One headless display process: a filtered scene graph advanced by Ticks.
#[derive(Debug)]
pub struct ConsumerState {
    pub consumer_id: u8,
    pub responsibilities: ResponsibilitySet,
    pub eye: Eye,
    pub geometry: EyeGeometry,
    pub graph: Option<SceneGraph>,
    /// Mono viewpoint; also the audio listener.
    pub pose: Pose,
    pub mode: Mode,
    pub selected: Option<NodePath>,
    pub pending_picks: Vec<Ray>,
    pub animations: Vec<Animation>,
    pub tick: Option<u32>,
    storage: PathBuf,
    registry: AudioRegistry,
    /// Last pose commanded by the producer. Differs from `pose` while editing.
    commanded: Pose,
}

impl ConsumerState {
    pub fn new(
        consumer_id: u8,
        responsibilities: ResponsibilitySet,
        eye: Eye,
        geometry: EyeGeometry,
        storage: impl Into<PathBuf>,
    ) -> Self {
        Self {
            consumer_id,
            responsibilities,
            eye,
            geometry,
            graph: None,
            pose: Pose::IDENTITY,
            mode: Mode::Exploration,
            selected: None,
            pending_picks: Vec::new(),
            animations: Vec::new(),
            tick: None,
            storage: storage.into(),
            registry: AudioRegistry::new(),
            commanded: Pose::IDENTITY,
        }
    }

    pub fn hello(&self) -> Message {
        Message::Hello {
            consumer_id: self.consumer_id,
            responsibilities: self.responsibilities,
            eye: self.eye,
        }
    }

    pub fn storage(&self) -> &Path {
        &self.storage
    }

    /// Builds this consumer's filtered graph from files under the storage
    /// directory, with audio data registered.
    pub fn build_graph(
        &self,
        scene_path: &str,
        mapping_path: &str,
    ) -> Result<SceneGraph, LoadError> {
        let read = |rel: &str| {
            let path = self.storage.join(rel);
            std::fs::read_to_string(&path)
                .map(|text| (path.clone(), text))
                .map_err(|e| LoadError::Read {
                    path,
                    reason: e.to_string(),
                })
        };
        let (scene_file, scene_text) = read(scene_path)?;
        let (mapping_file, mapping_text) = read(mapping_path)?;
        let base = load_scene(&scene_text).map_err(|source| LoadError::Scene {
            path: scene_file,
            source,
        })?;
        let mapping = parse_mapping(&mapping_text).map_err(|source| LoadError::Mapping {
            path: mapping_file.clone(),
            source,
        })?;
        if Path::new(&mapping.scene) != Path::new(scene_path) {
            log::warn!(
                "mapping `{mapping_path}` was authored for `{}`, loading it onto `{scene_path}`",
                mapping.scene
            );
        }
        let graph = apply_mapping(&base, &mapping, self.responsibilities).map_err(|source| {
            LoadError::Mapping {
                path: mapping_file,
                source,
            }
        })?;
        Ok(self.initialize_audio(&graph)?)
    }

    fn initialize_audio(&self, graph: &SceneGraph) -> Result<SceneGraph, EffectError> {
        let mut replacements = Vec::new();
        for node in graph.nodes() {
            let kind = match &node.kind {
                NodeKind::Audio { effect } => NodeKind::Audio {
                    effect: self.registry.initialize(effect, &self.storage)?,
                },
                NodeKind::EffectGeo { mesh, effects }
                    if effects.iter().any(|e| matches!(e, Effect::Audio(_))) =>
                {
                    let effects = effects
                        .iter()
                        .map(|e| match e {
                            Effect::Audio(a) => self
                                .registry
                                .initialize(a, &self.storage)
                                .map(Effect::Audio),
                            other => Ok(other.clone()),
                        })
                        .collect::<Result<_, _>>()?;
                    NodeKind::EffectGeo {
                        mesh: mesh.clone(),
                        effects,
                    }
                }
                _ => continue,
            };
            replacements.push(Node::new(node.id.clone(), kind));
        }
        Ok(graph
            .with_nodes_replaced(replacements)
            .expect("payload-only replacement keeps the graph valid"))
    }

    /// Handles LoadScene. On failure the state is unchanged.
    pub fn load(&mut self, scene_path: &str, mapping_path: &str) -> Message {
        match self.build_graph(scene_path, mapping_path) {
            Ok(graph) => {
                let node_count = graph.node_count() as u32;
                self.graph = Some(graph);
                self.selected = None;
                self.pending_picks.clear();
                self.animations.clear();
                Message::SceneLoaded {
                    status: LoadStatus::Ok,
                    node_count,
                }
            }
            Err(e) => {
                log::error!("consumer {}: load failed: {e}", self.consumer_id);
                Message::SceneLoaded {
                    status: LoadStatus::Error,
                    node_count: 0,
                }
            }
        }
    }

    /// Processes an inbox in order.
    pub fn step(&mut self, inbox: &[Message]) -> Result<StepOutput, ConsumerError> {
        let mut out = StepOutput::default();
        for msg in inbox {
            out.extend(self.handle(msg)?);
        }
        Ok(out)
    }

    pub fn handle(&mut self, msg: &Message) -> Result<StepOutput, ConsumerError> {
        let mut out = StepOutput::default();
        match msg {
            Message::Heartbeat => {}
            Message::LoadScene {
                scene_path,
                mapping_path,
            } => out.feedback.push(self.load(scene_path, mapping_path)),
            Message::ViewpointUpdate { position, rotation } => {
                self.viewpoint(to_dvec3(position), to_quat(rotation))
            }
            Message::Pick { origin, direction } => {
                match Ray::new(to_dvec3(origin), to_dvec3(direction)) {
                    Ok(ray) => self.pending_picks.push(ray),
                    Err(e) => log::warn!("consumer {}: ignoring pick: {e}", self.consumer_id),
                }
            }
            Message::ModeSwitch { mode } => {
                if let Err(ack) = self.mode_transition(*mode) {
                    out.feedback.push(ack);
                }
            }
            Message::PlayAnimation {
                target_path,
                axis,
                rad_per_tick,
            } => self.add_animation(target_path, to_dvec3(axis), *rad_per_tick as f64),
            Message::Gesture { gesture } => {
                if *gesture == GestureKind::Point && self.mode == Mode::Selection {
                    let ray = Ray::new(self.pose.position, self.pose.forward())
                        .expect("unit forward axis");
                    self.pending_picks.push(ray);
                }
            }
            Message::Tick { tick } => return self.run_tick(*tick),
            other => log::debug!(
                "consumer {}: ignoring producer-bound message type {:#04x}",
                self.consumer_id,
                other.type_byte()
            ),
        }
        Ok(out)
    }

    /// Applies a mode byte. Bad bytes leave the state unchanged and yield an
    /// error ack.
    pub fn mode_transition(&mut self, byte: u8) -> Result<(), Message> {
        let Some(mode) = Mode::from_byte(byte) else {
            log::warn!("consumer {}: invalid mode byte {byte}", self.consumer_id);
            return Err(Message::Ack {
                acked_type: message_type::MODE_SWITCH,
                status: AckStatus::Error,
                tick: self.tick.unwrap_or(0),
            });
        };
        self.mode = mode;
        if mode == Mode::Exploration {
            self.selected = None;
        }
        Ok(())
    }

    fn viewpoint(&mut self, position: DVec3, rotation: DQuat) {
        let rotation = if rotation.length_squared() > 0.0 {
            rotation.normalize()
        } else {
            DQuat::IDENTITY
        };
        let new = Pose::new(position, rotation);
        if self.mode == Mode::Editing {
            if let (Some(selected), Some(graph)) = (&self.selected, &self.graph) {
                let delta = new.position - self.commanded.position;
                self.commanded = new;
                match move_nearest_transform(graph, selected, delta) {
                    Some(moved) => self.graph = Some(moved),
                    None => log::warn!(
                        "consumer {}: `{selected}` has no transform ancestor to move",
                        self.consumer_id
                    ),
                }
                return;
            }
        }
        self.commanded = new;
        self.pose = new;
    }

    fn add_animation(&mut self, target: &str, axis: DVec3, rad_per_tick: f64) {
        let path = match NodePath::from_str(target) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("consumer {}: ignoring animation: {e}", self.consumer_id);
                return;
            }
        };
        let is_transform = self
            .graph
            .as_ref()
            .and_then(|g| g.resolve(&path).ok())
            .is_some_and(|n| matches!(n.kind, NodeKind::Transform { .. }));
        if !is_transform || axis.length_squared() == 0.0 || !axis.is_finite() {
            log::warn!(
                "consumer {}: ignoring animation of `{target}`",
                self.consumer_id
            );
            return;
        }
        self.animations.push(Animation {
            target: path,
            axis: axis.normalize(),
            rad_per_tick,
        });
    }

    fn run_tick(&mut self, tick: u32) -> Result<StepOutput, ConsumerError> {
        if let Some(last) = self.tick {
            if tick <= last {
                return Err(ConsumerError::NonMonotonicTick { last, got: tick });
            }
        }
        let mut out = StepOutput::default();
        let picks = std::mem::take(&mut self.pending_picks);

        if let Some(mut graph) = self.graph.take() {
            for a in &self.animations {
                let step = DQuat::from_axis_angle(a.axis, a.rad_per_tick);
                match graph
                    .update_transform(&a.target, |t| t.rotation = (step * t.rotation).normalize())
                {
                    Ok(g) => graph = g,
                    Err(e) => log::warn!("consumer {}: animation skipped: {e}", self.consumer_id),
                }
            }

            let mut hits: Vec<PickResult> = Vec::new();
            for ray in &picks {
                let hit = graph.ray_pick(ray);
                if self.mode != Mode::Exploration {
                    let selected = hit.as_ref().map(|h| h.path.clone());
                    if selected != self.selected {
                        out.feedback.push(Message::Selection {
                            path: selected
                                .as_ref()
                                .map(ToString::to_string)
                                .unwrap_or_default(),
                            tick,
                        });
                        self.selected = selected;
                    }
                }
                hits.extend(hit);
            }

            let played = self.traverse(&graph, tick, &hits);
            self.graph = Some(graph);
            out.events = played?;
        }

        for e in &out.events {
            out.feedback.push(Message::EffectFired {
                effect_type: e.effect_type,
                trigger: e.trigger,
                path: e.path.clone(),
                param: e.param as f32,
                tick,
            });
        }
        out.feedback.push(Message::Ack {
            acked_type: message_type::TICK,
            status: AckStatus::Ok,
            tick,
        });
        self.tick = Some(tick);
        Ok(out)
    }

    fn traverse(
        &self,
        graph: &SceneGraph,
        tick: u32,
        hits: &[PickResult],
    ) -> Result<Vec<EffectEvent>, ConsumerError> {
        let view = eye_view(&self.pose, self.eye, &self.geometry).position;
        let mut events = Vec::new();
        for visit in graph.visits() {
            let path = visit.path.to_string();
            let play = |effect: &dyn EffectPlayback, pick: Option<PickContext>| {
                let ctx = PlayContext {
                    tick,
                    path: path.clone(),
                    world: visit.world,
                    listener: self.pose,
                    pick,
                    mesh: visit
                        .node
                        .kind
                        .mesh()
                        .and_then(|m| graph.mesh(m))
                        .map(|m| m.as_ref()),
                };
                let mut fired = effect
                    .play(&ctx)
                    .map_err(|source| ConsumerError::Playback {
                        path: path.clone(),
                        source,
                    })?;
                for e in &mut fired {
                    if e.trigger == EventTrigger::Frame {
                        e.eye = Some(self.eye);
                        e.view = Some(view);
                    }
                }
                Ok::<_, ConsumerError>(fired)
            };
            let effects: &[Effect] = match &visit.node.kind {
                NodeKind::Audio { effect } => {
                    events.extend(play(effect, None)?);
                    continue;
                }
                NodeKind::Geo { .. } => &[],
                NodeKind::EffectGeo { effects, .. } => effects,
                _ => continue,
            };
            let visuals: Vec<&Effect> = effects
                .iter()
                .filter(|e| e.effect_type() == EffectType::Visual)
                .collect();
            if visuals.is_empty() {
                if self.responsibilities.visual {
                    events.push(plain_frame(tick, &path, self.eye, view));
                }
            } else {
                for v in visuals {
                    events.extend(play(v, None)?);
                }
            }
            for hit in hits.iter().filter(|h| h.path == visit.path) {
                let pick = PickContext {
                    triangle: hit.triangle,
                    barycentric: hit.barycentric,
                    point: hit.point,
                };
                for e in effects.iter().filter(|e| e.is_touch_triggered()) {
                    events.extend(play(e, Some(pick))?);
                }
            }
        }
        Ok(events)
    }
}

fn plain_frame(tick: u32, path: &str, eye: Eye, view: DVec3) -> EffectEvent {
    EffectEvent {
        tick,
        effect_type: EffectType::Visual,
        trigger: EventTrigger::Frame,
        path: path.to_string(),
        param: 0.0,
        color: None,
        eye: Some(eye),
        view: Some(view),
    }
}

/// Translates the nearest transform above `selected` by a world-space delta.
fn move_nearest_transform(
    graph: &SceneGraph,
    selected: &NodePath,
    delta: DVec3,
) -> Option<SceneGraph> {
    let tr = graph.nearest_transform_ancestor(selected)?;
    let parent_world = match tr.parent() {
        Some(p) => graph.world_transform(&p).ok()?,
        None => DAffine3::IDENTITY,
    };
    let local = parent_world.matrix3.inverse() * delta;
    graph.update_transform(&tr, |t| t.translation += local).ok()
}

fn to_dvec3(v: &[f32; 3]) -> DVec3 {
    DVec3::new(v[0] as f64, v[1] as f64, v[2] as f64)
}

fn to_quat(q: &[f32; 4]) -> DQuat {
    DQuat::from_xyzw(q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64)
}
