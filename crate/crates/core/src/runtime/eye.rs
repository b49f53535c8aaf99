use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};

pub const DEFAULT_IPD: f64 = 0.064;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: DVec3,
    pub rotation: DQuat,
}

impl Pose {
    pub const IDENTITY: Self = Self {
        position: DVec3::ZERO,
        rotation: DQuat::IDENTITY,
    };

    pub fn new(position: DVec3, rotation: DQuat) -> Self {
        Self { position, rotation }
    }

    pub fn right(&self) -> DVec3 {
        self.rotation * DVec3::X
    }

    /// Viewing direction; poses look down their local -Z axis.
    pub fn forward(&self) -> DVec3 {
        self.rotation * DVec3::NEG_Z
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Eye {
    #[default]
    Mono,
    Left,
    Right,
}

impl Eye {
    pub fn code(self) -> u8 {
        match self {
            Eye::Mono => 0,
            Eye::Left => 1,
            Eye::Right => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Eye::Mono),
            1 => Some(Eye::Left),
            2 => Some(Eye::Right),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Mono => "mono",
            Eye::Left => "left",
            Eye::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeGeometry {
    pub ipd: f64,
}

impl Default for EyeGeometry {
    fn default() -> Self {
        Self { ipd: DEFAULT_IPD }
    }
}

/// Viewpoint of one eye: offset by half the ipd along the pose's right axis.
pub fn eye_view(pose: &Pose, eye: Eye, geometry: &EyeGeometry) -> Pose {
    let half = geometry.ipd / 2.0;
    let offset = match eye {
        Eye::Mono => 0.0,
        Eye::Left => -half,
        Eye::Right => half,
    };
    Pose {
        position: pose.position + pose.right() * offset,
        rotation: pose.rotation,
    }
}
