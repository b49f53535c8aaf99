//! Line-oriented producer script:
//!
//! ```text
//! load scene.json mapping.json
//! viewpoint 0 1.6 5 0 0 0 1
//! pick 0 0 5 0 0 -1
//! mode 1
//! animate /root/spinner 0 1 0 0.05
//! gesture point
//! tick
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::protocol::GestureKind;
use crate::scene::NodePath;

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptCommand {
    Load {
        scene: String,
        mapping: String,
    },
    Viewpoint {
        position: [f32; 3],
        rotation: [f32; 4],
    },
    Pick {
        origin: [f32; 3],
        direction: [f32; 3],
    },
    Mode(u8),
    Animate {
        target: NodePath,
        axis: [f32; 3],
        rad_per_tick: f32,
    },
    Gesture(GestureKind),
    Tick,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: unknown verb `{verb}`")]
    UnknownVerb { line: usize, verb: String },
    #[error("line {line}: {message}")]
    BadArguments { line: usize, message: String },
}

impl ScriptError {
    fn with_line(self, line: usize) -> Self {
        match self {
            ScriptError::UnknownVerb { verb, .. } => ScriptError::UnknownVerb { line, verb },
            ScriptError::BadArguments { message, .. } => {
                ScriptError::BadArguments { line, message }
            }
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptCommand>, ScriptError> {
    let mut commands = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(cmd) = parse_script_line(line).map_err(|e| e.with_line(i + 1))? {
            commands.push(cmd);
        }
    }
    Ok(commands)
}

/// Parses one line; `None` for blank and comment lines. Errors carry line 1.
pub fn parse_script_line(line: &str) -> Result<Option<ScriptCommand>, ScriptError> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut words = line.split_whitespace();
    let verb = words.next().expect("non-empty line");
    let args: Vec<&str> = words.collect();
    let bad = |message: String| ScriptError::BadArguments { line: 1, message };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(bad(format!(
                "`{verb}` takes {n} arguments, got {}",
                args.len()
            )))
        }
    };
    let reals = |words: &[&str]| -> Result<Vec<f32>, ScriptError> {
        words
            .iter()
            .map(|w| {
                w.parse::<f32>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("`{w}` is not a finite number")))
            })
            .collect()
    };

    let cmd = match verb {
        "load" => {
            arity(2)?;
            ScriptCommand::Load {
                scene: args[0].to_string(),
                mapping: args[1].to_string(),
            }
        }
        "viewpoint" => {
            arity(7)?;
            let v = reals(&args)?;
            let q = [v[3], v[4], v[5], v[6]];
            if q.iter().map(|c| c * c).sum::<f32>() < 1e-12 {
                return Err(bad("rotation quaternion must be non-zero".into()));
            }
            ScriptCommand::Viewpoint {
                position: [v[0], v[1], v[2]],
                rotation: q,
            }
        }
        "pick" => {
            arity(6)?;
            let v = reals(&args)?;
            let direction = [v[3], v[4], v[5]];
            if direction.iter().all(|c| *c == 0.0) {
                return Err(bad("pick direction must be non-zero".into()));
            }
            ScriptCommand::Pick {
                origin: [v[0], v[1], v[2]],
                direction,
            }
        }
        "mode" => {
            arity(1)?;
            ScriptCommand::Mode(
                args[0]
                    .parse()
                    .map_err(|_| bad(format!("mode `{}` is not a byte", args[0])))?,
            )
        }
        "animate" => {
            arity(5)?;
            let target = NodePath::from_str(args[0]).map_err(|e| bad(e.to_string()))?;
            let v = reals(&args[1..])?;
            let axis = [v[0], v[1], v[2]];
            if axis.iter().all(|c| *c == 0.0) {
                return Err(bad("animation axis must be non-zero".into()));
            }
            ScriptCommand::Animate {
                target,
                axis,
                rad_per_tick: v[3],
            }
        }
        "gesture" => {
            arity(1)?;
            ScriptCommand::Gesture(match args[0] {
                "point" => GestureKind::Point,
                "swipe" => GestureKind::Swipe,
                other => return Err(bad(format!("unknown gesture `{other}`"))),
            })
        }
        "tick" => {
            arity(0)?;
            ScriptCommand::Tick
        }
        other => {
            return Err(ScriptError::UnknownVerb {
                line: 1,
                verb: other.to_string(),
            })
        }
    };
    Ok(Some(cmd))
}

impl fmt::Display for ScriptCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f32]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self {
            ScriptCommand::Load { scene, mapping } => write!(f, "load {scene} {mapping}"),
            ScriptCommand::Viewpoint { position, rotation } => {
                write!(f, "viewpoint {} {}", join(position), join(rotation))
            }
            ScriptCommand::Pick { origin, direction } => {
                write!(f, "pick {} {}", join(origin), join(direction))
            }
            ScriptCommand::Mode(m) => write!(f, "mode {m}"),
            ScriptCommand::Animate {
                target,
                axis,
                rad_per_tick,
            } => write!(f, "animate {target} {} {rad_per_tick}", join(axis)),
            ScriptCommand::Gesture(g) => write!(f, "gesture {}", g.as_str()),
            ScriptCommand::Tick => f.write_str("tick"),
        }
    }
}
