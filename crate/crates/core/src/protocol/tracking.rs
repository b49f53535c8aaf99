//! ASCII tracking datagrams in the DTrack style:
//!
//! ```text
//! fr 5
//! 6d 1 [0 1.000][100.0 200.0 300.0][1 0 0 0 1 0 0 0 1]
//! ```

use glam::{DMat3, DVec3};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSample {
    pub frame: u32,
    pub body_id: u32,
    /// -1 when the body is not visible.
    pub quality: f64,
    pub position_mm: DVec3,
    /// Row-major.
    pub rotation: [[f64; 3]; 3],
}

impl TrackingSample {
    pub fn is_visible(&self) -> bool {
        self.quality >= 0.0
    }

    pub fn rotation_matrix(&self) -> DMat3 {
        let r = &self.rotation;
        DMat3::from_cols(
            DVec3::new(r[0][0], r[1][0], r[2][0]),
            DVec3::new(r[0][1], r[1][1], r[2][1]),
            DVec3::new(r[0][2], r[1][2], r[2][2]),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingFrame {
    pub frame: u32,
    pub samples: Vec<TrackingSample>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: declared {expected} bodies, found {found}")]
    CountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: rotation of body {body} is not orthonormal")]
    NotOrthonormal { line: usize, body: u32 },
}

const ORTHONORMAL_TOLERANCE: f64 = 1e-3;

pub fn parse_tracking_datagram(text: &str) -> Result<TrackingFrame, TrackingError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let malformed = |line: usize, message: &str| TrackingError::Malformed {
        line,
        message: message.to_string(),
    };

    let (line_no, first) = lines.next().ok_or_else(|| malformed(1, "empty datagram"))?;
    let frame = match first.split_whitespace().collect::<Vec<_>>()[..] {
        ["fr", n] => n
            .parse::<u32>()
            .map_err(|_| malformed(line_no, "frame number must be a u32"))?,
        _ => return Err(malformed(line_no, "expected `fr <u32>`")),
    };

    let mut samples = Vec::new();
    if let Some((line_no, line)) = lines.next() {
        let rest = line
            .strip_prefix("6d")
            .filter(|r| r.is_empty() || r.starts_with(char::is_whitespace))
            .ok_or_else(|| malformed(line_no, "expected `6d <n>`"))?
            .trim_start();
        let (count, groups) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        let expected: usize = count
            .parse()
            .map_err(|_| malformed(line_no, "body count must be a non-negative integer"))?;
        let groups = bracket_groups(groups).map_err(|m| malformed(line_no, &m))?;
        if groups.len() % 3 != 0 || groups.len() / 3 != expected {
            return Err(TrackingError::CountMismatch {
                line: line_no,
                expected,
                found: groups.len() / 3,
            });
        }
        for body in groups.chunks(3) {
            let head = numbers(&body[0], 2).map_err(|m| malformed(line_no, &m))?;
            let pos = numbers(&body[1], 3).map_err(|m| malformed(line_no, &m))?;
            let rot = numbers(&body[2], 9).map_err(|m| malformed(line_no, &m))?;
            if head[0] < 0.0 || head[0].fract() != 0.0 || head[0] > u32::MAX as f64 {
                return Err(malformed(line_no, "body id must be a non-negative integer"));
            }
            let sample = TrackingSample {
                frame,
                body_id: head[0] as u32,
                quality: head[1],
                position_mm: DVec3::new(pos[0], pos[1], pos[2]),
                rotation: [
                    [rot[0], rot[1], rot[2]],
                    [rot[3], rot[4], rot[5]],
                    [rot[6], rot[7], rot[8]],
                ],
            };
            if sample.is_visible() && !is_orthonormal(&sample.rotation_matrix()) {
                return Err(TrackingError::NotOrthonormal {
                    line: line_no,
                    body: sample.body_id,
                });
            }
            samples.push(sample);
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(malformed(line_no, "unexpected line after the body list"));
    }
    Ok(TrackingFrame { frame, samples })
}

fn bracket_groups(text: &str) -> Result<Vec<String>, String> {
    let mut groups = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('[').ok_or("expected `[`")?;
        let end = inner.find(']').ok_or("unterminated `[`")?;
        if inner[..end].contains('[') {
            return Err("nested `[`".into());
        }
        groups.push(inner[..end].to_string());
        rest = inner[end + 1..].trim_start();
    }
    Ok(groups)
}

fn numbers(group: &str, n: usize) -> Result<Vec<f64>, String> {
    let values = group
        .split_whitespace()
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| format!("non-numeric value in `[{group}]`"))?;
    if values.len() != n {
        return Err(format!(
            "expected {n} values in `[{group}]`, found {}",
            values.len()
        ));
    }
    Ok(values)
}

fn is_orthonormal(m: &DMat3) -> bool {
    let product = m.transpose() * *m;
    product.abs_diff_eq(DMat3::IDENTITY, ORTHONORMAL_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_body() {
        let f =
            parse_tracking_datagram("fr 5\n6d 1 [0 1.000][100.0 200.0 300.0][1 0 0 0 1 0 0 0 1]")
                .unwrap();
        assert_eq!(f.frame, 5);
        assert_eq!(f.samples.len(), 1);
        let s = &f.samples[0];
        assert_eq!(s.body_id, 0);
        assert_eq!(s.position_mm, DVec3::new(100.0, 200.0, 300.0));
        assert_eq!(s.rotation_matrix(), DMat3::IDENTITY);
    }

    #[test]
    fn frame_only() {
        let f = parse_tracking_datagram("fr 3").unwrap();
        assert_eq!(f.frame, 3);
        assert!(f.samples.is_empty());
    }

    #[test]
    fn count_mismatch() {
        let err =
            parse_tracking_datagram("fr 1\n6d 2 [0 1.0][0 0 0][1 0 0 0 1 0 0 0 1]").unwrap_err();
        assert_eq!(
            err,
            TrackingError::CountMismatch {
                line: 2,
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn malformed_lines_report_position() {
        assert!(matches!(
            parse_tracking_datagram("fx 1"),
            Err(TrackingError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_tracking_datagram("fr 1\n6d 1 [0 1.0][0 0][1 0 0 0 1 0 0 0 1]"),
            Err(TrackingError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            parse_tracking_datagram("fr 1\n6d 0\n6d 0"),
            Err(TrackingError::Malformed { line: 3, .. })
        ));
    }

    #[test]
    fn rotation_checked_only_when_visible() {
        let bad = "[2 0 0 0 1 0 0 0 1]";
        assert!(matches!(
            parse_tracking_datagram(&format!("fr 1\n6d 1 [4 0.9][0 0 0]{bad}")),
            Err(TrackingError::NotOrthonormal { body: 4, .. })
        ));
        assert!(parse_tracking_datagram(&format!("fr 1\n6d 1 [4 -1][0 0 0]{bad}")).is_ok());
    }
}
