use std::fmt;
use std::str::FromStr;

use super::SceneError;

/// Slash-separated node ids from the root, e.g. `/root/tr1/geo7`.
///
/// Ordering is lexicographic over the id segments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(Vec<String>);

impl NodePath {
    pub fn root(id: impl Into<String>) -> Self {
        Self(vec![id.into()])
    }

    pub fn from_segments(segments: Vec<String>) -> Result<Self, SceneError> {
        if segments.is_empty() || segments.iter().any(|s| s.is_empty() || s.contains('/')) {
            return Err(SceneError::InvalidPath(segments.join("/")));
        }
        Ok(Self(segments))
    }

    pub fn child(&self, id: impl Into<String>) -> Self {
        let mut segments = self.0.clone();
        segments.push(id.into());
        Self(segments)
    }

    pub fn parent(&self) -> Option<Self> {
        (self.0.len() > 1).then(|| Self(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn leaf(&self) -> &str {
        self.0.last().expect("paths are never empty")
    }

    pub fn starts_with(&self, prefix: &NodePath) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Rewrites the leading segments shared with `old` to the matching
    /// segments of `new`. Used to follow instances after path copying.
    pub fn relocate(&self, old: &NodePath, new: &NodePath) -> NodePath {
        let mut segments = self.0.clone();
        for (i, (seg, o)) in self.0.iter().zip(&old.0).enumerate() {
            if seg != o {
                break;
            }
            segments[i] = new.0[i].clone();
        }
        Self(segments)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.0 {
            write!(f, "/{seg}")?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(rest) = s.strip_prefix('/') else {
            return Err(SceneError::InvalidPath(s.to_string()));
        };
        let segments: Vec<String> = rest.split('/').map(str::to_string).collect();
        if segments.iter().any(String::is_empty) {
            return Err(SceneError::InvalidPath(s.to_string()));
        }
        Ok(Self(segments))
    }
}
