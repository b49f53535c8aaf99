//! Reading display logs from disk for merging and comparison.

use std::path::{Path, PathBuf};

use ivr_core::effects::EffectEvent;
use ivr_core::eventlog::{merge_logs, parse_log};

use crate::ClusterError;

pub fn read_log(path: &Path) -> Result<Vec<EffectEvent>, ClusterError> {
    let text = std::fs::read_to_string(path).map_err(|e| ClusterError::Read {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_log(&text).map_err(|source| ClusterError::LogParse {
        path: path.to_path_buf(),
        source,
    })
}

/// Expands directories to the `*.events.jsonl` files they hold, sorted by name.
pub fn expand_log_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, ClusterError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(".events.jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Canonical merged list of every log under `paths`.
pub fn merge_files(paths: &[PathBuf]) -> Result<Vec<EffectEvent>, ClusterError> {
    let logs = expand_log_paths(paths)?
        .iter()
        .map(|p| read_log(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_logs(&logs))
}
