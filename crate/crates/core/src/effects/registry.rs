use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{AudioEffect, EffectError, Waveform};

/// Where the audio data of an effect comes from.
#[derive(Debug, Clone, Copy)]
pub enum AudioSource<'a> {
    File(&'a Path),
    Samples(&'a [f32]),
}

#[derive(Debug, Default)]
struct RegistryState {
    last_buffer: u32,
    last_source: u32,
    files: HashMap<PathBuf, u32>,
    buffer_lengths: HashMap<u32, usize>,
}

/// Hands out buffer and source ids. Buffer ids are shared per file; every
/// registration gets its own source id.
#[derive(Debug, Default)]
pub struct AudioRegistry {
    state: Mutex<RegistryState>,
}

impl AudioRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the audio data and returns a copy of `effect` carrying the
    /// assigned ids. On error the ids stay 0.
    pub fn set_audio_data(
        &self,
        effect: &AudioEffect,
        source: AudioSource<'_>,
    ) -> Result<AudioEffect, EffectError> {
        let mut state = self.state.lock().expect("registry lock poisoned");
        let buffer_id = match source {
            AudioSource::File(path) => {
                let unreadable = |e: std::io::Error| EffectError::UnreadableFile {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                };
                let key = path.canonicalize().map_err(unreadable)?;
                match state.files.get(&key) {
                    Some(&id) => id,
                    None => {
                        let bytes = std::fs::read(&key).map_err(unreadable)?;
                        state.last_buffer += 1;
                        let id = state.last_buffer;
                        state.files.insert(key, id);
                        state.buffer_lengths.insert(id, bytes.len());
                        id
                    }
                }
            }
            AudioSource::Samples(samples) => {
                if samples.is_empty() {
                    return Err(EffectError::EmptySamples);
                }
                state.last_buffer += 1;
                let id = state.last_buffer;
                state.buffer_lengths.insert(id, samples.len());
                id
            }
        };
        state.last_source += 1;
        Ok(AudioEffect {
            buffer_id,
            source_id: state.last_source,
            ..effect.clone()
        })
    }

    /// Initializes from the effect's own waveform; file paths resolve against `storage`.
    pub fn initialize(
        &self,
        effect: &AudioEffect,
        storage: &Path,
    ) -> Result<AudioEffect, EffectError> {
        match &effect.waveform {
            Waveform::File(path) => {
                self.set_audio_data(effect, AudioSource::File(&storage.join(path)))
            }
            sine => {
                let samples = sine.synthesize().unwrap_or_default();
                self.set_audio_data(effect, AudioSource::Samples(&samples))
            }
        }
    }

    /// Length of a registered buffer (bytes for files, samples for blocks).
    pub fn buffer_len(&self, buffer_id: u32) -> Option<usize> {
        self.state
            .lock()
            .expect("registry lock poisoned")
            .buffer_lengths
            .get(&buffer_id)
            .copied()
    }
}
