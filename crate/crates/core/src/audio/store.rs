use std::collections::BTreeMap;
use std::path::Path;

use super::{read_wav, resample, AudioError, Waveform};
use crate::corpus::Corpus;
use crate::timeline::ExampleSpec;
use crate::CANONICAL_RATE_HZ;

/// Conversation audio held at the canonical rate.
#[derive(Debug, Clone, Default)]
pub struct AudioStore {
    audio: BTreeMap<String, Waveform>,
}

impl AudioStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load every conversation's `audio_ref`, resolving relative paths
    /// against `base_dir`. Conversations without audio are skipped.
    pub fn load_for_corpus(corpus: &Corpus, base_dir: &Path) -> Result<Self, AudioError> {
        let mut store = Self::new();
        for conv in corpus.conversations() {
            let Some(audio_ref) = &conv.audio_ref else {
                continue;
            };
            let path = base_dir.join(audio_ref);
            let bytes = std::fs::read(&path).map_err(|source| AudioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            store.insert(&conv.id, read_wav(&bytes)?);
        }
        Ok(store)
    }

    pub fn insert(&mut self, conversation_id: &str, w: Waveform) {
        let w = if w.sample_rate_hz() == CANONICAL_RATE_HZ {
            w
        } else {
            resample(&w, CANONICAL_RATE_HZ)
        };
        self.audio.insert(conversation_id.to_string(), w);
    }

    pub fn get(&self, conversation_id: &str) -> Option<&Waveform> {
        self.audio.get(conversation_id)
    }

    pub fn contains(&self, conversation_id: &str) -> bool {
        self.audio.contains_key(conversation_id)
    }

    pub fn len(&self) -> usize {
        self.audio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audio.is_empty()
    }

    pub fn window_at(&self, conversation_id: &str, start_s: f64, end_s: f64) -> Result<Waveform, AudioError> {
        self.get(conversation_id)
            .ok_or_else(|| AudioError::MissingAudio(conversation_id.to_string()))?
            .slice(start_s, end_s)
    }

    /// Context audio of an example.
    pub fn window(&self, example: &ExampleSpec) -> Result<Waveform, AudioError> {
        self.window_at(&example.conversation_id, example.context_start_s, example.context_end_s)
    }
}
