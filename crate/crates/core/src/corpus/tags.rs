use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize_tag, Corpus, CorpusError};

const DEFAULT_MAP: &str = include_str!("../../assets/swda_damsl_map.json");

/// Source act tag to normalized (DAMSL) tag. Keys and values are stored
/// lowercased and trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ActTagMap(BTreeMap<String, String>);

impl ActTagMap {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        Self(
            entries
                .into_iter()
                .map(|(k, v)| (normalize_tag(k.as_ref()), normalize_tag(v.as_ref())))
                .collect(),
        )
    }

    /// Small SWDA/MRDA to DAMSL table covering the common tags.
    pub fn swda_damsl() -> Self {
        Self::from_json(DEFAULT_MAP.as_bytes()).expect("bundled tag map is valid")
    }

    /// Map with every tag of `corpus` mapped to itself.
    pub fn identity_for(corpus: &Corpus) -> Self {
        Self::new(
            corpus
                .conversations()
                .iter()
                .flat_map(|c| c.utterances.iter().map(|u| (u.act_tag.clone(), u.act_tag.clone()))),
        )
    }

    /// Parse a JSON object `{"source": "target", ...}`.
    pub fn from_json(bytes: &[u8]) -> Result<Self, CorpusError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_slice(bytes).map_err(|e| CorpusError::Malformed {
                line: e.line() as u64,
                message: format!("act tag map: {e}"),
            })?;
        Ok(Self::new(raw))
    }

    pub fn get(&self, tag: &str) -> Option<&str> {
        self.0.get(&normalize_tag(tag)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Replace every act tag through `map`. Fails on the first tag the map
/// does not cover.
pub fn map_act_tags(corpus: &Corpus, map: &ActTagMap) -> Result<Corpus, CorpusError> {
    let mut conversations = corpus.conversations().to_vec();
    for conv in &mut conversations {
        for utt in &mut conv.utterances {
            let mapped = map.get(&utt.act_tag).ok_or_else(|| CorpusError::UnmappedTag {
                tag: utt.act_tag.clone(),
                conversation_id: conv.id.clone(),
            })?;
            utt.act_tag = mapped.to_string();
        }
    }
    Corpus::from_normalized(conversations)
}
