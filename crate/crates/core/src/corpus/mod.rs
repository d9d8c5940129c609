//! Dialog-act-annotated conversations and hearing-difficulty events.

mod parse;
mod refine;
mod stats;
mod tags;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use parse::{
    parse_corpus, parse_corpus_with, read_events, write_csv, write_events, CorpusFormat, CsvOptions,
};
pub use refine::{extract_hdm_events, RefinementAction, RefinementEntry, RefinementList};
pub use stats::{corpus_stats, HistogramBin, StatsReport};
pub use tags::{map_act_tags, ActTagMap};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: conversation {conversation_id:?}: utterance end_s ({end_s}) must exceed start_s ({start_s})")]
    InvalidInterval {
        line: u64,
        conversation_id: String,
        start_s: f64,
        end_s: f64,
    },
    #[error("conversation {conversation_id:?}: utterance [{start_s}, {end_s}] lies outside the conversation duration [0, {duration_s}]")]
    OutsideDuration {
        conversation_id: String,
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("conversation {conversation_id:?}: {message}")]
    InvalidConversation {
        conversation_id: String,
        message: String,
    },
    #[error("duplicate conversation id {0:?}")]
    DuplicateConversation(String),
    #[error("unknown corpus format {0:?} (expected normalized-jsonl or utterance-csv)")]
    UnknownFormat(String),
    #[error("unmapped act tag {tag:?} in conversation {conversation_id:?}")]
    UnmappedTag { tag: String, conversation_id: String },
    #[error("refinement line {line}: {message}")]
    Refinement { line: u64, message: String },
    #[error("event {conversation_id:?} [{start_s}, {end_s}]: {message}")]
    InvalidEvent {
        conversation_id: String,
        start_s: f64,
        end_s: f64,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase and trim an act tag.
pub fn normalize_tag(tag: &str) -> String {
    tag.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
    pub act_tag: String,
}

impl Utterance {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub audio_ref: Option<String>,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    /// Normalize tags, sort utterances by (start_s, speaker_id) and check
    /// every per-utterance invariant. `line` is used for error reporting.
    pub(crate) fn normalize(mut self, line: u64) -> Result<Self, CorpusError> {
        let invalid = |message: String| CorpusError::InvalidConversation {
            conversation_id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(CorpusError::Malformed {
                line,
                message: "empty conversation id".into(),
            });
        }
        if self.sample_rate_hz == 0 {
            return Err(invalid("sample_rate_hz must be positive".into()));
        }
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(invalid(format!("invalid duration_s {}", self.duration_s)));
        }
        for utt in &mut self.utterances {
            if !utt.start_s.is_finite() || !utt.end_s.is_finite() || utt.end_s <= utt.start_s {
                return Err(CorpusError::InvalidInterval {
                    line,
                    conversation_id: self.id.clone(),
                    start_s: utt.start_s,
                    end_s: utt.end_s,
                });
            }
            if utt.start_s < 0.0 || utt.end_s > self.duration_s {
                return Err(CorpusError::OutsideDuration {
                    conversation_id: self.id.clone(),
                    start_s: utt.start_s,
                    end_s: utt.end_s,
                    duration_s: self.duration_s,
                });
            }
            utt.act_tag = normalize_tag(&utt.act_tag);
            if utt.act_tag.is_empty() {
                return Err(CorpusError::Malformed {
                    line,
                    message: format!("empty act tag in conversation {:?}", self.id),
                });
            }
        }
        self.utterances.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then_with(|| a.speaker_id.cmp(&b.speaker_id))
        });
        Ok(self)
    }
}

/// An ordered collection of conversations with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    conversations: Vec<Conversation>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(conversations: Vec<Conversation>) -> Result<Self, CorpusError> {
        let mut normalized = Vec::with_capacity(conversations.len());
        for (i, conv) in conversations.into_iter().enumerate() {
            normalized.push(conv.normalize(i as u64 + 1)?);
        }
        Self::from_normalized(normalized)
    }

    pub(crate) fn from_normalized(conversations: Vec<Conversation>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(conversations.len());
        for (i, conv) in conversations.iter().enumerate() {
            if index.insert(conv.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateConversation(conv.id.clone()));
            }
        }
        Ok(Self {
            conversations,
            index,
        })
    }

    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    pub fn conversation(&self, id: &str) -> Option<&Conversation> {
        self.index.get(id).map(|&i| &self.conversations[i])
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.conversations.iter().map(|c| c.id.clone()).collect()
    }

    pub fn utterance_count(&self) -> usize {
        self.conversations.iter().map(|c| c.utterances.len()).sum()
    }

    /// Sub-corpus holding the listed conversations, in corpus order.
    /// Unknown ids are ignored.
    pub fn subset<'a, I>(&self, ids: I) -> Corpus
    where
        I: IntoIterator<Item = &'a String>,
    {
        let wanted: std::collections::HashSet<&str> = ids.into_iter().map(String::as_str).collect();
        let conversations: Vec<Conversation> = self
            .conversations
            .iter()
            .filter(|c| wanted.contains(c.id.as_str()))
            .cloned()
            .collect();
        Self::from_normalized(conversations).expect("subset of a valid corpus")
    }

    /// Serialize as normalized JSONL, one conversation per line.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for conv in &self.conversations {
            serde_json::to_writer(&mut out, conv).expect("conversation serializes");
            out.push(b'\n');
        }
        out
    }

    /// Hex SHA-256 of the normalized JSONL serialization.
    pub fn content_hash(&self) -> String {
        hex_digest(&self.to_jsonl())
    }

    /// Check that every event refers to a known conversation and lies
    /// within its duration.
    pub fn check_events(&self, events: &[HdmEvent]) -> Result<(), CorpusError> {
        for ev in events {
            let invalid = |message: &str| CorpusError::InvalidEvent {
                conversation_id: ev.conversation_id.clone(),
                start_s: ev.start_s,
                end_s: ev.end_s,
                message: message.to_string(),
            };
            let conv = self
                .conversation(&ev.conversation_id)
                .ok_or_else(|| invalid("unknown conversation"))?;
            if !(ev.end_s > ev.start_s) {
                return Err(invalid("end_s must exceed start_s"));
            }
            if ev.start_s < 0.0 || ev.end_s > conv.duration_s {
                return Err(invalid("interval outside conversation duration"));
            }
        }
        Ok(())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A refined hearing-difficulty interval inside one conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdmEvent {
    pub conversation_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl HdmEvent {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Membership of a decision time in the event, over `(start_s, end_s]`.
    ///
    /// The closed right end keeps positives sampled at the event end inside
    /// the event; the open left end keeps negatives whose context stops
    /// exactly at the event start outside it.
    pub fn contains_time(&self, t_s: f64) -> bool {
        self.start_s < t_s && t_s <= self.end_s
    }

    /// Whether `[start_s, end_s)` and the event overlap with positive length.
    pub fn overlaps(&self, start_s: f64, end_s: f64) -> bool {
        start_s < self.end_s && self.start_s < end_s
    }
}

/// Group events by conversation id, each list sorted by start time.
pub fn events_by_conversation(events: &[HdmEvent]) -> BTreeMap<String, Vec<HdmEvent>> {
    let mut map: BTreeMap<String, Vec<HdmEvent>> = BTreeMap::new();
    for ev in events {
        map.entry(ev.conversation_id.clone()).or_default().push(ev.clone());
    }
    for list in map.values_mut() {
        list.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
    }
    map
}
