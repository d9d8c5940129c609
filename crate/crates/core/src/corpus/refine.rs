use std::collections::BTreeMap;
use std::fmt;

use super::{normalize_tag, Corpus, CorpusError, HdmEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RefinementAction {
    Include,
    Exclude,
}

impl fmt::Display for RefinementAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Include => "include",
            Self::Exclude => "exclude",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementEntry {
    pub action: RefinementAction,
    pub conversation_id: String,
    pub utterance_index: usize,
}

/// Manual curation of tagged utterances: which to drop and which untagged
/// utterances to add as events.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RefinementList {
    entries: BTreeMap<(String, usize), RefinementAction>,
}

impl RefinementList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse `exclude <conversation_id> <utterance_index>` /
    /// `include ...` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut list = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i as u64 + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |message: String| CorpusError::Refinement { line, message };
            if fields.len() != 3 {
                return Err(err(format!("expected `<include|exclude> <conversation_id> <utterance_index>`, got {content:?}")));
            }
            let action = match fields[0] {
                "include" => RefinementAction::Include,
                "exclude" => RefinementAction::Exclude,
                other => return Err(err(format!("unknown action {other:?}"))),
            };
            let index: usize = fields[2]
                .parse()
                .map_err(|_| err(format!("invalid utterance index {:?}", fields[2])))?;
            list.push(action, fields[1], index)
                .map_err(|message| err(message))?;
        }
        Ok(list)
    }

    /// Add an entry. A second entry for the same utterance with the
    /// opposite action is a conflict.
    pub fn push(
        &mut self,
        action: RefinementAction,
        conversation_id: &str,
        utterance_index: usize,
    ) -> Result<(), String> {
        let key = (conversation_id.to_string(), utterance_index);
        match self.entries.get(&key) {
            Some(existing) if *existing != action => Err(format!(
                "conflicting entries for {conversation_id} {utterance_index}"
            )),
            _ => {
                self.entries.insert(key, action);
                Ok(())
            }
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = RefinementEntry> + '_ {
        self.entries.iter().map(|((id, idx), action)| RefinementEntry {
            action: *action,
            conversation_id: id.clone(),
            utterance_index: *idx,
        })
    }

    pub fn action(&self, conversation_id: &str, utterance_index: usize) -> Option<RefinementAction> {
        self.entries
            .get(&(conversation_id.to_string(), utterance_index))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every entry must name an existing utterance.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), CorpusError> {
        for ((id, idx), action) in &self.entries {
            let ok = corpus
                .conversation(id)
                .is_some_and(|c| *idx < c.utterances.len());
            if !ok {
                return Err(CorpusError::Refinement {
                    line: 0,
                    message: format!("{action} {id} {idx}: no such utterance"),
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in self.entries() {
            out.push_str(&format!("{} {} {}\n", e.action, e.conversation_id, e.utterance_index));
        }
        out
    }
}

/// One event per utterance tagged `target_tag`, minus excluded entries,
/// plus included ones. Events inherit the utterance interval.
pub fn extract_hdm_events(
    corpus: &Corpus,
    target_tag: &str,
    refinement: &RefinementList,
) -> Result<Vec<HdmEvent>, CorpusError> {
    refinement.validate(corpus)?;
    let target = normalize_tag(target_tag);
    let mut events = Vec::new();
    for conv in corpus.conversations() {
        for (idx, utt) in conv.utterances.iter().enumerate() {
            let tagged = utt.act_tag == target;
            let keep = match refinement.action(&conv.id, idx) {
                Some(RefinementAction::Include) => true,
                Some(RefinementAction::Exclude) => false,
                None => tagged,
            };
            if keep {
                events.push(HdmEvent {
                    conversation_id: conv.id.clone(),
                    start_s: utt.start_s,
                    end_s: utt.end_s,
                });
            }
        }
    }
    Ok(events)
}
