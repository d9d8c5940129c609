use std::collections::BTreeMap;
use std::io::BufRead;
use std::str::FromStr;

use serde::Deserialize;

use super::{Conversation, Corpus, CorpusError, HdmEvent, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    NormalizedJsonl,
    UtteranceCsv,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normalized-jsonl" => Ok(Self::NormalizedJsonl),
            "utterance-csv" => Ok(Self::UtteranceCsv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Conversation-level fields the utterance CSV does not carry.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub sample_rate_hz: u32,
    /// When set, `audio_ref` becomes `<audio_dir>/<conversation_id>.wav`.
    pub audio_dir: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::CANONICAL_RATE_HZ,
            audio_dir: None,
        }
    }
}

pub fn parse_corpus(input: &[u8], format: CorpusFormat) -> Result<Corpus, CorpusError> {
    parse_corpus_with(input, format, &CsvOptions::default())
}

pub fn parse_corpus_with(
    input: &[u8],
    format: CorpusFormat,
    csv_options: &CsvOptions,
) -> Result<Corpus, CorpusError> {
    match format {
        CorpusFormat::NormalizedJsonl => parse_jsonl(input),
        CorpusFormat::UtteranceCsv => parse_csv(input, csv_options),
    }
}

fn parse_jsonl(input: &[u8]) -> Result<Corpus, CorpusError> {
    let mut conversations = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let conv: Conversation = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        conversations.push(conv.normalize(line_no)?);
    }
    Corpus::from_normalized(conversations)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    conversation_id: String,
    speaker_id: String,
    start_s: f64,
    end_s: f64,
    text: String,
    act_tag: String,
}

const CSV_HEADER: [&str; 6] = ["conversation_id", "speaker_id", "start_s", "end_s", "text", "act_tag"];

fn parse_csv(input: &[u8], options: &CsvOptions) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| CorpusError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(CorpusError::Malformed {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }

    // Rows of one conversation need not be contiguous; keep first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, (u64, Vec<Utterance>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CorpusError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: CsvRow = record.deserialize(None).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if !row.start_s.is_finite() || !row.end_s.is_finite() || row.end_s <= row.start_s {
            return Err(CorpusError::InvalidInterval {
                line,
                conversation_id: row.conversation_id,
                start_s: row.start_s,
                end_s: row.end_s,
            });
        }
        let entry = grouped.entry(row.conversation_id.clone()).or_insert_with(|| {
            order.push(row.conversation_id.clone());
            (line, Vec::new())
        });
        entry.1.push(Utterance {
            speaker_id: row.speaker_id,
            start_s: row.start_s,
            end_s: row.end_s,
            text: row.text,
            act_tag: row.act_tag,
        });
    }

    let mut conversations = Vec::with_capacity(order.len());
    for id in order {
        let (line, utterances) = grouped.remove(&id).expect("grouped conversation");
        let duration_s = utterances.iter().map(|u| u.end_s).fold(0.0, f64::max);
        let audio_ref = options
            .audio_dir
            .as_ref()
            .map(|dir| format!("{}/{}.wav", dir.trim_end_matches('/'), id));
        let conv = Conversation {
            id,
            audio_ref,
            sample_rate_hz: options.sample_rate_hz,
            duration_s,
            utterances,
        };
        conversations.push(conv.normalize(line)?);
    }
    Corpus::from_normalized(conversations)
}

/// Serialize a corpus as utterance CSV (conversation-level fields are lost).
pub fn write_csv(corpus: &Corpus) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("in-memory write");
    for conv in corpus.conversations() {
        for u in &conv.utterances {
            writer
                .write_record([
                    conv.id.as_str(),
                    u.speaker_id.as_str(),
                    &u.start_s.to_string(),
                    &u.end_s.to_string(),
                    u.text.as_str(),
                    u.act_tag.as_str(),
                ])
                .expect("in-memory write");
        }
    }
    writer.into_inner().expect("in-memory flush")
}

/// Events file: JSONL, one [`HdmEvent`] per line.
pub fn read_events(input: &[u8]) -> Result<Vec<HdmEvent>, CorpusError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: HdmEvent = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        events.push(ev);
    }
    Ok(events)
}

pub fn write_events(events: &[HdmEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    for ev in events {
        serde_json::to_writer(&mut out, ev).expect("event serializes");
        out.push(b'\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_CONV: &str = r#"{"id":"sw01","audio_ref":"sw01.wav","sample_rate_hz":8000,"duration_s":12.5,"utterances":[{"speaker_id":"A","start_s":0.5,"end_s":2.0,"text":"how are you","act_tag":"qy"},{"speaker_id":"B","start_s":2.1,"end_s":2.4,"text":"huh?","act_tag":"br"}]}"#;

    #[test]
    fn jsonl_single_conversation() {
        let corpus = parse_corpus(ONE_CONV.as_bytes(), CorpusFormat::NormalizedJsonl).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.conversations()[0].utterances.len(), 2);
        assert_eq!(corpus.conversations()[0].audio_ref.as_deref(), Some("sw01.wav"));
    }

    #[test]
    fn jsonl_duplicate_id() {
        let input = format!("{ONE_CONV}\n{ONE_CONV}\n");
        let err = parse_corpus(input.as_bytes(), CorpusFormat::NormalizedJsonl).unwrap_err();
        assert!(err.to_string().contains("duplicate conversation id"));
    }

    #[test]
    fn jsonl_malformed_line_number() {
        let input = format!("{ONE_CONV}\n\n{{\"id\": 3}}\n");
        match parse_corpus(input.as_bytes(), CorpusFormat::NormalizedJsonl).unwrap_err() {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn jsonl_missing_audio_ref_is_null() {
        let input = r#"{"id":"x","sample_rate_hz":16000,"duration_s":1.0,"utterances":[]}"#;
        let corpus = parse_corpus(input.as_bytes(), CorpusFormat::NormalizedJsonl).unwrap();
        assert_eq!(corpus.conversations()[0].audio_ref, None);
    }

    #[test]
    fn csv_rows_grouped_and_quoted() {
        let input = "conversation_id,speaker_id,start_s,end_s,text,act_tag\n\
                     c1,A,0.0,1.0,\"well, yes\",sd\n\
                     c2,A,0.0,2.0,hi,sd\n\
                     c1,B,1.5,1.9,\"\"\"what?\"\"\",br\n";
        let corpus = parse_corpus(input.as_bytes(), CorpusFormat::UtteranceCsv).unwrap();
        assert_eq!(corpus.ids(), vec!["c1", "c2"]);
        let c1 = corpus.conversation("c1").unwrap();
        assert_eq!(c1.utterances[0].text, "well, yes");
        assert_eq!(c1.utterances[1].text, "\"what?\"");
        assert_eq!(c1.duration_s, 1.9);
    }

    #[test]
    fn csv_bad_interval_names_row() {
        let input = "conversation_id,speaker_id,start_s,end_s,text,act_tag\n\
                     c1,A,0.0,1.0,ok,sd\n\
                     c1,B,3.0,3.0,bad,sd\n";
        let err = parse_corpus(input.as_bytes(), CorpusFormat::UtteranceCsv).unwrap_err();
        match &err {
            CorpusError::InvalidInterval { line, .. } => assert_eq!(*line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(err.to_string().starts_with("line 3:"));
    }

    #[test]
    fn csv_wrong_header() {
        let input = "conv,speaker,start,end,text,tag\n";
        assert!(parse_corpus(input.as_bytes(), CorpusFormat::UtteranceCsv).is_err());
    }

    #[test]
    fn csv_audio_dir() {
        let input = "conversation_id,speaker_id,start_s,end_s,text,act_tag\nc1,A,0,1,hi,sd\n";
        let opts = CsvOptions {
            sample_rate_hz: 8000,
            audio_dir: Some("audio/".into()),
        };
        let corpus = parse_corpus_with(input.as_bytes(), CorpusFormat::UtteranceCsv, &opts).unwrap();
        let c = &corpus.conversations()[0];
        assert_eq!(c.audio_ref.as_deref(), Some("audio/c1.wav"));
        assert_eq!(c.sample_rate_hz, 8000);
    }

    #[test]
    fn unknown_format() {
        assert!(matches!(
            "swda-utt".parse::<CorpusFormat>(),
            Err(CorpusError::UnknownFormat(_))
        ));
    }

    #[test]
    fn csv_export_reimports() {
        let corpus = parse_corpus(ONE_CONV.as_bytes(), CorpusFormat::NormalizedJsonl).unwrap();
        let csv = write_csv(&corpus);
        let again = parse_corpus(&csv, CorpusFormat::UtteranceCsv).unwrap();
        assert_eq!(
            again.conversations()[0].utterances,
            corpus.conversations()[0].utterances
        );
    }

    #[test]
    fn events_round_trip() {
        let events = vec![HdmEvent {
            conversation_id: "a".into(),
            start_s: 1.25,
            end_s: 1.5,
        }];
        assert_eq!(read_events(&write_events(&events)).unwrap(), events);
    }
}
