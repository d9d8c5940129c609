use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::client::SegmentPayload;
use super::hotword::normalize_transcript;
use super::{DetectorError, Score, WindowInput};
use crate::audio::{encode_window_wav, Waveform};
use crate::timeline::{ExampleSpec, Label};

const AUDIO_PROMPT: &str = include_str!("../../assets/prompt_audio_v1.txt");
const TEXT_PROMPT: &str = include_str!("../../assets/prompt_text_v1.txt");

/// Words that point the model at acoustic rather than lexical cues.
const AUDIO_CUE_WORDS: &[&str] = &[
    "audio", "voice", "tone", "pitch", "lombard", "acoustic", "nonsemantic", "intonation", "prosody",
    "loudness", "formant", "formants",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    Audio,
    TextOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    variant: PromptVariant,
    instruction: String,
}

impl PromptTemplate {
    pub fn from_text(variant: PromptVariant, instruction: &str) -> Result<Self, DetectorError> {
        let instruction = instruction.trim_end().to_string();
        if instruction.trim().is_empty() {
            return Err(DetectorError::InvalidTemplate("instruction is empty".into()));
        }
        match variant {
            PromptVariant::Audio => {
                let lower = instruction.to_lowercase();
                let Some(at) = lower.find("lombard") else {
                    return Err(DetectorError::InvalidTemplate(
                        "audio template must describe Lombard-effect cues".into(),
                    ));
                };
                if !lower[at..].lines().skip(1).any(|l| l.trim_start().starts_with("- ")) {
                    return Err(DetectorError::InvalidTemplate(
                        "audio template must list Lombard-effect cues as bullets".into(),
                    ));
                }
            }
            PromptVariant::TextOnly => {
                let norm = normalize_transcript(&instruction);
                if let Some(word) = norm.split_whitespace().find(|w| AUDIO_CUE_WORDS.contains(w)) {
                    return Err(DetectorError::InvalidTemplate(format!(
                        "text-only template refers to audio cues ({word:?})"
                    )));
                }
            }
        }
        Ok(Self { variant, instruction })
    }

    pub fn audio() -> Self {
        Self::from_text(PromptVariant::Audio, AUDIO_PROMPT).expect("bundled audio prompt is valid")
    }

    pub fn text_only() -> Self {
        Self::from_text(PromptVariant::TextOnly, TEXT_PROMPT).expect("bundled text prompt is valid")
    }

    pub fn for_variant(variant: PromptVariant) -> Self {
        match variant {
            PromptVariant::Audio => Self::audio(),
            PromptVariant::TextOnly => Self::text_only(),
        }
    }

    pub fn variant(&self) -> PromptVariant {
        self.variant
    }

    pub fn instruction(&self) -> &str {
        &self.instruction
    }
}

/// Content of a labeled prompt example.
#[derive(Debug, Clone, PartialEq)]
pub enum ShotContent {
    Audio(Waveform),
    Transcript(String),
}

/// Labeled prompt examples with equal positive and negative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotSet<T> {
    items: Vec<(T, Label)>,
}

impl<T> FewShotSet<T> {
    pub fn new(items: Vec<(T, Label)>) -> Result<Self, DetectorError> {
        let pos = items.iter().filter(|(_, l)| l.is_positive()).count();
        if pos * 2 != items.len() {
            return Err(DetectorError::InvalidConfig(format!(
                "few-shot set has {pos} positives out of {}",
                items.len()
            )));
        }
        Ok(Self { items })
    }

    pub fn empty() -> Self {
        Self { items: Vec::new() }
    }

    pub fn items(&self) -> &[(T, Label)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn try_map<U, E>(self, mut f: impl FnMut(T) -> Result<U, E>) -> Result<FewShotSet<U>, E> {
        let items = self
            .items
            .into_iter()
            .map(|(t, l)| f(t).map(|u| (u, l)))
            .collect::<Result<_, _>>()?;
        Ok(FewShotSet { items })
    }
}

impl<T> Default for FewShotSet<T> {
    fn default() -> Self {
        Self::empty()
    }
}

/// Draw `k / 2` positives and `k / 2` negatives without replacement, then
/// shuffle their order.
pub fn assemble_fewshot<R: Rng + ?Sized>(
    examples: &[ExampleSpec],
    k: usize,
    rng: &mut R,
) -> Result<FewShotSet<ExampleSpec>, DetectorError> {
    if k % 2 != 0 {
        return Err(DetectorError::OddShotCount(k));
    }
    let half = k / 2;
    let mut items = Vec::with_capacity(k);
    for label in [Label::Positive, Label::Negative] {
        let pool: Vec<&ExampleSpec> = examples.iter().filter(|e| e.label == label).collect();
        if pool.len() < half {
            return Err(DetectorError::InsufficientExamples {
                label,
                needed: half,
                available: pool.len(),
            });
        }
        items.extend(pool.choose_multiple(rng, half).map(|e| ((*e).clone(), label)));
    }
    items.shuffle(rng);
    FewShotSet::new(items)
}

/// Prompt text plus the audio segments it references, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub prompt: String,
    pub segments: Vec<SegmentPayload>,
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn audio_segment(w: &Waveform, label: Option<Label>) -> SegmentPayload {
    SegmentPayload {
        audio_b64: B64.encode(encode_window_wav(w)),
        label: label.map(|l| l.token().to_string()),
    }
}

/// Instruction, one labeled block per example, then the unlabeled target.
pub fn build_prompt(
    template: &PromptTemplate,
    fewshot: &FewShotSet<ShotContent>,
    target: &WindowInput,
) -> Result<PromptPayload, DetectorError> {
    let mut blocks = Vec::with_capacity(fewshot.len() + 1);
    let mut segments = Vec::new();
    match template.variant() {
        PromptVariant::Audio => {
            for (i, (content, label)) in fewshot.items().iter().enumerate() {
                let ShotContent::Audio(w) = content else {
                    return Err(DetectorError::ModalityMismatch(
                        "audio template needs audio few-shot examples".into(),
                    ));
                };
                segments.push(audio_segment(w, Some(*label)));
                blocks.push(format!("Audio: [segment {}], Label: {}", i + 1, label.token()));
            }
            segments.push(audio_segment(&target.waveform, None));
            blocks.push(format!("Audio: [segment {}], Label: ", fewshot.len() + 1));
        }
        PromptVariant::TextOnly => {
            for (content, label) in fewshot.items() {
                let ShotContent::Transcript(text) = content else {
                    return Err(DetectorError::ModalityMismatch(
                        "text-only template needs transcript few-shot examples".into(),
                    ));
                };
                blocks.push(format!("Transcript: {}, Label: {}", one_line(text), label.token()));
            }
            let Some(text) = &target.transcript else {
                return Err(DetectorError::ModalityMismatch(
                    "text-only template needs a target transcript".into(),
                ));
            };
            blocks.push(format!("Transcript: {}, Label: ", one_line(text)));
        }
    }
    Ok(PromptPayload {
        prompt: format!("{}\n\n{}", template.instruction(), blocks.join("\n")),
        segments,
    })
}

/// Two-way softmax of the "P" and "N" log probabilities.
pub fn pn_probability(logprob_p: f64, logprob_n: f64) -> Result<Score, DetectorError> {
    let valid = |x: f64| x.is_finite() || x == f64::NEG_INFINITY;
    if !valid(logprob_p) || !valid(logprob_n) {
        return Err(DetectorError::DegenerateLogprobs(format!(
            "logprob_p={logprob_p}, logprob_n={logprob_n}"
        )));
    }
    if logprob_p == f64::NEG_INFINITY && logprob_n == f64::NEG_INFINITY {
        return Err(DetectorError::DegenerateLogprobs("both log probabilities are -inf".into()));
    }
    let m = logprob_p.max(logprob_n);
    let a = (logprob_p - m).exp();
    let b = (logprob_n - m).exp();
    Score::new(a / (a + b))
}
